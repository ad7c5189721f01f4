"""Membership in the inner and outer coordination regions, and minimal common randomness.

A witness is an auxiliary ``U`` with kernels ``Pbar_{U|S}``, ``Pbar_{X|US}``
and ``Pbar_{Shat|UY}`` whose composition with the source and channel
reproduces the target ``(S, X, Y, Shat)`` law. The search parameterizes the
first two kernels jointly by ``q(u | s, x)`` (given the target's ``X|S``,
the pair and ``q`` determine each other), and treats the decoder as a
linear feasibility problem once ``q`` is fixed:
``sum_u q(u | s, x) r(shat | u, y) = T(shat | s, x, y)``.

Inner region: ``I(U;S) < I(U;Y)`` and ``R0 > I(U; S X Shat | Y)``.
Outer region: ``I(U;S) <= I(X;Y)`` and ``R0 >= I(U; S X Shat | Y)``.

Only membership is ever certified. A failed search is ``NOT_FOUND`` at the
stated grid resolution, never a proof of non-membership.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, minimize

from . import probcore as pc
from .channel import S, SHAT, U, X, Y, DMChannel, Source
from .probcore import CondPmf, JointPmf

MEMBER = "MEMBER"
NOT_FOUND = "NOT_FOUND"
STRICT_MARGIN = 1e-9
DECOMP_TOL = 1e-6
WITNESS_TOL = 1e-6
OUTER_TOL = 1e-12


class DecompositionError(ValueError):
    """The target does not factor through the given source and channel."""

    def __init__(self, residual: float):
        super().__init__(f"target does not factor through source and channel (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class RegionQuery:
    target: JointPmf
    channel: DMChannel
    source: Source
    R0: float
    u_card: int | None = None

    def __post_init__(self):
        if set(self.target.names) != {S, X, Y, SHAT}:
            raise pc.StructuralError("target must be a pmf over S, X, Y, Shat")
        if self.R0 < 0:
            raise ValueError("R0 must be nonnegative")
        bound = math.prod(self.target.shape) + 1
        card = self.u_card if self.u_card is not None else min(bound, 2)
        if not 1 <= card <= bound:
            raise ValueError(f"|U| must lie in [1, {bound}]")
        object.__setattr__(self, "u_card", int(card))

    @property
    def tensor(self) -> np.ndarray:
        """Target as ``[s, x, y, shat]``."""
        return self.target.array([S, X, Y, SHAT])

    def with_rate(self, R0: float) -> "RegionQuery":
        return RegionQuery(self.target, self.channel, self.source, R0, self.u_card)

    def to_dict(self) -> dict:
        return {
            "target": self.target.to_dict(),
            "channel": self.channel.kernel.to_dict(),
            "source": self.source.pmf.to_dict(),
            "R0": self.R0,
            "u_card": self.u_card,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegionQuery":
        return cls(
            JointPmf.from_dict(d["target"]),
            DMChannel(CondPmf.from_dict(d["channel"])),
            Source(JointPmf.from_dict(d["source"])),
            float(d["R0"]),
            d.get("u_card"),
        )


@dataclass(frozen=True, eq=False)
class RegionWitness:
    """Witness kernels ``u_s[s, u]``, ``x_us[u, s, x]``, ``h_uy[u, y, shat]``."""

    u_s: np.ndarray = field(repr=False)
    x_us: np.ndarray = field(repr=False)
    h_uy: np.ndarray = field(repr=False)
    i_us: float = float("nan")
    i_uy: float = float("nan")
    i_cond: float = float("nan")
    residual: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "u_given_s": np.asarray(self.u_s).tolist(),
            "x_given_us": np.asarray(self.x_us).tolist(),
            "shat_given_uy": np.asarray(self.h_uy).tolist(),
            "I(U;S)": self.i_us,
            "I(U;Y)": self.i_uy,
            "I(U;SXShat|Y)": self.i_cond,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class RegionResult:
    member: str
    witness: RegionWitness | None
    resolution: int
    log: tuple[str, ...] = ()
    value: float = float("inf")

    def to_dict(self) -> dict:
        out = {"member": self.member, "grid_resolution": self.resolution, "value": self.value}
        if self.witness is not None:
            out["witness"] = self.witness.to_dict()
        return out


# ---------------------------------------------------------------------------
# decomposition and witness evaluation


def _cond(arr: np.ndarray, axes: int) -> np.ndarray:
    """Conditional of the trailing axis given the leading ``axes`` ones; zero rows uniform."""
    lead = arr.sum(axis=tuple(range(axes, arr.ndim)), keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(lead > pc.ZERO, arr / np.where(lead > 0, lead, 1.0), 0.0)
    tail = math.prod(arr.shape[axes:])
    out = np.where(lead > pc.ZERO, out, 1.0 / tail)
    return out


def validate_decomposition(q: RegionQuery) -> float:
    """Max-norm gap between the target and ``P_S P_{X|S} W P_{Shat|SXY}`` built from it.

    ``P_S`` and ``W`` are the supplied source and channel; a nonzero value
    flags a source mismatch or a ``Y`` that depends on ``S`` given ``X``.
    """
    t = q.tensor
    p_s = q.source.probs
    w = q.channel.matrix
    if t.shape[0] != p_s.size or t.shape[1:3] != w.shape:
        raise pc.StructuralError("target, source and channel alphabets disagree")
    x_s = _cond(t.sum(axis=(2, 3)), 1)
    h_sxy = _cond(t, 3)
    forced = np.einsum("s,sx,xy,sxyh->sxyh", p_s, x_s, w, h_sxy)
    return float(np.abs(t - forced).max())


def _require_valid(q: RegionQuery) -> None:
    r = validate_decomposition(q)
    if r >= DECOMP_TOL:
        raise DecompositionError(r)


def witness_joint(q: RegionQuery, w: RegionWitness) -> JointPmf:
    """``P_S Pbar_{U|S} Pbar_{X|US} W Pbar_{Shat|UY}`` over ``(S, U, X, Y, Shat)``."""
    arr = np.einsum("s,su,usx,xy,uyh->suxyh", q.source.probs, w.u_s, w.x_us, q.channel.matrix, w.h_uy)
    ns, nu, nx, ny, nh = arr.shape
    return JointPmf([(S, ns), (U, nu), (X, nx), (Y, ny), (SHAT, nh)], arr, check=False)


def evaluate_witness(q: RegionQuery, w: RegionWitness) -> tuple[float, float, float, float]:
    """``(I(U;S), I(U;Y), I(U;S X Shat|Y), residual)`` computed from scratch."""
    ns, nu = np.shape(w.u_s)
    _, nx, ny, nh = q.tensor.shape
    if np.shape(w.x_us) != (nu, ns, nx) or np.shape(w.h_uy) != (nu, ny, nh):
        raise pc.StructuralError("witness kernels have inconsistent shapes")
    j = witness_joint(q, w)
    resid = float(np.abs(pc.marginalize(j, [S, X, Y, SHAT]).array([S, X, Y, SHAT]) - q.tensor).max())
    return (pc.mutual_info(j, U, S), pc.mutual_info(j, U, Y),
            pc.cond_mutual_info(j, U, [S, X, SHAT], Y), resid)


def target_ixy(q: RegionQuery) -> float:
    return pc.mutual_info(q.target, X, Y)


def inner_holds(q: RegionQuery, w: RegionWitness, margin: float = STRICT_MARGIN) -> bool:
    i_us, i_uy, i_c, res = evaluate_witness(q, w)
    return res < WITNESS_TOL and i_us < i_uy - margin and q.R0 > i_c + margin


def outer_holds(q: RegionQuery, w: RegionWitness, tol: float = OUTER_TOL) -> bool:
    i_us, _, i_c, res = evaluate_witness(q, w)
    return res < WITNESS_TOL and i_us <= target_ixy(q) + tol and q.R0 >= i_c - tol


# ---------------------------------------------------------------------------
# search machinery


def simplex_grid(dim: int, resolution: int) -> np.ndarray:
    """All points of the ``dim``-simplex with coordinates in ``{0, 1/res, ..., 1}``."""
    if dim == 1:
        return np.ones((1, 1))
    pts = []
    for bars in itertools.combinations(range(resolution + dim - 1), dim - 1):
        edges = (-1,) + bars + (resolution + dim - 1,)
        pts.append([edges[i + 1] - edges[i] - 1 for i in range(dim)])
    return np.asarray(pts, dtype=float) / resolution


def default_resolution(u_card: int) -> int:
    return 16 if u_card <= 2 else 8


class _Problem:
    """Vectorized information quantities as functions of ``q[(s,x), u]``."""

    def __init__(self, q: RegionQuery, outer: bool):
        t = q.tensor
        self.query = q
        self.outer = outer
        self.ns, self.nx, self.ny, self.nh = t.shape
        self.nu = q.u_card
        self.p_sx = t.sum(axis=(2, 3))
        self.w = q.channel.matrix
        self.p_sxy = t.sum(axis=3)
        self.t_cond = _cond(t, 3)  # T(shat | s, x, y)
        self.ixy = target_ixy(q)

    def quantities(self, qs: np.ndarray):
        """``qs[..., (s x), u]`` -> ``(I(U;S), I(U;Y), I(U;SX|Y))`` elementwise."""
        lead = qs.shape[:-2]
        qq = qs.reshape(lead + (self.ns, self.nx, self.nu))
        p_sxu = self.p_sx[..., None] * qq
        p_su = p_sxu.sum(axis=-2)
        p_uy = np.einsum("...sxu,xy->...uy", p_sxu, self.w)
        p_u = p_su.sum(axis=-2)
        p_s = self.p_sx.sum(axis=1)
        p_y = (self.p_sx.sum(axis=0)) @ self.w
        h_u = _h(p_u)
        i_us = h_u + _h(p_s) - _h(p_su.reshape(lead + (-1,)))
        i_uy = h_u + _h(p_y) - _h(p_uy.reshape(lead + (-1,)))
        # I(U;SX|Y) = H(U|Y) - H(U|SX) since U - SX - Y
        h_u_y = _h(p_uy.reshape(lead + (-1,))) - _h(p_y)
        h_u_sx = _h(p_sxu.reshape(lead + (-1,))) - _h(self.p_sx.ravel())
        return i_us, i_uy, np.maximum(h_u_y - h_u_sx, 0.0)

    def rate_ok(self, i_us, i_uy, margin):
        if self.outer:
            return i_us <= self.ixy + OUTER_TOL
        return i_us < i_uy - margin

    def decoder(self, qs: np.ndarray) -> tuple[np.ndarray, float] | None:
        """Feasible decoder minimizing ``I(U; Shat | S X Y)``, or ``None``."""
        nu, ny, nh = self.nu, self.ny, self.nh
        qq = qs.reshape(self.ns, self.nx, nu)
        nvar = nu * ny * nh
        rows, rhs = [], []
        for s, x, y in zip(*np.nonzero(self.p_sxy > pc.ZERO)):
            for h in range(nh):
                a = np.zeros((nu, ny, nh))
                a[:, y, h] = qq[s, x]
                rows.append(a.ravel())
                rhs.append(self.t_cond[s, x, y, h])
        for u in range(nu):
            for y in range(ny):
                a = np.zeros((nu, ny, nh))
                a[u, y, :] = 1.0
                rows.append(a.ravel())
                rhs.append(1.0)
        a_eq, b_eq = np.asarray(rows), np.asarray(rhs)
        lp = linprog(np.zeros(nvar), A_eq=a_eq, b_eq=b_eq, bounds=(0, 1), method="highs")
        if lp.status != 0:
            return None
        r0 = np.clip(lp.x, 0, 1)
        extra = self._extra(qq, r0)
        basis = null_space(a_eq) if extra > 1e-12 else np.zeros((nvar, 0))
        if basis.shape[1]:
            # feasible decoders are r0 + basis @ z; only the box constraints remain
            lift = lambda z: r0 + basis @ z
            res = minimize(lambda z: self._extra(qq, np.clip(lift(z), 0, 1)), np.zeros(basis.shape[1]),
                           method="SLSQP",
                           constraints=[{"type": "ineq", "fun": lift, "jac": lambda z: basis},
                                        {"type": "ineq", "fun": lambda z: 1 - lift(z), "jac": lambda z: -basis}],
                           options={"maxiter": 200, "ftol": 1e-12})
            cand = np.clip(lift(res.x), 0, 1)
            if np.abs(a_eq @ cand - b_eq).max() < 1e-9 and self._extra(qq, cand) < extra:
                r0, extra = cand, self._extra(qq, cand)
        r = r0.reshape(nu, ny, nh)
        sums = r.sum(axis=2, keepdims=True)
        r = np.where(sums > 0, r / np.where(sums > 0, sums, 1), 1.0 / nh)
        return r, extra

    def _extra(self, qq, r):
        """``I(U; Shat | S X Y)`` for fixed ``q`` and decoder ``r``."""
        r = r.reshape(self.nu, self.ny, self.nh)
        # p[s, x, y, u, h]
        p = np.einsum("sx,xy,sxu,uyh->sxyuh", self.p_sx, self.w, qq, r)
        p_sxy = p.sum(axis=(3, 4))
        p_sxyu = p.sum(axis=4)
        p_sxyh = p.sum(axis=3)
        return max(0.0, _h1(p_sxyu) + _h1(p_sxyh) - _h1(p) - _h1(p_sxy))

    def witness(self, qs: np.ndarray, r: np.ndarray) -> RegionWitness:
        qq = qs.reshape(self.ns, self.nx, self.nu)
        p_x_s = _cond(self.p_sx, 1)
        u_s = np.einsum("sx,sxu->su", p_x_s, qq)
        joint = p_x_s[:, :, None] * qq  # P(x, u | s)
        x_us = np.transpose(_cond(np.transpose(joint, (0, 2, 1)), 2), (1, 0, 2))
        w = RegionWitness(u_s, x_us, r)
        i_us, i_uy, i_c, res = evaluate_witness(self.query, w)
        return RegionWitness(u_s, x_us, r, i_us, i_uy, i_c, res)


def _h(p: np.ndarray) -> np.ndarray:
    """Entropy in bits along the last axis (vectorized)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return t.sum(axis=-1)


def _h1(p: np.ndarray) -> float:
    return float(_h(np.asarray(p).ravel()))


def _project(qs: np.ndarray) -> np.ndarray:
    qs = np.clip(qs, 0.0, None)
    s = qs.sum(axis=-1, keepdims=True)
    return np.where(s > 0, qs / np.where(s > 0, s, 1), 1.0 / qs.shape[-1])


@dataclass
class SearchSettings:
    resolution: int | None = None
    max_lp: int = 400
    restarts: int = 4
    steps: int = 300
    seed: int = 0
    budget: int | None = None


class _Grid:
    """Product grid over the ``|S||X|`` rows of ``q``, addressed by flat index."""

    def __init__(self, prob: _Problem, resolution: int, budget: int | None):
        self.m = prob.ns * prob.nx
        budget = pc.DEFAULT_BUDGET if budget is None else budget
        while True:
            self.pts = simplex_grid(prob.nu, resolution)
            self.count = self.pts.shape[0] ** self.m
            if self.count <= budget or resolution <= 1:
                break
            resolution //= 2
        self.resolution = resolution

    def __getitem__(self, idx) -> np.ndarray:
        idx = np.asarray(idx)
        d = np.stack(np.unravel_index(idx, (self.pts.shape[0],) * self.m), axis=-1)
        return self.pts[d]

    def chunks(self, size: int = 1 << 16):
        for start in range(0, self.count, size):
            idx = np.arange(start, min(start + size, self.count))
            yield idx, self[idx]


def _decoder_screen(prob: _Problem, cands: np.ndarray) -> np.ndarray:
    """False where no stochastic decoder can exist; True means "possibly feasible".

    Per ``y`` the constraint reads ``Q_y R_y = T_y``. A nonzero least-squares
    residual rules out every solution; when ``Q_y`` has full column rank the
    solution is unique and must be nonnegative.
    """
    keep = np.ones(cands.shape[0], dtype=bool)
    qq = cands.reshape(-1, prob.ns * prob.nx, prob.nu)
    for y in range(prob.ny):
        rows = np.nonzero(prob.p_sxy[:, :, y].ravel() > pc.ZERO)[0]
        if rows.size == 0:
            continue
        qy = qq[:, rows, :]
        ty = prob.t_cond[:, :, y, :].reshape(-1, prob.nh)[rows]
        u, sv, vt = np.linalg.svd(qy, full_matrices=False)
        tol = 1e-10
        inv = np.where(sv > tol, 1.0 / np.where(sv > tol, sv, 1.0), 0.0)
        r = np.einsum("nji,nj,nkj,kh->nih", vt, inv, u, ty)
        resid = np.abs(np.einsum("nki,nih->nkh", qy, r) - ty).max(axis=(1, 2))
        full = (sv > tol).sum(axis=1) == prob.nu
        neg = r.min(axis=(1, 2)) < -1e-9
        keep &= (resid < 1e-8) & ~(full & neg)
    return keep


def _search(q: RegionQuery, outer: bool, settings: SearchSettings):
    """Minimize ``I(U; S X Shat | Y)`` over feasible witnesses."""
    prob = _Problem(q, outer)
    grid = _Grid(prob, settings.resolution or default_resolution(prob.nu), settings.budget)
    log = [f"grid resolution {grid.resolution}, {grid.count} candidates, |U|={prob.nu}"]
    lb = np.empty(grid.count)
    ok = np.empty(grid.count, dtype=bool)
    for idx, cands in grid.chunks():
        i_us, i_uy, lb[idx] = prob.quantities(cands)
        ok[idx] = prob.rate_ok(i_us, i_uy, STRICT_MARGIN)
    order = np.nonzero(ok)[0]
    log.append(f"{order.size} candidates satisfy the rate constraint")
    order = order[np.argsort(lb[order], kind="stable")]
    screened = []
    for start in range(0, order.size, 1 << 16):
        part = order[start:start + (1 << 16)]
        screened.append(part[_decoder_screen(prob, grid[part])])
    order = np.concatenate(screened) if screened else order
    log.append(f"{order.size} candidates pass the decoder screen")
    best, best_val, lps = None, math.inf, 0
    for i in order:
        if lb[i] >= best_val or lps >= settings.max_lp:
            break
        lps += 1
        cand = grid[i]
        dec = prob.decoder(cand)
        if dec is None:
            continue
        val = lb[i] + dec[1]
        if val < best_val:
            best, best_val = (cand, dec[0]), val
    log.append(f"grid stage: {lps} decoder solves, best {best_val:.6g}")
    # local refinement from the best grid points
    rng = np.random.default_rng(settings.seed)
    starts = [grid[i] for i in order[: settings.restarts]]
    if best is not None:
        starts.insert(0, best[0])
    for k, start in enumerate(starts[: settings.restarts]):
        cand = _local_descent(prob, start, settings.steps, rng)
        a, b, c = prob.quantities(cand[None])
        if not prob.rate_ok(a[0], b[0], STRICT_MARGIN) or c[0] >= best_val:
            continue
        dec = prob.decoder(cand)
        if dec is None:
            continue
        val = c[0] + dec[1]
        if val < best_val:
            best, best_val = (cand, dec[0]), val
            log.append(f"restart {k} improved to {val:.6g}")
    if best is None:
        return None, math.inf, grid.resolution, tuple(log)
    w = prob.witness(*best)
    return w, w.i_cond, grid.resolution, tuple(log)


def _local_descent(prob: _Problem, qs: np.ndarray, steps: int, rng) -> np.ndarray:
    """Projected finite-difference descent on ``I(U;SX|Y)`` with a rate-constraint penalty."""
    h = 1e-6
    penalty = 50.0

    def obj(x):
        a, b, c = prob.quantities(x[None])
        bound = prob.ixy if prob.outer else b[0] - 2 * STRICT_MARGIN
        return c[0] + penalty * max(0.0, a[0] - bound)

    x = _project(qs + 1e-3 * rng.standard_normal(qs.shape))
    fx = obj(x)
    step = 0.05
    for _ in range(steps):
        g = np.zeros_like(x)
        for idx in np.ndindex(*x.shape):
            e = np.zeros_like(x)
            e[idx] = h
            g[idx] = (obj(_project(x + e)) - fx) / h
        g -= g.mean(axis=-1, keepdims=True)
        cand = _project(x - step * g)
        fc = obj(cand)
        if fc < fx:
            x, fx = cand, fc
            step *= 1.2
        else:
            step *= 0.5
            if step < 1e-8:
                break
    return x


# ---------------------------------------------------------------------------
# public operations


def min_common_randomness(q: RegionQuery, settings: SearchSettings | None = None, outer: bool = False) -> RegionResult:
    """Smallest ``I(U; S X Shat | Y)`` found over inner-region witnesses.

    The value is an upper bound on the true minimum (the search is not
    exhaustive). ``q.R0`` is ignored. With ``outer=True`` the rate
    constraint is the non-strict outer one.
    """
    _require_valid(q)
    settings = settings or SearchSettings()
    w, val, res, log = _search(q, outer, settings)
    if w is None:
        return RegionResult(NOT_FOUND, None, res, log)
    return RegionResult(MEMBER, w, res, log, float(val))


def check_inner(q: RegionQuery, settings: SearchSettings | None = None) -> RegionResult:
    best = min_common_randomness(q, settings)
    if best.witness is not None and inner_holds(q, best.witness):
        return best
    return RegionResult(NOT_FOUND, None, best.resolution, best.log, best.value)


def check_outer(q: RegionQuery, settings: SearchSettings | None = None) -> RegionResult:
    """Outer-region membership; any inner witness is tried first."""
    inner = check_inner(q, settings)
    if inner.witness is not None and outer_holds(q, inner.witness):
        return inner
    best = min_common_randomness(q, settings, outer=True)
    if best.witness is not None and outer_holds(q, best.witness):
        return best
    return RegionResult(NOT_FOUND, None, best.resolution, best.log, best.value)


def query_from_kernels(p_s, x_s, w, h_sxy, R0: float, u_card: int | None = None) -> RegionQuery:
    """Query whose target is ``P_S P_{X|S} W P_{Shat|SXY}`` (arrays ``[s]``, ``[s,x]``, ``[x,y]``, ``[s,x,y,h]``)."""
    p_s, x_s, w, h_sxy = (np.asarray(a, dtype=float) for a in (p_s, x_s, w, h_sxy))
    t = np.einsum("s,sx,xy,sxyh->sxyh", p_s, x_s, w, h_sxy)
    ns, nx, ny, nh = t.shape
    target = JointPmf([(S, ns), (X, nx), (Y, ny), (SHAT, nh)], t)
    return RegionQuery(target, DMChannel(CondPmf([(X, nx)], [(Y, ny)], w)),
                       Source(JointPmf([(S, ns)], p_s)), R0, u_card)


def query_from_witness(p_s, w, u_s, x_us, h_uy, R0: float) -> RegionQuery:
    """Query whose target is induced by an explicit witness (realizable by construction)."""
    p_s, w, u_s, x_us, h_uy = (np.asarray(a, dtype=float) for a in (p_s, w, u_s, x_us, h_uy))
    full = np.einsum("s,su,usx,xy,uyh->sxyh", p_s, u_s, x_us, w, h_uy)
    ns, nx, ny, nh = full.shape
    target = JointPmf([(S, ns), (X, nx), (Y, ny), (SHAT, nh)], full)
    return RegionQuery(target, DMChannel(CondPmf([(X, nx)], [(Y, ny)], w)),
                       Source(JointPmf([(S, ns)], p_s)), R0, u_s.shape[1])
