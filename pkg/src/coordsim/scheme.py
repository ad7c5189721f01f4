"""The two-binning random coding scheme and its exact induced distribution.

Two joint laws live on ``(S^n, U^n, Uhat^n, X^n, Y^n, C, F, Shat^n)``:

* the *binning* law ``Pbar``: everything i.i.d. from the target factorization,
  ``C = phi1(U^n)``, ``F = phi2(U^n)``, ``Uhat^n`` the SW decoder output and
  ``Shat^n`` drawn from ``U^n`` letter by letter;
* the *coding* law ``P``: ``C, F`` uniform and independent of ``S^n``, the
  encoder draws ``U^n`` from the Bayes conditional ``Pbar(u | c, f, s)``,
  the decoder recovers ``Uhat^n`` and draws ``Shat^n`` from ``Uhat^n``.

Full materialization is only possible for tiny ``n``; the gap computations
below work on sequence-indexed arrays and never build more than the
``(S, X, Y, Shat)`` block tensor.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import probcore as pc
from .binning import BinningPair, SWDecoder, sample_binning, sw_error_prob
from .channel import C, F, S, SHAT, U, UHAT, X, Y, alphabet_size
from .probcore import CondPmf, JointPmf, check_budget
from .seqarray import digits, group, interleave, kron_power, letterwise, seq_power

ROW_TOL = 1e-12


def _stochastic(arr, name):
    arr = np.asarray(arr, dtype=float)
    if np.any(arr < 0) or np.any(np.abs(arr.sum(axis=-1) - 1.0) > ROW_TOL):
        raise ValueError(f"{name} rows must be probability vectors")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TargetFactorization:
    """``Pbar_S Pbar_{U|S} Pbar_{X|US} Pbar_{Y|X} Pbar_{Shat|UY}`` as arrays.

    Index conventions: ``p_s[s]``, ``u_s[s, u]``, ``x_us[u, s, x]``,
    ``y_x[x, y]``, ``h_uy[u, y, shat]``.
    """

    p_s: np.ndarray
    u_s: np.ndarray
    x_us: np.ndarray
    y_x: np.ndarray
    h_uy: np.ndarray

    def __post_init__(self):
        for name in ("p_s", "u_s", "x_us", "y_x", "h_uy"):
            object.__setattr__(self, name, _stochastic(getattr(self, name), name))
        ns, nu, nx, ny, nh = self.sizes
        if self.u_s.shape != (ns, nu) or self.x_us.shape != (nu, ns, nx):
            raise pc.StructuralError("inconsistent S/U/X kernel shapes")
        if self.y_x.shape != (nx, ny) or self.h_uy.shape != (nu, ny, nh):
            raise pc.StructuralError("inconsistent Y/Shat kernel shapes")

    @property
    def sizes(self) -> tuple[int, int, int, int, int]:
        """``(|S|, |U|, |X|, |Y|, |Shat|)``."""
        return (self.p_s.size, self.u_s.shape[1], self.x_us.shape[2],
                self.y_x.shape[1], self.h_uy.shape[2])

    @classmethod
    def from_kernels(cls, source: JointPmf, u_given_s: CondPmf, x_given_us: CondPmf,
                     y_given_x: CondPmf, shat_given_uy: CondPmf) -> "TargetFactorization":
        def arr(k: CondPmf, ins, outs):
            order = [k.from_names.index(a) for a in ins] + [len(ins) + k.to_names.index(a) for a in outs]
            return np.transpose(k.kernel, order)

        return cls(
            source.array([S]),
            arr(u_given_s, [S], [U]),
            arr(x_given_us, [U, S], [X]),
            arr(y_given_x, [X], [Y]),
            arr(shat_given_uy, [U, Y], [SHAT]),
        )

    def kernels(self) -> dict:
        ns, nu, nx, ny, nh = self.sizes
        return {
            "source": JointPmf([(S, ns)], self.p_s),
            "u_given_s": CondPmf([(S, ns)], [(U, nu)], self.u_s),
            "x_given_us": CondPmf([(U, nu), (S, ns)], [(X, nx)], self.x_us),
            "y_given_x": CondPmf([(X, nx)], [(Y, ny)], self.y_x),
            "shat_given_uy": CondPmf([(U, nu), (Y, ny)], [(SHAT, nh)], self.h_uy),
        }

    def to_dict(self) -> dict:
        return {k: v.to_dict() for k, v in self.kernels().items()}

    @classmethod
    def from_dict(cls, d: dict) -> "TargetFactorization":
        return cls.from_kernels(
            JointPmf.from_dict(d["source"]),
            CondPmf.from_dict(d["u_given_s"]),
            CondPmf.from_dict(d["x_given_us"]),
            CondPmf.from_dict(d["y_given_x"]),
            CondPmf.from_dict(d["shat_given_uy"]),
        )

    def letter_array(self) -> np.ndarray:
        """Single-letter law ``[s, u, x, y, shat]``."""
        return np.einsum("s,su,usx,xy,uyh->suxyh", self.p_s, self.u_s, self.x_us, self.y_x, self.h_uy)

    def joint(self) -> JointPmf:
        ns, nu, nx, ny, nh = self.sizes
        return JointPmf([(S, ns), (U, nu), (X, nx), (Y, ny), (SHAT, nh)], self.letter_array())

    def target(self) -> JointPmf:
        """The coordinated marginal over ``(S, X, Y, Shat)``."""
        return pc.marginalize(self.joint(), [S, X, Y, SHAT])

    def markov_residuals(self) -> tuple[float, float]:
        """``I(Y; U,S | X)`` and ``I(S,X; Shat | U,Y)``; both vanish by construction."""
        j = self.joint()
        return (pc.cond_mutual_info(j, [Y], [U, S], [X]),
                pc.cond_mutual_info(j, [S, X], [SHAT], [U, Y]))

    def quantities(self) -> dict[str, float]:
        j = self.joint()
        return {
            "H(U|Y)": pc.cond_entropy(j, U, Y),
            "H(U|S)": pc.cond_entropy(j, U, S),
            "H(U|SXYShat)": pc.cond_entropy(j, U, [S, X, Y, SHAT]),
            "I(U;S)": pc.mutual_info(j, U, S),
            "I(U;Y)": pc.mutual_info(j, U, Y),
            "I(U;SXShat|Y)": pc.cond_mutual_info(j, U, [S, X, SHAT], Y),
        }

    def rates_admissible(self, R0: float, Rtilde: float) -> bool:
        """Strict rate constraints of the achievability argument."""
        q = self.quantities()
        return q["H(U|Y)"] < R0 + Rtilde < q["H(U|S)"] and Rtilde < q["H(U|SXYShat)"]

    def detach_source(self) -> "TargetFactorization | None":
        """Factorization with ``S`` collapsed to one symbol, if ``S`` is independent of the rest.

        When ``Pbar_{U|S}`` and ``Pbar_{X|US}`` ignore ``s``, ``S^n`` is
        independent of everything else under both laws, and every TV gap over
        axes that include ``S^n`` equals the gap with ``S^n`` removed.
        """
        if not (np.allclose(self.u_s, self.u_s[:1], atol=0, rtol=0)
                and np.allclose(self.x_us, self.x_us[:, :1], atol=0, rtol=0)):
            return None
        return TargetFactorization(np.ones(1), self.u_s[:1], self.x_us[:, :1], self.y_x, self.h_uy)

    # per-letter kernels acting on an interleaved (s, u) letter
    def _k_sxy(self) -> np.ndarray:
        ns, nu, nx, ny, _ = self.sizes
        k = np.einsum("st,usx,xy->sutxy", np.eye(ns), self.x_us, self.y_x)
        return k.reshape(ns * nu, ns * nx * ny)

    def _k_sxyh(self) -> np.ndarray:
        ns, nu, nx, ny, nh = self.sizes
        k = np.einsum("st,usx,xy,uyh->sutxyh", np.eye(ns), self.x_us, self.y_x, self.h_uy)
        return k.reshape(ns * nu, ns * nx * ny * nh)

    def _k_uy(self) -> np.ndarray:
        ns, nu, nx, ny, _ = self.sizes
        k = np.einsum("uv,usx,xy->suvy", np.eye(nu), self.x_us, self.y_x)
        return k.reshape(ns * nu, nu * ny)


@dataclass(frozen=True, eq=False)
class SchemeInstance:
    """A fully specified random coding scheme at block length ``n``.

    ``encoder[k, s, u]`` is ``Pbar(u | c, f, s)`` with ``k = c * Mt + f``;
    rows whose condition has zero probability are uniform and flagged.
    """

    n: int
    fact: TargetFactorization
    binning: BinningPair
    decoder: SWDecoder
    p_su: np.ndarray = field(repr=False)
    encoder: np.ndarray = field(repr=False)
    flagged: np.ndarray = field(repr=False)

    @property
    def R0(self) -> float:
        return self.binning.R0

    @property
    def Rtilde(self) -> float:
        return self.binning.Rtilde

    @property
    def m0(self) -> int:
        return self.binning.m0

    @property
    def mtilde(self) -> int:
        return self.binning.mtilde

    @property
    def p_s_seq(self) -> np.ndarray:
        return kron_power(self.fact.p_s, self.n)

    def encoder_kernel(self, c: int, f: int) -> np.ndarray:
        """``Pbar(u | c, f, s)`` as an ``(|S|^n, |U|^n)`` matrix."""
        return self.encoder[c * self.mtilde + f]


def build_scheme(fact: TargetFactorization, n: int, R0: float, Rtilde: float, seed: int,
                 budget: int | None = None) -> SchemeInstance:
    """Sample the binnings and derive the encoder by exact Bayes inversion."""
    ns, nu, nx, ny, nh = fact.sizes
    m0, mt = alphabet_size(n, R0), alphabet_size(n, Rtilde)
    k = m0 * mt
    check_budget(k * ns ** n * nu ** n, budget, "encoder kernel")
    check_budget((ns * nx * ny * nh) ** n, budget, "(S,X,Y,Shat) block tensor")
    binning = sample_binning(n, R0, Rtilde, nu, seed, budget)
    letter = fact.letter_array()
    p_uy = letter.sum(axis=(0, 2, 4))
    decoder = SWDecoder(kron_power(p_uy, n), binning)
    p_su = kron_power(fact.p_s, n)[:, None] * seq_power(fact.u_s, n)
    onehot = np.zeros((nu ** n, k))
    onehot[np.arange(nu ** n), binning.keys] = 1.0
    # joint[k, s, u] = Pbar(s, u) 1[key(u) = k]
    joint = p_su[None, :, :] * onehot.T[:, None, :]
    mass = joint.sum(axis=2, keepdims=True)
    flagged = mass[..., 0] <= pc.ZERO
    with np.errstate(invalid="ignore", divide="ignore"):
        encoder = np.where(mass > pc.ZERO, joint / np.where(mass > 0, mass, 1.0), 1.0 / nu ** n)
    for arr in (p_su, encoder, flagged):
        arr.setflags(write=False)
    return SchemeInstance(n, fact, binning, decoder, p_su, encoder, flagged)


# ---------------------------------------------------------------------------
# exact marginals computed without full materialization


def cf_gap(inst: SchemeInstance) -> float:
    """``TV(Pbar_{S^n C F}, P_S^n Q_C Q_F)``: the right end of the equality chain."""
    k = inst.m0 * inst.mtilde
    p_scf = np.zeros((inst.p_su.shape[0], k))
    np.add.at(p_scf.T, inst.binning.keys, inst.p_su.T)
    return float(0.5 * np.abs(p_scf - inst.p_s_seq[:, None] / k).sum())


def iid_sxyh(fact: TargetFactorization, n: int) -> np.ndarray:
    """``Pbar^{⊗n}`` over ``(S^n, X^n, Y^n, Shat^n)``, grouped and flattened."""
    ns, _, nx, ny, nh = fact.sizes
    letter = fact.letter_array().sum(axis=1)
    d = ns * nx * ny * nh
    t = kron_power(letter.ravel(), n).reshape((d,) * n)
    return group(t, (ns, nx, ny, nh), n).ravel()


def _shat_factor(inst: SchemeInstance, decoded: np.ndarray) -> np.ndarray:
    """``prod_t Pbar(shat_t | uhat_t(y), y_t)`` as a ``(|Y|^n, |Shat|^n)`` matrix."""
    _, nu, _, ny, _ = inst.fact.sizes
    ud = digits(inst.n, nu)[decoded]
    yd = digits(inst.n, ny)
    g = np.ones((ny ** inst.n, 1))
    for t in range(inst.n):
        rows = inst.fact.h_uy[ud[:, t], yd[:, t], :]
        g = (g[:, :, None] * rows[:, None, :]).reshape(g.shape[0], -1)
    return g


def coding_sxyh_given_f(inst: SchemeInstance, f: int) -> np.ndarray:
    """``P(s, x, y, shat | F = f)`` under the coding law, grouped and flattened."""
    n = inst.n
    ns, nu, nx, ny, nh = inst.fact.sizes
    ksxy = inst.fact._k_sxy()
    p_s = inst.p_s_seq
    acc = np.zeros((ns * nx) ** n * (ny * nh) ** n)
    buf = np.empty_like(acc)
    for c in range(inst.m0):
        w = p_s[:, None] * inst.encoder_kernel(c, f)
        t = letterwise(interleave(w, (ns, nu), n), ksxy, n)
        t = group(t, (ns, nx, ny), n).reshape((ns * nx) ** n, ny ** n)
        g = _shat_factor(inst, inst.decoder.table[c, f])
        np.multiply(t[:, :, None], g[None, :, :], out=buf.reshape(t.shape[0], t.shape[1], -1))
        acc += buf
    acc /= inst.m0
    return acc


def binning_sxyh_and_f(inst: SchemeInstance, f: int) -> np.ndarray:
    """``Pbar(s, x, y, shat, F = f)`` under the binning law (joint, not conditional)."""
    n = inst.n
    ns, nu, nx, ny, nh = inst.fact.sizes
    w = inst.p_su * (inst.binning.phi2 == f)[None, :]
    t = letterwise(interleave(w, (ns, nu), n), inst.fact._k_sxyh(), n)
    return group(t, (ns, nx, ny, nh), n).ravel()


def coding_uy(inst: SchemeInstance) -> np.ndarray:
    """``P(c, f, u, y)`` under the coding law, shape ``(M0 * Mt, |U|^n, |Y|^n)``."""
    n = inst.n
    ns, nu, _, ny, _ = inst.fact.sizes
    k = inst.m0 * inst.mtilde
    kuy = inst.fact._k_uy()
    out = np.empty((k, nu ** n, ny ** n))
    p_s = inst.p_s_seq
    for key in range(k):
        w = p_s[:, None] * inst.encoder[key]
        t = letterwise(interleave(w, (ns, nu), n), kuy, n)
        out[key] = group(t, (nu, ny), n) / k
    return out


def coding_mismatch(inst: SchemeInstance) -> float:
    """``P{Uhat^n != U^n}`` under the coding law."""
    p = coding_uy(inst)
    table = inst.decoder.table.reshape(inst.m0 * inst.mtilde, -1)
    wrong = table[:, None, :] != np.arange(p.shape[1])[None, :, None]
    return float(p[wrong].sum())


def binning_mismatch(inst: SchemeInstance) -> float:
    """``P{Uhat^n != U^n}`` under the binning law (the Lemma-1 error probability)."""
    return sw_error_prob(inst.decoder)


# ---------------------------------------------------------------------------
# full materialization (tiny n)


def _axes_for(inst: SchemeInstance, groups: list[tuple[str, int]]) -> list[tuple[str, int]]:
    axes = []
    for name, size in groups:
        if name in (C, F):
            axes.append((name, size))
        else:
            axes.extend((a, size) for a in pc.letters(name, inst.n))
    return axes


def _materialize(inst: SchemeInstance, coding: bool, budget: int | None) -> JointPmf:
    n = inst.n
    ns, nu, nx, ny, nh = inst.fact.sizes
    m0, mt = inst.m0, inst.mtilde
    NS, NU, NX, NY, NH = ns ** n, nu ** n, nx ** n, ny ** n, nh ** n
    check_budget(NS * NU * NU * NX * NY * m0 * mt * NH, budget, "scheme joint")
    xk = seq_power(inst.fact.x_us, n)  # [u, s, x]
    yk = seq_power(inst.fact.y_x, n)  # [x, y]
    hk = seq_power(inst.fact.h_uy, n)  # [u, y, shat]
    table = inst.decoder.table.reshape(m0 * mt, NY)
    uhat_onehot = np.zeros((m0 * mt, NY, NU))
    uhat_onehot[np.arange(m0 * mt)[:, None], np.arange(NY)[None, :], table] = 1.0
    if coding:
        # [k, s, u] -> P(k, s, u)
        head = inst.encoder * inst.p_s_seq[None, :, None] / (m0 * mt)
        # k, s, u, x, y, uhat, shat
        full = np.einsum("ksu,usx,xy,kyv,vyh->ksuvxyh", head, xk, yk, uhat_onehot, hk)
    else:
        onehot = np.zeros((m0 * mt, NU))
        onehot[inst.binning.keys, np.arange(NU)] = 1.0
        head = inst.p_su[None, :, :] * onehot[:, None, :]
        full = np.einsum("ksu,usx,xy,kyv,uyh->ksuvxyh", head, xk, yk, uhat_onehot, hk)
    full = full.reshape((m0, mt) + full.shape[1:])
    shape = (m0, mt) + (ns,) * n + (nu,) * n + (nu,) * n + (nx,) * n + (ny,) * n + (nh,) * n
    axes = _axes_for(inst, [(C, m0), (F, mt), (S, ns), (U, nu), (UHAT, nu), (X, nx), (Y, ny), (SHAT, nh)])
    return JointPmf(axes, full.reshape(shape), check=False)


def induced_scheme_joint(inst: SchemeInstance, budget: int | None = None) -> JointPmf:
    """Exact coding law over ``(S^n, U^n, Uhat^n, X^n, Y^n, C, F, Shat^n)``."""
    return _materialize(inst, True, budget)


def binning_scheme_joint(inst: SchemeInstance, budget: int | None = None) -> JointPmf:
    """Exact binning law over the same axes."""
    return _materialize(inst, False, budget)


def simulate_scheme(inst: SchemeInstance, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo counts of the coding law, shaped like :func:`induced_scheme_joint`."""
    n = inst.n
    ns, nu, nx, ny, nh = inst.fact.sizes
    fct = inst.fact
    c = rng.integers(inst.m0, size=samples)
    f = rng.integers(inst.mtilde, size=samples)
    s = rng.choice(ns, p=fct.p_s, size=(samples, n))
    s_idx = np.ravel_multi_index(s.T, (ns,) * n) if n > 1 else s[:, 0]
    rows = inst.encoder[c * inst.mtilde + f, s_idx]
    u_idx = _draw(rows, rng)
    u = digits(n, nu)[u_idx]
    x = _draw(fct.x_us[u, s], rng)
    y = _draw(fct.y_x[x], rng)
    y_idx = np.ravel_multi_index(y.T, (ny,) * n) if n > 1 else y[:, 0]
    uh_idx = inst.decoder.table[c, f, y_idx]
    uh = digits(n, nu)[uh_idx]
    h = _draw(fct.h_uy[uh, y], rng)
    cols = {C: c, F: f}
    for name, arr in ((S, s), (U, u), (UHAT, uh), (X, x), (Y, y), (SHAT, h)):
        for t in range(n):
            cols[pc.letter(name, t)] = arr[:, t]
    sizes = {C: inst.m0, F: inst.mtilde, S: ns, U: nu, UHAT: nu, X: nx, Y: ny, SHAT: nh}
    names = sorted(cols)
    shape = [sizes[nm if nm in (C, F) else nm.rsplit("_", 1)[0]] for nm in names]
    flat = np.ravel_multi_index([cols[nm] for nm in names], shape)
    return np.bincount(flat, minlength=math.prod(shape)).reshape(shape)


def _draw(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of ``probs`` (any leading shape)."""
    cdf = np.cumsum(probs, axis=-1)
    u = rng.random(probs.shape[:-1]) * cdf[..., -1]
    return np.minimum((u[..., None] > cdf).sum(axis=-1), probs.shape[-1] - 1)


# ---------------------------------------------------------------------------
# coupling and F removal


def identity_coupling_gap(p_wvv: np.ndarray) -> float:
    """``TV(P_{W V Vhat}, P_{W V} 1{Vhat = V})`` for a dense ``[w, v, vhat]`` array."""
    p_wv = p_wvv.sum(axis=2)
    q = np.zeros_like(p_wvv)
    idx = np.arange(p_wvv.shape[1])
    q[:, idx, idx] = p_wv
    return float(0.5 * np.abs(p_wvv - q).sum())


def mismatch_prob(p_wvv: np.ndarray) -> float:
    idx = np.arange(p_wvv.shape[1])
    return float(1.0 - p_wvv[:, idx, idx].sum())


@dataclass(frozen=True)
class CouplingReport:
    n: int
    gap_all_axes: float
    gap_all_axes_direct: float | None
    gap_with_shat: float | None
    triangle_bound: float
    mismatch_binning: float
    mismatch_coding: float
    coupling_gap_binning: float
    coupling_gap_coding: float
    materialized: bool

    @property
    def coupling_bound_holds(self) -> bool:
        return (self.coupling_gap_binning <= 2 * self.mismatch_binning + 1e-12
                and self.coupling_gap_coding <= 2 * self.mismatch_coding + 1e-12)

    @property
    def chain_residual(self) -> float | None:
        if self.gap_all_axes_direct is None:
            return None
        return abs(self.gap_all_axes - self.gap_all_axes_direct)


def _reduced_wvv(inst: SchemeInstance, coding: bool, budget: int | None) -> np.ndarray | None:
    """``(C, F, Y^n)`` x ``U^n`` x ``Uhat^n`` law; ``S^n, X^n`` enter through a shared kernel."""
    k = inst.m0 * inst.mtilde
    _, nu, _, ny, _ = inst.fact.sizes
    NU, NY = nu ** inst.n, ny ** inst.n
    if k * NY * NU * NU > (pc.DEFAULT_BUDGET if budget is None else budget):
        return None
    if coding:
        p_kuy = coding_uy(inst)
    else:
        p_uy = inst.decoder.joint_uy
        p_kuy = np.zeros((k, NU, NY))
        p_kuy[inst.binning.keys, np.arange(NU)] = p_uy
    table = inst.decoder.table.reshape(k, NY)
    out = np.zeros((k, NY, NU, NU))
    kk, yy = np.meshgrid(np.arange(k), np.arange(NY), indexing="ij")
    out[kk[..., None], yy[..., None], np.arange(NU)[None, None, :], table[..., None]] = p_kuy.transpose(0, 2, 1)
    return out.reshape(k * NY, NU, NU)


def coupling_gap(inst: SchemeInstance, budget: int | None = None) -> CouplingReport:
    """Gaps of the coupling argument, by enumeration wherever the budget allows."""
    rhs = cf_gap(inst)
    mb = binning_mismatch(inst)
    mc = coding_mismatch(inst)
    direct = hat = None
    materialized = False
    try:
        pb = binning_scheme_joint(inst, budget)
        pcod = induced_scheme_joint(inst, budget)
        materialized = True
    except pc.CapacityError:
        pb = pcod = None
    if materialized:
        keep = [a for a in pb.names if not a.startswith(SHAT)]
        direct = pc.tv_distance(pc.marginalize(pb, keep), pc.marginalize(pcod, keep))
        hat = pc.tv_distance(pb, pcod)
        w_axes = [a for a in keep if not a.startswith(U + "_") and not a.startswith(UHAT)]
        u_axes = pc.letters(U, inst.n)
        uh_axes = pc.letters(UHAT, inst.n)
        order = w_axes + u_axes + uh_axes
        nw = math.prod(pb.size_of(a) for a in w_axes)
        nu = inst.fact.sizes[1] ** inst.n
        gb = identity_coupling_gap(pc.marginalize(pb, order).array(order).reshape(nw, nu, nu))
        gc = identity_coupling_gap(pc.marginalize(pcod, order).array(order).reshape(nw, nu, nu))
    else:
        rb = _reduced_wvv(inst, False, budget)
        rc = _reduced_wvv(inst, True, budget)
        # Uhat is a function of (C, F, Y^n): the two-cell identity gives the same TV
        gb = identity_coupling_gap(rb) if rb is not None else mb
        gc = identity_coupling_gap(rc) if rc is not None else mc
    tri = mb + min(1.0, rhs) + mc
    return CouplingReport(inst.n, rhs, direct, hat, min(1.0, tri), mb, mc, gb, gc, materialized)


@dataclass(frozen=True)
class RemoveFReport:
    f_star: int
    final_gap: float
    gaps_by_f: tuple[float, ...]
    average_gap: float
    unconditioned_gap: float
    binning_f_gap: float
    skipped: tuple[int, ...]


def remove_f(inst: SchemeInstance) -> RemoveFReport:
    """Pick the realization ``f*`` whose conditional law is closest to the target.

    ``average_gap`` is ``TV(P_{SXYShat F}, Q_F Pbar_{SXYShat})``;
    ``binning_f_gap`` is the same quantity under the binning law.
    Realizations with zero binning mass are reported in ``skipped`` (the coding
    law gives every ``f`` mass ``1/Mt``).
    """
    mt = inst.mtilde
    target = iid_sxyh(inst.fact, inst.n)
    total = np.zeros_like(target)
    gaps, skipped = [], []
    bgap = 0.0
    for f in range(mt):
        cond = coding_sxyh_given_f(inst, f)
        total += cond / mt
        gaps.append(float(0.5 * np.abs(cond - target).sum()))
        pbf = binning_sxyh_and_f(inst, f)
        if pbf.sum() <= pc.ZERO:
            skipped.append(f)
        bgap += float(0.5 * np.abs(pbf - target / mt).sum())
    f_star = int(np.argmin(gaps))
    return RemoveFReport(
        f_star=f_star,
        final_gap=gaps[f_star],
        gaps_by_f=tuple(gaps),
        average_gap=float(np.mean(gaps)),
        unconditioned_gap=float(0.5 * np.abs(total - target).sum()),
        binning_f_gap=bgap,
        skipped=tuple(skipped),
    )


# ---------------------------------------------------------------------------
# sweeps

SWEEP_COLUMNS = ("n", "seed", "R0", "Rtilde", "gap_all_axes", "gap_sxys", "sw_error", "gap_after_removeF")


def sweep_seed(seed: int, n: int) -> int:
    return int(seed) ^ int(n)


def scheme_sweep(fact: TargetFactorization, R0: float, Rtilde: float, n_list, seeds,
                 budget: int | None = None) -> list[dict]:
    """One row per ``(n, seed)``; binnings re-drawn with ``seed ^ n``.

    A source independent of the rest is collapsed first; all reported gaps
    are unchanged by that.
    """
    work = fact.detach_source() or fact
    rows = []
    for n in n_list:
        for seed in seeds:
            inst = build_scheme(work, n, R0, Rtilde, sweep_seed(seed, n), budget)
            rf = remove_f(inst)
            rows.append({
                "n": int(n),
                "seed": int(seed),
                "R0": float(R0),
                "Rtilde": float(Rtilde),
                "gap_all_axes": cf_gap(inst),
                "gap_sxys": rf.unconditioned_gap,
                "sw_error": binning_mismatch(inst),
                "gap_after_removeF": rf.final_gap,
            })
    return rows


def summarize_sweep(rows: list[dict], column: str = "gap_after_removeF") -> dict[int, dict[str, float]]:
    out: dict[int, dict[str, float]] = {}
    for n in sorted({r["n"] for r in rows}):
        vals = np.array([r[column] for r in rows if r["n"] == n])
        out[n] = {"mean": float(vals.mean()), "min": float(vals.min()), "max": float(vals.max())}
    return out
