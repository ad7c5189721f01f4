"""Audits of the outer-bound information inequalities on concrete codes.

Two chains are checked step by step on the exact law a code induces:

* the channel chain, bounding ``I(X^n;Y^n) - I(C,S^n;Y^n)`` by
  ``n I(X_T;Y_T) - n I(S_T; Y_{~T}, C, T)``;
* the common-randomness chain, bounding ``log2 M0`` from below by
  ``n I(S_T X_T Shat_T; C Y_{~T} T | Y_T) - 2 n f(eps)``.

``T`` is a uniform time index independent of the code, ``Y_{~t}`` the
channel output with letter ``t`` removed and ``f`` the continuity budget of
:class:`EpsilonBudget`. The three continuity lemmas the second chain relies on
are exposed as standalone checks for randomized testing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import probcore as pc
from .channel import C, S, SHAT, X, Y, Code, DMChannel, Source, alphabet_size, induced_joint
from .probcore import JointPmf

T_AXIS = "T"
REST = "R"  # letters of Y_{~T}
SLACK_TOL = 1e-9


# ---------------------------------------------------------------------------
# continuity budget


def delta(eps: float, size: int) -> float:
    """``eps * log2(size / eps)``, with the limit 0 at ``eps = 0``."""
    if eps <= 0:
        return 0.0
    return eps * math.log2(size / eps)


def f_budget(eps: float, entropy: float, size: int) -> float:
    """``2 sqrt(eps) (2 H + delta) + 2 delta``."""
    d = delta(eps, size)
    return 2.0 * math.sqrt(max(eps, 0.0)) * (2.0 * entropy + d) + 2.0 * d


class EpsilonRangeError(pc.CapacityError):
    """The measured distance is outside the range where the continuity budget applies."""

    def __init__(self, eps: float):
        RuntimeError.__init__(self, f"continuity budget needs eps <= 1/2, measured {eps:.4f}")
        self.eps = eps
        self.required = self.budget = 0


@dataclass(frozen=True)
class EpsilonBudget:
    """Measured distance ``eps`` and the derived ``delta`` and ``f`` for a reference letter law."""

    eps: float
    size: int
    entropy: float

    def __post_init__(self):
        if self.eps > 0.5:
            raise EpsilonRangeError(self.eps)

    @property
    def delta(self) -> float:
        return delta(self.eps, self.size)

    @property
    def f(self) -> float:
        return f_budget(self.eps, self.entropy, self.size)

    @classmethod
    def for_reference(cls, eps: float, letter: np.ndarray) -> "EpsilonBudget":
        letter = np.asarray(letter, dtype=float).ravel()
        return cls(float(eps), letter.size, pc.entropy(JointPmf.single("Z", letter)))


# ---------------------------------------------------------------------------
# the time-averaged view


def _block(joint: JointPmf, n: int) -> np.ndarray:
    """Induced law as ``[c, s_0.., x_0.., y_0.., shat_0..]``."""
    order = [C] + pc.letters(S, n) + pc.letters(X, n) + pc.letters(Y, n) + pc.letters(SHAT, n)
    return joint.array(order)


@dataclass(frozen=True, eq=False)
class TimeAveragedView:
    """Per-letter laws ``P_t`` over ``(C, Y_{~t}, S_t, X_t, Y_t, Shat_t)`` and their ``T``-mixture."""

    n: int
    per_t: tuple = field(repr=False)
    sizes: tuple = ()

    @classmethod
    def from_induced(cls, joint: JointPmf, n: int) -> "TimeAveragedView":
        arr = _block(joint, n)
        m0 = arr.shape[0]
        ns, nx, ny, nh = (arr.shape[1 + k * n] for k in range(4))
        per_t = []
        for t in range(n):
            s_ax = 1 + t
            x_ax = 1 + n + t
            y_ax = 1 + 2 * n + t
            h_ax = 1 + 3 * n + t
            rest_y = [1 + 2 * n + i for i in range(n) if i != t]
            keep = [0] + rest_y + [s_ax, x_ax, y_ax, h_ax]
            drop = tuple(a for a in range(arr.ndim) if a not in keep)
            marg = arr.sum(axis=drop)
            # axes of marg follow increasing original order; reorder to keep
            src_order = sorted(keep)
            marg = np.transpose(marg, [src_order.index(a) for a in keep])
            axes = [(C, m0)] + [(pc.letter(REST, i), ny) for i in range(n - 1)]
            axes += [(S, ns), (X, nx), (Y, ny), (SHAT, nh)]
            per_t.append(JointPmf(axes, marg, check=False))
        return cls(n, tuple(per_t), (m0, ns, nx, ny, nh))

    @property
    def rest(self) -> list[str]:
        return pc.letters(REST, self.n - 1)

    def joint(self) -> JointPmf:
        """Law over ``(T, C, Y_{~T}, S_T, X_T, Y_T, Shat_T)`` with ``T`` uniform."""
        names = self.per_t[0].names
        stacked = np.stack([p.array(names) for p in self.per_t]) / self.n
        axes = [(T_AXIS, self.n)] + [(nm, self.per_t[0].size_of(nm)) for nm in names]
        return JointPmf(axes, stacked, check=False)

    def letter(self) -> JointPmf:
        """Single-letter ``P_{S_T X_T Y_T Shat_T}``."""
        return pc.marginalize(self.joint(), [S, X, Y, SHAT])

    def auxiliary(self) -> list[str]:
        """Axes forming ``U = (C, Y_{~T}, T)``."""
        return [C] + self.rest + [T_AXIS]


# ---------------------------------------------------------------------------
# chain audits


@dataclass(frozen=True)
class ChainStep:
    label: str
    relation: str  # "<=" or "=": left relation right
    left: float
    right: float

    @property
    def slack(self) -> float:
        if self.relation == "=":
            return -abs(self.right - self.left)
        return self.right - self.left

    @property
    def holds(self) -> bool:
        return self.slack >= -SLACK_TOL

    def to_dict(self) -> dict:
        return {"label": self.label, "relation": self.relation, "left": self.left,
                "right": self.right, "slack": self.slack, "holds": self.holds}


@dataclass(frozen=True)
class ChainAudit:
    name: str
    steps: tuple[ChainStep, ...]
    values: dict

    @property
    def holds(self) -> bool:
        return all(s.holds for s in self.steps)

    @property
    def min_slack(self) -> float:
        return min(s.slack for s in self.steps)

    def to_dict(self) -> dict:
        return {"name": self.name, "holds": self.holds, "min_slack": self.min_slack,
                "values": self.values, "steps": [s.to_dict() for s in self.steps]}


def _mi(p, a, b, given=()):
    return pc.cond_mutual_info(p, a, b, given)


def _h(p, a, given=()):
    return pc.cond_entropy(p, a, given)


def channel_chain(joint: JointPmf, n: int) -> ChainAudit:
    """Audit of ``0 <= I(X^n;Y^n) - I(C,S^n;Y^n) <= ... = n I(X_T;Y_T) - n I(S_T; Y_{~T} C T)``."""
    sn, xn, yn = pc.letters(S, n), pc.letters(X, n), pc.letters(Y, n)
    v1 = _mi(joint, xn, yn) - _mi(joint, [C] + sn, yn)
    v2 = _mi(joint, [C] + xn, yn) - _mi(joint, [C] + sn, yn)
    v3 = _h(joint, yn, [C]) - _h(joint, yn, xn + [C]) + _h(joint, sn, yn + [C]) - _h(joint, sn, [C])
    v4 = v5 = 0.0
    for t in range(n):
        st, xt, yt = sn[t], xn[t], yn[t]
        y_rest = [a for a in yn if a != yt]
        base = _h(joint, yt) - _h(joint, yt, [xt]) - _h(joint, st)
        v4 += base + _h(joint, st, sn[:t] + [yt] + y_rest + [C])
        v5 += base + _h(joint, st, y_rest + [C])
    view = TimeAveragedView.from_induced(joint, n)
    tj = view.joint()
    u_rest = view.rest + [C, T_AXIS]
    v6 = n * (_h(tj, Y) - _h(tj, Y, [X, T_AXIS]) + _h(tj, S, u_rest) - _h(tj, S, [T_AXIS]))
    v7 = n * (_h(tj, Y) - _h(tj, Y, [X]) + _h(tj, S, u_rest) - _h(tj, S))
    v8 = n * (_mi(tj, X, Y) - _mi(tj, S, view.rest + [C, T_AXIS]))
    steps = (
        ChainStep("(a) Markov chain Y^n - X^n - (C, S^n)", "<=", 0.0, v1),
        ChainStep("adding C to the first term", "<=", v1, v2),
        ChainStep("entropy expansion", "=", v2, v3),
        ChainStep("(b) memoryless channel and chain rule", "<=", v3, v4),
        ChainStep("(c) dropping S^{t-1}, Y_t from the conditioning", "<=", v4, v5),
        ChainStep("(d) time sharing", "<=", v5, v6),
        ChainStep("(e) memoryless channel, i.i.d. source", "=", v6, v7),
        ChainStep("mutual-information form", "=", v7, v8),
    )
    values = {"I(X^n;Y^n)-I(C,S^n;Y^n)": v1, "n I(X_T;Y_T)": n * _mi(tj, X, Y),
              "n I(S_T;U)": n * _mi(tj, S, u_rest), "final": v8}
    return ChainAudit("channel", steps, values)


def coordination_eps(joint: JointPmf, target: JointPmf, n: int) -> float:
    """``TV(P_{S^n X^n Y^n Shat^n}, Pbar^{⊗n})`` for an induced joint with ``C``."""
    arr = _block(joint, n).sum(axis=0)
    ref = target.array([S, X, Y, SHAT])
    # per-letter interleaving of the reference: [s_0.., x_0.., y_0.., h_0..]
    letters = np.ones(())
    for _ in range(n):
        letters = np.multiply.outer(letters, ref)
    order = [t * 4 + k for k in range(4) for t in range(n)]
    iid = np.transpose(letters, order)
    return float(0.5 * np.abs(arr - iid).sum())


def r0_chain(joint: JointPmf, n: int, target: JointPmf, R0: float) -> ChainAudit:
    """Audit of the common-randomness chain down to ``n I(SXShat_T; C Y_{~T} T | Y_T) - 2 n f``.

    ``log2 M0`` stands for ``n R0``: with ``M0 = ceil(2^(n R0))`` it is the
    entropy of a uniform ``C``.
    """
    sn, xn, yn, hn = (pc.letters(a, n) for a in (S, X, Y, SHAT))
    m0 = joint.size_of(C)
    eps = coordination_eps(joint, target, n)
    ref = target.array([S, X, Y, SHAT])
    budget = EpsilonBudget.for_reference(eps, ref)
    f = budget.f

    def z(t):
        return [sn[t], xn[t], hn[t]]

    def z_past(t):
        return sn[:t] + xn[:t] + hn[:t]

    def z_rest(t):
        return [a for i in range(n) if i != t for a in (sn[i], xn[i], hn[i])]

    w0 = math.log2(m0)
    w1 = _h(joint, [C])
    w2 = _h(joint, [C], yn)
    w3 = _mi(joint, sn + xn + hn, [C], yn)
    w4 = sum(_mi(joint, z(t), [C], z_past(t) + [a for a in yn if a != yn[t]] + [yn[t]]) for t in range(n))
    first = [_mi(joint, z(t), [C] + z_past(t) + [a for a in yn if a != yn[t]], [yn[t]]) for t in range(n)]
    past = [_mi(joint, z(t), z_past(t) + [a for a in yn if a != yn[t]], [yn[t]]) for t in range(n)]
    cy = [_mi(joint, z(t), [C] + [a for a in yn if a != yn[t]], [yn[t]]) for t in range(n)]
    w5 = sum(first) - sum(past)
    w6 = sum(cy) - sum(past)
    w7 = sum(cy) - n * f
    # sub-chain behind step (a)
    a1 = sum(past)
    a2 = sum(_mi(joint, z(t), z_rest(t) + [a for a in yn if a != yn[t]], [yn[t]]) for t in range(n))
    a3 = sum(_mi(joint, z(t) + [yn[t]], z_rest(t) + [a for a in yn if a != yn[t]]) for t in range(n))
    view = TimeAveragedView.from_induced(joint, n)
    tj = view.joint()
    zt = [S, X, SHAT]
    w8 = n * _mi(tj, zt, [C] + view.rest, [Y, T_AXIS]) - n * f
    main = n * _mi(tj, zt, [C] + view.rest + [T_AXIS], [Y])
    w9 = main - n * _mi(tj, zt, [T_AXIS], [Y]) - n * f
    i_t = _mi(tj, zt + [Y], [T_AXIS])
    w10 = main - n * i_t - n * f
    w11 = main - 2 * n * f
    steps = (
        ChainStep("n R0 >= H(C)", "<=", w1, w0),
        ChainStep("conditioning on Y^n", "<=", w2, w1),
        ChainStep("H(C|Y^n) >= I(S^n X^n Shat^n; C | Y^n)", "<=", w3, w2),
        ChainStep("chain rule over t", "=", w3, w4),
        ChainStep("splitting the conditioning", "=", w4, w5),
        ChainStep("dropping past letters from the first sum", "<=", w6, w5),
        ChainStep("(a) continuity bound on the past-letter sum", "<=", w7, w6),
        ChainStep("(a.1) past letters to all other letters", "<=", a1, a2),
        ChainStep("(a.2) moving Y_t into the first argument", "<=", a2, a3),
        ChainStep("(a.3) letter dependence within n f(eps)", "<=", a3, n * f),
        ChainStep("time sharing", "=", w7, w8),
        ChainStep("chain rule on T", "=", w8, w9),
        ChainStep("adding Y_T to the T term", "<=", w10, w9),
        ChainStep("(b) I(S_T X_T Y_T Shat_T; T) within f(eps)", "<=", w11, w10),
    )
    values = {
        "nR0": n * R0, "log2 M0": w0, "eps": eps, "delta": budget.delta, "f": f,
        "n I(SXShat_T; U | Y_T)": main, "n I(SXYShat_T; T)": n * i_t, "rhs": w11,
    }
    return ChainAudit("common randomness", steps, values)


def verify_markov_chain_step(code: Code, src: Source, ch: DMChannel, budget: int | None = None) -> ChainAudit:
    return channel_chain(induced_joint(code, src, ch, budget), code.n)


def verify_r0_chain(code: Code, src: Source, ch: DMChannel, target: JointPmf,
                    budget: int | None = None) -> ChainAudit:
    return r0_chain(induced_joint(code, src, ch, budget), code.n, target, code.R0)


def auxiliary_markov_residuals(joint: JointPmf, n: int) -> list[tuple[float, float]]:
    """Per ``t``: ``I(S_t X_t; Shat_t | C Y^n)`` and ``I(Y_t; C Y_{~t} S_t | X_t)``."""
    view = TimeAveragedView.from_induced(joint, n)
    out = []
    for p in view.per_t:
        u = [C] + view.rest
        out.append((_mi(p, [S, X], [SHAT], u + [Y]), _mi(p, [Y], u + [S], [X])))
    return out


# ---------------------------------------------------------------------------
# continuity lemmas


@dataclass(frozen=True)
class ContinuityCheck:
    eps: float
    diff: float
    bound_half: float
    bound_l1: float

    @property
    def holds_half(self) -> bool:
        return self.diff <= self.bound_half + 1e-12

    @property
    def holds_l1(self) -> bool:
        return self.diff <= self.bound_l1 + 1e-12

    @property
    def holds(self) -> bool:
        return self.holds_l1


def lemma_continuity(p, q) -> ContinuityCheck:
    """Entropy continuity ``|H(p) - H(q)| <= e log2(|X| / e)``.

    Reported for ``e`` equal to the half-L1 distance and to the full L1
    distance; only the L1 form is valid over the whole range ``eps <= 1/2``
    (``p = (1, 0)``, ``q = (0.9, 0.1)`` breaks the half-L1 form).
    """
    p, q = (np.asarray(a, dtype=float).ravel() for a in (p, q))
    if p.shape != q.shape:
        raise pc.StructuralError("pmfs live on different alphabets")
    eps = float(0.5 * np.abs(p - q).sum())
    if eps > 0.5 + 1e-15:
        raise ValueError(f"distance {eps:.4f} exceeds 1/2")
    hp = pc.entropy(JointPmf.single("Z", p))
    hq = pc.entropy(JointPmf.single("Z", q))
    return ContinuityCheck(eps, abs(hp - hq), delta(eps, p.size), delta(2 * eps, p.size))


@dataclass(frozen=True)
class ConditionalTVCheck:
    eps: float
    mass: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.mass >= self.bound - 1e-12


def lemma_conditional_tv(p_xy, q_xy) -> ConditionalTVCheck:
    """``P_X{x : TV(P_{Y|x}, Q_{Y|x}) <= sqrt(eps)} >= 1 - 2 sqrt(eps)`` for arrays ``[x, y]``."""
    p_xy, q_xy = (np.asarray(a, dtype=float) for a in (p_xy, q_xy))
    if p_xy.shape != q_xy.shape:
        raise pc.StructuralError("joints live on different alphabets")
    eps = float(0.5 * np.abs(p_xy - q_xy).sum())
    p_x, q_x = p_xy.sum(axis=1), q_xy.sum(axis=1)
    ny = p_xy.shape[1]
    p_c = np.where(p_x[:, None] > pc.ZERO, p_xy / np.where(p_x > 0, p_x, 1)[:, None], 1.0 / ny)
    q_c = np.where(q_x[:, None] > pc.ZERO, q_xy / np.where(q_x > 0, q_x, 1)[:, None], 1.0 / ny)
    tv_x = 0.5 * np.abs(p_c - q_c).sum(axis=1)
    r = math.sqrt(eps)
    mass = float(p_x[tv_x <= r + 1e-15].sum())
    return ConditionalTVCheck(eps, mass, 1.0 - 2.0 * r)


@dataclass(frozen=True)
class SumMICheck:
    eps: float
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-12


def lemma_sum_mi(p_seq, p_bar, n: int) -> SumMICheck:
    """``sum_t I(X_t; X_{~t}) <= n f(eps)`` for a law ``p_seq`` on ``X^n``.

    ``p_seq`` has shape ``(|X|,) * n`` (or is flat); ``p_bar`` is the reference letter.
    """
    p_bar = np.asarray(p_bar, dtype=float).ravel()
    d = p_bar.size
    arr = np.asarray(p_seq, dtype=float).reshape((d,) * n)
    iid = np.ones(())
    for _ in range(n):
        iid = np.multiply.outer(iid, p_bar)
    eps = float(0.5 * np.abs(arr - iid).sum())
    if eps > 0.5:
        raise ValueError(f"distance {eps:.4f} exceeds 1/2")
    axes = pc.letters("Z", n)
    joint = JointPmf([(a, d) for a in axes], arr, check=False)
    lhs = sum(_mi(joint, [axes[t]], [a for a in axes if a != axes[t]]) for t in range(n))
    return SumMICheck(eps, lhs, n * EpsilonBudget.for_reference(eps, p_bar).f)


# ---------------------------------------------------------------------------
# random codes


def letterwise_code_arrays(n: int, m0: int, enc1: np.ndarray, dec1: np.ndarray):
    """Sequence-indexed arrays of a code applying ``enc1[s, x]``, ``dec1[y, h]`` letter by letter."""
    e = np.ones((1, 1))
    d = np.ones((1, 1))
    for _ in range(n):
        e = np.kron(e, enc1)
        d = np.kron(d, dec1)
    return np.broadcast_to(e, (m0,) + e.shape).copy(), np.broadcast_to(d, (m0,) + d.shape).copy()


def random_code(n: int, R0: float, enc1: np.ndarray, dec1: np.ndarray, rng: np.random.Generator,
                mix: float) -> Code:
    """Mixture ``(1 - mix) * letterwise + mix * random`` of encoder and decoder kernels.

    The letterwise part reproduces the composite target exactly and carries
    weight ``(1 - mix)**2`` in the induced law, so the induced distance to it
    is at most ``1 - (1 - mix)**2``.
    """
    enc1, dec1 = np.asarray(enc1, dtype=float), np.asarray(dec1, dtype=float)
    ns, nx = enc1.shape
    ny, nh = dec1.shape
    m0 = alphabet_size(n, R0)
    e, d = letterwise_code_arrays(n, m0, enc1, dec1)
    re = rng.dirichlet(np.full(nx ** n, 0.3), size=(m0, ns ** n))
    rd = rng.dirichlet(np.full(nh ** n, 0.3), size=(m0, ny ** n))
    return Code.from_arrays(n, R0, (ns, nx, ny, nh), (1 - mix) * e + mix * re, (1 - mix) * d + mix * rd)


def composite_target(src: Source, enc1: np.ndarray, ch: DMChannel, dec1: np.ndarray) -> JointPmf:
    """``P_S P_{X|S} W P_{Shat|Y}`` over ``(S, X, Y, Shat)``."""
    arr = np.einsum("s,sx,xy,yh->sxyh", src.probs, enc1, ch.matrix, dec1)
    ns, nx, ny, nh = arr.shape
    return JointPmf([(S, ns), (X, nx), (Y, ny), (SHAT, nh)], arr)
