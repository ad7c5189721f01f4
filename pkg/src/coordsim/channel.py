"""Sources, discrete memoryless channels, codes and the joint law a code induces.

A code of block length ``n`` maps ``(S^n, C)`` to ``X^n`` and ``(Y^n, C)`` to
``Shat^n``; both maps are stochastic kernels (a deterministic map is a 0/1
kernel). ``C`` is uniform on ``ceil(2^(n R0))`` values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probcore import (
    CondPmf,
    JointPmf,
    StructuralError,
    chain_compose,
    check_budget,
    iid_kernel,
    iid_power,
    letters,
    marginalize,
    product,
    tv_distance,
)

S, X, Y, SHAT, U, UHAT, C, F = "S", "X", "Y", "Shat", "U", "Uhat", "C", "F"


def alphabet_size(n: int, rate: float) -> int:
    """Integer realization ``ceil(2^(n R))`` of a rate (never below 1)."""
    if rate < 0:
        raise ValueError("rates must be nonnegative")
    return max(1, math.ceil(2.0 ** (n * rate) - 1e-9))


def bern(p: float, name: str = S) -> JointPmf:
    return JointPmf.single(name, [1.0 - p, p])


def bsc(p: float, x: str = X, y: str = Y) -> CondPmf:
    return CondPmf([(x, 2)], [(y, 2)], [[1 - p, p], [p, 1 - p]])


def identity_kernel(size: int, x: str = X, y: str = Y) -> CondPmf:
    return CondPmf([(x, size)], [(y, size)], np.eye(size))


@dataclass(frozen=True)
class Source:
    pmf: JointPmf

    def __post_init__(self):
        if self.pmf.names != (S,):
            raise StructuralError(f"source pmf must live on axis {S!r}")

    @property
    def size(self) -> int:
        return self.pmf.axes[0].size

    @property
    def probs(self) -> np.ndarray:
        return self.pmf.weights


@dataclass(frozen=True)
class DMChannel:
    kernel: CondPmf

    def __post_init__(self):
        if self.kernel.from_names != (X,) or self.kernel.to_names != (Y,):
            raise StructuralError("channel kernel must map X to Y")

    @property
    def matrix(self) -> np.ndarray:
        return self.kernel.matrix()

    @property
    def x_size(self) -> int:
        return self.kernel.from_axes[0].size

    @property
    def y_size(self) -> int:
        return self.kernel.to_axes[0].size


@dataclass(frozen=True)
class CommonRandomness:
    rate: float
    n: int

    @property
    def size(self) -> int:
        return alphabet_size(self.n, self.rate)

    def pmf(self, name: str = C) -> JointPmf:
        return JointPmf.uniform([(name, self.size)])


@dataclass(frozen=True)
class Code:
    """Encoder ``(S^n, C) -> X^n`` and decoder ``(Y^n, C) -> Shat^n`` kernels."""

    n: int
    R0: float
    encoder: CondPmf
    decoder: CondPmf

    def __post_init__(self):
        m0 = self.common.size
        enc_in = set(letters(S, self.n)) | {C}
        dec_in = set(letters(Y, self.n)) | {C}
        if set(self.encoder.from_names) != enc_in or set(self.encoder.to_names) != set(letters(X, self.n)):
            raise StructuralError("encoder must map (S^n, C) to X^n")
        if set(self.decoder.from_names) != dec_in or set(self.decoder.to_names) != set(letters(SHAT, self.n)):
            raise StructuralError("decoder must map (Y^n, C) to Shat^n")
        for k in (self.encoder, self.decoder):
            if k.from_axes[[a.name for a in k.from_axes].index(C)].size != m0:
                raise StructuralError(f"common randomness alphabet must have size {m0}")

    @property
    def common(self) -> CommonRandomness:
        return CommonRandomness(self.R0, self.n)

    @classmethod
    def from_arrays(cls, n, R0, sizes, enc, dec) -> "Code":
        """Build from sequence-indexed arrays.

        ``sizes`` is ``(|S|, |X|, |Y|, |Shat|)``; ``enc[c, s, x]`` and
        ``dec[c, y, shat]`` index whole sequences (letter 0 most significant).
        """
        ns, nx, ny, nh = sizes
        m0 = alphabet_size(n, R0)
        enc = np.asarray(enc, dtype=float).reshape((m0,) + (ns,) * n + (nx,) * n)
        dec = np.asarray(dec, dtype=float).reshape((m0,) + (ny,) * n + (nh,) * n)
        enc_k = CondPmf(
            [(C, m0)] + [(a, ns) for a in letters(S, n)],
            [(a, nx) for a in letters(X, n)],
            enc,
        )
        dec_k = CondPmf(
            [(C, m0)] + [(a, ny) for a in letters(Y, n)],
            [(a, nh) for a in letters(SHAT, n)],
            dec,
        )
        return cls(n, R0, enc_k, dec_k)

    @classmethod
    def letterwise(cls, n, R0, enc1: CondPmf, dec1: CondPmf) -> "Code":
        """Code applying single-letter kernels ``X|S`` and ``Shat|Y`` and ignoring ``C``."""
        m0 = alphabet_size(n, R0)
        ns, nx = enc1.from_axes[0].size, enc1.to_axes[0].size
        ny, nh = dec1.from_axes[0].size, dec1.to_axes[0].size
        e = _kron_power(enc1.matrix(), n)
        d = _kron_power(dec1.matrix(), n)
        enc = np.broadcast_to(e, (m0,) + e.shape)
        dec = np.broadcast_to(d, (m0,) + d.shape)
        return cls.from_arrays(n, R0, (ns, nx, ny, nh), enc, dec)


def _kron_power(m: np.ndarray, n: int) -> np.ndarray:
    out = np.ones((1, 1))
    for _ in range(n):
        out = np.kron(out, m)
    return out


def induced_joint(code: Code, src: Source, ch: DMChannel, budget: int | None = None) -> JointPmf:
    """Exact law of ``(S^n, X^n, Y^n, Shat^n, C)`` under the code."""
    n = code.n
    cells = code.common.size * math.prod(
        a.size for a in code.encoder.from_axes + code.encoder.to_axes if a.name != C
    )
    cells *= ch.y_size ** n * math.prod(a.size for a in code.decoder.to_axes)
    check_budget(cells, budget, "induced joint")
    p = product(code.common.pmf(), iid_power(src.pmf, n, budget))
    p = chain_compose(p, code.encoder)
    p = chain_compose(p, iid_kernel(ch.kernel, n, budget))
    return chain_compose(p, code.decoder)


def coordination_gap(code: Code, src: Source, ch: DMChannel, target: JointPmf,
                     budget: int | None = None) -> float:
    """TV between the induced ``(S^n, X^n, Y^n, Shat^n)`` and the i.i.d. target."""
    if set(target.names) != {S, X, Y, SHAT}:
        raise StructuralError("target must be a pmf over S, X, Y, Shat")
    induced = induced_joint(code, src, ch, budget)
    keep = [nm for nm in induced.names if nm != C]
    return tv_distance(marginalize(induced, keep), iid_power(target, code.n, budget))


def target_from_kernels(src: Source, x_given_s: CondPmf, ch: DMChannel, shat_given_sxy: CondPmf) -> JointPmf:
    """``P_S P_{X|S} P_{Y|X} P_{Shat|SXY}`` as a joint pmf."""
    p = chain_compose(src.pmf, x_given_s)
    p = chain_compose(p, ch.kernel)
    return chain_compose(p, shat_given_sxy)


def simulate_code(code: Code, src: Source, ch: DMChannel, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo counts over the induced ``(S^n, X^n, Y^n, Shat^n)`` cells.

    Counts come back shaped like the ``C``-marginalized induced joint (axes in
    canonical order), so ``counts / samples`` estimates it cell by cell.
    """
    n = code.n
    m0 = code.common.size
    ns = src.size
    nx, ny = ch.x_size, ch.y_size
    nh = code.decoder.to_axes[0].size
    e = _sequence_kernel(code.encoder, [C] + letters(S, n), letters(X, n))
    d = _sequence_kernel(code.decoder, [C] + letters(Y, n), letters(SHAT, n))
    e = e.reshape(m0, ns ** n, nx ** n)
    d = d.reshape(m0, ny ** n, nh ** n)
    c = rng.integers(m0, size=samples)
    s = rng.choice(src.size, p=src.probs, size=(samples, n))
    s_idx = _seq_index(s, ns)
    x_idx = _sample_rows(e[c, s_idx], rng)
    x = _seq_digits(x_idx, nx, n)
    chm = ch.matrix
    u = rng.random((samples, n))
    y = (u[..., None] > np.cumsum(chm[x], axis=-1)).sum(axis=-1)
    y = np.minimum(y, ny - 1)
    y_idx = _seq_index(y, ny)
    h_idx = _sample_rows(d[c, y_idx], rng)
    h = _seq_digits(h_idx, nh, n)
    cols = {}
    for t in range(n):
        cols[f"S_{t:02d}"] = s[:, t]
        cols[f"X_{t:02d}"] = x[:, t]
        cols[f"Y_{t:02d}"] = y[:, t]
        cols[f"Shat_{t:02d}"] = h[:, t]
    names = sorted(cols)
    sizes = {S: ns, X: nx, Y: ny, SHAT: nh}
    shape = [sizes[nm.rsplit("_", 1)[0]] for nm in names]
    flat = np.ravel_multi_index([cols[nm] for nm in names], shape)
    return np.bincount(flat, minlength=math.prod(shape)).reshape(shape)


def _sequence_kernel(k: CondPmf, inputs, outputs) -> np.ndarray:
    order = [k.from_names.index(a) for a in inputs]
    order += [len(k.from_axes) + k.to_names.index(a) for a in outputs]
    return np.transpose(k.kernel, order)


def _seq_index(digits: np.ndarray, base: int) -> np.ndarray:
    idx = np.zeros(digits.shape[0], dtype=np.int64)
    for t in range(digits.shape[1]):
        idx = idx * base + digits[:, t]
    return idx


def _seq_digits(idx: np.ndarray, base: int, n: int) -> np.ndarray:
    out = np.empty((idx.shape[0], n), dtype=np.int64)
    rem = idx.copy()
    for t in range(n - 1, -1, -1):
        out[:, t] = rem % base
        rem //= base
    return out


def _sample_rows(rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(rows, axis=1)
    u = rng.random(rows.shape[0]) * cdf[:, -1]
    return np.minimum((u[:, None] > cdf).sum(axis=1), rows.shape[1] - 1)
