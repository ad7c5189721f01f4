"""Exact finite-alphabet probability on dense tensors with named axes.

Every distribution in the package is a :class:`JointPmf`: a nonnegative,
unit-sum ``numpy`` array whose axes carry names. Axis order is canonical
(sorted by name), so two pmfs over the same variables compare cell by cell.
Kernels between axis groups are :class:`CondPmf`.

Conventions
-----------
* logarithms are base 2 (bits); ``0 log 0 = 0``;
* total variation is half the L1 distance, so it lives in ``[0, 1]``;
* letter ``t`` of a block variable ``X`` is the axis ``X_tt`` (two digits),
  which keeps lexicographic and temporal order aligned.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_BUDGET = 1 << 24
MASS_TOL = 1e-12
ZERO = 1e-15


class StructuralError(ValueError):
    """Axes do not line up the way an operation requires."""


class CapacityError(RuntimeError):
    """A dense tensor would exceed the enumeration budget."""

    def __init__(self, required: int, budget: int, what: str = "tensor"):
        self.required = int(required)
        self.budget = int(budget)
        super().__init__(f"{what} needs {self.required} cells, budget is {self.budget}")


def check_budget(cells: int, budget: int | None = None, what: str = "tensor") -> None:
    budget = DEFAULT_BUDGET if budget is None else budget
    if cells > budget:
        raise CapacityError(cells, budget, what)


def letter(name: str, t: int) -> str:
    """Axis name of letter ``t`` of the block variable ``name``."""
    return f"{name}_{t:02d}"


def letters(name: str, n: int) -> list[str]:
    return [letter(name, t) for t in range(n)]


@dataclass(frozen=True, order=True)
class Alphabet:
    name: str
    size: int

    def __post_init__(self):
        if int(self.size) < 1:
            raise StructuralError(f"alphabet {self.name!r} must have size >= 1")


def _as_alphabets(axes) -> tuple[Alphabet, ...]:
    out = []
    for a in axes:
        if isinstance(a, Alphabet):
            out.append(a)
        elif isinstance(a, dict):
            out.append(Alphabet(str(a["name"]), int(a["size"])))
        else:
            name, size = a
            out.append(Alphabet(str(name), int(size)))
    names = [a.name for a in out]
    if len(set(names)) != len(names):
        raise StructuralError(f"duplicate axis names in {names}")
    return tuple(out)


def _canonical(axes: tuple[Alphabet, ...], weights: np.ndarray):
    order = sorted(range(len(axes)), key=lambda i: axes[i].name)
    return tuple(axes[i] for i in order), np.transpose(weights, order)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=float)
    arr.setflags(write=False)
    return arr


class JointPmf:
    """A probability mass function over the product of named finite axes.

    Parameters
    ----------
    axes : sequence of Alphabet, ``(name, size)`` pairs or dicts
        Axis descriptions in the order of the dimensions of ``weights``.
    weights : array_like
        Nonnegative masses; must sum to one within ``1e-12``.
    """

    __slots__ = ("axes", "weights")

    def __init__(self, axes, weights, *, check: bool = True):
        axes = _as_alphabets(axes)
        weights = np.asarray(weights, dtype=float)
        shape = tuple(a.size for a in axes)
        if weights.shape != shape:
            if weights.size != math.prod(shape):
                raise StructuralError(f"weights of size {weights.size} do not fit axes {shape}")
            weights = weights.reshape(shape)
        if check:
            if np.any(weights < 0) or not np.all(np.isfinite(weights)):
                raise ValueError("weights must be finite and nonnegative")
            total = weights.sum()
            if abs(total - 1.0) > MASS_TOL:
                raise ValueError(f"weights sum to {total!r}, not 1")
        axes, weights = _canonical(axes, weights)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "weights", _frozen(weights))

    def __setattr__(self, key, value):
        raise AttributeError("JointPmf is immutable")

    def __repr__(self):
        ax = ", ".join(f"{a.name}:{a.size}" for a in self.axes)
        return f"JointPmf({ax})"

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.weights.shape

    def size_of(self, name: str) -> int:
        return self.axes[self.index(name)].size

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise StructuralError(f"unknown axis {name!r}; have {self.names}") from None

    def array(self, order: Sequence[str]) -> np.ndarray:
        """Weights with dimensions permuted to ``order`` (must list every axis)."""
        if sorted(order) != sorted(self.names):
            raise StructuralError(f"order {list(order)} does not cover {self.names}")
        return np.transpose(self.weights, [self.index(n) for n in order])

    def same_axes(self, other: "JointPmf") -> bool:
        return self.axes == other.axes

    def rename(self, mapping: dict[str, str]) -> "JointPmf":
        axes = [Alphabet(mapping.get(a.name, a.name), a.size) for a in self.axes]
        return JointPmf(axes, self.weights, check=False)

    # construction helpers
    @classmethod
    def uniform(cls, axes) -> "JointPmf":
        axes = _as_alphabets(axes)
        shape = tuple(a.size for a in axes)
        return cls(axes, np.full(shape, 1.0 / math.prod(shape)))

    @classmethod
    def point(cls, axes, index: Sequence[int]) -> "JointPmf":
        axes = _as_alphabets(axes)
        w = np.zeros(tuple(a.size for a in axes))
        w[tuple(index)] = 1.0
        return cls(axes, w)

    @classmethod
    def single(cls, name: str, probs) -> "JointPmf":
        probs = np.asarray(probs, dtype=float)
        return cls([(name, probs.size)], probs)

    # serialization
    def to_dict(self) -> dict:
        return {
            "axes": [{"name": a.name, "size": a.size} for a in self.axes],
            "weights": [float(w) for w in self.weights.ravel()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "JointPmf":
        return cls(d["axes"], np.asarray(d["weights"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "JointPmf":
        return cls.from_dict(json.loads(text))


Pmf = JointPmf


class CondPmf:
    """A stochastic kernel from one group of named axes to another.

    ``kernel`` has the ``from`` dimensions first, then the ``to`` dimensions;
    each ``from`` configuration indexes a pmf over the ``to`` axes.
    """

    __slots__ = ("from_axes", "to_axes", "kernel")

    def __init__(self, from_axes, to_axes, kernel, *, check: bool = True):
        from_axes = _as_alphabets(from_axes)
        to_axes = _as_alphabets(to_axes)
        if {a.name for a in from_axes} & {a.name for a in to_axes}:
            raise StructuralError("kernel input and output axes overlap")
        kernel = np.asarray(kernel, dtype=float)
        shape = tuple(a.size for a in from_axes + to_axes)
        if kernel.shape != shape:
            if kernel.size != math.prod(shape):
                raise StructuralError(f"kernel of size {kernel.size} does not fit {shape}")
            kernel = kernel.reshape(shape)
        if check:
            if np.any(kernel < 0) or not np.all(np.isfinite(kernel)):
                raise ValueError("kernel entries must be finite and nonnegative")
            rows = kernel.reshape(math.prod(shape[: len(from_axes)]), -1).sum(axis=1)
            if np.any(np.abs(rows - 1.0) > MASS_TOL):
                raise ValueError("kernel rows must sum to 1")
        nf = len(from_axes)
        fo = sorted(range(nf), key=lambda i: from_axes[i].name)
        to = sorted(range(len(to_axes)), key=lambda i: to_axes[i].name)
        kernel = np.transpose(kernel, fo + [nf + i for i in to])
        object.__setattr__(self, "from_axes", tuple(from_axes[i] for i in fo))
        object.__setattr__(self, "to_axes", tuple(to_axes[i] for i in to))
        object.__setattr__(self, "kernel", _frozen(kernel))

    def __setattr__(self, key, value):
        raise AttributeError("CondPmf is immutable")

    def __repr__(self):
        f = ",".join(a.name for a in self.from_axes)
        t = ",".join(a.name for a in self.to_axes)
        return f"CondPmf({t} | {f})"

    @property
    def from_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.from_axes)

    @property
    def to_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.to_axes)

    def matrix(self) -> np.ndarray:
        """Kernel flattened to ``(from configurations, to configurations)``."""
        nf = math.prod(a.size for a in self.from_axes)
        return self.kernel.reshape(nf, -1)

    def rename(self, mapping: dict[str, str]) -> "CondPmf":
        f = [Alphabet(mapping.get(a.name, a.name), a.size) for a in self.from_axes]
        t = [Alphabet(mapping.get(a.name, a.name), a.size) for a in self.to_axes]
        return CondPmf(f, t, self.kernel, check=False)

    @classmethod
    def deterministic(cls, from_axes, to_axes, fn) -> "CondPmf":
        """0/1 kernel putting all mass on ``fn(*from_index)`` (a tuple of to-indices)."""
        from_axes = _as_alphabets(from_axes)
        to_axes = _as_alphabets(to_axes)
        fs = tuple(a.size for a in from_axes)
        ts = tuple(a.size for a in to_axes)
        k = np.zeros(fs + ts)
        for idx in np.ndindex(*fs):
            out = fn(*idx)
            if not isinstance(out, tuple):
                out = (out,)
            k[idx + tuple(out)] = 1.0
        return cls(from_axes, to_axes, k)

    def to_dict(self) -> dict:
        return {
            "from_axes": [{"name": a.name, "size": a.size} for a in self.from_axes],
            "to_axes": [{"name": a.name, "size": a.size} for a in self.to_axes],
            "weights": [float(w) for w in self.kernel.ravel()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "CondPmf":
        return cls(d["from_axes"], d["to_axes"], np.asarray(d["weights"], dtype=float))

    @classmethod
    def from_json(cls, text: str) -> "CondPmf":
        return cls.from_dict(json.loads(text))


def _names(axes) -> list[str]:
    if isinstance(axes, str):
        return [axes]
    return list(axes)


def tv_distance(p: JointPmf, q: JointPmf) -> float:
    """Total variation ``0.5 * sum |p - q|``."""
    if not p.same_axes(q):
        raise StructuralError(f"axis mismatch: {p.axes} vs {q.axes}")
    return float(min(1.0, 0.5 * np.abs(p.weights - q.weights).sum()))


def marginalize(p: JointPmf, keep: Iterable[str]) -> JointPmf:
    keep = _names(keep)
    idx = [p.index(n) for n in keep]
    drop = tuple(i for i in range(len(p.axes)) if i not in idx)
    w = p.weights.sum(axis=drop) if drop else p.weights
    axes = [a for i, a in enumerate(p.axes) if i not in drop]
    return JointPmf(axes, w, check=False)


def chain_compose(p: JointPmf, k: CondPmf) -> JointPmf:
    """Joint ``p(a) k(b | a_from)`` over ``p``'s axes plus the kernel outputs."""
    if set(k.to_names) & set(p.names):
        raise StructuralError(f"kernel outputs {k.to_names} collide with {p.names}")
    for a in k.from_axes:
        if p.axes[p.index(a.name)].size != a.size:
            raise StructuralError(f"axis {a.name!r} size differs between pmf and kernel")
    rest = [n for n in p.names if n not in k.from_names]
    order = rest + list(k.from_names)
    w = p.array(order)
    rest_shape = w.shape[: len(rest)]
    w = w.reshape(math.prod(rest_shape), -1)
    out = w[:, :, None] * k.matrix()[None, :, :]
    axes = [p.axes[p.index(n)] for n in order] + list(k.to_axes)
    return JointPmf(axes, out.reshape([a.size for a in axes]), check=False)


def product(*pmfs: JointPmf) -> JointPmf:
    """Independent product of pmfs over disjoint axes."""
    axes: list[Alphabet] = []
    w = np.ones(())
    for p in pmfs:
        axes.extend(p.axes)
        w = np.multiply.outer(w, p.weights)
    return JointPmf(axes, w, check=False)


def _plogp(w: np.ndarray) -> float:
    w = w[w > 0]
    return float(-(w * np.log2(w)).sum())


def entropy(p: JointPmf, axes=None) -> float:
    if axes is None:
        return _plogp(p.weights)
    names = _names(axes)
    if not names:
        return 0.0
    return _plogp(marginalize(p, names).weights)


def _disjoint(*groups):
    seen: set[str] = set()
    for g in groups:
        if seen & set(g):
            raise StructuralError(f"axis groups overlap: {groups}")
        seen |= set(g)


def cond_entropy(p: JointPmf, target, given=()) -> float:
    target, given = _names(target), _names(given)
    _disjoint(target, given)
    return max(0.0, entropy(p, target + given) - entropy(p, given))


def cond_mutual_info(p: JointPmf, a, b, given=()) -> float:
    """``I(A; B | G)`` in bits, computed as a divergence over the support."""
    a, b, given = _names(a), _names(b), _names(given)
    if not a or not b:
        raise StructuralError("mutual information needs two nonempty axis groups")
    _disjoint(a, b, given)
    m = marginalize(p, a + b + given)
    w = m.array(a + b + given)
    na = math.prod(w.shape[: len(a)])
    nb = math.prod(w.shape[len(a): len(a) + len(b)])
    w = w.reshape(na, nb, -1)
    pag = w.sum(axis=1, keepdims=True)
    pbg = w.sum(axis=0, keepdims=True)
    pg = w.sum(axis=(0, 1), keepdims=True)
    mask = w > 0
    num = w * pg
    den = pag * pbg
    val = float((w[mask] * np.log2(num[mask] / den[mask])).sum())
    if val < 0:
        if val < -1e-9:
            raise ArithmeticError(f"negative mutual information {val}")
        val = 0.0
    return val


def mutual_info(p: JointPmf, a, b) -> float:
    return cond_mutual_info(p, a, b, ())


def iid_power(p: JointPmf, n: int, budget: int | None = None) -> JointPmf:
    """``p`` replicated over ``n`` letters; axis ``A`` becomes ``A_00 .. A_{n-1}``."""
    if n < 1:
        raise ValueError("block length must be >= 1")
    check_budget(p.weights.size ** n, budget, "iid power")
    w = np.ones(())
    axes = []
    for t in range(n):
        w = np.multiply.outer(w, p.weights)
        axes.extend(Alphabet(letter(a.name, t), a.size) for a in p.axes)
    return JointPmf(axes, w, check=False)


def iid_kernel(k: CondPmf, n: int, budget: int | None = None) -> CondPmf:
    """Memoryless extension of a single-letter kernel to ``n`` letters."""
    m = k.matrix()
    check_budget(m.size ** n, budget, "iid kernel")
    nf, nt = len(k.from_axes), len(k.to_axes)
    w = np.ones(())
    for _ in range(n):
        w = np.multiply.outer(w, k.kernel)
    # dims are (f, t) per letter; bring all inputs first
    per = nf + nt
    order = [t * per + i for t in range(n) for i in range(nf)]
    order += [t * per + nf + i for t in range(n) for i in range(nt)]
    w = np.transpose(w, order)
    f_axes = [Alphabet(letter(a.name, t), a.size) for t in range(n) for a in k.from_axes]
    t_axes = [Alphabet(letter(a.name, t), a.size) for t in range(n) for a in k.to_axes]
    return CondPmf(f_axes, t_axes, w, check=False)


def conditional(p: JointPmf, target, given) -> CondPmf:
    """Bayes conditional ``p(target | given)``; rows of zero mass become uniform."""
    target, given = _names(target), _names(given)
    _disjoint(target, given)
    m = marginalize(p, given + target)
    w = m.array(given + target)
    ng = math.prod(w.shape[: len(given)]) if given else 1
    flat = w.reshape(ng, -1)
    mass = flat.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        rows = np.where(mass > ZERO, flat / np.where(mass > 0, mass, 1.0), 1.0 / flat.shape[1])
    g_axes = [m.axes[m.index(n)] for n in given]
    t_axes = [m.axes[m.index(n)] for n in target]
    return CondPmf(g_axes, t_axes, rows.reshape(w.shape), check=False)
