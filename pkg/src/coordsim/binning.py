"""Random binning of sequences and the bin-constrained MAP (Slepian-Wolf) decoder.

A :class:`BinningPair` stores two independent uniform bin assignments of every
sequence in ``U^n``: ``phi1`` into ``M0 = ceil(2^(n R0))`` bins (the common
randomness ``C``) and ``phi2`` into ``Mt = ceil(2^(n Rtilde))`` bins (the
extra randomness ``F``). The two assignments come from independent child
streams of one seed, so ``phi2`` does not change when ``R0`` does.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .channel import alphabet_size
from .probcore import check_budget
from .seqarray import kron_power

TIE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class BinningPair:
    n: int
    R0: float
    Rtilde: float
    u_size: int
    seed: int
    phi1: np.ndarray = field(repr=False)
    phi2: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("phi1", "phi2"):
            arr = np.asarray(getattr(self, name), dtype=np.int64)
            if arr.shape != (self.u_size ** self.n,):
                raise ValueError(f"{name} must have one entry per sequence")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.phi1.size and (self.phi1.min() < 0 or self.phi1.max() >= self.m0):
            raise ValueError("phi1 out of range")
        if self.phi2.size and (self.phi2.min() < 0 or self.phi2.max() >= self.mtilde):
            raise ValueError("phi2 out of range")

    @property
    def m0(self) -> int:
        return alphabet_size(self.n, self.R0)

    @property
    def mtilde(self) -> int:
        return alphabet_size(self.n, self.Rtilde)

    @property
    def keys(self) -> np.ndarray:
        """Joint bin index ``phi1 * Mt + phi2`` of every sequence."""
        return self.phi1 * self.mtilde + self.phi2

    def is_injective(self) -> bool:
        return np.unique(self.keys).size == self.keys.size

    def __eq__(self, other):
        if not isinstance(other, BinningPair):
            return NotImplemented
        return (
            (self.n, self.R0, self.Rtilde, self.u_size, self.seed)
            == (other.n, other.R0, other.Rtilde, other.u_size, other.seed)
            and np.array_equal(self.phi1, other.phi1)
            and np.array_equal(self.phi2, other.phi2)
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "R0": self.R0,
            "Rtilde": self.Rtilde,
            "u_size": self.u_size,
            "seed": self.seed,
            "phi1": self.phi1.tolist(),
            "phi2": self.phi2.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "BinningPair":
        return cls(int(d["n"]), float(d["R0"]), float(d["Rtilde"]), int(d["u_size"]),
                   int(d["seed"]), np.asarray(d["phi1"]), np.asarray(d["phi2"]))

    def to_bytes(self) -> bytes:
        """Binary export: JSON header line, then ``phi1`` and ``phi2`` as little-endian int64."""
        head = {k: v for k, v in self.to_dict().items() if k not in ("phi1", "phi2")}
        return (json.dumps(head) + "\n").encode() + self.phi1.astype("<i8").tobytes() + self.phi2.astype("<i8").tobytes()

    @classmethod
    def from_bytes(cls, raw: bytes) -> "BinningPair":
        line, body = raw.split(b"\n", 1)
        head = json.loads(line)
        count = head["u_size"] ** head["n"]
        arr = np.frombuffer(body, dtype="<i8")
        return cls(head["n"], head["R0"], head["Rtilde"], head["u_size"], head["seed"],
                   arr[:count].copy(), arr[count:2 * count].copy())


def sample_binning(n: int, R0: float, Rtilde: float, u_size: int, seed: int,
                   budget: int | None = None) -> BinningPair:
    """Draw both bin assignments i.i.d. uniform; deterministic in ``seed``."""
    count = u_size ** n
    check_budget(count, budget, "binning")
    s1, s2 = np.random.SeedSequence(seed).spawn(2)
    phi1 = np.random.default_rng(s1).integers(alphabet_size(n, R0), size=count)
    phi2 = np.random.default_rng(s2).integers(alphabet_size(n, Rtilde), size=count)
    return BinningPair(n, R0, Rtilde, u_size, int(seed), phi1, phi2)


@dataclass(frozen=True, eq=False)
class SWDecoder:
    """MAP decoder of ``U^n`` from its bins and side information ``Y^n``.

    ``joint_uy[u, y]`` is the reference law of the sequence pair. Among the
    sequences in bin ``(c, f)`` the decoder returns the most likely one given
    ``y``; ties go to the smallest sequence index. An empty bin yields
    sequence 0 and is flagged.
    """

    joint_uy: np.ndarray = field(repr=False)
    binning: BinningPair

    @classmethod
    def from_letter_joint(cls, joint1: np.ndarray, binning: BinningPair) -> "SWDecoder":
        return cls(kron_power(np.asarray(joint1, dtype=float), binning.n), binning)

    @cached_property
    def _table(self):
        b = self.binning
        nu, ny = self.joint_uy.shape
        keys = b.keys
        nk = b.m0 * b.mtilde
        table = np.zeros((nk, ny), dtype=np.int64)
        empty = np.ones(nk, dtype=bool)
        order = np.argsort(keys, kind="stable")
        bounds = np.searchsorted(keys[order], np.arange(nk + 1))
        for k in range(nk):
            members = order[bounds[k]: bounds[k + 1]]
            if members.size == 0:
                continue
            empty[k] = False
            sub = self.joint_uy[members]
            best = sub.max(axis=0)
            near = sub >= best * (1.0 - TIE_RTOL)
            table[k] = members[np.argmax(near, axis=0)]
        table.setflags(write=False)
        empty.setflags(write=False)
        return table.reshape(b.m0, b.mtilde, ny), empty.reshape(b.m0, b.mtilde)

    @property
    def table(self) -> np.ndarray:
        """``table[c, f, y]``: decoded sequence index."""
        return self._table[0]

    @property
    def empty_bins(self) -> np.ndarray:
        return self._table[1]

    def decode(self, c: int, f: int, y: int) -> tuple[int, bool]:
        """Decoded sequence and whether the empty-bin fallback fired."""
        return int(self.table[c, f, y]), bool(self.empty_bins[c, f])


def sw_decode(dec: SWDecoder, c: int, f: int, y: int) -> tuple[int, bool]:
    return dec.decode(c, f, y)


def sw_error_prob(dec: SWDecoder, joint_uy: np.ndarray | None = None) -> float:
    """Exact ``P{decode(phi1(U), phi2(U), Y) != U}`` under ``joint_uy``."""
    joint = dec.joint_uy if joint_uy is None else np.asarray(joint_uy)
    b = dec.binning
    decoded = dec.table[b.phi1, b.phi2, :]
    wrong = decoded != np.arange(joint.shape[0])[:, None]
    return float(joint[wrong].sum())


def mean_sw_error(joint1: np.ndarray, n: int, R0: float, Rtilde: float, seeds) -> float:
    """Average exact SW error over independently drawn binnings."""
    joint1 = np.asarray(joint1, dtype=float)
    ref = kron_power(joint1, n)
    errs = [
        sw_error_prob(SWDecoder(ref, sample_binning(n, R0, Rtilde, joint1.shape[0], s)))
        for s in seeds
    ]
    return float(np.mean(errs))


def binning_gap(joint_ab: np.ndarray, bins: np.ndarray, m: int) -> float:
    """TV between ``P_{A^n K}`` and ``Q_K P_{A^n}`` for ``K = bins[B^n]``.

    ``joint_ab[a, b]`` is the sequence-indexed law of ``(A^n, B^n)``.
    """
    na = joint_ab.shape[0]
    p_ak = np.zeros((na, m))
    np.add.at(p_ak.T, bins, joint_ab.T)
    p_a = joint_ab.sum(axis=1)
    return float(0.5 * np.abs(p_ak - p_a[:, None] / m).sum())


def osrb_gap(joint1: np.ndarray, n: int, rate: float, seeds, budget: int | None = None) -> tuple[float, list[float]]:
    """Mean over binning seeds of the exact output-statistics gap.

    ``joint1[a, b]`` is the single-letter law of the side variable ``A`` and
    the binned variable ``B``; ``K`` bins ``B^n`` into ``ceil(2^(n R))``
    values. Returns the mean and the per-seed gaps.
    """
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    joint1 = np.asarray(joint1, dtype=float)
    check_budget(joint1.size ** n, budget, "OSRB joint")
    joint = kron_power(joint1, n)
    m = alphabet_size(n, rate)
    gaps = [binning_gap(joint, sample_binning(n, rate, 0.0, joint1.shape[1], s).phi1, m) for s in seeds]
    return float(np.mean(gaps)), gaps


def intersect_binning_check(gaps1, gaps2, eps: float) -> bool:
    """Whether some seed keeps both gaps below ``eps``.

    Both lists are indexed by the same seed stream (the ``phi2`` draw is
    shared), mirroring the intersection of two events each of probability
    above one half.
    """
    gaps1, gaps2 = list(gaps1), list(gaps2)
    if not gaps1 or len(gaps1) != len(gaps2):
        raise ValueError("need two nonempty gap lists of equal length")
    return any(a < eps and b < eps for a, b in zip(gaps1, gaps2))


def markov_fraction(gaps, eps: float) -> float:
    """Fraction of seeds with gap below ``eps`` (Markov gives ``> 1 - mean/eps``)."""
    gaps = np.asarray(list(gaps))
    return float(np.mean(gaps < eps))


