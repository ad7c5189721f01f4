"""Sequence-indexed arrays.

Block quantities are stored with one flat index per sequence, letter 0 most
significant (the order ``np.kron`` and ``np.ravel_multi_index`` produce).
"""
from __future__ import annotations

import math

import numpy as np


def kron_power(a: np.ndarray, n: int) -> np.ndarray:
    """``a ⊗ a ⊗ ... ⊗ a`` (``n`` factors); vectors stay vectors."""
    out = np.ones((1,) * a.ndim)
    for _ in range(n):
        out = np.kron(out, a)
    return out


def seq_power(k: np.ndarray, n: int) -> np.ndarray:
    """Memoryless power of a single-letter array with any number of axes.

    ``k`` of shape ``(a, b, ..., z)`` becomes shape ``(a^n, b^n, ..., z^n)``
    with entry ``prod_t k[a_t, b_t, ..., z_t]``.
    """
    m = k.ndim
    out = np.ones(())
    for _ in range(n):
        out = np.multiply.outer(out, k)
    order = [t * m + i for i in range(m) for t in range(n)]
    return np.transpose(out, order).reshape([d ** n for d in k.shape])


def digits(n: int, base: int) -> np.ndarray:
    """All ``base^n`` sequences as rows of letters."""
    idx = np.arange(base ** n)
    out = np.empty((idx.size, n), dtype=np.int64)
    for t in range(n - 1, -1, -1):
        out[:, t] = idx % base
        idx = idx // base
    return out


def interleave(arr: np.ndarray, sizes: tuple[int, ...], n: int) -> np.ndarray:
    """Grouped ``(A^n, B^n, ...)`` layout to per-letter ``((A B ...)^n)`` layout.

    Leading axes beyond the grouped ones are kept in front.
    """
    g = len(sizes)
    lead = arr.shape[: arr.ndim - g]
    a = arr.reshape(lead + tuple(s for s in sizes for _ in range(n)))
    nl = len(lead)
    order = list(range(nl)) + [nl + i * n + t for t in range(n) for i in range(g)]
    return np.transpose(a, order).reshape(lead + (math.prod(sizes),) * n)


def group(arr: np.ndarray, sizes: tuple[int, ...], n: int) -> np.ndarray:
    """Inverse of :func:`interleave`: per-letter layout back to grouped sequences."""
    g = len(sizes)
    lead = arr.shape[: arr.ndim - n]
    a = arr.reshape(lead + tuple(sizes) * n)
    nl = len(lead)
    order = list(range(nl)) + [nl + t * g + i for i in range(g) for t in range(n)]
    return np.transpose(a, order).reshape(lead + tuple(s ** n for s in sizes))


def letterwise(arr: np.ndarray, kernel: np.ndarray, n: int) -> np.ndarray:
    """Apply a single-letter kernel ``(d_in, d_out)`` to each of the last ``n`` axes."""
    lead = arr.ndim - n
    out = arr
    for _ in range(n):
        out = np.tensordot(out, kernel, axes=([lead], [0]))
    return out
