"""Exact cosine full scan over a dense centroid matrix.

Row self-dots and row-probe dots go through the same routine, so a probe
bitwise equal to a row scores exactly 1.0 against it.
"""

from __future__ import annotations

import numpy as np

from .. import _accel
from .._accel import njit


@njit(nogil=True, cache=True)
def _row_dots_nb(mat, vec):
    n, dim = mat.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for k in range(dim):
            acc += mat[i, k] * vec[k]
        out[i] = acc
    return out


@njit(nogil=True, cache=True)
def _self_dots_nb(mat):
    n, dim = mat.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for k in range(dim):
            acc += mat[i, k] * mat[i, k]
        out[i] = acc
    return out


def self_dots(mat: np.ndarray) -> np.ndarray:
    mat = np.ascontiguousarray(mat, dtype=np.float64)
    if _accel.backend() == "numba":
        return _self_dots_nb(mat)
    return (mat * mat).sum(axis=1)


def row_dots(mat: np.ndarray, vec: np.ndarray) -> np.ndarray:
    mat = np.ascontiguousarray(mat, dtype=np.float64)
    vec = np.ascontiguousarray(vec, dtype=np.float64)
    if _accel.backend() == "numba":
        return _row_dots_nb(mat, vec)
    return (mat * vec).sum(axis=1)


def cosine_scan(mat: np.ndarray, mat_self: np.ndarray, probe: np.ndarray) -> np.ndarray:
    """Cosine of ``probe`` against every row; zero-norm rows score 0."""
    dots = row_dots(mat, probe)
    pp = float(self_dots(np.asarray(probe, dtype=np.float64)[None, :])[0])
    denom = np.sqrt(mat_self * pp)
    out = np.zeros(len(dots))
    ok = denom > 0
    out[ok] = dots[ok] / denom[ok]
    return np.clip(out, -1.0, 1.0)

