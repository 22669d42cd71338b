"""Seeded instance generators for tensors and matrix pencils."""

from __future__ import annotations

import numpy as np

from . import tensors
from .apps import MatrixPencil
from .errors import ParameterError


def gaussian_tensor(dims, seed):
    """Complex standard Gaussian tensor of the given shape."""
    rng = np.random.default_rng(seed)
    return rng.standard_normal(tuple(dims)) + 1j * rng.standard_normal(tuple(dims))


def rank_one_tensor(dims, seed):
    rng = np.random.default_rng(seed)
    vecs = [
        rng.standard_normal(n) + 1j * rng.standard_normal(n) for n in dims
    ]
    return tensors.rank_one(vecs)


def random_pencil(n, m, seed):
    rng = np.random.default_rng(seed)
    mats = [
        rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        for _ in range(m)
    ]
    return MatrixPencil(mats)


def skew_pencil():
    """The 3x3 skew-symmetric pencil in three variables."""
    A1 = np.array([[0, 1, 0], [-1, 0, 0], [0, 0, 0]], dtype=complex)
    A2 = np.array([[0, 0, 1], [0, 0, 0], [-1, 0, 0]], dtype=complex)
    A3 = np.array([[0, 0, 0], [0, 0, 1], [0, -1, 0]], dtype=complex)
    return MatrixPencil([A1, A2, A3])


def identity_pencil(n):
    """Single-variable pencil x1 * I_n."""
    return MatrixPencil([np.eye(n, dtype=complex)])


def generate(kind, dims, seed=0):
    """Dispatch for the CLI generator: returns a tensor or a pencil."""
    if kind == "gaussian":
        return gaussian_tensor(dims, seed)
    if kind == "unit":
        if len(dims) != 2:
            raise ParameterError("unit kind takes dims = (n, d)")
        n, d = dims
        return tensors.unit_tensor(int(n), int(d))
    if kind == "rank_one":
        return rank_one_tensor(dims, seed)
    if kind == "skew_pencil":
        return skew_pencil()
    if kind == "random_pencil":
        if len(dims) != 2:
            raise ParameterError("random_pencil kind takes dims = (n, m)")
        return random_pencil(int(dims[0]), int(dims[1]), seed)
    raise ParameterError(f"unknown generator kind {kind!r}")
