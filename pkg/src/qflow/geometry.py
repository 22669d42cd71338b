"""Geometry of R^n0 x P_{n1} x ... x P_{nd}: geodesics, parallel transport,
log map, distance, and normal forms of geodesic rays at infinity.

Each PD factor carries the GL-invariant metric <X,Y>_x = tr(x^-1 X x^-1 Y);
the Euclidean factor is flat.  All matrix functions go through Hermitian
eigendecomposition (dims are small and spectra are needed anyway).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError
from .spectral import check_hermitian, eigh


def _herm_fun(H, fn):
    w, U = np.linalg.eigh(H)
    return (U * fn(w)) @ U.conj().T


def sqrtm_pd(x):
    return _herm_fun(x, np.sqrt)


def inv_sqrtm_pd(x):
    return _herm_fun(x, lambda w: 1.0 / np.sqrt(w))


def expm_herm(H):
    return _herm_fun(H, np.exp)


def logm_pd(x):
    return _herm_fun(x, np.log)


def _symmetrize(H):
    return 0.5 * (H + H.conj().T)


@dataclass
class ProductPDPoint:
    """A point of R^n0 x P_{n1} x ... x P_{nd}."""

    euclid: np.ndarray
    blocks: list

    @classmethod
    def identity(cls, dims, n_euclid=0):
        return cls(
            euclid=np.zeros(n_euclid),
            blocks=[np.eye(n, dtype=complex) for n in dims],
        )

    @property
    def dims(self):
        return tuple(B.shape[0] for B in self.blocks)

    def validate(self):
        for i, B in enumerate(self.blocks):
            check_hermitian(B, f"block {i}")
            w = np.linalg.eigvalsh(B)
            if w[0] <= 1e-12 * max(1.0, w[-1]):
                raise ValidationError(
                    f"block {i} is not positive definite (min eig {w[0]:.3e})"
                )
        return self


@dataclass
class TangentBlock:
    """A tangent (or, via the trace pairing, cotangent) vector.

    `at` is None for vectors at the base point (0, I, ..., I).
    """

    euclid: np.ndarray
    blocks: list
    at: Optional[ProductPDPoint] = None

    @classmethod
    def zero(cls, dims, n_euclid=0, at=None):
        return cls(np.zeros(n_euclid), [np.zeros((n, n), dtype=complex) for n in dims], at)

    @property
    def dims(self):
        return tuple(B.shape[0] for B in self.blocks)

    def scaled(self, c):
        return TangentBlock(c * self.euclid, [c * B for B in self.blocks], self.at)


@dataclass
class BoundaryCertificate:
    """Normal form of a geodesic ray at infinity: per-factor unitary basis
    (leading columns span the flag) and nonincreasing weights."""

    euclid_dir: np.ndarray
    bases: list
    weights: list

    @property
    def dims(self):
        return tuple(k.shape[0] for k in self.bases)

    def tangent_at_base(self):
        """The tangent vector k diag(w) k^+ per block representing this ray."""
        blocks = [
            _symmetrize((k * w) @ k.conj().T) for k, w in zip(self.bases, self.weights)
        ]
        return TangentBlock(np.array(self.euclid_dir, dtype=float), blocks, at=None)

    def scaled(self, c):
        return BoundaryCertificate(
            c * np.asarray(self.euclid_dir, dtype=float),
            [k.copy() for k in self.bases],
            [c * np.asarray(w, dtype=float) for w in self.weights],
        )


def _check_pair(x, H):
    if x.dims != H.dims or x.euclid.size != H.euclid.size:
        raise ValidationError(f"signature mismatch: {x.dims} vs {H.dims}")


def geodesic(x, H, t):
    """The geodesic through x with initial velocity H, evaluated at time t."""
    if not np.isfinite(t):
        raise ValidationError("geodesic parameter must be finite")
    _check_pair(x, H)
    blocks = []
    for xb, Hb in zip(x.blocks, H.blocks):
        xs = sqrtm_pd(xb)
        xis = inv_sqrtm_pd(xb)
        A = _symmetrize(xis @ Hb @ xis)
        blocks.append(_symmetrize(xs @ expm_herm(t * A) @ xs))
    return ProductPDPoint(x.euclid + t * H.euclid, blocks)


def transport_to_base(x, H):
    """Parallel transport of a tangent vector at x to the base point."""
    _check_pair(x, H)
    blocks = []
    for xb, Hb in zip(x.blocks, H.blocks):
        xis = inv_sqrtm_pd(xb)
        blocks.append(_symmetrize(xis @ Hb @ xis))
    return TangentBlock(H.euclid.copy(), blocks, at=None)


def transport_from_base(x, H):
    """Inverse of transport_to_base: carry a base tangent vector to x."""
    blocks = []
    for xb, Hb in zip(x.blocks, H.blocks):
        xs = sqrtm_pd(xb)
        blocks.append(_symmetrize(xs @ Hb @ xs))
    return TangentBlock(H.euclid.copy(), blocks, at=x)


def log_map(x, base=None):
    """Initial velocity of the geodesic from `base` (default identity) to x."""
    if base is None:
        blocks = [logm_pd(B) for B in x.blocks]
        return TangentBlock(x.euclid.copy(), blocks, at=None)
    blocks = []
    for bb, xb in zip(base.blocks, x.blocks):
        bs = sqrtm_pd(bb)
        bis = inv_sqrtm_pd(bb)
        L = logm_pd(_symmetrize(bis @ xb @ bis))
        blocks.append(_symmetrize(bs @ L @ bs))
    return TangentBlock(x.euclid - base.euclid, blocks, at=base)


def metric_norm(x, H):
    """Riemannian norm of a tangent vector at x."""
    total = float(H.euclid @ H.euclid)
    for xb, Hb in zip(x.blocks, H.blocks):
        xis = inv_sqrtm_pd(xb)
        A = xis @ Hb @ xis
        total += float(np.sum(np.abs(A) ** 2))
    return np.sqrt(total)


def pairing(Y, X):
    """Duality pairing sum_i Re tr(Y_i X_i) + <y, x> of base covector/vector."""
    total = float(np.real(Y.euclid @ X.euclid)) if Y.euclid.size else 0.0
    for Yb, Xb in zip(Y.blocks, X.blocks):
        total += float(np.real(np.trace(Yb @ Xb)))
    return total


def distance(x, y):
    """Geodesic distance on the product manifold."""
    if x.dims != y.dims or x.euclid.size != y.euclid.size:
        raise ValidationError(f"signature mismatch: {x.dims} vs {y.dims}")
    total = float(np.sum((x.euclid - y.euclid) ** 2))
    for xb, yb in zip(x.blocks, y.blocks):
        xis = inv_sqrtm_pd(xb)
        w = np.linalg.eigvalsh(_symmetrize(xis @ yb @ xis))
        total += float(np.sum(np.log(w) ** 2))
    return np.sqrt(total)


def asymptotic_at_base(x, H):
    """Normal form (basis, weights) of the ray t -> geodesic(x, H, t).

    Per block: eigendecompose x^-1/2 H x^-1/2 = u diag(lam) u^+ with lam
    nonincreasing, QR-factor x^1/2 u = k b with positive-diagonal b.  The ray
    from the identity with velocity k diag(lam) k^+ is asymptotic to the input
    ray.
    """
    _check_pair(x, H)
    size = metric_norm(x, H)
    if size <= 0.0:
        raise ValidationError("zero tangent vector spans no ray")
    bases = []
    weights = []
    for xb, Hb in zip(x.blocks, H.blocks):
        xs = sqrtm_pd(xb)
        xis = inv_sqrtm_pd(xb)
        r = eigh(_symmetrize(xis @ Hb @ xis), "transported velocity")
        g = xs @ r.basis
        q, rr = np.linalg.qr(g)
        diag = np.diagonal(rr)
        phases = diag / np.abs(diag)
        k = q * phases  # make the triangular factor's diagonal real positive
        bases.append(k)
        weights.append(r.values.copy())
    return BoundaryCertificate(H.euclid.copy(), bases, weights)
