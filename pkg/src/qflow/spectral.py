"""Convex analysis of symmetric vector functions and their unitarily invariant
lifts to tuples of Hermitian matrices.

A symmetric convex function f on R^n lifts to a unitarily invariant convex
function F on Hermitian matrices via F(k diag(lam) k^+) = f(lam).  Evaluation,
conjugation, subgradients and Moreau smoothing of F all reduce to the vector
level through the eigenvalues, which is what this module implements for tuples
of blocks (one block per tensor mode).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.special import lambertw, logsumexp

from .errors import DomainError, ParameterError, UnsupportedObjectiveError, ValidationError

LN2 = math.log(2.0)

# Spread below which eigenvalues are treated as a tie group when selecting
# subgradients (keeps the lifted subgradient basis-stable).
TIE_TOL = 1e-9


def check_hermitian(H, name="matrix"):
    """Raise ValidationError unless H is Hermitian within roundoff."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {H.shape}")
    scale = 1.0 + (np.max(np.abs(H)) if H.size else 0.0)
    dev = np.abs(H - H.conj().T)
    worst = float(np.max(dev)) if dev.size else 0.0
    if worst > 1e-12 * scale:
        i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
        raise ValidationError(
            f"{name} is not Hermitian: |H[{i},{j}] - conj(H[{j},{i}])| = {worst:.3e}"
        )
    return H


def _canonical_phases(basis):
    """Fix the free phase of each eigenvector: first nonzero entry real positive."""
    out = np.array(basis, copy=True)
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if nz.size:
            ph = col[nz[0]]
            out[:, j] = col * (ph.conjugate() / abs(ph))
    return out


@dataclass(frozen=True)
class EighResult:
    """Eigenvalues sorted nonincreasing with an aligned unitary basis."""

    values: np.ndarray
    basis: np.ndarray


def eigh(H, name="matrix"):
    """Hermitian eigendecomposition with nonincreasing eigenvalues.

    Deterministic for a fixed input: numpy's eigh plus phase canonicalization
    of each eigenvector column.
    """
    H = check_hermitian(H, name)
    w, U = np.linalg.eigh(H)
    w = w[::-1].copy()
    U = _canonical_phases(U[:, ::-1])
    return EighResult(values=w, basis=U)


def tie_groups(lam, tol=TIE_TOL):
    """Partition indices of a nonincreasing vector into near-equal groups."""
    lam = np.asarray(lam, dtype=float)
    n = lam.size
    scale = tol * (1.0 + (np.max(np.abs(lam)) if n else 0.0))
    groups = []
    start = 0
    for i in range(1, n):
        if lam[start] - lam[i] > scale:
            groups.append(slice(start, i))
            start = i
    if n:
        groups.append(slice(start, n))
    return groups


@dataclass
class SymmetricFunctionOracle:
    """Oracle bundle for a symmetric convex function of concatenated block spectra.

    All callables act on the concatenation of per-block vectors (lengths given
    by `arity`).  `prox` solves min_q f(q) + ||p-q||^2/(2*lam); it may be None
    for objectives without a usable proximal map.
    """

    arity: tuple
    eval: Callable[[np.ndarray], float]
    conjugate_eval: Callable[[np.ndarray], float]
    subgradient: Callable[[np.ndarray], np.ndarray]
    prox: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    smooth: bool = False
    half_square_conjugate: Optional[Callable[[np.ndarray], float]] = None


@dataclass
class SpectralObjective:
    """A K-invariant convex objective on tuples of Hermitian blocks."""

    oracle: SymmetricFunctionOracle
    block_dims: tuple
    label: str = ""

    @property
    def smooth(self):
        return self.oracle.smooth


def _split(p, dims):
    p = np.asarray(p, dtype=float)
    if p.size != sum(dims):
        raise ValidationError(f"vector length {p.size} != sum of block dims {dims}")
    return np.split(p, np.cumsum(dims)[:-1])


def _check_blocks(S, Y):
    if len(Y) != len(S.block_dims):
        raise ValidationError(
            f"expected {len(S.block_dims)} blocks, got {len(Y)}"
        )
    for d, B in zip(S.block_dims, Y):
        B = np.asarray(B)
        if B.shape != (d, d):
            raise ValidationError(f"block shape {B.shape} incompatible with dim {d}")


def _block_spectra(S, Y):
    """Eigendecompose every block; return (concatenated spectra, decompositions)."""
    _check_blocks(S, Y)
    decomps = [eigh(B) for B in Y]
    spectra = np.concatenate([r.values for r in decomps]) if decomps else np.zeros(0)
    return spectra, decomps


def lift_eval(S, Y):
    """Value of the lifted objective at Hermitian blocks Y."""
    spectra, _ = _block_spectra(S, Y)
    return float(S.oracle.eval(spectra))


def conjugate_eval(S, X):
    """Value of the Fenchel conjugate of the lifted objective at blocks X."""
    spectra, _ = _block_spectra(S, X)
    return float(S.oracle.conjugate_eval(spectra))


def spectral_subgradient(S, Y):
    """A subgradient of the lifted objective, as Hermitian blocks.

    The vector subgradient is averaged over each eigenvalue tie group so the
    result does not depend on the arbitrary basis inside a degenerate
    eigenspace.
    """
    spectra, decomps = _block_spectra(S, Y)
    mu = np.asarray(S.oracle.subgradient(spectra), dtype=float)
    parts = _split(mu, S.block_dims)
    out = []
    for r, m in zip(decomps, parts):
        m = m.copy()
        for grp in tie_groups(r.values):
            m[grp] = np.mean(m[grp])
        G = (r.basis * m) @ r.basis.conj().T
        out.append(0.5 * (G + G.conj().T))
    return out


def value_and_subgradient(S, Y):
    """lift_eval and spectral_subgradient sharing one eigendecomposition pass."""
    spectra, decomps = _block_spectra(S, Y)
    val = float(S.oracle.eval(spectra))
    mu = np.asarray(S.oracle.subgradient(spectra), dtype=float)
    parts = _split(mu, S.block_dims)
    out = []
    for r, m in zip(decomps, parts):
        m = m.copy()
        for grp in tie_groups(r.values):
            m[grp] = np.mean(m[grp])
        G = (r.basis * m) @ r.basis.conj().T
        out.append(0.5 * (G + G.conj().T))
    return val, out


def moreau_eval_grad(S, lam_smooth, Y):
    """Moreau envelope value and gradient of the lifted objective at Y."""
    if S.oracle.prox is None:
        raise UnsupportedObjectiveError(
            f"objective {S.label!r} has no prox oracle; Moreau smoothing unavailable"
        )
    if not lam_smooth > 0:
        raise ParameterError("smoothing parameter must be positive")
    spectra, decomps = _block_spectra(S, Y)
    q = np.asarray(S.oracle.prox(spectra, lam_smooth), dtype=float)
    value = float(S.oracle.eval(q)) + float(np.sum((spectra - q) ** 2)) / (2 * lam_smooth)
    gvec = (spectra - q) / lam_smooth
    parts = _split(gvec, S.block_dims)
    grads = []
    for r, m in zip(decomps, parts):
        m = m.copy()
        for grp in tie_groups(r.values):
            m[grp] = np.mean(m[grp])
        G = (r.basis * m) @ r.basis.conj().T
        grads.append(0.5 * (G + G.conj().T))
    return value, grads


def moreau_objective(S, lam_smooth):
    """The Moreau envelope of S as a smooth SpectralObjective.

    Its conjugate is S* + (lam/2)||.||^2 and its prox composes with the prox
    of S, so the envelope is again a fully equipped objective.
    """
    if S.oracle.prox is None:
        raise UnsupportedObjectiveError(
            f"objective {S.label!r} has no prox oracle; Moreau smoothing unavailable"
        )
    if not lam_smooth > 0:
        raise ParameterError("smoothing parameter must be positive")
    base = S.oracle
    lam = float(lam_smooth)

    def env_eval(p):
        q = np.asarray(base.prox(p, lam), dtype=float)
        return float(base.eval(q)) + float(np.sum((np.asarray(p) - q) ** 2)) / (2 * lam)

    def env_grad(p):
        q = np.asarray(base.prox(p, lam), dtype=float)
        return (np.asarray(p, dtype=float) - q) / lam

    def env_conj(x):
        x = np.asarray(x, dtype=float)
        return float(base.conjugate_eval(x)) + 0.5 * lam * float(x @ x)

    def env_prox(p, t):
        p = np.asarray(p, dtype=float)
        q = np.asarray(base.prox(p, t + lam), dtype=float)
        return p + (t / (t + lam)) * (q - p)

    oracle = SymmetricFunctionOracle(
        arity=base.arity,
        eval=env_eval,
        conjugate_eval=env_conj,
        subgradient=env_grad,
        prox=env_prox,
        smooth=True,
    )
    return SpectralObjective(oracle, S.block_dims, label=f"moreau[{lam:g}]({S.label})")


def shifted_objective(S, shift):
    """S + shift (constant).  Shifts the conjugate by -shift; prox unchanged."""
    base = S.oracle
    c = float(shift)
    oracle = SymmetricFunctionOracle(
        arity=base.arity,
        eval=lambda p: float(base.eval(p)) + c,
        conjugate_eval=lambda x: float(base.conjugate_eval(x)) - c,
        subgradient=base.subgradient,
        prox=base.prox,
        smooth=base.smooth,
    )
    return SpectralObjective(oracle, S.block_dims, label=f"({S.label})+{c:g}")


# ---------------------------------------------------------------------------
# vector-level building blocks


def project_weighted_l1_ball(p, w, r):
    """Euclidean projection onto {x : sum_j w_j |x_j| <= r}, w > 0."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    a = np.abs(p)
    if float(a @ w) <= r:
        return p.copy()
    ratio = a / w
    order = np.argsort(ratio)[::-1]
    aw = (a * w)[order]
    w2 = (w * w)[order]
    theta_cand = (np.cumsum(aw) - r) / np.cumsum(w2)
    ok = np.nonzero(theta_cand < ratio[order])[0]
    theta = theta_cand[ok[-1]] if ok.size else theta_cand[0]
    return np.sign(p) * np.maximum(a - theta * w, 0.0)


def _soft_threshold(p, t):
    return np.sign(p) * np.maximum(np.abs(p) - t, 0.0)


def _lambert_w_exp(y):
    """W(e^y), stable for large y."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    small = y < 30.0
    out[small] = np.real(lambertw(np.exp(y[small])))
    ybig = y[~small]
    if ybig.size:
        wv = ybig - np.log(ybig)
        for _ in range(4):
            wv = wv - (wv + np.log(wv) - ybig) / (1.0 + 1.0 / wv)
        out[~small] = wv
    return out


def _entropy_prox_block(p, lam, theta):
    """Prox of q -> theta * sum q log2 q restricted to the simplex."""
    a = theta / LN2

    def q_of(nu):
        y = (p / lam - nu - a) / a - np.log(a * lam)
        return a * lam * _lambert_w_exp(y)

    lo, hi = -1.0, 1.0
    while np.sum(q_of(lo)) < 1.0:
        lo *= 2.0
        if lo < -1e12:
            break
    while np.sum(q_of(hi)) > 1.0:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.sum(q_of(mid)) > 1.0:
            lo = mid
        else:
            hi = mid
    q = q_of(0.5 * (lo + hi))
    return q / np.sum(q)


def _entropy_value_block(q, theta):
    qpos = q[q > 0.0]
    return theta * float(np.sum(qpos * np.log2(qpos)))


# ---------------------------------------------------------------------------
# built-in objectives


def builtin_objective(kind, block_dims, **params):
    """Construct one of the built-in spectral objectives.

    kinds: frobenius, op_norm_max_weighted (alpha), trace_norm_sum_weighted
    (weights), neg_entropy_weighted (theta), trace_dist_to_uniform (scale),
    indicator_trace_ball (radius).
    """
    dims = tuple(int(n) for n in block_dims)
    if any(n <= 0 for n in dims):
        raise ParameterError(f"block dims must be positive, got {dims}")
    d = len(dims)
    ntot = sum(dims)

    if kind == "frobenius":
        def ev(p):
            return float(np.linalg.norm(p))

        def conj(x):
            x = np.asarray(x, dtype=float)
            return 0.0 if np.linalg.norm(x) <= 1.0 + 1e-9 else math.inf

        def sub(p):
            p = np.asarray(p, dtype=float)
            nrm = np.linalg.norm(p)
            return p / nrm if nrm > 0 else np.zeros_like(p)

        def prox(p, lam):
            p = np.asarray(p, dtype=float)
            nrm = np.linalg.norm(p)
            return p * max(0.0, 1.0 - lam / nrm) if nrm > 0 else p.copy()

        oracle = SymmetricFunctionOracle(
            arity=dims, eval=ev, conjugate_eval=conj, subgradient=sub, prox=prox,
            smooth=True,
            half_square_conjugate=lambda s: 0.5 * float(np.asarray(s) @ np.asarray(s)),
        )
        return SpectralObjective(oracle, dims, label="frobenius")

    if kind == "op_norm_max_weighted":
        alpha = np.asarray(params.get("alpha", np.ones(d)), dtype=float)
        if alpha.size != d or np.any(alpha <= 0):
            raise ParameterError(f"alpha must be {d} positive weights, got {alpha}")
        wcoord = np.concatenate([np.full(n, a) for n, a in zip(dims, alpha)])

        def ev(p):
            return max(
                float(np.max(np.abs(b))) / a if b.size else 0.0
                for b, a in zip(_split(p, dims), alpha)
            )

        def conj(x):
            tot = sum(
                a * float(np.sum(np.abs(b))) for b, a in zip(_split(x, dims), alpha)
            )
            return 0.0 if tot <= 1.0 + 1e-9 else math.inf

        def sub(p):
            blocks = _split(p, dims)
            vals = np.array([np.max(np.abs(b)) / a for b, a in zip(blocks, alpha)])
            m = float(np.max(vals))
            g = [np.zeros(n) for n in dims]
            if m > 0:
                tied = np.nonzero(vals >= m - 1e-10 * (1.0 + m))[0]
                share = 1.0 / tied.size
                for i in tied:
                    b = blocks[i]
                    ninf = np.max(np.abs(b))
                    at = np.abs(b) >= ninf - 1e-10 * (1.0 + ninf)
                    cnt = int(np.count_nonzero(at))
                    g[i][at] = share * np.sign(b[at]) / (alpha[i] * cnt)
            return np.concatenate(g)

        def prox(p, lam):
            p = np.asarray(p, dtype=float)
            return p - project_weighted_l1_ball(p, wcoord, lam)

        oracle = SymmetricFunctionOracle(
            arity=dims, eval=ev, conjugate_eval=conj, subgradient=sub, prox=prox,
        )
        return SpectralObjective(oracle, dims, label="op_norm_max_weighted")

    if kind == "trace_norm_sum_weighted":
        weights = np.asarray(params.get("weights", np.ones(d)), dtype=float)
        if weights.size != d or np.any(weights <= 0):
            raise ParameterError(f"weights must be {d} positive values, got {weights}")

        def ev(p):
            return sum(
                w * float(np.sum(np.abs(b))) for b, w in zip(_split(p, dims), weights)
            )

        def conj(x):
            for b, w in zip(_split(x, dims), weights):
                if b.size and np.max(np.abs(b)) > w * (1.0 + 1e-9):
                    return math.inf
            return 0.0

        def sub(p):
            return np.concatenate(
                [w * np.sign(b) for b, w in zip(_split(p, dims), weights)]
            )

        def prox(p, lam):
            return np.concatenate(
                [_soft_threshold(b, lam * w) for b, w in zip(_split(p, dims), weights)]
            )

        oracle = SymmetricFunctionOracle(
            arity=dims, eval=ev, conjugate_eval=conj, subgradient=sub, prox=prox,
        )
        return SpectralObjective(oracle, dims, label="trace_norm_sum_weighted")

    if kind == "neg_entropy_weighted":
        theta = np.asarray(params["theta"], dtype=float)
        if theta.size != d or np.any(theta <= 0) or abs(np.sum(theta) - 1.0) > 1e-12:
            raise ParameterError(
                f"theta must be a strictly positive probability vector of length {d}"
            )

        def _clamp_block(q):
            if np.min(q) < -1e-10:
                raise DomainError(
                    f"entropy objective: eigenvalue {float(np.min(q)):.3e} below domain"
                )
            return np.clip(q, 0.0, None)

        def ev(p):
            total = 0.0
            for b, th in zip(_split(p, dims), theta):
                q = _clamp_block(b)
                if abs(np.sum(q) - 1.0) > 1e-6:
                    return math.inf
                total += _entropy_value_block(q, th)
            return total

        def conj(x):
            total = 0.0
            for b, th in zip(_split(x, dims), theta):
                total += th * float(logsumexp(b * LN2 / th)) / LN2
            return total

        def sub(p):
            out = []
            for b, th in zip(_split(p, dims), theta):
                q = np.clip(_clamp_block(b), 1e-300, None)
                out.append(th * np.log2(q))
            return np.concatenate(out)

        def prox(p, lam):
            return np.concatenate(
                [
                    _entropy_prox_block(b, lam, th)
                    for b, th in zip(_split(p, dims), theta)
                ]
            )

        oracle = SymmetricFunctionOracle(
            arity=dims, eval=ev, conjugate_eval=conj, subgradient=sub, prox=prox,
        )
        return SpectralObjective(oracle, dims, label="neg_entropy_weighted")

    if kind == "trace_dist_to_uniform":
        scale = float(params.get("scale", 1.0))
        if scale <= 0:
            raise ParameterError("scale must be positive")
        uniform = [np.full(n, 1.0 / n) for n in dims]

        def ev(p):
            return scale * sum(
                float(np.sum(np.abs(b - u))) for b, u in zip(_split(p, dims), uniform)
            )

        def conj(x):
            total = 0.0
            for b, u in zip(_split(x, dims), uniform):
                if b.size and np.max(np.abs(b)) > scale * (1.0 + 1e-9):
                    return math.inf
                total += float(b @ u)
            return total

        def sub(p):
            return np.concatenate(
                [scale * np.sign(b - u) for b, u in zip(_split(p, dims), uniform)]
            )

        def prox(p, lam):
            return np.concatenate(
                [
                    u + _soft_threshold(b - u, lam * scale)
                    for b, u in zip(_split(p, dims), uniform)
                ]
            )

        oracle = SymmetricFunctionOracle(
            arity=dims, eval=ev, conjugate_eval=conj, subgradient=sub, prox=prox,
        )
        return SpectralObjective(oracle, dims, label="trace_dist_to_uniform")

    if kind == "indicator_trace_ball":
        radius = float(params.get("radius", 1.0))
        if radius <= 0:
            raise ParameterError("radius must be positive")

        def ev(p):
            return 0.0 if float(np.sum(np.abs(p))) <= radius * (1.0 + 1e-9) else math.inf

        def conj(x):
            x = np.asarray(x, dtype=float)
            return radius * float(np.max(np.abs(x))) if x.size else 0.0

        def sub(p):
            return np.zeros(ntot)

        def prox_fixed(p, lam):
            # projection; lam is irrelevant for an indicator
            return project_weighted_l1_ball(p, np.ones(ntot), radius)

        oracle = SymmetricFunctionOracle(
            arity=dims, eval=ev, conjugate_eval=conj, subgradient=sub, prox=prox_fixed,
        )
        return SpectralObjective(oracle, dims, label="indicator_trace_ball")

    raise ParameterError(f"unknown objective kind {kind!r}")
