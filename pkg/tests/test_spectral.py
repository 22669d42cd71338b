import math

import numpy as np
import pytest

from qflow.errors import (
    DomainError,
    ParameterError,
    UnsupportedObjectiveError,
    ValidationError,
)
from qflow.spectral import (
    SpectralObjective,
    builtin_objective,
    conjugate_eval,
    eigh,
    lift_eval,
    moreau_eval_grad,
    moreau_objective,
    project_weighted_l1_ball,
    shifted_objective,
    spectral_subgradient,
    tie_groups,
    value_and_subgradient,
)

RNG = np.random.default_rng(42)


def random_hermitian(n, rng=RNG):
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (M + M.conj().T)


def random_density(n, rng=RNG):
    M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    P = M @ M.conj().T + 0.05 * np.eye(n)
    return P / np.trace(P).real


ALL_KINDS = [
    ("frobenius", {}),
    ("op_norm_max_weighted", {"alpha": [1.0, 2.0]}),
    ("trace_norm_sum_weighted", {"weights": [1.0, 0.5]}),
    ("neg_entropy_weighted", {"theta": [0.4, 0.6]}),
    ("trace_dist_to_uniform", {}),
    ("indicator_trace_ball", {"radius": 3.0}),
]

DIMS = (3, 2)


def make(kind, params):
    return builtin_objective(kind, DIMS, **params)


def sample_point(kind, rng):
    if kind == "neg_entropy_weighted":
        return [random_density(n, rng) for n in DIMS]
    if kind == "indicator_trace_ball":
        blocks = [random_hermitian(n, rng) for n in DIMS]
        tot = sum(np.sum(np.abs(np.linalg.eigvalsh(B))) for B in blocks)
        return [0.5 * B / tot for B in blocks]
    return [random_hermitian(n, rng) for n in DIMS]


def test_eigh_sorted_and_deterministic():
    H = random_hermitian(4)
    r1 = eigh(H)
    r2 = eigh(H.copy())
    assert np.all(np.diff(r1.values) <= 1e-12)
    assert np.allclose(r1.basis, r2.basis)
    assert np.allclose((r1.basis * r1.values) @ r1.basis.conj().T, H, atol=1e-10)


def test_eigh_rejects_non_hermitian():
    with pytest.raises(ValidationError):
        eigh(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_tie_groups():
    lam = np.array([2.0, 2.0, 1.0, 1.0 - 1e-12, 0.0])
    groups = tie_groups(lam)
    assert [g.indices(5)[:2] for g in groups] == [(0, 2), (2, 4), (4, 5)]


def test_l1_projection_against_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = rng.standard_normal(4)
        w = rng.uniform(0.5, 2.0, 4)
        r = rng.uniform(0.1, 2.0)
        x = project_weighted_l1_ball(p, w, r)
        assert np.abs(x) @ w <= r + 1e-9
        # no feasible point is closer (random probes)
        d0 = np.sum((x - p) ** 2)
        for _ in range(200):
            y = x + 0.1 * rng.standard_normal(4)
            if np.abs(y) @ w <= r:
                assert np.sum((y - p) ** 2) >= d0 - 1e-9


@pytest.mark.parametrize("kind,params", ALL_KINDS)
def test_fenchel_young_equality(kind, params):
    S = make(kind, params)
    rng = np.random.default_rng(7)
    for _ in range(30):
        Y = sample_point(kind, rng)
        val = lift_eval(S, Y)
        G = spectral_subgradient(S, Y)
        conj = conjugate_eval(S, G)
        pair = sum(float(np.real(np.trace(A @ B))) for A, B in zip(Y, G))
        assert abs(val + conj - pair) < 1e-8


@pytest.mark.parametrize("kind,params", ALL_KINDS)
def test_unitary_invariance(kind, params):
    S = make(kind, params)
    rng = np.random.default_rng(11)
    for _ in range(10):
        Y = sample_point(kind, rng)
        rotated = []
        for B in Y:
            n = B.shape[0]
            U = np.linalg.qr(
                rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            )[0]
            rotated.append(U @ B @ U.conj().T)
        assert abs(lift_eval(S, Y) - lift_eval(S, rotated)) < 1e-10


@pytest.mark.parametrize("kind,params", ALL_KINDS)
def test_prox_optimality(kind, params):
    """prox output must beat random feasible competitors on the prox objective."""
    S = make(kind, params)
    rng = np.random.default_rng(13)
    lam = 0.7
    for _ in range(10):
        p = np.concatenate(
            [np.sort(np.linalg.eigvalsh(B))[::-1] for B in sample_point(kind, rng)]
        )
        q = np.asarray(S.oracle.prox(p, lam), dtype=float)
        base = S.oracle.eval(q) + np.sum((p - q) ** 2) / (2 * lam)
        assert math.isfinite(base)
        for _ in range(60):
            if kind == "neg_entropy_weighted":
                blocks = []
                for n in DIMS:
                    z = rng.dirichlet(np.ones(n))
                    blocks.append(np.sort(z)[::-1])
                y = np.concatenate(blocks)
            else:
                y = q + 0.05 * rng.standard_normal(q.size)
            cand = S.oracle.eval(y) + np.sum((p - y) ** 2) / (2 * lam)
            assert cand >= base - 1e-6


def test_entropy_conjugate_matches_brute_force():
    S = make("neg_entropy_weighted", {"theta": [0.4, 0.6]})
    rng = np.random.default_rng(17)
    for _ in range(10):
        x = rng.standard_normal(sum(DIMS))
        # sup over the product of simplices via dense grid on each block
        got = S.oracle.conjugate_eval(x)
        brute = 0.0
        offset = 0
        for n, th in zip(DIMS, (0.4, 0.6)):
            xb = x[offset : offset + n]
            offset += n
            best = -np.inf
            for _ in range(4000):
                q = rng.dirichlet(np.ones(n))
                qpos = np.clip(q, 1e-300, None)
                best = max(best, xb @ q - th * np.sum(q * np.log2(qpos)))
            brute = brute + best
        assert brute <= got + 1e-9
        assert got - brute < 5e-3


def test_moreau_envelope_below_function_and_smooth():
    S = make("trace_dist_to_uniform", {})
    E = moreau_objective(S, 0.5)
    assert E.smooth
    rng = np.random.default_rng(19)
    for _ in range(10):
        Y = [random_density(n, rng) for n in DIMS]
        assert lift_eval(E, Y) <= lift_eval(S, Y) + 1e-12


def test_moreau_conjugate_identity():
    """(e_lam S)* = S* + (lam/2)||.||^2, checked through Fenchel-Young pairs."""
    lam = 0.3
    for kind, params in ALL_KINDS:
        S = make(kind, params)
        E = moreau_objective(S, lam)
        rng = np.random.default_rng(23)
        for _ in range(20):
            Y = sample_point(kind, rng)
            val, G = value_and_subgradient(E, Y)
            conj = conjugate_eval(E, G)
            pair = sum(float(np.real(np.trace(A @ B))) for A, B in zip(Y, G))
            assert abs(val + conj - pair) < 1e-6
            # and the conjugate is the shifted-quadratic form of S*
            g = np.concatenate([np.sort(np.linalg.eigvalsh(B))[::-1] for B in G])
            expected = S.oracle.conjugate_eval(g) + 0.5 * lam * float(g @ g)
            assert abs(conj - expected) < 1e-9


def test_moreau_requires_prox():
    S = make("frobenius", {})
    stripped = SpectralObjective(
        oracle=type(S.oracle)(
            arity=S.oracle.arity,
            eval=S.oracle.eval,
            conjugate_eval=S.oracle.conjugate_eval,
            subgradient=S.oracle.subgradient,
            prox=None,
        ),
        block_dims=S.block_dims,
    )
    with pytest.raises(UnsupportedObjectiveError):
        moreau_objective(stripped, 0.1)
    with pytest.raises(UnsupportedObjectiveError):
        moreau_eval_grad(stripped, 0.1, [np.eye(n) for n in DIMS])


def test_shifted_objective():
    S = make("frobenius", {})
    T = shifted_objective(S, 2.5)
    Y = [np.eye(n) for n in DIMS]
    assert abs(lift_eval(T, Y) - lift_eval(S, Y) - 2.5) < 1e-12
    X = [0.1 * np.eye(n) for n in DIMS]
    assert abs(conjugate_eval(T, X) - conjugate_eval(S, X) + 2.5) < 1e-12


def test_subgradient_basis_stability_under_ties():
    S = make("trace_norm_sum_weighted", {"weights": [1.0, 0.5]})
    rng = np.random.default_rng(29)
    Y = [np.eye(3), np.eye(2)]  # fully degenerate spectra
    G1 = spectral_subgradient(S, Y)
    # perturb by a tiny rotation: subgradient should barely move
    U = np.linalg.qr(np.eye(3) + 1e-13 * rng.standard_normal((3, 3)))[0]
    G2 = spectral_subgradient(S, [U @ Y[0] @ U.T, Y[1]])
    assert np.max(np.abs(G1[0] - G2[0])) < 1e-9


def test_entropy_domain_errors():
    S = make("neg_entropy_weighted", {"theta": [0.4, 0.6]})
    bad = [np.diag([1.2, 0.1, -0.3]), np.eye(2) / 2]
    with pytest.raises(DomainError):
        lift_eval(S, bad)


def test_parameter_validation():
    with pytest.raises(ParameterError):
        builtin_objective("neg_entropy_weighted", DIMS, theta=[0.7, 0.7])
    with pytest.raises(ParameterError):
        builtin_objective("op_norm_max_weighted", DIMS, alpha=[1.0, -1.0])
    with pytest.raises(ParameterError):
        builtin_objective("indicator_trace_ball", DIMS, radius=-1.0)
    with pytest.raises(ParameterError):
        builtin_objective("no_such_kind", DIMS)


def test_frobenius_half_square_conjugate():
    S = make("frobenius", {})
    s = np.array([1.0, -2.0, 0.5, 0.0, 1.5])
    assert abs(S.oracle.half_square_conjugate(s) - 0.5 * s @ s) < 1e-12
