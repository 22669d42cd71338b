"""Q-gradient flow and Q-subgradient methods on products of PD manifolds.

The driving direction at a point x is computed at the base point: transport
the differential of f to the base, take d(Q^2/2) there (Q times a
subgradient of Q), and carry the result back to x.  Geodesic Euler steps
x <- x^1/2 exp(-h G) x^1/2 keep iterates exactly positive definite.

Certificates (directions at infinity) come from u = log_map(x_T)/R with
R = integral of Q along the trajectory; by weak duality their dual value
lower-bounds inf_x Q(df_x).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import UnsupportedObjectiveError, ValidationError
from .geometry import (
    BoundaryCertificate,
    ProductPDPoint,
    TangentBlock,
    asymptotic_at_base,
    expm_herm,
    log_map,
    metric_norm,
    sqrtm_pd,
    transport_from_base,
)
from .spectral import (
    conjugate_eval,
    lift_eval,
    moreau_objective,
    value_and_subgradient,
)
from . import tensors


@dataclass
class FlowConfig:
    max_iters: int = 2000
    step_rule: str = "sqrt"  # "constant" or "sqrt": step_size / sqrt(i+1)
    step_size: float = 1.0
    smoothing: Optional[float] = None  # Moreau parameter lambda
    smoothing_schedule: bool = False  # lambda_i = smoothing / sqrt(i+1)
    ode_step: float = 1e-2
    tol_stall: float = 1e-9
    stall_window: int = 500
    seed: int = 0
    record_every: int = 1
    shift: float = 0.0  # added to Q in the dynamics; keeps the Q-factor positive
    renorm_every: int = 100

    def validate(self):
        if self.max_iters < 0 or self.step_size <= 0 or self.ode_step <= 0:
            raise ValidationError("iteration counts and steps must be positive")
        if self.step_rule not in ("constant", "sqrt"):
            raise ValidationError(f"unknown step rule {self.step_rule!r}")
        if self.smoothing is not None and self.smoothing <= 0:
            raise ValidationError("smoothing parameter must be positive")
        return self

    def step(self, i):
        if self.step_rule == "constant":
            return self.step_size
        return self.step_size / math.sqrt(i + 1.0)


@dataclass
class TraceSample:
    t: float
    q_value: float  # raw (unsmoothed, unshifted) Q at the differential
    f_value: float
    r_cum: float
    step: float
    q_smooth: Optional[float] = None


@dataclass
class FlowTrace:
    samples: list = field(default_factory=list)
    final_point: Optional[ProductPDPoint] = None
    final_direction: Optional[TangentBlock] = None
    certificate: Optional[BoundaryCertificate] = None
    energy_residual: Optional[float] = None
    status: str = "unknown"
    iterations: int = 0
    best_q: float = math.inf
    best_spectra: Optional[list] = None
    renormalizations: int = 0
    # per-step energy data (populated by integrate_flow)
    energy_times: list = field(default_factory=list)
    energy_half_q2: list = field(default_factory=list)
    energy_conj_half: list = field(default_factory=list)
    energy_f: list = field(default_factory=list)

    @property
    def r_cumulative(self):
        return self.samples[-1].r_cum if self.samples else 0.0


@dataclass
class KempfNessProblem:
    """Minimum S-gradient-norm problem data for a tensor scaling instance."""

    v: np.ndarray
    modes: Optional[tuple] = None

    def __post_init__(self):
        self.v = tensors.normalize(self.v)
        if self.modes is None:
            self.modes = tuple(range(self.v.ndim))
        else:
            self.modes = tuple(self.modes)

    @property
    def signature(self):
        return tuple(self.v.shape[i] for i in self.modes)

    def value(self, x):
        return tensors.kempf_ness(self.v, x, self.modes)

    def differential(self, x):
        return tensors.kempf_ness_differential(self.v, x, self.modes)

    def recession(self, xi, support_tol=tensors.SUPPORT_TOL):
        return tensors.recession(self.v, xi, self.modes, support_tol)

    def identity_point(self):
        return ProductPDPoint.identity(self.signature)


def _direction_at_base(Q, p0, shift):
    """Raw Q value and the base-transported d((Q+shift)^2/2) at p0."""
    q, sub = value_and_subgradient(Q, p0)
    fac = q + shift
    return q, [fac * G for G in sub]


def _step_from_base(x, G, scale):
    """exp_x of the transported base direction: x^1/2 exp(scale*G) x^1/2."""
    blocks = []
    for xb, Gb in zip(x.blocks, G):
        xs = sqrtm_pd(xb)
        B = xs @ expm_herm(scale * Gb) @ xs
        blocks.append(0.5 * (B + B.conj().T))
    return ProductPDPoint(x.euclid.copy(), blocks)


def q_gradient(problem, Q, x):
    """The Q-gradient of f at x (a tangent vector at x); Q must be smooth."""
    if not Q.smooth:
        raise UnsupportedObjectiveError(
            f"objective {Q.label!r} is not smooth; wrap it with moreau_objective"
        )
    p0 = problem.differential(x)
    _, g0 = _direction_at_base(Q, p0, 0.0)
    return transport_from_base(x, TangentBlock(np.zeros(0), g0, at=None))


def _half_square_conjugate_lift(Q, blocks):
    hsc = Q.oracle.half_square_conjugate
    if hsc is None:
        return None
    spectra = np.concatenate([np.linalg.eigvalsh(B)[::-1] for B in blocks])
    return float(hsc(spectra))


def integrate_flow(problem, Q, x0, config):
    """Geodesic-Euler discretization of the Q-gradient flow.

    Steps are halved whenever the recorded Q value would increase, a backstop
    for the continuous-time monotonicity of t -> Q(df_x(t)).
    """
    config.validate()
    Qs = Q
    if not Q.smooth:
        if config.smoothing is None:
            raise UnsupportedObjectiveError(
                f"objective {Q.label!r} is not smooth; set config.smoothing"
            )
        Qs = moreau_objective(Q, config.smoothing)
    trace = FlowTrace()
    x = x0
    t = 0.0
    r_cum = 0.0
    h = config.ode_step
    h_min = config.ode_step * 2.0 ** -40
    q_prev = None
    for i in range(config.max_iters):
        p0 = problem.differential(x)
        q_raw = lift_eval(Q, p0)
        q_s, g0 = _direction_at_base(Qs, p0, config.shift)
        f_val = problem.value(x)
        trace.energy_times.append(t)
        trace.energy_half_q2.append(0.5 * (q_s + config.shift) ** 2)
        trace.energy_conj_half.append(_half_square_conjugate_lift(Qs, g0))
        trace.energy_f.append(f_val)
        if q_raw < trace.best_q:
            trace.best_q = q_raw
        if i % config.record_every == 0:
            trace.samples.append(
                TraceSample(t, q_raw, f_val, r_cum, h, q_smooth=q_s)
            )
        # trial step with halving backstop
        while True:
            x_new = _step_from_base(x, g0, -h)
            q_new = lift_eval(Qs, problem.differential(x_new))
            if q_new <= q_s + 1e-9 or h <= h_min:
                break
            h *= 0.5
        x = x_new
        t += h
        r_cum += h * (q_s + config.shift)
        if q_prev is not None and abs(q_prev - q_s) <= config.tol_stall * (1.0 + abs(q_s)):
            trace.status = "stalled"
        q_prev = q_s
        trace.iterations = i + 1
    if trace.status == "unknown":
        trace.status = "max_iters"
    p_final = problem.differential(x)
    q_final = lift_eval(Q, p_final)
    trace.best_q = min(trace.best_q, q_final)
    trace.samples.append(
        TraceSample(t, q_final, problem.value(x), r_cum, h,
                    q_smooth=lift_eval(Qs, p_final))
    )
    trace.final_point = x
    extract_certificate(trace, x0)
    return trace


def subgradient_method(problem, Q, x0, config):
    """Q-subgradient method: x <- exp_x(-delta_i Z_i), Z_i in d(Q^2/2)(df)."""
    config.validate()
    trace = FlowTrace()
    x = x0
    r_cum = 0.0
    best_window = math.inf
    since_improve = 0
    for i in range(config.max_iters):
        Qs = Q
        if config.smoothing is not None:
            lam = config.smoothing
            if config.smoothing_schedule:
                lam = config.smoothing / math.sqrt(i + 1.0)
            Qs = moreau_objective(Q, lam)
        p0 = problem.differential(x)
        q_raw = lift_eval(Q, p0)
        q_s, g0 = _direction_at_base(Qs, p0, config.shift)
        if q_raw < trace.best_q:
            trace.best_q = q_raw
        if i % config.record_every == 0:
            trace.samples.append(
                TraceSample(float(i), q_raw, problem.value(x), r_cum, config.step(i),
                            q_smooth=q_s if Qs is not Q else None)
            )
        delta = config.step(i)
        x = _step_from_base(x, g0, -delta)
        r_cum += delta * (q_s + config.shift)
        trace.iterations = i + 1
        # stall detection on best-so-far improvement
        if trace.best_q < best_window - config.tol_stall * (1.0 + abs(trace.best_q)):
            best_window = trace.best_q
            since_improve = 0
        else:
            since_improve += 1
            if since_improve >= config.stall_window:
                trace.status = "stalled"
                break
    if trace.status == "unknown":
        trace.status = "max_iters"
    p0 = problem.differential(x)
    q_final = lift_eval(Q, p0)
    trace.best_q = min(trace.best_q, q_final)
    trace.samples.append(
        TraceSample(float(trace.iterations), q_final, problem.value(x),
                    r_cum, 0.0)
    )
    trace.final_point = x
    extract_certificate(trace, x0)
    return trace


def group_subgradient_method(v, S, g0, config, modes=None):
    """Subgradient method in group form: g <- exp(-delta Z/2) g.

    Tracks spectra of the moment map along the run; x_i = g_i^+ g_i
    reproduces the manifold iterates.  Factors are renormalized to unit
    |det| periodically to stop scalar drift.
    """
    config.validate()
    v = tensors.normalize(v)
    if modes is None:
        modes = tuple(range(v.ndim))
    modes = tuple(modes)
    g = [np.array(gi, dtype=complex) for gi in g0]
    scale_log = [0.0] * len(g)
    trace = FlowTrace()
    r_cum = 0.0
    best_window = math.inf
    since_improve = 0
    for i in range(config.max_iters):
        Ss = S
        if config.smoothing is not None:
            lam = config.smoothing
            if config.smoothing_schedule:
                lam = config.smoothing / math.sqrt(i + 1.0)
            Ss = moreau_objective(S, lam)
        w = act_normalized(g, v, modes)
        mu = tensors.moment_map(w, modes)
        q_raw = lift_eval(S, mu)
        q_s, Z = _direction_at_base(Ss, mu, config.shift)
        if q_raw < trace.best_q:
            trace.best_q = q_raw
            trace.best_spectra = tensors.spectrum(mu)
        if i % config.record_every == 0:
            trace.samples.append(
                TraceSample(float(i), q_raw, 0.0, r_cum, config.step(i),
                            q_smooth=q_s if Ss is not S else None)
            )
        delta = config.step(i)
        for j in range(len(g)):
            g[j] = expm_herm(-0.5 * delta * Z[j]) @ g[j]
        r_cum += delta * (q_s + config.shift)
        trace.iterations = i + 1
        if config.renorm_every and (i + 1) % config.renorm_every == 0:
            for j in range(len(g)):
                n = g[j].shape[0]
                det = abs(np.linalg.det(g[j]))
                if det > 0 and abs(math.log(det)) > 1e-12:
                    g[j] = g[j] / det ** (1.0 / n)
                    # remember the scalar factor: it carries the trace part
                    # of the direction at infinity
                    scale_log[j] += math.log(det) / n
                    trace.renormalizations += 1
        if trace.best_q < best_window - config.tol_stall * (1.0 + abs(trace.best_q)):
            best_window = trace.best_q
            since_improve = 0
        else:
            since_improve += 1
            if since_improve >= config.stall_window:
                trace.status = "stalled"
                break
    if trace.status == "unknown":
        trace.status = "max_iters"
    w = act_normalized(g, v, modes)
    mu = tensors.moment_map(w, modes)
    q_final = lift_eval(S, mu)
    if q_final < trace.best_q:
        trace.best_q = q_final
        trace.best_spectra = tensors.spectrum(mu)
    trace.samples.append(
        TraceSample(float(trace.iterations), q_final, 0.0, r_cum, 0.0)
    )
    x_final = ProductPDPoint(
        np.zeros(0), [0.5 * (gi.conj().T @ gi + (gi.conj().T @ gi).conj().T) for gi in g]
    )
    trace.final_point = x_final
    x0 = ProductPDPoint.identity(tuple(v.shape[m] for m in modes))
    extract_certificate(trace, x0, log_shifts=[2.0 * s for s in scale_log])
    return trace, g


def act_normalized(g, v, modes):
    w = tensors.act(g, v, modes)
    return w / np.linalg.norm(w)


def extract_certificate(trace, x0, r_floor=1e-8, dist_floor=1e-6, log_shifts=None):
    """Direction at infinity from a finished trace: u = log_map(x_T)/R.

    `log_shifts` restores per-block scalar factors that were divided out of
    the iterates (determinant renormalization): shift c means the true final
    point is e^c times the stored block, i.e. the log gains c*I.

    When R (or the travelled distance) is negligible the flow sat at an
    interior near-minimizer and no boundary certificate exists; the trace
    status records this instead of failing.
    """
    R = trace.r_cumulative
    x_final = trace.final_point
    if x_final is None:
        return None
    u_raw = log_map(x_final, None if _is_identity(x0) else x0)
    if log_shifts is not None:
        u_raw = TangentBlock(
            u_raw.euclid,
            [B + c * np.eye(B.shape[0]) for B, c in zip(u_raw.blocks, log_shifts)],
            u_raw.at,
        )
    norm_u = metric_norm(x0, TangentBlock(u_raw.euclid, u_raw.blocks, at=x0))
    if R <= r_floor or norm_u <= dist_floor:
        trace.status = trace.status + "+interior_optimum"
        trace.certificate = None
        trace.final_direction = None
        return None
    u = u_raw.scaled(1.0 / R)
    u.at = x0
    trace.final_direction = u
    trace.certificate = asymptotic_at_base(x0, u)
    return trace.certificate


def _is_identity(x):
    return all(
        np.allclose(B, np.eye(B.shape[0]), atol=1e-14) for B in x.blocks
    ) and not np.any(x.euclid)


def energy_residual(trace, problem=None, Q=None):
    """Relative defect of the energy identity over a recorded flow trace.

    Uses trapezoidal quadrature of (1/2)Q^2(df) + (Q^2/2)^*(-xdot) against
    the drop in f.  Requires the objective's half-square conjugate, recorded
    during integrate_flow.
    """
    ts = trace.energy_times
    if len(ts) < 2:
        raise ValidationError("trace has too few samples for the energy identity")
    if any(c is None for c in trace.energy_conj_half):
        raise UnsupportedObjectiveError(
            "objective provides no half-square conjugate; energy identity unavailable"
        )
    integrand = np.asarray(trace.energy_half_q2) + np.asarray(trace.energy_conj_half)
    integral = float(np.trapezoid(integrand, np.asarray(ts)))
    f0 = trace.energy_f[0]
    fT = trace.energy_f[-1]
    return abs(fT - f0 + integral) / (1.0 + abs(f0 - fT))


def dual_value(problem, Q, xi):
    """Dual objective -f^inf(xi) - Q*(-Y_xi); lower-bounds inf_x Q(df_x)."""
    Y = xi.tangent_at_base()
    conj = conjugate_eval(Q, [-B for B in Y.blocks])
    if not np.isfinite(conj):
        return -math.inf
    rec = problem.recession(xi)
    return -rec - conj
