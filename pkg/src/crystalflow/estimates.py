"""A-priori estimate verification and monitor series over trajectories.

Three discrete energy inequalities are checked, each bounding solution
norms by the initial data alone. Each is verified in its telescoped
"running partial sum" form: for every truncation K the accumulated
dissipation up to K plus the energy state at K must stay below the bound
from the initial data. That form follows step by step from the scheme's
two equations and exact summation by parts, so the margin is nonnegative
up to linear-solver round-off; the reported left side is the worst (the
largest) truncation. The right side is stated purely in terms of the
initial fields.

Writing tau for the timestep, r for the regularization weight, and
F for the antiderivative of the current f (F = cosh for f = sinh), the
per-record functionals are

    M = int u^2          G = int |grad u|^2      C = int F(w)
    S = int |grad f(w)|^2                        W = int w f(w)
    E = int (w f(w) - F(w) + F(0))               (convexity gap, >= 0)

with difference quotients du_k = (u_k - u_{k-1})/tau and likewise dw_k.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError, OverflowCapError
from .grid import Field, grad_sq_integral, laplacian_matrix, p_flux
from .stepper import Trajectory

__all__ = [
    "EstimateReport",
    "MonitorSeries",
    "cosh_energy",
    "verify_prop31",
    "verify_prop32",
    "verify_prop33",
    "standard_reports",
    "continuum_monitors",
    "p_variant_energy",
    "mass_identity_residuals",
    "zero_mean_residuals",
    "write_reports_csv",
    "write_terms_csv",
]

FLOAT_FMT = "%.17g"


@dataclass
class EstimateReport:
    """Outcome of one inequality check.

    margin = rhs - lhs; the check passes when margin >= -abs_tol with
    abs_tol = 1e-8 * max(1, rhs), so the tolerance only absorbs round-off
    and scales sensibly across magnitudes. terms maps each contribution of
    the inequality (left and right side) to its value; LHS terms sum to
    lhs and RHS terms to rhs.
    """

    name: str
    lhs: float
    rhs: float
    terms: dict

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs

    @property
    def abs_tol(self) -> float:
        return 1e-8 * max(1.0, self.rhs)

    @property
    def passed(self) -> bool:
        return self.margin >= -self.abs_tol


def cosh_energy(w: Field, cap: float = 700.0) -> float:
    """int cosh(w) over the box; at least |Omega|, with equality iff w = 0."""
    top = float(np.abs(w.values).max())
    if top > cap:
        raise OverflowCapError(
            f"|w| = {top:.6g} exceeds the overflow cap {cap:.6g}",
            max_abs=top,
            cap=cap,
        )
    return float(w.grid.quad_weights() @ np.cosh(w.values))


def _require_hyperbolic(traj: Trajectory):
    v = traj.variant
    if not v.hyperbolic or v.p is not None:
        raise InvalidInputError(
            f"energy inequality verification requires an odd nonlinearity with "
            f"f' >= 1 and the plain Laplacian exponent; got variant {v.name!r}"
        )


@dataclass
class _Functionals:
    """Per-record quadrature functionals of one trajectory, k = 0..j."""

    tau: float
    r: float  # regularization weight
    M: np.ndarray
    G: np.ndarray
    C: np.ndarray
    S: np.ndarray
    W: np.ndarray
    E: np.ndarray
    wsq: np.ndarray  # int w^2
    gradw: np.ndarray  # int |grad w|^2
    lap_u_sq: np.ndarray  # int (Lap u)^2
    lap_f_sq: np.ndarray  # int (Lap f(w))^2
    du_sq: np.ndarray  # ||du_k||^2, k >= 1; slot 0 holds the defining rate
    dw_sq: np.ndarray  # ||dw_k||^2, k >= 1
    grad_du: np.ndarray  # int |grad du_k|^2, k >= 1


def _functionals(traj: Trajectory) -> _Functionals:
    grid = traj.grid
    qw = grid.quad_weights()
    lap = laplacian_matrix(grid)
    f = traj.variant.f
    F = traj.variant.antiderivative
    F0 = float(F(np.zeros(1))[0])
    tau = traj.params.tau
    r = traj.params.reg_weight

    def l2sq(x):
        return float(qw @ (x * x))

    n = len(traj.records)
    out = _Functionals(
        tau=tau,
        r=r,
        M=np.zeros(n),
        G=np.zeros(n),
        C=np.zeros(n),
        S=np.zeros(n),
        W=np.zeros(n),
        E=np.zeros(n),
        wsq=np.zeros(n),
        gradw=np.zeros(n),
        lap_u_sq=np.zeros(n),
        lap_f_sq=np.zeros(n),
        du_sq=np.zeros(n),
        dw_sq=np.zeros(n),
        grad_du=np.zeros(n),
    )
    for k, rec in enumerate(traj.records):
        u, w = rec.u.values, rec.w.values
        fw = f(w)
        out.M[k] = l2sq(u)
        out.G[k] = grad_sq_integral(rec.u)
        out.C[k] = float(qw @ F(w))
        out.S[k] = grad_sq_integral(Field(grid, fw))
        out.W[k] = float(qw @ (w * fw))
        out.E[k] = float(qw @ (w * fw - F(w) + F0))
        out.wsq[k] = l2sq(w)
        out.gradw[k] = grad_sq_integral(rec.w)
        out.lap_u_sq[k] = l2sq(lap @ u)
        out.lap_f_sq[k] = l2sq(lap @ fw)
        if k > 0:
            prev = traj.records[k - 1]
            du = (u - prev.u.values) / tau
            dw = (w - prev.w.values) / tau
            out.du_sq[k] = l2sq(du)
            out.dw_sq[k] = l2sq(dw)
            out.grad_du[k] = grad_sq_integral(Field(grid, du))
    # the k = 0 rate is the one the scheme's startup choice defines:
    # du_0 = Lap f(w_0) - r w_0, so the first difference equation closes
    w0 = traj.records[0].w.values
    du0 = lap @ f(w0) - r * w0
    out.du_sq[0] = l2sq(du0)
    return out


def _worst_truncation(running_sum: np.ndarray, endpoint: np.ndarray) -> int:
    """Index K >= 1 maximizing running_sum[K] + endpoint[K]."""
    total = running_sum + endpoint
    return int(np.argmax(total[1:]) + 1)


def verify_prop31(traj: Trajectory) -> EstimateReport:
    """First energy inequality: rate + flux dissipation against initial energy.

    For every K >= 1,

        sum_{k<=K} tau [ ||du_k||^2 + ||Lap f(w_k)||^2 + r^2 ||w_k||^2
                         + 2 r S_k + 2 r^2 W_k + 2 r int|grad w_k|^2 ]
        + 2 C_K + r G_K + r^2 M_K
            <= 2 C_0 + 2 r G_0 + 2 r^2 M_0.

    Reported lhs is the worst truncation K; rhs is the initial-data bound.
    """
    _require_hyperbolic(traj)
    fn = _functionals(traj)
    tau, r = fn.tau, fn.r

    per_step = (
        fn.du_sq
        + fn.lap_f_sq
        + r**2 * fn.wsq
        + 2 * r * fn.S
        + 2 * r**2 * fn.W
        + 2 * r * fn.gradw
    )
    per_step[0] = 0.0
    running = tau * np.cumsum(per_step)
    endpoint = 2 * fn.C + r * fn.G + r**2 * fn.M
    K = _worst_truncation(running, endpoint)

    sl = slice(1, K + 1)
    terms = {
        "time_derivative_sq": tau * fn.du_sq[sl].sum(),
        "laplacian_flux_sq": tau * fn.lap_f_sq[sl].sum(),
        "reg_w_sq": tau * r**2 * fn.wsq[sl].sum(),
        "flux_gradient_sq": tau * 2 * r * fn.S[sl].sum(),
        "reg_w_flux": tau * 2 * r**2 * fn.W[sl].sum(),
        "w_gradient_sq": tau * 2 * r * fn.gradw[sl].sum(),
        "energy_endpoint": 2 * fn.C[K],
        "dirichlet_endpoint": r * fn.G[K],
        "mass_endpoint": r**2 * fn.M[K],
        "rhs_energy_initial": 2 * fn.C[0],
        "rhs_dirichlet_initial": 2 * r * fn.G[0],
        "rhs_mass_initial": 2 * r**2 * fn.M[0],
    }
    lhs = float(running[K] + endpoint[K])
    rhs = terms["rhs_energy_initial"] + terms["rhs_dirichlet_initial"] + terms["rhs_mass_initial"]
    return EstimateReport("prop31", lhs, float(rhs), terms)


def verify_prop32(traj: Trajectory) -> EstimateReport:
    """Second energy inequality: Dirichlet decay plus exponent-gradient control.

    For every K >= 1,

        (G_K + r M_K)/2
        + sum_{k<=K} tau [ int|grad w_k|^2 + r ||Lap u_k||^2
                           + 2 r^2 G_k + r^3 M_k ]
            <= G_0 + r M_0.
    """
    _require_hyperbolic(traj)
    fn = _functionals(traj)
    tau, r = fn.tau, fn.r

    per_step = fn.gradw + r * fn.lap_u_sq + 2 * r**2 * fn.G + r**3 * fn.M
    per_step[0] = 0.0
    running = tau * np.cumsum(per_step)
    endpoint = 0.5 * (fn.G + r * fn.M)
    K = _worst_truncation(running, endpoint)

    sl = slice(1, K + 1)
    terms = {
        "dirichlet_endpoint": 0.5 * fn.G[K],
        "mass_endpoint": 0.5 * r * fn.M[K],
        "w_gradient_sq": tau * fn.gradw[sl].sum(),
        "laplacian_u_sq": tau * r * fn.lap_u_sq[sl].sum(),
        "dirichlet_time_integral": tau * 2 * r**2 * fn.G[sl].sum(),
        "mass_time_integral": tau * r**3 * fn.M[sl].sum(),
        "rhs_dirichlet_initial": fn.G[0],
        "rhs_mass_initial": r * fn.M[0],
    }
    lhs = float(running[K] + endpoint[K])
    rhs = terms["rhs_dirichlet_initial"] + terms["rhs_mass_initial"]
    return EstimateReport("prop32", lhs, float(rhs), terms)


def verify_prop33(traj: Trajectory) -> EstimateReport:
    """Third energy inequality: control of the time derivatives.

    For every K >= 1,

        2 sum_{k<=K} tau ||dw_k||^2 + ||du_K||^2 + r S_K + 2 r^2 E_K
        + 2 r sum_{k<=K} tau int|grad du_k|^2 + 2 r^2 sum_{k<=K} tau ||du_k||^2
            <= ||du_0||^2 + r S_0 + 2 r^2 W_0

    with the startup rate du_0 = Lap f(w_0) - r w_0. The endpoint uses the
    convexity gap E (which is what the telescoping actually produces and
    never exceeds W), while the right side keeps the plain W_0 form.
    """
    _require_hyperbolic(traj)
    fn = _functionals(traj)
    tau, r = fn.tau, fn.r

    per_step = 2 * fn.dw_sq + 2 * r * fn.grad_du + 2 * r**2 * fn.du_sq
    per_step[0] = 0.0
    running = tau * np.cumsum(per_step)
    endpoint = fn.du_sq + r * fn.S + 2 * r**2 * fn.E
    K = _worst_truncation(running, endpoint)

    sl = slice(1, K + 1)
    terms = {
        "w_time_derivative_sq": tau * 2 * fn.dw_sq[sl].sum(),
        "rate_endpoint": fn.du_sq[K],
        "flux_gradient_endpoint": r * fn.S[K],
        "w_flux_gap_endpoint": 2 * r**2 * fn.E[K],
        "rate_gradient_time_integral": tau * 2 * r * fn.grad_du[sl].sum(),
        "rate_time_integral": tau * 2 * r**2 * fn.du_sq[sl].sum(),
        "rhs_initial_rate_sq": fn.du_sq[0],
        "rhs_flux_gradient_initial": r * fn.S[0],
        "rhs_w_flux_initial": 2 * r**2 * fn.W[0],
    }
    lhs = float(running[K] + endpoint[K])
    rhs = (
        terms["rhs_initial_rate_sq"]
        + terms["rhs_flux_gradient_initial"]
        + terms["rhs_w_flux_initial"]
    )
    return EstimateReport("prop33", lhs, float(rhs), terms)


def standard_reports(traj: Trajectory) -> list[EstimateReport]:
    return [verify_prop31(traj), verify_prop32(traj), verify_prop33(traj)]


@dataclass
class MonitorSeries:
    """Per-step continuum monitor quantities for refinement studies."""

    t: np.ndarray
    mass: np.ndarray
    dirichlet: np.ndarray
    cosh_energy: np.ndarray
    l2_time_derivative: np.ndarray

    @property
    def cosh_energy_monotone(self) -> bool:
        """Non-increasing within relative round-off slack."""
        e = self.cosh_energy
        slack = 1e-12 * np.maximum(1.0, np.abs(e[:-1]))
        return bool(np.all(np.diff(e) <= slack))

    @property
    def mass_drift(self) -> np.ndarray:
        return np.abs(self.mass - self.mass[0])

    @property
    def max_mass_drift(self) -> float:
        return float(self.mass_drift.max())


def continuum_monitors(traj: Trajectory) -> MonitorSeries:
    """Mass, Dirichlet energy, cosh energy and L2 rate along the trajectory."""
    grid = traj.grid
    qw = grid.quad_weights()
    tau = traj.params.tau
    n = len(traj.records)
    mass = np.zeros(n)
    dirichlet = np.zeros(n)
    energy = np.zeros(n)
    rate = np.zeros(n)
    for k, rec in enumerate(traj.records):
        mass[k] = qw @ rec.u.values
        dirichlet[k] = grad_sq_integral(rec.u)
        energy[k] = qw @ np.cosh(rec.w.values)
        if k > 0:
            du = (rec.u.values - traj.records[k - 1].u.values) / tau
            rate[k] = np.sqrt(qw @ (du * du))
    return MonitorSeries(traj.times(), mass, dirichlet, energy, rate)


def p_variant_energy(traj: Trajectory, p: float) -> EstimateReport:
    """Dissipation law for the p-Laplacian exponent variant (1-D).

    For every K >= 1,

        Phi_K + (p r / 2) M_K
        + p sum_{k<=K} tau [ int grad f(w_k) . grad w_k + r ||w_k||^2 ]
            <= Phi_0 + (p r / 2) M_0

    with Phi = int |grad u|^p over half-node gradients. The mixed-gradient
    integral is the discrete stand-in for the flux-Laplacian dissipation
    and is nonnegative since f is increasing, so Phi itself is
    non-increasing along the run.
    """
    v = traj.variant
    if v.p is None or traj.grid.dim != 1:
        raise InvalidInputError(
            f"p_variant_energy applies to 1-D p-exponent trajectories, got "
            f"variant {v.name!r} on a {traj.grid.dim}-D grid"
        )
    if abs(float(p) - v.p) > 0:
        raise InvalidInputError(f"exponent mismatch: trajectory has p = {v.p}, asked for {p}")

    grid = traj.grid
    qw = grid.quad_weights()
    lap = laplacian_matrix(grid)
    h = grid.spacing[0]
    tau = traj.params.tau
    r = traj.params.reg_weight
    n = len(traj.records)

    phi = np.zeros(n)
    M = np.zeros(n)
    Q = np.zeros(n)
    wsq = np.zeros(n)
    for k, rec in enumerate(traj.records):
        slope = np.diff(rec.u.values) / h
        phi[k] = h * np.sum(np.abs(slope) ** p)
        M[k] = qw @ (rec.u.values ** 2)
        w = rec.w.values
        fw = traj.variant.f(w)
        # int grad f(w) . grad w = -<f(w), Lap w>, exact by parts
        Q[k] = -float(qw @ (fw * (lap @ w)))
        wsq[k] = qw @ (w * w)

    per_step = p * (Q + r * wsq)
    per_step[0] = 0.0
    running = tau * np.cumsum(per_step)
    endpoint = phi + 0.5 * p * r * M
    K = _worst_truncation(running, endpoint)

    sl = slice(1, K + 1)
    terms = {
        "p_dirichlet_endpoint": phi[K],
        "mass_endpoint": 0.5 * p * r * M[K],
        "flux_gradient_time_integral": tau * p * Q[sl].sum(),
        "reg_w_sq_time_integral": tau * p * r * wsq[sl].sum(),
        "rhs_p_dirichlet_initial": phi[0],
        "rhs_mass_initial": 0.5 * p * r * M[0],
    }
    lhs = float(running[K] + endpoint[K])
    rhs = terms["rhs_p_dirichlet_initial"] + terms["rhs_mass_initial"]
    return EstimateReport("p_variant_energy", lhs, float(rhs), terms)


def mass_identity_residuals(traj: Trajectory) -> np.ndarray:
    """|(int u_k - int u_{k-1})/tau + r int w_k| for k = 1..j.

    The scheme only moves mass through the regularization leak -r int w,
    and that identity holds at the solver tolerance independent of any
    solver internals: it is re-derived here from the stored fields alone.
    """
    qw = traj.grid.quad_weights()
    tau = traj.params.tau
    r = traj.params.reg_weight
    masses = np.array([qw @ rec.u.values for rec in traj.records])
    w_int = np.array([qw @ rec.w.values for rec in traj.records])
    return np.abs(np.diff(masses) / tau + r * w_int[1:])


def zero_mean_residuals(traj: Trajectory) -> np.ndarray:
    """|int w_k - r int u_k| per record; vanishes as the regularization does."""
    qw = traj.grid.quad_weights()
    r = traj.params.reg_weight
    return np.array(
        [abs(qw @ rec.w.values - r * (qw @ rec.u.values)) for rec in traj.records]
    )


def write_reports_csv(reports: list[EstimateReport], stream: io.TextIOBase) -> None:
    stream.write("name,lhs,rhs,margin,pass\n")
    for rep in reports:
        stream.write(
            f"{rep.name},{FLOAT_FMT % rep.lhs},{FLOAT_FMT % rep.rhs},"
            f"{FLOAT_FMT % rep.margin},{str(rep.passed).lower()}\n"
        )


def write_terms_csv(reports: list[EstimateReport], stream: io.TextIOBase) -> None:
    stream.write("name,term,value\n")
    for rep in reports:
        for term, value in rep.terms.items():
            stream.write(f"{rep.name},{term},{FLOAT_FMT % value}\n")
