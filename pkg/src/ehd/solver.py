"""Time integration of the coupled velocity / charge-transport system.

State is (u, v, w): an incompressible velocity field forced by the Coulomb
term laplacian(psi) * grad(psi), and two advected-diffused charge densities
drifting along the self-consistent electric field, closed by the periodic
Poisson solve laplacian(psi) = v - w.  All physical coefficients are one.

Stepping is an integrating-factor scheme: the stiff diffusion is integrated
exactly by exp(-|k|^2 dt) on coefficients, the nonlinear and coupling terms
by a third-order explicit Runge-Kutta (Kutta's tableau, written so that only
decaying exponential factors appear).

The run loop owns a single mutable state and steps sequentially; observer
hooks receive read-only snapshots and must not mutate them.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _fft

from .spectral import (
    ChargeNeutralityError,
    Grid,
    NEUTRALITY_TOL,
    RealField,
    SpectralField,
    VectorField,
    backward_transform,
    curl,
    fft_workers,
    forward_transform,
    gradient,
    solve_poisson,
    vector_backward,
    vector_forward,
)

DIVERGENCE_TOL = 1e-9
MEAN_DRIFT_TOL = 1e-10


class BlowUpSuspected(RuntimeError):
    """The run can no longer continue: non-finite state or collapsed time step."""


class InvariantViolation(RuntimeError):
    """A structural invariant of the evolution failed."""


class RunStatus(str, enum.Enum):
    COMPLETED = "completed"
    BLOW_UP_SUSPECTED = "blow_up_suspected"
    INVARIANT_VIOLATION = "invariant_violation"


@dataclass
class State:
    """Solution snapshot: velocity u, charge densities v and w, clock."""

    u: VectorField
    v: RealField
    w: RealField
    t: float = 0.0
    step_index: int = 0

    @property
    def grid(self) -> Grid:
        return self.u.grid


@dataclass
class StepControl:
    """Time-step policy: base step dt, Courant factor, horizon, abort floor."""

    dt: float = 5e-4
    cfl: float = 0.4
    t_end: float = 1.0
    dt_min: float = 1e-10

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt:
            raise ValueError(f"need 0 < dt_min <= dt, got dt_min={self.dt_min}, dt={self.dt}")
        if not 0 < self.cfl < 1:
            raise ValueError(f"need 0 < cfl < 1, got {self.cfl}")


@dataclass
class DerivedFields:
    """Per-step diagnostics: potential, vorticity, charge sum/difference.

    The spectral coefficient views (u_hat, v_hat, w_hat, psi_hat) are cached
    so observers do not repeat transforms.
    """

    psi: RealField
    omega: VectorField
    zeta: RealField
    eta: RealField
    u_hat: VectorField
    v_hat: SpectralField
    w_hat: SpectralField
    psi_hat: SpectralField
    _grad_u_mag: RealField | None = None

    def grad_u_magnitude(self) -> RealField:
        """Pointwise Frobenius magnitude of the velocity gradient (cached)."""
        if self._grad_u_mag is None:
            g = self.psi.grid
            sq = np.zeros((g.n,) * 3)
            for comp in self.u_hat.components:
                for d in gradient(comp).components:
                    sq += backward_transform(d).samples ** 2
            self._grad_u_mag = RealField(g, np.sqrt(sq))
        return self._grad_u_mag


@dataclass
class RunReport:
    """Outcome of a run: termination status, checksum, wall-clock stats."""

    status: RunStatus
    steps: int
    t_final: float
    state_checksum: str
    wall_seconds: float
    diagnostic: str | None = None
    final_state: State | None = field(default=None, repr=False)


def derive(state: State, coeffs=None) -> DerivedFields:
    """Potential, vorticity and symmetrized charges for one snapshot.

    coeffs, when given, are the state's (ux, uy, uz, v, w) coefficient arrays
    and skip the forward transforms.
    """
    g = state.grid
    if coeffs is None:
        coeffs = _state_coeffs(state)
    u_hat = VectorField(
        SpectralField(g, coeffs[0]), SpectralField(g, coeffs[1]), SpectralField(g, coeffs[2])
    )
    v_hat = SpectralField(g, coeffs[3])
    w_hat = SpectralField(g, coeffs[4])
    eta_hat = SpectralField(g, v_hat.coeffs - w_hat.coeffs)
    psi_hat = solve_poisson(eta_hat)
    return DerivedFields(
        psi=backward_transform(psi_hat),
        omega=vector_backward(curl(u_hat)),
        zeta=RealField(g, state.v.samples + state.w.samples),
        eta=RealField(g, state.v.samples - state.w.samples),
        u_hat=u_hat,
        v_hat=v_hat,
        w_hat=w_hat,
        psi_hat=psi_hat,
    )


def _ifft_real(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    return _fft.irfftn(coeffs, s=(grid.n,) * 3, workers=fft_workers()) * grid.n**3


def _fft_coeffs(grid: Grid, samples: np.ndarray) -> np.ndarray:
    return _fft.rfftn(samples, workers=fft_workers()) / grid.n**3


_exp_cache: dict[tuple[int, float], tuple[np.ndarray, np.ndarray]] = {}


def _diffusion_factors(grid: Grid, dt: float):
    """exp(-|k|^2 dt) and its half-step companion, cached per (n, dt)."""
    key = (grid.n, float(dt))
    pair = _exp_cache.get(key)
    if pair is None:
        if len(_exp_cache) > 8:
            _exp_cache.clear()
        pair = _exp_cache.setdefault(
            key, (np.exp(-grid.k2 * dt), np.exp(-grid.k2 * (0.5 * dt)))
        )
    return pair


def _nonlinear(grid: Grid, c):
    """Dealiased nonlinear + coupling right-hand sides on raw coefficients.

    c = (ux, uy, uz, v, w) coefficient arrays.  Returns the same layout:
    the projected momentum terms P[-(u.grad)u + lap(psi) grad(psi)] and the
    divergence-form charge fluxes; diffusion is left to the integrator.

    The momentum terms are evaluated through the flux tensor
    u_i u_j - d_i(psi) d_j(psi): with div u = 0 its negative divergence
    differs from -(u.grad)u + lap(psi) grad(psi) by a pure gradient, which
    the projection annihilates exactly.
    """
    cux, cuy, cuz, cv, cw = c
    mask = grid.dealias_mask
    kx, ky, kz, inv_k2 = grid.kx, grid.ky, grid.kz, grid.inv_k2

    charged = bool(cv.any() or cw.any())
    u = [_ifft_real(grid, a) for a in (cux, cuy, cuz)]

    if charged:
        eta_mean = cv[0, 0, 0] - cw[0, 0, 0]
        if abs(eta_mean) > NEUTRALITY_TOL:
            raise ChargeNeutralityError(
                f"right-hand side is not neutral: mean(v - w) = {eta_mean.real:.6e}"
            )
        eta_hat = cv - cw
        eta_hat[0, 0, 0] = 0.0
        psi_hat = -eta_hat * inv_k2
        v = _ifft_real(grid, cv)
        w = _ifft_real(grid, cw)
        dpsi = [_ifft_real(grid, 1j * kk * psi_hat) for kk in (kx, ky, kz)]

    flux = {}
    for i in range(3):
        for j in range(i, 3):
            prod = u[i] * u[j]
            if charged:
                prod -= dpsi[i] * dpsi[j]
            flux[i, j] = _fft_coeffs(grid, prod)
    kvec = (kx, ky, kz)
    nu_hat = [
        -1j
        * (
            kvec[0] * flux[min(i, 0), max(i, 0)]
            + kvec[1] * flux[min(i, 1), max(i, 1)]
            + kvec[2] * flux[min(i, 2), max(i, 2)]
        )
        * mask
        for i in range(3)
    ]
    kd = (kx * nu_hat[0] + ky * nu_hat[1] + kz * nu_hat[2]) * inv_k2
    nu_hat = [nu_hat[0] - kx * kd, nu_hat[1] - ky * kd, nu_hat[2] - kz * kd]

    if not charged:
        zero = np.zeros_like(cv)
        return (*nu_hat, zero, zero.copy())

    # Charges in divergence form (exact mean conservation): the drift carries
    # v down and w up the potential gradient.
    nv_hat = -1j * (
        kx * _fft_coeffs(grid, u[0] * v + v * dpsi[0])
        + ky * _fft_coeffs(grid, u[1] * v + v * dpsi[1])
        + kz * _fft_coeffs(grid, u[2] * v + v * dpsi[2])
    ) * mask
    nw_hat = -1j * (
        kx * _fft_coeffs(grid, u[0] * w - w * dpsi[0])
        + ky * _fft_coeffs(grid, u[1] * w - w * dpsi[1])
        + kz * _fft_coeffs(grid, u[2] * w - w * dpsi[2])
    ) * mask

    return (*nu_hat, nv_hat, nw_hat)


def momentum_rhs(state: State) -> VectorField:
    """Projected momentum right-hand side (viscous term excluded), in samples."""
    c = _state_coeffs(state)
    n = _nonlinear(state.grid, c)
    g = state.grid
    return vector_backward(
        VectorField(SpectralField(g, n[0]), SpectralField(g, n[1]), SpectralField(g, n[2]))
    )


def charge_rhs(state: State) -> tuple[RealField, RealField]:
    """Advection + drift right-hand sides for (v, w), diffusion excluded."""
    c = _state_coeffs(state)
    n = _nonlinear(state.grid, c)
    g = state.grid
    return (
        backward_transform(SpectralField(g, n[3])),
        backward_transform(SpectralField(g, n[4])),
    )


def _state_coeffs(state: State):
    u_hat = vector_forward(state.u)
    return (
        u_hat.x.coeffs,
        u_hat.y.coeffs,
        u_hat.z.coeffs,
        forward_transform(state.v).coeffs,
        forward_transform(state.w).coeffs,
    )


def _check_finite_state(state: State):
    for name, f in (("u.x", state.u.x), ("u.y", state.u.y), ("u.z", state.u.z),
                    ("v", state.v), ("w", state.w)):
        if not np.isfinite(f.samples).all():
            raise BlowUpSuspected(
                f"non-finite values in field {name} at t={state.t:.6f} "
                f"(step {state.step_index})"
            )


def _max_magnitude(components) -> float:
    """Pointwise-Euclidean maximum of a 3-component field, overflow-safe.

    Components are rescaled by their largest entry before squaring, so
    finite inputs near the float ceiling still yield a finite speed.
    """
    scale = max(float(np.abs(a).max()) for a in components)
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    sq = sum((a / scale) ** 2 for a in components)
    return scale * float(np.sqrt(sq.max()))


def _grad_psi_max(grid: Grid, cv, cw) -> float:
    if not (cv.any() or cw.any()):
        return 0.0
    eta_hat = cv - cw
    eta_hat[0, 0, 0] = 0.0
    psi_hat = -eta_hat * grid.inv_k2
    dpsi = [_ifft_real(grid, 1j * kk * psi_hat) for kk in (grid.kx, grid.ky, grid.kz)]
    return _max_magnitude(dpsi)


def max_advection_speed(state: State, coeffs=None) -> float:
    """max |u| + max |grad psi|: the effective transport speed for the CFL bound."""
    if coeffs is None:
        coeffs = _state_coeffs(state)
    speed = _max_magnitude([c.samples for c in state.u.components])
    return speed + _grad_psi_max(state.grid, coeffs[3], coeffs[4])


def cfl_limit(state: State, cfl: float, coeffs=None) -> float:
    """Largest admissible dt at this state; inf when nothing moves."""
    speed = max_advection_speed(state, coeffs)
    if speed <= 0.0:
        return np.inf
    return cfl * state.grid.spacing / speed


def _advance(grid: Grid, c0, dt: float):
    """One integrating-factor RK3 step on coefficient arrays."""
    e_full, e_half = _diffusion_factors(grid, dt)

    f1 = _nonlinear(grid, c0)
    s2 = tuple(e_half * (a + 0.5 * dt * f) for a, f in zip(c0, f1))
    f2 = _nonlinear(grid, s2)
    s3 = tuple(
        e_full * a + dt * (-e_full * fa + 2.0 * e_half * fb)
        for a, fa, fb in zip(c0, f1, f2)
    )
    f3 = _nonlinear(grid, s3)
    c1 = tuple(
        e_full * a + (dt / 6.0) * (e_full * fa + 4.0 * e_half * fb + fc)
        for a, fa, fb, fc in zip(c0, f1, f2, f3)
    )

    # Re-project and re-mask against roundoff drift.
    kd = (grid.kx * c1[0] + grid.ky * c1[1] + grid.kz * c1[2]) * grid.inv_k2
    mask = grid.dealias_mask
    return (
        (c1[0] - grid.kx * kd) * mask,
        (c1[1] - grid.ky * kd) * mask,
        (c1[2] - grid.kz * kd) * mask,
        c1[3] * mask,
        c1[4] * mask,
    )


def _materialize(grid: Grid, c, t: float, step_index: int) -> State:
    return State(
        u=VectorField(
            RealField(grid, _ifft_real(grid, c[0])),
            RealField(grid, _ifft_real(grid, c[1])),
            RealField(grid, _ifft_real(grid, c[2])),
        ),
        v=RealField(grid, _ifft_real(grid, c[3])),
        w=RealField(grid, _ifft_real(grid, c[4])),
        t=t,
        step_index=step_index,
    )


def _step_coeffs(state: State, control: StepControl, c0):
    """Shared stepping core; returns (new_state, new_coeffs)."""
    grid = state.grid
    dt_stab = cfl_limit(state, control.cfl, c0)
    dt = min(control.dt, dt_stab)
    if dt < control.dt_min:
        raise BlowUpSuspected(
            f"time step collapsed: CFL limit {dt_stab:.3e} fell below "
            f"dt_min {control.dt_min:.3e} at t={state.t:.6f}"
        )
    remaining = control.t_end - state.t
    if 0.0 < remaining < dt:
        dt = remaining

    c1 = _advance(grid, c0, dt)
    new = _materialize(grid, c1, state.t + dt, state.step_index + 1)
    try:
        _check_finite_state(new)
    except BlowUpSuspected as exc:
        raise BlowUpSuspected(f"step produced a non-finite state: {exc}") from exc
    return new, c1


def step(state: State, control: StepControl) -> State:
    """Advance one time step.

    dt is the base step clamped by the CFL bound and the remaining horizon;
    a CFL clamp below dt_min, or a non-finite result, aborts the run as a
    suspected blow-up.
    """
    _check_finite_state(state)
    new, _ = _step_coeffs(state, control, _state_coeffs(state))
    return new


def _divergence_max(state: State) -> float:
    div = divergence_field(state.u)
    return float(np.abs(div.samples).max())


def divergence_field(u: VectorField) -> RealField:
    from .spectral import divergence

    return backward_transform(divergence(vector_forward(u)))


def validate_initial_state(state: State):
    """Invariants required at the start of a run; raises InvariantViolation."""
    try:
        _check_finite_state(state)
    except BlowUpSuspected as exc:
        raise InvariantViolation(str(exc)) from exc
    div = _divergence_max(state)
    if div > DIVERGENCE_TOL:
        raise InvariantViolation(
            f"initial velocity is not divergence-free: max |div u| = {div:.3e}"
        )
    mean_eta = float(np.mean(state.v.samples) - np.mean(state.w.samples))
    if abs(mean_eta) > NEUTRALITY_TOL:
        raise InvariantViolation(
            f"initial charges are not neutral: mean(v - w) = {mean_eta:.3e}"
        )


def run(state0: State, control: StepControl, hooks=()) -> RunReport:
    """Advance to t_end, invoking each hook after every accepted step.

    Hooks are callables (state, derived, dt); they are also invoked once on
    the initial state with dt = 0 so time-integral accumulators can record
    the t = 0 integrand.  A hook raising BlowUpSuspected or
    InvariantViolation terminates the run with that status and its message
    as the diagnostic.
    """
    from .checkpoint import state_checksum

    t0 = time.monotonic()
    status = RunStatus.COMPLETED
    diagnostic = None
    s = state0
    steps = 0

    try:
        validate_initial_state(s)
        mean_v0 = float(np.mean(s.v.samples))
        mean_w0 = float(np.mean(s.w.samples))
        c = _state_coeffs(s)
        derived = derive(s, c)
        for hook in hooks:
            hook(s, derived, 0.0)

        while s.t < control.t_end - 1e-12 * max(1.0, control.t_end):
            t_prev = s.t
            s, c = _step_coeffs(s, control, c)
            steps += 1
            _check_run_invariants(s, c, mean_v0, mean_w0)
            derived = derive(s, c)
            dt_used = s.t - t_prev
            for hook in hooks:
                hook(s, derived, dt_used)
    except BlowUpSuspected as exc:
        status, diagnostic = RunStatus.BLOW_UP_SUSPECTED, str(exc)
    except (InvariantViolation, ChargeNeutralityError) as exc:
        status, diagnostic = RunStatus.INVARIANT_VIOLATION, str(exc)

    return RunReport(
        status=status,
        steps=steps,
        t_final=s.t,
        state_checksum=state_checksum(s),
        wall_seconds=time.monotonic() - t0,
        diagnostic=diagnostic,
        final_state=s,
    )


def _check_run_invariants(state: State, coeffs, mean_v0: float, mean_w0: float):
    g = state.grid
    div_hat = 1j * (g.kx * coeffs[0] + g.ky * coeffs[1] + g.kz * coeffs[2])
    div = float(np.abs(_ifft_real(g, div_hat)).max())
    if div > DIVERGENCE_TOL:
        raise InvariantViolation(
            f"divergence invariant failed at t={state.t:.6f}: max |div u| = {div:.3e}"
        )
    for name, c, mean0 in (("v", coeffs[3], mean_v0), ("w", coeffs[4], mean_w0)):
        drift = abs(float(c[0, 0, 0].real) - mean0)
        if drift > MEAN_DRIFT_TOL * max(1.0, abs(mean0)):
            raise InvariantViolation(
                f"mean of {name} drifted by {drift:.3e} at t={state.t:.6f}"
            )
