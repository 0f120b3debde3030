"""Numerical audits of the exact energy balances and growth monitors.

Two balances are tracked against the initial energies.  The charge balance
is an exact identity,

    ||v||^2 + ||w||^2 + 2 int (||grad v||^2 + ||grad w||^2)
                      + int int (v+w)(v-w)^2  =  ||v0||^2 + ||w0||^2

(in the symmetrized variables zeta = v+w, eta = v-w this is the energy
balance with a doubled cross term; halving the norms halves it back), so
its residual measures pure time-discretization error.  The velocity /
potential balance carries a sign-definite coupling term,

    ||u||^2 + ||grad psi||^2 + 2 int (||grad u||^2 + ||lap psi||^2)
            + 2 int int (v+w) |grad psi|^2  =  ||u0||^2 + ||grad psi0||^2,

whose nonnegativity (for nonnegative charges) is what turns the balance
into a decay inequality; the audit reconstructs the full pre-drop balance
so the decay margin has a definite expected value.  Inequalities with
unknown constants (the logarithmic gradient bound, the interpolation
ratios) are monitored as ratio series only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .solver import DerivedFields, State, derive
from .spectral import (
    VOLUME,
    RealField,
    backward_transform,
    forward_transform,
    grad_l2_norm_sq,
    gradient,
    l2_norm_sq,
    lp_norm,
    sobolev_norm,
    spectral_power,
    vector_magnitude,
)

CHARGE_IDENTITY_TOL = 1e-5
DECAY_MARGIN_TOL = 1e-6


def positivity_term(state: State) -> float:
    """int (v+w)(v-w)^2 dx by the uniform grid sum (exact for dealiased fields)."""
    v, w = state.v.samples, state.w.samples
    return float(np.sum((v + w) * (v - w) ** 2) * state.grid.cell_volume)


def _u_h3_norm(derived: DerivedFields) -> float:
    return math.sqrt(sum(sobolev_norm(c, 3.0) ** 2 for c in derived.u_hat.components))


def log_sobolev_ratio(state: State, derived: DerivedFields | None = None) -> float:
    """||grad u||_inf / (1 + ||omega||_2 + ||omega||_inf ln(e + ||u||_H3)).

    The bounding constant is not known, so only boundedness of this series
    over a smooth run is meaningful; monotone unbounded growth is flagged in
    the report.
    """
    if derived is None:
        derived = derive(state)
    num = lp_norm(derived.grad_u_magnitude(), math.inf)
    omega_mag = vector_magnitude(derived.omega)
    denom = 1.0 + lp_norm(omega_mag, 2.0) + lp_norm(omega_mag, math.inf) * math.log(
        math.e + _u_h3_norm(derived)
    )
    return num / denom


def y_growth(state: State, derived: DerivedFields | None = None) -> float:
    """Y(t) = e + ||u||_H3^2 + ||v||_H2^2 + ||w||_H2^2."""
    if derived is None:
        derived = derive(state)
    return (
        math.e
        + _u_h3_norm(derived) ** 2
        + sobolev_norm(derived.v_hat, 2.0) ** 2
        + sobolev_norm(derived.w_hat, 2.0) ** 2
    )


def interpolation_ratios(f: RealField) -> tuple[float, float]:
    """Gagliardo-Nirenberg ratios (L4 and L3 against L2/grad-L2 products).

    Scale-invariant by construction (degree-zero homogeneity in f).  For a
    constant field the gradient vanishes and the ratios are undefined;
    reported as NaN (not applicable).
    """
    F = forward_transform(f)
    l2_sq = l2_norm_sq(F)
    grad_sq = grad_l2_norm_sq(F)
    if grad_sq <= 1e-24 * max(l2_sq, 1e-300):
        return (math.nan, math.nan)
    l2 = math.sqrt(l2_sq)
    g2 = math.sqrt(grad_sq)
    r4 = lp_norm(f, 4.0) / (l2**0.25 * g2**0.75)
    r3 = lp_norm(f, 3.0) / (math.sqrt(l2) * math.sqrt(g2))
    return (r4, r3)


def gn_ratios(state: State) -> tuple[float, float]:
    """Interpolation ratios evaluated on the charge density v."""
    return interpolation_ratios(state.v)


@dataclass
class AuditRecord:
    """One audited step (matches the audit CSV columns)."""

    t: float
    charge_identity_residual: float
    velocity_margin: float
    positivity_term: float
    ls_ratio: float
    y: float
    gn_ratio_l4: float
    gn_ratio_l3: float


@dataclass
class AuditLedger:
    """Initial energies plus running dissipation integrals for one run."""

    e0_charges: float
    e0_vel: float
    d_charges: float = 0.0  # 2 int (||grad v||^2 + ||grad w||^2)
    d_cross: float = 0.0  # int int (v+w)(v-w)^2
    d_vel: float = 0.0  # 2 int (||grad u||^2 + ||lap psi||^2)
    d_coupling: float = 0.0  # 2 int int (v+w)|grad psi|^2
    y_series: list = field(default_factory=list)
    ls_ratio_series: list = field(default_factory=list)
    min_charge: float = math.inf
    max_charge_residual: float = 0.0
    min_velocity_margin: float = math.inf
    max_margin_mismatch: float = 0.0  # |margin - d_coupling| / e0_vel
    flags: list = field(default_factory=list)
    charge_tol: float = CHARGE_IDENTITY_TOL
    _last: dict | None = None

    @classmethod
    def from_state(cls, state: State, derived: DerivedFields | None = None) -> "AuditLedger":
        if derived is None:
            derived = derive(state)
        e0_charges = l2_norm_sq(derived.v_hat) + l2_norm_sq(derived.w_hat)
        e0_vel = sum(l2_norm_sq(c) for c in derived.u_hat.components) + grad_l2_norm_sq(
            derived.psi_hat
        )
        return cls(e0_charges=e0_charges, e0_vel=e0_vel)

    # -- balance checks ----------------------------------------------------

    def check_charge_identity(self, state: State, tol: float | None = None,
                              derived: DerivedFields | None = None) -> float:
        """Relative residual of the exact charge-energy identity; flags above tol."""
        if derived is None:
            derived = derive(state)
        tol = self.charge_tol if tol is None else tol
        lhs = (
            l2_norm_sq(derived.v_hat)
            + l2_norm_sq(derived.w_hat)
            + self.d_charges
            + self.d_cross
        )
        residual = abs(lhs - self.e0_charges) / max(self.e0_charges, 1e-300)
        if residual > tol:
            self.flags.append(
                f"charge identity residual {residual:.3e} above {tol:.1e} at t={state.t:.6f}"
            )
        return residual

    def check_velocity_decay(self, state: State,
                             derived: DerivedFields | None = None) -> float:
        """Decay margin e0 - (||u||^2 + ||grad psi||^2 + d_vel).

        Nonnegative (within tolerance) whenever the charges are nonnegative;
        equals the accumulated coupling integral d_coupling up to time
        quadrature, which pins its expected value.
        """
        if derived is None:
            derived = derive(state)
        current = sum(l2_norm_sq(c) for c in derived.u_hat.components) + grad_l2_norm_sq(
            derived.psi_hat
        )
        margin = self.e0_vel - (current + self.d_vel)
        if margin < -DECAY_MARGIN_TOL * max(self.e0_vel, 1e-300):
            self.flags.append(
                f"velocity decay margin {margin:.3e} negative beyond tolerance "
                f"at t={state.t:.6f}"
            )
        return margin

    # -- per-step update ---------------------------------------------------

    def update(self, state: State, derived: DerivedFields, dt: float) -> AuditRecord:
        """Accumulate dissipation integrals (trapezoid) and evaluate all monitors."""
        g = state.grid
        lap_psi_sq = float(VOLUME * ((g.k2**2) * spectral_power(derived.psi_hat)).sum())
        dpsi = [
            backward_transform(d).samples for d in gradient(derived.psi_hat).components
        ]
        grad_psi_mag_sq = dpsi[0] ** 2 + dpsi[1] ** 2 + dpsi[2] ** 2

        integrands = {
            "charges": 2.0
            * (grad_l2_norm_sq(derived.v_hat) + grad_l2_norm_sq(derived.w_hat)),
            "cross": positivity_term(state),
            "vel": 2.0
            * (sum(grad_l2_norm_sq(c) for c in derived.u_hat.components) + lap_psi_sq),
            "coupling": 2.0
            * float(np.sum(derived.zeta.samples * grad_psi_mag_sq) * g.cell_volume),
        }
        if self._last is not None and dt > 0.0:
            self.d_charges += 0.5 * dt * (self._last["charges"] + integrands["charges"])
            self.d_cross += 0.5 * dt * (self._last["cross"] + integrands["cross"])
            self.d_vel += 0.5 * dt * (self._last["vel"] + integrands["vel"])
            self.d_coupling += 0.5 * dt * (self._last["coupling"] + integrands["coupling"])
        self._last = integrands

        residual = self.check_charge_identity(state, derived=derived)
        margin = self.check_velocity_decay(state, derived=derived)
        lsr = log_sobolev_ratio(state, derived)
        y = y_growth(state, derived)
        gn4, gn3 = gn_ratios(state)

        self.max_charge_residual = max(self.max_charge_residual, residual)
        self.min_velocity_margin = min(self.min_velocity_margin, margin)
        self.max_margin_mismatch = max(
            self.max_margin_mismatch,
            abs(margin - self.d_coupling) / max(self.e0_vel, 1e-300),
        )
        self.min_charge = min(
            self.min_charge,
            float(state.v.samples.min()),
            float(state.w.samples.min()),
        )
        self.y_series.append((state.t, y))
        self.ls_ratio_series.append((state.t, lsr))

        return AuditRecord(
            t=state.t,
            charge_identity_residual=residual,
            velocity_margin=margin,
            positivity_term=positivity_term(state),
            ls_ratio=lsr,
            y=y,
            gn_ratio_l4=gn4,
            gn_ratio_l3=gn3,
        )

    def summary(self) -> dict:
        """Extrema for the run report; NaNs serialized as strings."""
        def j(x):
            x = float(x)
            return x if math.isfinite(x) else str(x)

        ls_values = [r for _, r in self.ls_ratio_series]
        return {
            "e0_charges": j(self.e0_charges),
            "e0_vel": j(self.e0_vel),
            "max_charge_identity_residual": j(self.max_charge_residual),
            "min_velocity_margin": j(self.min_velocity_margin),
            "max_margin_vs_coupling_mismatch": j(self.max_margin_mismatch),
            "min_charge_value": j(self.min_charge),
            "max_ls_ratio": j(max(ls_values) if ls_values else math.nan),
            "final_y": j(self.y_series[-1][1] if self.y_series else math.nan),
            # Heuristic for "growing without bound": strictly monotone over
            # the whole run AND at least doubled.  Small monotone creep is
            # normal on decaying flows.
            "ls_ratio_monotone_growth": bool(
                len(ls_values) > 2
                and all(b > a for a, b in zip(ls_values, ls_values[1:]))
                and ls_values[-1] >= 2.0 * max(ls_values[0], 1e-300)
            ),
            "flags": list(self.flags),
        }
