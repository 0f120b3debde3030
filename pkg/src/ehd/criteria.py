"""Running blow-up criterion functionals.

Four monitored families: the maximum-vorticity time integral, the two
scale-critical velocity/gradient families with 2/q + 3/p equal to 1 and 2,
and the anisotropic dyadic-norm integral of the horizontal gradient block
(partial_1 u1, partial_2 u1, partial_1 u2, partial_2 u2).  Each accumulator
carries a running trapezoidal integral of quantity^q and an optional alarm
threshold; finiteness of these integrals is the continuation certificate,
their growth the forensic signal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .littlewood_paley import BesovParams, besov_norm
from .solver import BlowUpSuspected, DerivedFields, State
from .spectral import (
    RealField,
    SpectralField,
    backward_transform,
    forward_transform,
    lp_norm,
    vector_magnitude,
)


class CriterionKind(str, enum.Enum):
    BKM = "BKM"
    PS_U = "PS_u"
    PS_GRAD_U = "PS_grad_u"
    BESOV_ANISO = "BESOV_ANISO"


@dataclass
class CriterionAccumulator:
    """One criterion functional: exponents, running integral, alarm state."""

    kind: CriterionKind
    p: float
    q: float
    r: float | None = None  # summation exponent, anisotropic kind only
    threshold: float | None = None
    integral: float = 0.0
    last_value: float = 0.0  # most recent instantaneous quantity
    last_integrand: float = 0.0  # quantity ** q
    peak_integrand: float = 0.0
    crossed_at: float | None = None
    primed: bool = False


def make_accumulator(kind, p: float = math.inf, threshold: float | None = None) -> CriterionAccumulator:
    """Build an accumulator, deriving q (and r) from the kind's scaling relation.

    Admissible ranges are strict: PS_u needs 3 < p <= inf, the gradient and
    anisotropic kinds need 3/2 < p <= inf.
    """
    kind = CriterionKind(kind)
    p = float(p)
    r = None
    if kind is CriterionKind.BKM:
        if not math.isinf(p):
            raise ValueError(f"BKM integrates the maximum norm; p must be inf, got {p}")
        q = 1.0
    elif kind is CriterionKind.PS_U:
        if not p > 3.0:
            raise ValueError(f"PS_u requires 3 < p <= inf (strictly above 3), got p={p}")
        q = 2.0 / (1.0 - 3.0 / p)
    else:  # PS_grad_u and BESOV_ANISO share 2/q + 3/p = 2
        if not p > 1.5:
            raise ValueError(
                f"{kind.value} requires 3/2 < p <= inf (strictly above 3/2), got p={p}"
            )
        q = 2.0 / (2.0 - 3.0 / p)
        if kind is CriterionKind.BESOV_ANISO:
            r = 2.0 * p / 3.0
    return CriterionAccumulator(kind=kind, p=p, q=q, r=r, threshold=threshold)


def scaling_defect(acc: CriterionAccumulator) -> float:
    """|2/q + 3/p - target| for the accumulator's family (0 for BKM)."""
    if acc.kind is CriterionKind.BKM:
        return 0.0
    target = 1.0 if acc.kind is CriterionKind.PS_U else 2.0
    return abs(2.0 / acc.q + 3.0 / acc.p - target)


def horizontal_block_magnitude(derived: DerivedFields) -> RealField:
    """Pointwise Euclidean magnitude of (d1 u1, d2 u1, d1 u2, d2 u2).

    The four entries are collapsed to one scalar before any band norm is
    taken; any fixed finite-dimensional norm here changes constants only.
    """
    g = derived.psi.grid
    c1 = derived.u_hat.x.coeffs
    c2 = derived.u_hat.y.coeffs
    sq = np.zeros((g.n,) * 3)
    for coeffs, kk in ((c1, g.kx), (c1, g.ky), (c2, g.kx), (c2, g.ky)):
        sq += backward_transform(SpectralField(g, 1j * kk * coeffs)).samples ** 2
    return RealField(g, np.sqrt(sq))


def instantaneous_quantity(acc: CriterionAccumulator, state: State, derived: DerivedFields) -> float:
    if acc.kind is CriterionKind.BKM:
        return lp_norm(vector_magnitude(derived.omega), math.inf)
    if acc.kind is CriterionKind.PS_U:
        return lp_norm(vector_magnitude(state.u), acc.p)
    if acc.kind is CriterionKind.PS_GRAD_U:
        return lp_norm(derived.grad_u_magnitude(), acc.p)
    block = horizontal_block_magnitude(derived)
    return besov_norm(forward_transform(block), BesovParams(0.0, acc.p, acc.r))


def observe(acc: CriterionAccumulator, state: State, derived: DerivedFields, dt: float) -> CriterionAccumulator:
    """Update one accumulator after an accepted step.

    The first call (dt = 0 from the run loop) primes the trapezoid with the
    t = 0 integrand; later calls add dt * (previous + current) / 2 of
    quantity^q.  A non-finite quantity signals a suspected blow-up.
    """
    value = instantaneous_quantity(acc, state, derived)
    if not math.isfinite(value):
        raise BlowUpSuspected(
            f"{acc.kind.value} integrand is non-finite at t={state.t:.6f}"
        )
    integrand = value**acc.q
    if acc.primed and dt > 0.0:
        acc.integral += 0.5 * dt * (acc.last_integrand + integrand)
    acc.last_value = value
    acc.last_integrand = integrand
    acc.peak_integrand = max(acc.peak_integrand, integrand)
    acc.primed = True
    if acc.threshold is not None and acc.crossed_at is None and acc.integral >= acc.threshold:
        acc.crossed_at = state.t
    return acc


@dataclass
class CriteriaReport:
    """Per-criterion table plus, for aborted runs, an earliest-alarm ranking."""

    status: str
    rows: list[dict]
    ranking: list[str]

    def as_dict(self) -> dict:
        return {"status": self.status, "criteria": self.rows, "ranking": self.ranking}


def _jsonable(x):
    if x is None or isinstance(x, str):
        return x
    x = float(x)
    return x if math.isfinite(x) else str(x)


def report(accs, status) -> CriteriaReport:
    """Summarize accumulators; rank by earliest threshold crossing on blow-up."""
    status = status.value if hasattr(status, "value") else str(status)
    rows = []
    for acc in accs:
        rows.append(
            {
                "kind": acc.kind.value,
                "p": _jsonable(acc.p),
                "q": _jsonable(acc.q),
                "r": _jsonable(acc.r),
                "integral": _jsonable(acc.integral),
                "peak_integrand": _jsonable(acc.peak_integrand),
                "threshold": _jsonable(acc.threshold),
                "crossed_at": _jsonable(acc.crossed_at),
            }
        )
    crossers = sorted(
        (acc for acc in accs if acc.crossed_at is not None), key=lambda a: a.crossed_at
    )
    ranking = [acc.kind.value for acc in crossers]
    ranking += [acc.kind.value for acc in accs if acc.crossed_at is None]
    return CriteriaReport(status=status, rows=rows, ranking=ranking)
