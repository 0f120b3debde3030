"""Right-hand sides, the integrating-factor step, and the run loop."""

import math

import numpy as np
import pytest

import ehd
from ehd import (
    BlowUpSuspected,
    ChargeNeutralityError,
    InvariantViolation,
    RealField,
    RunStatus,
    State,
    StepControl,
    VectorField,
)

PI = math.pi


def full(grid, values):
    return np.ascontiguousarray(np.broadcast_to(values, (grid.n,) * 3), dtype=float)


def zero_field(grid):
    return RealField(grid, np.zeros((grid.n,) * 3))


def zero_velocity(grid):
    return VectorField(zero_field(grid), zero_field(grid), zero_field(grid))


def quiescent(grid, v_samples, w_samples):
    return State(
        u=zero_velocity(grid),
        v=RealField(grid, v_samples),
        w=RealField(grid, w_samples),
    )


def kinetic_energy(state):
    return sum(ehd.lp_norm(c, 2) ** 2 for c in state.u.components)


class TestStepControl:
    def test_bounds_validated(self):
        with pytest.raises(ValueError, match="dt_min"):
            StepControl(dt=1e-3, dt_min=1e-2)
        with pytest.raises(ValueError, match="cfl"):
            StepControl(cfl=1.5)
        with pytest.raises(ValueError, match="cfl"):
            StepControl(cfl=0.0)


class TestDerivedFields:
    def test_symmetrized_charges_pointwise(self, grid16, rng):
        v = RealField(grid16, 1.0 + 0.25 * rng.standard_normal((16,) * 3))
        w = RealField(grid16, v.samples.mean() - 1.0 + v.samples)  # same mean as v
        w = RealField(grid16, v.samples.copy())
        s = quiescent(grid16, v.samples, w.samples)
        d = ehd.derive(s)
        assert np.abs(d.zeta.samples - (v.samples + w.samples)).max() <= 1e-14
        assert np.abs(d.eta.samples - (v.samples - w.samples)).max() <= 1e-14

    def test_potential_solves_poisson(self, grid16):
        s = ehd.charged_shear(grid16)
        d = ehd.derive(s)
        lap = ehd.backward_transform(ehd.laplacian(d.psi_hat))
        eta_mean_free = d.eta.samples - d.eta.samples.mean()
        assert np.abs(lap.samples - eta_mean_free).max() <= 1e-10


class TestMomentumRhs:
    def test_equal_charges_no_force(self, grid16):
        v = full(grid16, 1.0 + 0.5 * np.sin(grid16.x))
        s = quiescent(grid16, v, v.copy())
        rhs = ehd.momentum_rhs(s)
        for c in rhs.components:
            assert np.abs(c.samples).max() < 1e-12

    def test_taylor_green_advection_is_pure_gradient(self, grid32):
        s = ehd.taylor_green(grid32)
        rhs = ehd.momentum_rhs(s)
        for c in rhs.components:
            assert np.abs(c.samples).max() < 1e-10

    def test_one_dimensional_charge_force_is_pure_gradient(self, grid16):
        v = full(grid16, 1.0 + np.sin(grid16.x))
        w = full(grid16, 1.0)
        s = quiescent(grid16, v, w)
        rhs = ehd.momentum_rhs(s)
        for c in rhs.components:
            assert np.abs(c.samples).max() < 1e-10

    def test_neutrality_failure_propagates(self, grid16):
        s = quiescent(grid16, full(grid16, 1.1), full(grid16, 1.0))
        with pytest.raises(ChargeNeutralityError):
            ehd.momentum_rhs(s)


class TestChargeRhs:
    def test_uniform_charges_are_steady(self, grid16):
        s = quiescent(grid16, full(grid16, 1.0), full(grid16, 1.0))
        rv, rw = ehd.charge_rhs(s)
        assert np.abs(rv.samples).max() < 1e-13
        assert np.abs(rw.samples).max() < 1e-13

    def test_divergence_form_means_vanish(self, grid16):
        v = full(grid16, 1.0 + 0.5 * np.sin(grid16.x))
        s = quiescent(grid16, v, full(grid16, 1.0))
        rv, rw = ehd.charge_rhs(s)
        h3 = grid16.cell_volume
        assert abs(rv.samples.sum() * h3) < 1e-12
        assert abs(rw.samples.sum() * h3) < 1e-12

    def test_means_vanish_on_random_states(self, grid16):
        for seed in range(100):
            s = ehd.random_smooth(grid16, seed=seed, energy=1.0, peak_wavenumber=2.0)
            rv, rw = ehd.charge_rhs(s)
            h3 = grid16.cell_volume
            assert abs(rv.samples.sum() * h3) < 1e-12
            assert abs(rw.samples.sum() * h3) < 1e-12


class TestStep:
    def test_taylor_green_single_step(self, grid32):
        s0 = ehd.taylor_green(grid32)
        s1 = ehd.step(s0, StepControl(dt=1e-3, t_end=1.0))
        exact = ehd.taylor_green_velocity(grid32, s1.t)
        err = max(
            np.abs(a.samples - b.samples).max()
            for a, b in zip(s1.u.components, exact.components)
        )
        assert err <= 1e-9
        assert s1.t == pytest.approx(1e-3)
        assert s1.step_index == 1

    def test_zero_state_stays_zero(self, grid16):
        s0 = quiescent(grid16, np.zeros((16,) * 3), np.zeros((16,) * 3))
        s1 = ehd.step(s0, StepControl(dt=1e-2, t_end=1.0))
        for f in (*s1.u.components, s1.v, s1.w):
            assert np.all(f.samples == 0.0)

    def test_taylor_green_initial_energy(self, grid32):
        s0 = ehd.taylor_green(grid32)
        assert kinetic_energy(s0) == pytest.approx(4.0 * PI**3, rel=1e-12)

    def test_cfl_clamps_dt(self, grid16):
        u = VectorField(
            RealField(grid16, full(grid16, 50.0 * np.sin(grid16.y))),
            zero_field(grid16),
            zero_field(grid16),
        )
        s0 = State(u=u, v=zero_field(grid16), w=zero_field(grid16))
        control = StepControl(dt=1e-2, cfl=0.4, t_end=1.0)
        limit = ehd.cfl_limit(s0, control.cfl)
        assert limit < control.dt
        s1 = ehd.step(s0, control)
        assert (s1.t - s0.t) == pytest.approx(limit)

    def test_dt_collapse_aborts(self, grid16):
        u = VectorField(
            RealField(grid16, full(grid16, 1e6 * np.sin(grid16.y))),
            zero_field(grid16),
            zero_field(grid16),
        )
        s0 = State(u=u, v=zero_field(grid16), w=zero_field(grid16))
        with pytest.raises(BlowUpSuspected, match="collapsed"):
            ehd.step(s0, StepControl(dt=1e-3, dt_min=1e-5, t_end=1.0))

    def test_final_step_clamped_to_horizon_without_abort(self, grid16):
        s0 = ehd.taylor_green(grid16)
        s0 = State(u=s0.u, v=s0.v, w=s0.w, t=0.0995)
        control = StepControl(dt=1e-3, dt_min=9e-4, t_end=0.1)
        s1 = ehd.step(s0, control)  # remaining 5e-4 < dt_min but is not a collapse
        assert s1.t == pytest.approx(0.1)

    def test_third_order_in_time_on_charged_flow(self, grid16):
        """Field error against a fine-dt reference shrinks ~8x per halving."""
        def final_fields(dt):
            report = ehd.run(ehd.charged_shear(grid16),
                             StepControl(dt=dt, t_end=0.02))
            s = report.final_state
            return np.concatenate(
                [c.samples.ravel() for c in (*s.u.components, s.v, s.w)]
            )

        reference = final_fields(1.25e-4)
        errors = [np.abs(final_fields(dt) - reference).max()
                  for dt in (2e-3, 1e-3, 5e-4)]
        for coarse, fine in zip(errors, errors[1:]):
            assert 5.0 <= coarse / fine <= 11.0

    def test_non_finite_input_rejected(self, grid16):
        samples = np.zeros((16,) * 3)
        samples[0, 0, 0] = np.inf
        s0 = quiescent(grid16, samples, np.zeros((16,) * 3))
        with pytest.raises(BlowUpSuspected, match="non-finite"):
            ehd.step(s0, StepControl(dt=1e-3, t_end=1.0))

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_overflowing_state_reports_blow_up(self, grid16):
        u = VectorField(
            RealField(grid16, full(grid16, 1e160 * np.sin(grid16.y))),
            zero_field(grid16),
            zero_field(grid16),
        )
        s0 = State(u=u, v=zero_field(grid16), w=zero_field(grid16))
        with pytest.raises(BlowUpSuspected):
            ehd.step(s0, StepControl(dt=1e-3, dt_min=1e-300, t_end=1.0))


class TestRun:
    def test_zero_horizon_completes_without_steps(self, grid16):
        report = ehd.run(ehd.taylor_green(grid16), StepControl(dt=1e-3, t_end=0.0))
        assert report.status is RunStatus.COMPLETED
        assert report.steps == 0

    def test_taylor_green_energy_decay(self, grid16):
        control = StepControl(dt=1e-3, t_end=0.1)
        report = ehd.run(ehd.taylor_green(grid16), control)
        assert report.status is RunStatus.COMPLETED
        energy = kinetic_energy(report.final_state)
        expected = 4.0 * PI**3 * math.exp(-4.0 * report.t_final)
        assert energy == pytest.approx(expected, rel=1e-6)

    def test_equal_charges_leave_the_flow_pure(self, grid16):
        """v = w kills the potential exactly, so the velocity evolves as in
        the uncharged system while the charges are passively mixed."""
        base = ehd.taylor_green(grid16)
        charge = full(grid16, 1.0 + 0.5 * np.sin(grid16.x))
        s0 = State(u=base.u, v=RealField(grid16, charge),
                   w=RealField(grid16, charge.copy()))
        report = ehd.run(s0, StepControl(dt=1e-3, t_end=0.05))
        assert report.status is RunStatus.COMPLETED
        final = report.final_state
        exact = ehd.taylor_green_velocity(grid16, final.t)
        err = max(
            np.abs(a.samples - b.samples).max()
            for a, b in zip(final.u.components, exact.components)
        )
        assert err <= 1e-12
        # the charges were advected and diffused, not frozen
        assert np.abs(final.v.samples - charge).max() > 1e-3
        assert np.abs(final.v.samples - final.w.samples).max() <= 1e-12

    def test_charged_run_charges_stay_nonnegative(self, grid16):
        s0 = ehd.charged_shear(grid16)
        minima = []
        def watch(state, derived, dt):
            minima.append(min(state.v.samples.min(), state.w.samples.min()))
        report = ehd.run(s0, StepControl(dt=1e-3, t_end=0.05), hooks=[watch])
        assert report.status is RunStatus.COMPLETED
        assert min(minima) >= -1e-8

    def test_charge_means_conserved(self, grid16):
        s0 = ehd.charged_shear(grid16)
        mean_v0 = s0.v.samples.mean()
        mean_w0 = s0.w.samples.mean()
        report = ehd.run(s0, StepControl(dt=1e-3, t_end=0.05))
        final = report.final_state
        assert abs(final.v.samples.mean() - mean_v0) <= 1e-10 * abs(mean_v0)
        assert abs(final.w.samples.mean() - mean_w0) <= 1e-10 * abs(mean_w0)

    def test_divergence_invariant_every_step(self, grid16):
        s0 = ehd.charged_shear(grid16)
        worst = []
        def watch(state, derived, dt):
            div = ehd.backward_transform(ehd.divergence(derived.u_hat))
            worst.append(np.abs(div.samples).max())
        ehd.run(s0, StepControl(dt=1e-3, t_end=0.02), hooks=[watch])
        assert max(worst) <= 1e-9

    def test_non_neutral_initial_state_is_invariant_violation(self, grid16):
        s0 = quiescent(grid16, full(grid16, 1.5), full(grid16, 1.0))
        report = ehd.run(s0, StepControl(dt=1e-3, t_end=0.01))
        assert report.status is RunStatus.INVARIANT_VIOLATION
        assert "neutral" in report.diagnostic

    def test_non_solenoidal_initial_state_is_invariant_violation(self, grid16):
        u = VectorField(
            RealField(grid16, full(grid16, np.sin(grid16.x))),
            zero_field(grid16),
            zero_field(grid16),
        )
        s0 = State(u=u, v=zero_field(grid16), w=zero_field(grid16))
        report = ehd.run(s0, StepControl(dt=1e-3, t_end=0.01))
        assert report.status is RunStatus.INVARIANT_VIOLATION
        assert "divergence" in report.diagnostic

    def test_hooks_see_initial_state_then_every_step(self, grid16):
        calls = []
        def watch(state, derived, dt):
            calls.append((state.step_index, dt))
        report = ehd.run(ehd.taylor_green(grid16), StepControl(dt=1e-2, t_end=0.03),
                         hooks=[watch])
        assert calls[0] == (0, 0.0)
        assert len(calls) == report.steps + 1
        assert all(dt > 0 for _, dt in calls[1:])

    def test_hook_blow_up_signal_sets_status(self, grid16):
        def bomb(state, derived, dt):
            if dt > 0:
                raise BlowUpSuspected("integrand is non-finite (test)")
        report = ehd.run(ehd.taylor_green(grid16), StepControl(dt=1e-2, t_end=0.05),
                         hooks=[bomb])
        assert report.status is RunStatus.BLOW_UP_SUSPECTED
        assert "non-finite" in report.diagnostic

    def test_hook_invariant_signal_sets_status(self, grid16):
        def check(state, derived, dt):
            if state.step_index >= 2:
                raise InvariantViolation("ledger check failed (test)")
        report = ehd.run(ehd.taylor_green(grid16), StepControl(dt=1e-2, t_end=0.05),
                         hooks=[check])
        assert report.status is RunStatus.INVARIANT_VIOLATION
        assert "ledger check" in report.diagnostic

    def test_unexpected_hook_error_propagates(self, grid16):
        def broken(state, derived, dt):
            raise ValueError("observer bug")
        with pytest.raises(ValueError, match="observer bug"):
            ehd.run(ehd.taylor_green(grid16), StepControl(dt=1e-2, t_end=0.05),
                    hooks=[broken])

    def test_checksum_is_deterministic(self, grid16):
        control = StepControl(dt=1e-3, t_end=0.02)
        r1 = ehd.run(ehd.charged_shear(grid16), control)
        r2 = ehd.run(ehd.charged_shear(grid16), control)
        assert r1.state_checksum == r2.state_checksum
        assert r1.steps == r2.steps


class TestCflLimit:
    def test_quiescent_state_is_unlimited(self, grid16):
        s = quiescent(grid16, full(grid16, 1.0), full(grid16, 1.0))
        assert ehd.cfl_limit(s, 0.4) == math.inf

    def test_known_speed(self, grid16):
        u = VectorField(
            RealField(grid16, full(grid16, 2.0 * np.sin(grid16.y))),
            zero_field(grid16),
            zero_field(grid16),
        )
        s = State(u=u, v=zero_field(grid16), w=zero_field(grid16))
        expected = 0.4 * grid16.spacing / 2.0
        assert ehd.cfl_limit(s, 0.4) == pytest.approx(expected, rel=1e-12)

    def test_electric_drift_limits_the_step(self, grid16):
        """A quiescent charged state is still CFL-limited through grad psi."""
        s = ehd.charged_shear(grid16)
        # psi = -(sin x - sin y)/2, so max |grad psi| = sqrt(1/2)
        expected = 0.4 * grid16.spacing / math.sqrt(0.5)
        assert ehd.cfl_limit(s, 0.4) == pytest.approx(expected, rel=1e-12)
