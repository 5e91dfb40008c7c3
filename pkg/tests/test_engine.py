"""Trajectory propagation, averaging, determinism, and convergence."""

import io
import math

import numpy as np
import pytest

from spindyad.analysis import FitResult
from spindyad.engine import (
    Experiment,
    SimConfig,
    SimulationError,
    TimeTrace,
    initial_state,
    propagate,
    run,
    sweep,
    trace_to_csv,
    zq_state,
)
from spindyad.linalg import reduced_operators
from spindyad.model import DyadParams
from spindyad.noise import ElectricNoiseConfig, FluctuatorConfig, sample_magnetic_trajectory
from spindyad.protocol import Delay, PulseProgram, Target, hahn_echo, zq_block, zq_chain

DT = 1e-8
J_PAR = 50e3
PARAMS = DyadParams(j_par=J_PAR, j_perp=J_PAR)
QUIET = FluctuatorConfig(beta_rms=0.0, xi=0.0, switch_rate=1e5, seed=0)
NOISY = FluctuatorConfig(beta_rms=1e-6, xi=0.5, switch_rate=1e5, seed=0)


def quiet_traj(duration):
    return sample_magnetic_trajectory(QUIET, duration, DT, 0)


class TestPropagate:
    def test_empty_program_returns_state(self):
        sim = SimConfig(n_trajectories=1, dt=DT)
        rho0 = initial_state()
        rho = propagate(rho0, PulseProgram(()), PARAMS, quiet_traj(0.0), sim)
        assert np.array_equal(rho, rho0)

    def test_transfer_reaches_initialized_state(self):
        from spindyad.protocol import polarization_transfer

        sim = SimConfig(n_trajectories=1, dt=DT)
        tau = 1.0 / (4 * J_PAR)
        prog = polarization_transfer(tau, J_PAR)
        rho = propagate(initial_state(), prog, PARAMS, quiet_traj(prog.total_duration), sim)
        assert float(np.real(rho[2, 2])) >= 0.999

    def test_zq_state_preserved_under_strong_global_noise(self):
        # exact commutation: shared-field noise of any amplitude leaves the
        # protected state untouched over 200 us
        cfg = FluctuatorConfig(beta_rms=100e-6, xi=0.0, switch_rate=1e5, seed=42)
        traj = sample_magnetic_trajectory(cfg, 200e-6, 1e-9, 7)
        sim = SimConfig(n_trajectories=1, dt=1e-9)
        prog = zq_block(200e-6, echo=False)
        rho = propagate(zq_state(), prog, PARAMS, traj, sim)
        assert np.max(np.abs(rho - zq_state())) < 1e-9

    def test_trajectory_shorter_than_program(self):
        sim = SimConfig(n_trajectories=1, dt=DT)
        prog = PulseProgram((Delay(2e-6),))
        with pytest.raises(SimulationError, match="shorter"):
            propagate(initial_state(), prog, PARAMS, quiet_traj(1e-6), sim)

    def test_off_grid_delay_rejected(self):
        sim = SimConfig(n_trajectories=1, dt=DT)
        prog = PulseProgram((Delay(1.23456e-8),))
        with pytest.raises(SimulationError, match="multiple"):
            propagate(initial_state(), prog, PARAMS, quiet_traj(1e-6), sim)

    def test_noise_free_delay_ignores_fields(self):
        ops = reduced_operators()
        n = 500
        cfg = FluctuatorConfig(beta_rms=50e-6, xi=1.0, switch_rate=1e5, seed=9)
        traj = sample_magnetic_trajectory(cfg, n * DT, DT, 0)
        sim = SimConfig(n_trajectories=1, dt=DT)
        params = DyadParams(j_par=0.0, j_perp=0.0)
        u = np.kron(np.eye(2), np.array([[1, -1j], [-1j, 1]]) / math.sqrt(2))
        rho0 = u @ initial_state() @ u.conj().T  # coherent superposition
        rho = propagate(rho0, PulseProgram((Delay(n * DT, noisy=False),)), params, traj, sim)
        assert np.max(np.abs(rho - rho0)) < 1e-12
        rho_noisy = propagate(rho0, PulseProgram((Delay(n * DT, noisy=True),)), params, traj, sim)
        assert np.max(np.abs(rho_noisy - rho0)) > 1e-3
        del ops

    def test_validation_catches_corruption(self):
        sim = SimConfig(n_trajectories=1, dt=DT)
        bad = initial_state() * 1.5
        with pytest.raises(AssertionError):
            propagate(bad, PulseProgram(()), PARAMS, quiet_traj(0.0), sim)


class TestRun:
    def _experiment(self, noise=NOISY, n_traj=20, times=(1e-6, 2e-6, 4e-6), **kw):
        sim = SimConfig(n_trajectories=n_traj, dt=DT, master_seed=5)
        return Experiment(
            params=PARAMS,
            noise=noise,
            sim=sim,
            program_builder=lambda tau: hahn_echo(tau),
            times=list(times),
            **kw,
        )

    def test_single_trajectory_zero_noise_equals_propagate(self):
        ops = reduced_operators()
        exp = self._experiment(noise=QUIET, n_traj=1)
        trace = run(exp)
        for t, s in zip(trace.times, trace.signal_mean):
            prog = hahn_echo(t)
            rho = propagate(
                initial_state(),
                prog,
                PARAMS,
                quiet_traj(prog.total_duration),
                exp.sim,
            )
            assert s == pytest.approx(float(np.real(np.trace(rho @ ops.proj_ms0))), abs=1e-12)
        assert np.all(trace.signal_sem == 0.0)

    def test_deterministic_across_thread_counts(self):
        exp = self._experiment(n_traj=16)
        t1 = run(exp, threads=1)
        t4 = run(exp, threads=4)
        assert np.array_equal(t1.signal_mean, t4.signal_mean)
        assert np.array_equal(t1.signal_sem, t4.signal_sem)

    def test_seed_changes_trace(self):
        exp = self._experiment(n_traj=8)
        other = Experiment(**{**exp.__dict__, "sim": SimConfig(n_trajectories=8, dt=DT, master_seed=6)})
        assert not np.array_equal(run(exp).signal_mean, run(other).signal_mean)

    def test_echo_refocuses_when_quiet(self):
        # zero noise and zero detuning: every echo returns the full signal
        exp = self._experiment(noise=QUIET, n_traj=1, times=(1e-6, 3e-6, 7e-6))
        trace = run(exp)
        assert np.max(np.abs(trace.signal_mean - 1.0)) < 1e-9

    def test_purity_of_averaged_state_non_increasing(self):
        # ensemble purity decays monotonically (within statistics) under
        # dephasing noise; probe via per-time averaged states
        sim = SimConfig(n_trajectories=64, dt=DT, master_seed=3)
        noise = FluctuatorConfig(beta_rms=2e-6, xi=1.0, switch_rate=1e5, seed=0)
        durations = [0.0, 2e-6, 6e-6, 14e-6]
        u = np.kron(np.eye(2), np.array([[1, -1j], [-1j, 1]]) / math.sqrt(2))
        rho0 = u @ initial_state() @ u.conj().T
        purities = []
        for d in durations:
            acc = np.zeros((4, 4), dtype=complex)
            for i in range(sim.n_trajectories):
                traj = sample_magnetic_trajectory(noise, max(d, DT), DT, i)
                rho = propagate(rho0, PulseProgram((Delay(d),)), PARAMS, traj, sim)
                acc += rho
            acc /= sim.n_trajectories
            purities.append(float(np.real(np.trace(acc @ acc))))
        # averaged coherences carry O(1/sqrt(N)) residuals, so purity can
        # fluctuate upward by O(1/N) once fully dephased
        stat_tol = 3.0 / sim.n_trajectories
        assert all(b <= a + stat_tol for a, b in zip(purities, purities[1:]))

    def test_dt_bound_enforced(self):
        noise = FluctuatorConfig(beta_rms=5e-4, xi=0.0, switch_rate=1e5, seed=0)
        exp = self._experiment(noise=noise, n_traj=1)
        with pytest.raises(SimulationError, match="eigenfrequency"):
            run(exp)

    def test_metadata_echoes_settings(self):
        exp = self._experiment(n_traj=4)
        trace = run(exp)
        assert trace.metadata["n_trajectories"] == 4
        assert trace.metadata["xi"] == NOISY.xi
        assert trace.metadata["master_seed"] == 5


class TestAnticrossingBeating:
    def test_beat_sits_at_dq_gap_scale(self):
        # the noise-free echo response at the anti-crossing oscillates on
        # the scale set by the double-quantum hybridization; check the
        # zero-crossing density against that scale without pinning an
        # exact value
        j = 0.15e6
        params = DyadParams(j_par=j, j_perp=j)
        sim = SimConfig(n_trajectories=1, dt=DT, master_seed=1, near_bm=True)
        quiet = FluctuatorConfig(beta_rms=0.0, xi=0.0, switch_rate=1e5, seed=0)
        taus = [round(t / DT) * DT for t in np.linspace(0.05e-6, 25e-6, 400)]
        exp = Experiment(
            params=params,
            noise=quiet,
            sim=sim,
            program_builder=lambda tau: hahn_echo(tau, Target.BOTH),
            times=taus,
        )
        trace = run(exp)
        dev = trace.signal_mean - 0.5
        crossings = int(np.count_nonzero(np.diff(np.sign(dev)) != 0))
        span = 2 * (taus[-1] - taus[0])
        f_scale = j / 2 + math.sqrt(2) * j  # fastest beat component
        expected = 2 * f_scale * span
        assert expected / 3 < crossings < expected * 3
        assert np.min(dev) < -0.2 and np.max(dev) > 0.2  # full-depth beating


class TestStepHalving:
    @pytest.mark.parametrize("near_bm", [False, True])
    def test_refined_noise_path_reproduces_signal(self, near_bm):
        # the propagator is exact for piecewise-constant noise, so
        # re-propagating the same noise path on a half step must agree
        ops = reduced_operators()
        params = DyadParams(j_par=0.75e6, j_perp=0.75e6)
        sim = SimConfig(n_trajectories=1, dt=DT, near_bm=near_bm, delta_b=2e-6)
        sim_fine = SimConfig(n_trajectories=1, dt=DT / 2, near_bm=near_bm, delta_b=2e-6)
        noise = FluctuatorConfig(beta_rms=1e-6, xi=0.5, switch_rate=1e5, seed=8)
        prog = hahn_echo(4e-6, Target.BOTH if near_bm else Target.SPIN_S)
        diffs = []
        for i in range(50):
            traj = sample_magnetic_trajectory(noise, prog.total_duration, DT, i)
            rho_a = propagate(initial_state(), prog, params, traj, sim)
            rho_b = propagate(initial_state(), prog, params, traj.refined(2), sim_fine)
            sa = float(np.real(np.trace(rho_a @ ops.proj_ms0)))
            sb = float(np.real(np.trace(rho_b @ ops.proj_ms0)))
            diffs.append(abs(sa - sb))
        assert max(diffs) < 1e-4

    def test_zq_chain_step_halving(self):
        ops = reduced_operators()
        sim = SimConfig(n_trajectories=1, dt=DT)
        sim_fine = SimConfig(n_trajectories=1, dt=DT / 2)
        tau = 1.0 / (4 * J_PAR)
        prog = zq_chain(tau, 20e-6, echo=True, theta=0.0, j_par=J_PAR)
        noise = FluctuatorConfig(beta_rms=1e-6, xi=0.7, switch_rate=1e5, seed=2)
        for i in range(20):
            traj = sample_magnetic_trajectory(noise, prog.total_duration, DT, i)
            sa = np.real(
                np.trace(propagate(initial_state(), prog, PARAMS, traj, sim) @ ops.proj_ms0)
            )
            sb = np.real(
                np.trace(
                    propagate(initial_state(), prog, PARAMS, traj.refined(2), sim_fine)
                    @ ops.proj_ms0
                )
            )
            assert abs(sa - sb) < 1e-4


class TestSweep:
    def _zq_experiment(self, **kw):
        tau = 1.0 / (4 * J_PAR)
        sim = SimConfig(n_trajectories=8, dt=DT, master_seed=2)
        return Experiment(
            params=PARAMS,
            noise=NOISY,
            sim=sim,
            program_builder=lambda tt: zq_chain(tau, tt, echo=True, theta=0.0, j_par=J_PAR),
            times=[5e-6, 10e-6],
            **kw,
        )

    def test_single_point_sweep_equals_run(self):
        exp = self._zq_experiment()
        res = sweep("xi", [NOISY.xi], exp)
        direct = run(exp)
        assert len(res) == 1
        assert np.array_equal(res[0].trace.signal_mean, direct.signal_mean)

    def test_xi_sweep_applies_value(self):
        exp = self._zq_experiment()
        res = sweep("xi", [0.0, 1.0], exp)
        assert res[0].trace.metadata["xi"] == 0.0
        assert res[1].trace.metadata["xi"] == 1.0

    def test_time_sweep_singletons(self):
        exp = self._zq_experiment()
        res = sweep("tau_tilde", [5e-6, 10e-6], exp)
        assert [r.trace.times[0] for r in res] == [5e-6, 10e-6]

    def test_reduce_callback(self):
        exp = self._zq_experiment()
        res = sweep("xi", [0.5], exp, reduce=lambda tr: float(tr.signal_mean[0]))
        assert res[0].summary == pytest.approx(res[0].trace.signal_mean[0])

    def test_unknown_variable(self):
        with pytest.raises(ValueError, match="unknown sweep variable"):
            sweep("frequency", [1.0], self._zq_experiment())

    def test_eps_sweep_requires_electric_channel(self):
        with pytest.raises(ValueError, match="electric"):
            sweep("eps_rms", [1e6], self._zq_experiment())

    def test_eps_sweep_with_channel(self):
        exp = self._zq_experiment(electric=ElectricNoiseConfig(eps_rms=1e6, switch_rate=1e5, seed=0))
        res = sweep("eps_rms", [1e6, 2e6], exp)
        assert res[1].trace.metadata["eps_rms"] == 2e6

    def test_theta_needs_custom_applier(self):
        exp = self._zq_experiment()
        with pytest.raises(ValueError, match="applier"):
            sweep("theta", [0.1], exp)
        tau = 1.0 / (4 * J_PAR)

        def apply(e, theta):
            from dataclasses import replace

            return replace(
                e,
                program_builder=lambda tt: zq_chain(tau, tt, echo=False, theta=theta, j_par=J_PAR),
            )

        res = sweep("theta", [0.0, math.pi / 2], exp, apply=apply)
        assert len(res) == 2


class TestTraceCsv:
    def test_header_and_rows(self):
        trace = TimeTrace(
            times=np.array([1e-6, 2e-6]),
            signal_mean=np.array([1.0, 0.5]),
            signal_sem=np.array([0.0, 0.01]),
            label="demo",
            metadata={"master_seed": 7, "xi": 0.5},
        )
        buf = io.StringIO()
        fit = FitResult(
            t2=2e-5, stretch_n=1.0, amplitude=0.5, offset=0.5, residual_rms=0.0, converged=True
        )
        trace_to_csv(trace, buf, sweep_value=0.25, fit=fit)
        lines = buf.getvalue().splitlines()
        assert lines[0] == "# master_seed = 7"
        assert lines[1] == "# xi = 0.5"
        assert lines[2] == "sweep_value,time_s,signal_mean,signal_sem"
        assert lines[3].startswith("0.25,9.9999999999999995e-07,1,")
        assert lines[-1].startswith("# fit: t2 = 2.0000000000000002e-05")

    def test_trace_validation(self):
        with pytest.raises(ValueError):
            TimeTrace(times=np.array([1.0]), signal_mean=np.array([1.0, 2.0]), signal_sem=np.array([0.0]))
        with pytest.raises(ValueError):
            TimeTrace(times=np.array([1.0]), signal_mean=np.array([1.0]), signal_sem=np.array([-0.1]))
