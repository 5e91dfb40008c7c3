"""Piecewise-constant propagation and trajectory-averaged experiments.

The engine works in the doubly rotating frame resonant with both spins,
where the static generator is the one built by
:func:`spindyad.model.sim_frame_hamiltonian`; the only surviving terms
are the detuning from the operating point, the sampled noise fields, the
secular dipolar coupling and, near the level anti-crossing, the static
double-quantum term.

During a delay the noise is piecewise constant on the trajectory's step
grid, so the exact propagator factorizes over constant-noise segments:

* away from the anti-crossing the generator is diagonal and the whole
  delay reduces to integrated phases, evaluated in O(1) from cached
  prefix sums of the noise path;
* near the anti-crossing the generator has one 2x2 block coupling the
  outer pair of states, exponentiated in closed form per segment.

Both paths are exact for piecewise-constant noise (no step-splitting
error), which is what the step-halving convergence check relies on.

Determinism: per-trajectory noise streams are keyed by the trajectory
index, per-trajectory signals land in a preallocated array indexed the
same way, and the mean/standard-error reduction runs over that fixed
ordering, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import IO, Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .analysis import FitResult
from .linalg import assert_density_matrix, reduced_operators
from .model import DyadParams
from .noise import (
    ElectricNoiseConfig,
    FluctuatorConfig,
    NoiseTrajectory,
    partition,
    sample_electric_trajectory,
    sample_magnetic_trajectory,
)
from .protocol import Delay, PulseProgram, Repump, Rotation, rotation_unitary

__all__ = [
    "SimConfig",
    "TimeTrace",
    "Experiment",
    "SimulationError",
    "SweepResult",
    "initial_state",
    "zq_state",
    "propagate",
    "run",
    "sweep",
    "trace_to_csv",
]

_SQRT3 = math.sqrt(3.0)


class SimulationError(RuntimeError):
    """Raised when propagation preconditions or sanity checks fail."""


@dataclass(frozen=True)
class SimConfig:
    """Monte-Carlo execution settings.

    ``delta_b`` is the static detuning from the operating field (tesla);
    ``near_bm`` keeps the double-quantum coupling active, valid for
    detunings of at most ~100 uT from the anti-crossing.
    """

    n_trajectories: int = 500
    dt: float = 1e-8
    master_seed: int = 1
    near_bm: bool = False
    delta_b: float = 0.0
    frame: str = "doubly-rotating"
    validate: bool = True

    def __post_init__(self):
        if self.n_trajectories < 1:
            raise ValueError("n_trajectories must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.frame != "doubly-rotating":
            raise ValueError("only the doubly-rotating frame is supported")
        if self.near_bm and abs(self.delta_b) > 100e-6:
            warnings.warn(
                f"near_bm with |delta_b| = {abs(self.delta_b):.3g} T exceeds the "
                f"~100 uT regime where the static double-quantum term is valid",
                stacklevel=2,
            )


@dataclass(frozen=True)
class TimeTrace:
    """Averaged readout signal versus evolution time."""

    times: NDArray
    signal_mean: NDArray
    signal_sem: NDArray
    label: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        m = np.asarray(self.signal_mean, dtype=float)
        s = np.asarray(self.signal_sem, dtype=float)
        if not (t.shape == m.shape == s.shape):
            raise ValueError("times, signal_mean, signal_sem must have equal length")
        if np.any(s < 0):
            raise ValueError("signal_sem must be >= 0")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "signal_mean", m)
        object.__setattr__(self, "signal_sem", s)


def initial_state() -> NDArray:
    """Optically initialized dyad: |0><0| on the spin-1 manifold with an
    unpolarized partner, I/4 + Tz/2."""
    ops = reduced_operators()
    return np.asarray(ops.identity / 4.0 + ops.tilde_z / 2.0)


def zq_state() -> NDArray:
    """Ideal zero-quantum state after initialization and conversion:
    (I + 4(TxPy - TyPx) - 4 TzPz) / 4."""
    ops = reduced_operators()
    return np.asarray(ops.identity / 4.0 + ops.zq_antisym - ops.zz)


def _repump_state(rho: NDArray) -> NDArray:
    """rho -> |0><0|_S (x) Tr_S(rho) in the reduced ordering (partner slow)."""
    r = rho.reshape(2, 2, 2, 2)  # indices (p1, t1, p2, t2)
    rho_p = np.einsum("iaja->ij", r)  # trace over the fictitious spin
    proj0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    return np.kron(rho_p, proj0)


def _max_eigenfrequency(
    params: DyadParams,
    sim: SimConfig,
    noise: FluctuatorConfig,
    electric: Optional[ElectricNoiseConfig],
    thermal_shift: float,
) -> float:
    """Conservative bound on |eigenvalue| of the frame generator (rad/s)."""
    sig_g, sig_l = partition(noise.xi, noise.beta_rms)
    beta_max = _SQRT3 * (sig_g + sig_l)
    a_max = params.gamma_e * (abs(sim.delta_b) + beta_max) + abs(thermal_shift)
    if electric is not None:
        a_max += abs(params.d_par) * _SQRT3 * electric.eps_rms
    b_max = params.gamma_e * (abs(sim.delta_b) + beta_max)
    bound = 0.5 * (a_max + b_max) + 0.5 * math.pi * abs(params.j_par)
    if sim.near_bm:
        bound += 2.0 * math.pi * abs(params.j_perp) * math.sqrt(2.0)
    return bound


def _check_dt_bound(dt: float, omega_max: float) -> None:
    # twenty steps per cycle of the fastest eigenfrequency
    f_max = omega_max / (2.0 * math.pi)
    if f_max > 0 and dt > 1.0 / (20.0 * f_max):
        raise SimulationError(
            f"dt = {dt:.3g} s does not resolve the fastest eigenfrequency "
            f"{f_max:.3g} Hz; need dt <= {1.0 / (20.0 * f_max):.3g} s"
        )


def _dq_segment_unitaries(
    a: NDArray, b: NDArray, jpar_w: float, g_dq: float, t: NDArray
) -> NDArray:
    """Stacked exp(-i H t) for 4-dim generators with one 2x2 block.

    ``a`` and ``b`` are per-segment Tz / Pz coefficients (rad/s), ``t``
    the segment durations; the double-quantum coupling ``g_dq`` connects
    basis states 0 and 3. Returns an (n, 4, 4) array.
    """
    n = len(t)
    # diagonal energies: E(mt, mp) = a mt + b mp + jpar_w mt mp
    e1 = 0.5 * (-a + b) - 0.25 * jpar_w
    e2 = 0.5 * (a - b) - 0.25 * jpar_w
    mean = 0.25 * jpar_w  # (E0 + E3) / 2
    half_gap = 0.5 * (a + b)  # (E0 - E3) / 2
    omega = np.hypot(half_gap, g_dq)
    phase = np.exp(-1j * mean * t)
    c = np.cos(omega * t)
    s = np.empty_like(c)
    nz = omega > 0
    s[nz] = np.sin(omega[nz] * t[nz]) / omega[nz]
    s[~nz] = t[~nz]
    u = np.zeros((n, 4, 4), dtype=complex)
    u[:, 1, 1] = np.exp(-1j * e1 * t)
    u[:, 2, 2] = np.exp(-1j * e2 * t)
    u[:, 0, 0] = phase * (c - 1j * half_gap * s)
    u[:, 3, 3] = phase * (c + 1j * half_gap * s)
    u[:, 0, 3] = phase * (-1j * g_dq * s)
    u[:, 3, 0] = u[:, 0, 3]
    return u


class _Propagator:
    """Reusable per-run propagation context."""

    def __init__(
        self,
        params: DyadParams,
        sim: SimConfig,
        thermal_shift: float = 0.0,
    ):
        ops = reduced_operators()
        self.params = params
        self.sim = sim
        self.thermal_shift = thermal_shift
        self.z_tilde = np.real(np.diag(ops.tilde_z)).copy()
        self.z_prime = np.real(np.diag(ops.prime_z)).copy()
        self.z_zz = np.real(np.diag(ops.zz)).copy()
        self.jpar_w = 2.0 * math.pi * params.j_par
        self.g_dq = 2.0 * math.pi * params.j_perp * math.sqrt(2.0) if sim.near_bm else 0.0
        # static contributions to the Tz / Pz coefficients
        self.a_base = params.gamma_e * sim.delta_b + thermal_shift
        self.b_base = params.gamma_e * sim.delta_b

    def delay(self, rho: NDArray, elem: Delay, traj: NoiseTrajectory, k0: int) -> tuple[NDArray, int]:
        dt = traj.dt
        n = int(round(elem.duration / dt))
        if abs(n * dt - elem.duration) > 1e-6 * dt:
            raise SimulationError(
                f"delay {elem.duration:.6g} s is not a multiple of dt = {dt:.3g} s"
            )
        k1 = k0 + n
        if k1 > traj.n_steps:
            raise SimulationError(
                f"noise trajectory ({traj.n_steps} steps) shorter than program "
                f"(needs {k1})"
            )
        if n == 0:
            return rho, k0
        if elem.noisy:
            sum_beta = traj.cumulative("beta_s")[k1] - traj.cumulative("beta_s")[k0]
            sum_beta_p = traj.cumulative("beta_s_prime")[k1] - traj.cumulative("beta_s_prime")[k0]
            sum_eps_z = traj.cumulative("eps_z")[k1] - traj.cumulative("eps_z")[k0]
        else:
            sum_beta = sum_beta_p = sum_eps_z = 0.0
        if self.g_dq == 0.0:
            # diagonal generator: integrate the phases over the whole delay
            a_int = dt * (n * self.a_base) + dt * (
                self.params.gamma_e * sum_beta - self.params.d_par * sum_eps_z
            )
            b_int = dt * (n * self.b_base) + dt * self.params.gamma_e * sum_beta_p
            phases = (
                a_int * self.z_tilde + b_int * self.z_prime + self.jpar_w * n * dt * self.z_zz
            )
            u_diag = np.exp(-1j * phases)
            rho = (u_diag[:, None] * rho) * u_diag.conj()[None, :]
            return rho, k1
        # active double-quantum block: exponentiate per constant-noise segment
        if elem.noisy:
            beta = traj.beta_s[k0:k1]
            beta_p = traj.beta_s_prime[k0:k1]
            eps_z = traj.eps[k0:k1, 2] if traj.eps is not None else None
            change = (np.diff(beta) != 0) | (np.diff(beta_p) != 0)
            if eps_z is not None:
                change |= np.diff(eps_z) != 0
            starts = np.concatenate(([0], np.flatnonzero(change) + 1))
            lengths = np.diff(np.concatenate((starts, [n])))
            a = self.a_base + self.params.gamma_e * beta[starts]
            if eps_z is not None:
                a = a - self.params.d_par * eps_z[starts]
            b = self.b_base + self.params.gamma_e * beta_p[starts]
        else:
            a = np.array([self.a_base])
            b = np.array([self.b_base])
            lengths = np.array([n])
        units = _dq_segment_unitaries(a, b, self.jpar_w, self.g_dq, lengths * dt)
        u_total = units[0]
        for i in range(1, units.shape[0]):
            u_total = units[i] @ u_total
        rho = u_total @ rho @ u_total.conj().T
        return rho, k1


def propagate(
    rho0: NDArray,
    program: PulseProgram,
    params: DyadParams,
    traj: NoiseTrajectory,
    sim: SimConfig,
    thermal_shift: float = 0.0,
    start_step: int = 0,
    validate: Optional[bool] = None,
) -> NDArray:
    """Propagate a state through a pulse program under one noise path.

    Delays advance through the trajectory's step grid (noise suppressed
    for noise-free delays but time still elapsing); rotations and repump
    events apply instantaneously between steps. Returns the final state.
    """
    validate = sim.validate if validate is None else validate
    if validate:
        assert_density_matrix(rho0)
    ctx = _Propagator(params, sim, thermal_shift)
    rho = np.array(rho0, dtype=complex)
    k = start_step
    for elem in program.elements:
        if isinstance(elem, Delay):
            rho, k = ctx.delay(rho, elem, traj, k)
        elif isinstance(elem, Rotation):
            u = rotation_unitary(elem)
            rho = u @ rho @ u.conj().T
        elif isinstance(elem, Repump):
            rho = _repump_state(rho)
        else:
            raise SimulationError(f"unknown program element {elem!r}")
        if validate:
            tr = complex(np.trace(rho))
            if abs(tr - 1.0) > 1e-9 or np.max(np.abs(rho - rho.conj().T)) > 1e-9:
                raise SimulationError(
                    f"state invariants violated after element {elem!r}: trace={tr}"
                )
    if validate:
        assert_density_matrix(rho)
    return rho


@dataclass(frozen=True)
class Experiment:
    """One trajectory-averaged experiment: a family of programs over the
    swept evolution times, plus all physical and noise settings.

    ``program_builder`` maps a sweep time (s) to the pulse program run at
    that point; ``delta_temp`` injects a thermal crystal-field shift.
    """

    params: DyadParams
    noise: FluctuatorConfig
    sim: SimConfig
    program_builder: Callable[[float], PulseProgram]
    times: Sequence[float]
    rho0: Optional[NDArray] = None
    electric: Optional[ElectricNoiseConfig] = None
    delta_temp: float = 0.0
    label: str = ""

    @property
    def thermal_shift(self) -> float:
        return self.params.ddelta_dT * self.delta_temp


def run(exp: Experiment, threads: int = 1) -> TimeTrace:
    """Execute an experiment and average the readout over trajectories.

    The readout observable is the fractional population of m_S = 0,
    Tr(rho P0). The reported uncertainty is the standard error of the
    per-trajectory signals (zero for a single trajectory).
    """
    times = np.asarray(list(exp.times), dtype=float)
    if times.size == 0:
        raise ValueError("experiment has no sweep times")
    programs = [exp.program_builder(float(t)) for t in times]
    durations = np.array([p.total_duration for p in programs])
    dt = exp.sim.dt
    n_steps = [int(round(d / dt)) for d in durations]
    for prog, d, n in zip(programs, durations, n_steps):
        if abs(n * dt - d) > 1e-6 * dt:
            raise SimulationError(
                f"program {prog.label!r} duration {d:.6g} s is off the dt grid"
            )
    max_steps = max(n_steps)
    omega_max = _max_eigenfrequency(
        exp.params, exp.sim, exp.noise, exp.electric, exp.thermal_shift
    )
    _check_dt_bound(dt, omega_max)
    rho0 = initial_state() if exp.rho0 is None else exp.rho0
    ops = reduced_operators()
    proj0 = ops.proj_ms0
    n_traj = exp.sim.n_trajectories
    noise_cfg = replace(exp.noise, seed=exp.noise.seed ^ exp.sim.master_seed)
    electric_cfg = (
        None
        if exp.electric is None
        else replace(exp.electric, seed=exp.electric.seed ^ exp.sim.master_seed)
    )
    signals = np.empty((times.size, n_traj))

    def worker(i: int) -> None:
        try:
            traj = sample_magnetic_trajectory(noise_cfg, max_steps * dt, dt, stream_id=i)
            if electric_cfg is not None:
                traj.eps = sample_electric_trajectory(
                    electric_cfg, max_steps * dt, dt, stream_id=i
                )
            for k, prog in enumerate(programs):
                rho = propagate(
                    rho0,
                    prog,
                    exp.params,
                    traj,
                    exp.sim,
                    thermal_shift=exp.thermal_shift,
                    validate=exp.sim.validate and i == 0,
                )
                signals[k, i] = float(np.real(np.trace(rho @ proj0)))
        except Exception as exc:  # annotate with the failing stream
            raise SimulationError(f"trajectory {i}: {exc}") from exc

    if threads <= 1:
        for i in range(n_traj):
            worker(i)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            # consume results to surface worker exceptions
            list(pool.map(worker, range(n_traj)))

    mean = signals.mean(axis=1)
    if n_traj > 1:
        sem = signals.std(axis=1, ddof=1) / math.sqrt(n_traj)
    else:
        sem = np.zeros_like(mean)
    metadata = {
        "label": exp.label,
        "master_seed": exp.sim.master_seed,
        "n_trajectories": n_traj,
        "dt": dt,
        "near_bm": exp.sim.near_bm,
        "delta_b": exp.sim.delta_b,
        "beta_rms": exp.noise.beta_rms,
        "xi": exp.noise.xi,
        "switch_rate": exp.noise.switch_rate,
        "j_par": exp.params.j_par,
        "j_perp": exp.params.j_perp,
        "delta_temp": exp.delta_temp,
        "eps_rms": 0.0 if exp.electric is None else exp.electric.eps_rms,
    }
    return TimeTrace(times, mean, sem, label=exp.label, metadata=metadata)


@dataclass(frozen=True)
class SweepResult:
    value: float
    trace: TimeTrace
    summary: Optional[object] = None


_SWEEPABLE = ("delta_b", "xi", "eps_rms", "tau", "tau_tilde", "theta")


def _apply_variable(exp: Experiment, variable: str, value: float) -> Experiment:
    if variable == "delta_b":
        return replace(exp, sim=replace(exp.sim, delta_b=value))
    if variable == "xi":
        return replace(exp, noise=replace(exp.noise, xi=value))
    if variable == "eps_rms":
        if exp.electric is None:
            raise ValueError("experiment has no electric noise channel to sweep")
        return replace(exp, electric=replace(exp.electric, eps_rms=value))
    if variable in ("tau", "tau_tilde"):
        return replace(exp, times=[value])
    raise ValueError(f"no default applier for sweep variable {variable!r}")


def sweep(
    variable: str,
    values: Sequence[float],
    exp: Experiment,
    threads: int = 1,
    reduce: Optional[Callable[[TimeTrace], object]] = None,
    apply: Optional[Callable[[Experiment, float], Experiment]] = None,
) -> list[SweepResult]:
    """Run one experiment per sweep value.

    ``variable`` is one of delta_b, xi, eps_rms, tau, tau_tilde, theta;
    theta (and any custom variable) needs an explicit ``apply`` callable
    since it reshapes the program family. ``reduce`` optionally maps each
    trace to a scalar summary (e.g. a coherence-time fit).
    """
    if variable not in _SWEEPABLE:
        raise ValueError(f"unknown sweep variable {variable!r}; expected one of {_SWEEPABLE}")
    if apply is None:
        apply = lambda e, v: _apply_variable(e, variable, v)
    results = []
    for v in values:
        trace = run(apply(exp, float(v)), threads=threads)
        summary = reduce(trace) if reduce is not None else None
        results.append(SweepResult(value=float(v), trace=trace, summary=summary))
    return results


def trace_to_csv(
    trace: TimeTrace,
    stream: IO[str],
    sweep_value: float | None = None,
    fit: Optional[FitResult] = None,
) -> None:
    """Write a trace as CSV with a '#'-prefixed metadata header and an
    optional fit-result footer."""
    for key in sorted(trace.metadata):
        stream.write(f"# {key} = {trace.metadata[key]}\n")
    stream.write("sweep_value,time_s,signal_mean,signal_sem\n")
    sv = "" if sweep_value is None else f"{sweep_value:.17g}"
    for t, m, s in zip(trace.times, trace.signal_mean, trace.signal_sem):
        stream.write(f"{sv},{t:.17g},{m:.17g},{s:.17g}\n")
    if fit is not None:
        stream.write(
            f"# fit: t2 = {fit.t2:.17g}, stretch_n = {fit.stretch_n:.17g}, "
            f"amplitude = {fit.amplitude:.17g}, offset = {fit.offset:.17g}, "
            f"residual_rms = {fit.residual_rms:.17g}, converged = {fit.converged}\n"
        )
