"""Named experiment presets: one per supported measurement protocol.

Each preset turns a parsed config into engine runs and writes its
artifacts (CSV traces, optional SVG plot, and a summary text file) into
the output directory. The CSV files are the data contract; every file
starts with a '#'-prefixed echo of the resolved configuration and seed.
"""

from __future__ import annotations

import math
from dataclasses import replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import analysis, engine, model, protocol, svg
from .config import ConfigError, ExperimentConfig
from .engine import Experiment, SimConfig, TimeTrace
from .noise import ElectricNoiseConfig, FluctuatorConfig, sample_magnetic_trajectory
from .protocol import Target

__all__ = [
    "run_preset",
    "PresetError",
    "echo_coherence_time",
    "fit_resolved_t2",
    "half_excess_detuning",
]


class PresetError(RuntimeError):
    """Preset could not be executed with the given configuration."""


def _snap(t: float, dt: float) -> float:
    """Quantize a time to the propagation grid."""
    return max(0, int(round(t / dt))) * dt


def _build_params(cfg: ExperimentConfig) -> model.DyadParams:
    two_pi = 2.0 * math.pi
    kwargs = dict(
        delta=two_pi * cfg.number("params", "delta"),
        gamma_e=two_pi * cfg.number("params", "gamma_e"),
        b_field=cfg.number("params", "b_field"),
        d_par=two_pi * cfg.number("params", "d_par"),
        d_perp=two_pi * cfg.number("params", "d_perp"),
        ddelta_dT=two_pi * cfg.number("params", "ddelta_dt"),
    )
    if cfg.has("params", "j") and cfg.has("params", "theta"):
        kwargs["j_coupling"] = cfg.number("params", "j")
        kwargs["theta"] = cfg.number("params", "theta")
    if cfg.has("params", "j_par"):
        kwargs["j_par"] = cfg.number("params", "j_par")
    if cfg.has("params", "j_perp"):
        kwargs["j_perp"] = cfg.number("params", "j_perp")
    if cfg.has("params", "distance"):
        kwargs["distance"] = cfg.number("params", "distance")
    return model.DyadParams(**kwargs)


def _build_noise(cfg: ExperimentConfig) -> FluctuatorConfig:
    # stream seed 0: the engine folds the master seed into every stream
    return FluctuatorConfig(
        beta_rms=cfg.number("noise", "beta_rms"),
        xi=cfg.number("noise", "xi"),
        switch_rate=cfg.number("noise", "switch_rate"),
        seed=0,
    )


def _build_electric(cfg: ExperimentConfig) -> Optional[ElectricNoiseConfig]:
    eps = cfg.number("noise", "eps_rms")
    if eps == 0.0:
        return None
    return ElectricNoiseConfig(
        eps_rms=eps, switch_rate=cfg.number("noise", "electric_rate"), seed=0
    )


def _build_sim(cfg: ExperimentConfig, seed: int, trajectories: Optional[int]) -> SimConfig:
    return SimConfig(
        n_trajectories=trajectories or int(cfg.number("sim", "trajectories")),
        dt=cfg.number("sim", "dt"),
        master_seed=seed,
        near_bm=cfg.flag("sim", "near_bm"),
        delta_b=cfg.number("sim", "delta_b"),
    )


def _tau_grid(cfg: ExperimentConfig, dt: float) -> list[float]:
    start = cfg.number("sweep", "tau_start")
    stop = cfg.number("sweep", "tau_stop")
    count = int(cfg.number("sweep", "tau_count"))
    if count < 2 or stop <= start:
        raise ConfigError("tau grid needs tau_start < tau_stop and tau_count >= 2")
    if cfg.text("sweep", "tau_spacing") == "log":
        ratio = (stop / start) ** (1.0 / (count - 1))
        raw = [start * ratio**i for i in range(count)]
    else:
        step = (stop - start) / (count - 1)
        raw = [start + i * step for i in range(count)]
    grid = sorted({_snap(t, dt) for t in raw if _snap(t, dt) > 0})
    if len(grid) < 8:
        raise ConfigError("tau grid collapses below 8 distinct on-grid points; refine dt or bounds")
    return grid


def _fit_or_none(trace: TimeTrace) -> Optional[analysis.FitResult]:
    try:
        return analysis.fit_stretched_exponential(trace)
    except analysis.FlatTraceError:
        return None


def fit_resolved_t2(trace, time_factor: float = 1.0, weighted: bool = True) -> float:
    """Coherence time versus time_factor * the trace's sweep axis, with
    unresolvable decays reported as inf.

    A fit whose decay amplitude does not clear three times the median
    standard error is a noise artifact of a nearly flat trace (the
    protected-state signature at finite trajectory counts), not a
    lifetime. ``weighted=False`` fits all points equally; contrast-ratio
    envelopes need this because their per-point standard errors do not
    include the systematic reference-tracking wobble.
    """
    sem = np.asarray(trace.signal_sem, dtype=float)
    scaled = TimeTrace(
        times=time_factor * np.asarray(trace.times, dtype=float),
        signal_mean=trace.signal_mean,
        signal_sem=sem if weighted else np.zeros_like(sem),
    )
    fit = _fit_or_none(scaled)
    if fit is None:
        return math.inf
    floor = 3.0 * float(np.median(sem))
    if floor > 0 and abs(fit.amplitude) < floor:
        return math.inf
    return fit.t2


def _write_trace(
    path: Path,
    trace: TimeTrace,
    cfg: ExperimentConfig,
    sweep_value: float | None = None,
    fit: Optional[analysis.FitResult] = None,
    mode: str = "w",
) -> None:
    with path.open(mode) as fh:
        if mode == "w":
            for key in sorted(cfg.resolved):
                fh.write(f"# config {key} = {cfg.resolved[key]}\n")
        engine.trace_to_csv(trace, fh, sweep_value=sweep_value, fit=fit)


def _write_summary(path: Path, cfg: ExperimentConfig, items: dict) -> None:
    with path.open("w") as fh:
        for key in sorted(cfg.resolved):
            fh.write(f"# config {key} = {cfg.resolved[key]}\n")
        for k, v in items.items():
            fh.write(f"{k} = {v}\n")


def _echo_program_builder(
    cfg: ExperimentConfig, deer_mode: bool
) -> Callable[[float], protocol.PulseProgram]:
    near = cfg.flag("sim", "near_bm")
    shared = cfg.flag("sim", "shared_field")

    def build(tau: float) -> protocol.PulseProgram:
        if deer_mode:
            return protocol.deer(tau, at_anticrossing=near, shared_field=shared)
        target = Target.BOTH if near else Target.SPIN_S
        return protocol.hahn_echo(tau, target=target, shared_field=shared)

    return build


def echo_coherence_time(
    exp: Experiment,
    tau_max: float,
    tau_min: float = 0.3e-6,
    n_points: int = 22,
    threads: int = 1,
) -> tuple[float, TimeTrace]:
    """Echo coherence time via a beat-anchored contrast envelope.

    Near the anti-crossing the averaged echo signal beats at the
    double-quantum gap, so the delay grid is anchored at beat antinodes
    of a noise-free reference trace and the fitted quantity is the
    contrast ratio (signal - 1/2) / (reference - 1/2), which isolates the
    decay envelope. Away from the anti-crossing the reference is flat at
    one and the procedure reduces to a plain stretched-exponential fit.

    Returns (t2, envelope_trace); t2 is inf for an unresolvable decay.
    The envelope trace's time axis is the total evolution time 2 tau.
    """
    dt = exp.sim.dt
    p = exp.params

    def snap(t: float) -> float:
        return max(1, int(round(t / dt))) * dt

    anchors = np.geomspace(max(tau_min, dt), tau_max, n_points)
    # fastest coherent modulation of the noise-free response: the
    # double-quantum beat near the anti-crossing, the recoupled secular
    # modulation otherwise (plain echoes are unmodulated and scan trivially)
    if exp.sim.near_bm:
        f_fast = abs(p.j_par) / 2.0 + math.sqrt(2.0) * abs(p.j_perp)
    else:
        f_fast = abs(p.j_par)
    scan = 0.6 / f_fast if f_fast > 0 else 0.0
    quiet = replace(exp.noise, beta_rms=0.0)
    sim1 = replace(exp.sim, n_trajectories=1)
    clean_exp = replace(exp, noise=quiet, sim=sim1, electric=None)
    selected: dict[float, float] = {}
    for a in anchors:
        cand = sorted({snap(t) for t in np.linspace(a, a + scan, 12)})
        trace_c = engine.run(replace(clean_exp, times=cand))
        k = int(np.argmax(np.abs(trace_c.signal_mean - 0.5)))
        if abs(trace_c.signal_mean[k] - 0.5) >= 0.3:
            selected[cand[k]] = float(trace_c.signal_mean[k])
    times = sorted(selected)
    contrast = np.array([selected[t] for t in times])
    if len(times) < 8:
        raise PresetError("fewer than 8 usable echo delays; extend the tau range")
    trace = engine.run(replace(exp, times=times), threads=threads)
    ratio = (trace.signal_mean - 0.5) / (contrast - 0.5)
    sem = trace.signal_sem / np.abs(contrast - 0.5)
    # the quadratic mean frequency shift slowly slips the averaged beat
    # out of phase with the reference; once the contrast ratio swings
    # clearly negative the later samples carry no envelope information
    negative = np.flatnonzero(ratio < -np.maximum(0.1, 3.0 * sem))
    cut = int(negative[0]) if negative.size else len(ratio)
    if cut >= 8:
        times, ratio, sem = times[:cut], ratio[:cut], sem[:cut]
    env = TimeTrace(
        times=2.0 * np.asarray(times),
        signal_mean=ratio,
        signal_sem=sem,
        label=trace.label + " envelope",
        metadata=trace.metadata,
    )
    try:
        fit = analysis.fit_envelope_decay(env)
    except analysis.FlatTraceError:
        return math.inf, env
    if fit.t2 >= 49.0 * float(env.times[-1]):
        # driven to the slow-time bound: not resolvable in this window
        return math.inf, env
    return fit.t2, env


def _zq_program_builder(
    cfg: ExperimentConfig,
    tau_zq: float,
    echo: bool,
    theta: float,
    j_par: float,
) -> Callable[[float], protocol.PulseProgram]:
    scope = cfg.text("sim", "noise_during")

    def build(tau_tilde: float) -> protocol.PulseProgram:
        return protocol.zq_chain(
            tau_zq, tau_tilde, echo=echo, theta=theta, j_par=j_par, noise_scope=scope
        )

    return build


def _base_experiment(
    cfg: ExperimentConfig,
    seed: int,
    trajectories: Optional[int],
    builder: Callable[[float], protocol.PulseProgram],
    times,
    label: str,
    delta_temp: float = 0.0,
) -> Experiment:
    return Experiment(
        params=_build_params(cfg),
        noise=_build_noise(cfg),
        sim=_build_sim(cfg, seed, trajectories),
        program_builder=builder,
        times=times,
        electric=_build_electric(cfg),
        delta_temp=delta_temp,
        label=label,
    )


# ---------------------------------------------------------------------------
# preset implementations
# ---------------------------------------------------------------------------


def _preset_levels(cfg, out, label, seed, trajectories, threads, plot):
    params = _build_params(cfg)
    values = cfg.sweep_values() if cfg.text("sweep", "variable") == "b_field" else None
    if values is None or len(values) < 2:
        b_m = model.anticrossing_field(params)
        values = list(np.linspace(0.8 * b_m, 1.2 * b_m, 401))
    diagram = model.level_diagram(params, values, apply_shift=False)
    shifted = model.level_diagram(params, values, apply_shift=True)
    csv_path = out / f"{label}.csv"
    with csv_path.open("w") as fh:
        for key in sorted(cfg.resolved):
            fh.write(f"# config {key} = {cfg.resolved[key]}\n")
        fh.write(f"# master_seed = {seed}\n")
        cols = [f"branch{i}_rad_s" for i in range(6)] + [f"branch{i}_shifted_rad_s" for i in range(6)]
        fh.write("b_tesla," + ",".join(cols) + "\n")
        for k, b in enumerate(diagram.b_values):
            row = [f"{b:.17g}"]
            row += [f"{v:.17g}" for v in diagram.branches[k]]
            row += [f"{v:.17g}" for v in shifted.branches[k]]
            fh.write(",".join(row) + "\n")
    if plot:
        svg.line_plot(
            out / f"{label}.svg",
            diagram.b_values * 1e3,
            [(f"level {i}", shifted.branches[:, i] / (2 * math.pi * 1e9)) for i in range(6)],
            title="Energy levels vs field (shifted)",
            xlabel="B (mT)",
            ylabel="E / 2pi (GHz)",
        )
    _write_summary(
        out / f"{label}_summary.txt",
        cfg,
        {"anticrossing_field_T": f"{model.anticrossing_field(params):.17g}"},
    )
    return {"csv": str(csv_path)}


def _preset_echo(cfg, out, label, seed, trajectories, threads, plot, deer_mode=False):
    sim = _build_sim(cfg, seed, trajectories)
    taus = _tau_grid(cfg, sim.dt)
    exp = _base_experiment(
        cfg, seed, trajectories, _echo_program_builder(cfg, deer_mode), taus, label
    )
    trace = engine.run(exp, threads=threads)
    t2, env = echo_coherence_time(exp, tau_max=max(taus), tau_min=min(taus), threads=threads)
    _write_trace(out / f"{label}.csv", trace, cfg)
    _write_trace(out / f"{label}_envelope.csv", env, cfg)
    if plot:
        svg.line_plot(
            out / f"{label}.svg",
            [2 * t * 1e6 for t in trace.times],
            [("signal", trace.signal_mean)],
            title=trace.label,
            xlabel="total evolution time 2 tau (us)",
            ylabel="P(m_S = 0)",
        )
    summary = {"protocol": "deer" if deer_mode else "hahn_echo"}
    if not math.isfinite(t2):
        summary["t2"] = "no decay resolvable"
    else:
        summary["t2_s"] = f"{t2:.17g}"
    _write_summary(out / f"{label}_summary.txt", cfg, summary)
    return summary


def _fit_t2_of_tau_trace(trace: TimeTrace, time_factor: float = 2.0) -> float:
    """T2 versus total evolution time (time_factor * the sweep axis);
    inf for flat or unresolved traces (the protected-state outcome)."""
    return fit_resolved_t2(trace, time_factor=time_factor)


def half_excess_detuning(values: list[float], etas: list[float]) -> float:
    """|delta B| where the enhancement excess eta - 1 first falls to half
    its zero-detuning value, by linear interpolation over |delta B|."""
    pairs = sorted((abs(v), e) for v, e in zip(values, etas))
    if not pairs or pairs[0][0] != 0.0:
        raise ValueError("need a delta_b = 0 point to define the peak excess")
    peak = pairs[0][1] - 1.0
    if not math.isfinite(peak):
        raise ValueError("peak enhancement unresolved; extend the delay range")
    if peak <= 0:
        raise ValueError("no enhancement at zero detuning")
    half = peak / 2.0
    prev_b, prev_e = pairs[0]
    for b, e in pairs[1:]:
        ex = e - 1.0
        if ex <= half:
            prev_ex = prev_e - 1.0
            if prev_ex == ex:
                return b
            frac = (prev_ex - half) / (prev_ex - ex)
            return prev_b + frac * (b - prev_b)
        prev_b, prev_e = b, e
    return math.inf


def _preset_field_sweep(cfg, out, label, seed, trajectories, threads, plot):
    if cfg.text("sweep", "variable") != "delta_b":
        raise ConfigError("field_sweep preset needs sweep.variable = delta_b")
    sim = _build_sim(cfg, seed, trajectories)
    taus = _tau_grid(cfg, sim.dt)
    values = cfg.sweep_values()
    exp = _base_experiment(
        cfg, seed, trajectories, _echo_program_builder(cfg, deer_mode=False), taus, label
    )
    if not exp.sim.near_bm:
        raise ConfigError("field_sweep expects sim.near_bm = true")
    # far-from-anti-crossing reference: same noise, double-quantum term off
    far_exp = replace(
        exp,
        sim=replace(exp.sim, near_bm=False, delta_b=0.0),
        program_builder=protocol.hahn_echo,
        label=label + "_far_reference",
    )
    t2_far, far_env = echo_coherence_time(
        far_exp, tau_max=min(max(taus), 60e-6), tau_min=min(taus), threads=threads
    )
    rows = []
    for db in values:
        point = replace(exp, sim=replace(exp.sim, delta_b=float(db)))
        t2, env = echo_coherence_time(point, tau_max=max(taus), tau_min=min(taus), threads=threads)
        eta = analysis.enhancement_ratio(t2, t2_far) if math.isfinite(t2) else math.inf
        rows.append((float(db), t2, eta))
        _write_trace(out / f"{label}_db_{db * 1e6:+.3f}uT.csv", env, cfg, sweep_value=float(db))
    csv_path = out / f"{label}.csv"
    with csv_path.open("w") as fh:
        for key in sorted(cfg.resolved):
            fh.write(f"# config {key} = {cfg.resolved[key]}\n")
        fh.write(f"# t2_far_s = {t2_far:.17g}\n")
        fh.write("delta_b_T,t2_s,eta\n")
        for db, t2, eta in rows:
            fh.write(f"{db:.17g},{t2:.17g},{eta:.17g}\n")
    if plot:
        finite = [(db, t2) for db, t2, _ in rows if math.isfinite(t2)]
        if finite:
            svg.line_plot(
                out / f"{label}.svg",
                [v * 1e6 for v, _ in finite],
                [("T2", [t * 1e6 for _, t in finite])],
                title="Echo coherence time vs detuning",
                xlabel="delta B (uT)",
                ylabel="T2 (us)",
            )
    summary = {"t2_far_s": f"{t2_far:.17g}", "points": len(rows)}
    try:
        summary["half_excess_detuning_T"] = f"{half_excess_detuning([r[0] for r in rows], [r[2] for r in rows]):.17g}"
    except ValueError:
        pass
    _write_summary(out / f"{label}_summary.txt", cfg, summary)
    return {"t2_far": t2_far, "results": rows}


def _preset_pol_transfer(cfg, out, label, seed, trajectories, threads, plot):
    params = _build_params(cfg)
    sim = _build_sim(cfg, seed, trajectories)
    if not params.j_par:
        raise ConfigError("pol_transfer needs a nonzero j_par")
    tau_zq = _snap(1.0 / (4.0 * params.j_par), sim.dt)
    prog = protocol.polarization_transfer(tau_zq, params.j_par)
    quiet = FluctuatorConfig(beta_rms=0.0, xi=0.0, switch_rate=1e5, seed=seed)
    traj = sample_magnetic_trajectory(quiet, prog.total_duration, sim.dt, stream_id=0)
    rho = engine.propagate(engine.initial_state(), prog, params, traj, sim)
    target = np.zeros((4, 4), dtype=complex)
    target[2, 2] = 1.0  # |0,-1/2>
    fidelity = float(np.real(np.trace(rho @ target)))
    _write_summary(
        out / f"{label}_summary.txt",
        cfg,
        {"tau_zq_s": f"{tau_zq:.17g}", "noise_free_fidelity": f"{fidelity:.17g}"},
    )
    return {"fidelity": fidelity}


def _zq_times(cfg: ExperimentConfig, dt: float) -> list[float]:
    if cfg.text("sweep", "variable") == "tau_tilde" and (
        cfg.text("sweep", "values") or cfg.text("sweep", "start")
    ):
        raw = cfg.sweep_values()
        grid = sorted({_snap(t, dt) for t in raw if _snap(t, dt) > 0})
    else:
        grid = _tau_grid(cfg, dt)
    if len(grid) < 8:
        raise ConfigError("zero-quantum time grid needs at least 8 distinct points")
    return grid


def _zq_experiment(cfg, seed, trajectories, echo, theta, label, delta_temp=0.0):
    params = _build_params(cfg)
    sim = _build_sim(cfg, seed, trajectories)
    if not params.j_par:
        raise ConfigError("zero-quantum presets need a nonzero j_par")
    tau_zq = _snap(1.0 / (4.0 * params.j_par), sim.dt)
    builder = _zq_program_builder(cfg, tau_zq, echo, theta, params.j_par)
    times = _zq_times(cfg, sim.dt)
    return _base_experiment(cfg, seed, trajectories, builder, times, label, delta_temp)


def _preset_zq_decay(cfg, out, label, seed, trajectories, threads, plot):
    exp = _zq_experiment(cfg, seed, trajectories, echo=True, theta=0.0, label=label)
    trace = engine.run(exp, threads=threads)
    fit = _fit_or_none(trace)
    _write_trace(out / f"{label}.csv", trace, cfg, fit=fit)
    if plot:
        svg.line_plot(
            out / f"{label}.svg",
            [2 * t * 1e6 for t in trace.times],
            [("signal", trace.signal_mean)],
            title=trace.label,
            xlabel="zero-quantum evolution time 2 tau~ (us)",
            ylabel="P(m_S = 0)",
        )
    summary = {}
    if fit is None:
        summary["t2_zq"] = "no decay resolvable"
    else:
        summary["t2_zq_s"] = f"{2.0 * fit.t2:.17g}"  # trace axis is tau~, decay vs 2 tau~
        summary["stretch_n"] = f"{fit.stretch_n:.17g}"
    _write_summary(out / f"{label}_summary.txt", cfg, summary)
    return summary


def _preset_xi_sweep(cfg, out, label, seed, trajectories, threads, plot):
    if cfg.text("sweep", "variable") != "xi":
        raise ConfigError("xi_sweep preset needs sweep.variable = xi")
    values = cfg.sweep_values()
    exp = _zq_experiment(cfg, seed, trajectories, echo=True, theta=0.0, label=label)
    results = engine.sweep("xi", values, exp, threads=threads, reduce=_fit_t2_of_tau_trace)
    far_exp = replace(
        exp,
        program_builder=protocol.hahn_echo,
        sim=replace(exp.sim, near_bm=False),
        noise=replace(exp.noise, xi=0.0),
        label=label + "_sq_reference",
    )
    t2_sq, _ = echo_coherence_time(far_exp, tau_max=60e-6, threads=threads)
    csv_path = out / f"{label}.csv"
    with csv_path.open("w") as fh:
        for key in sorted(cfg.resolved):
            fh.write(f"# config {key} = {cfg.resolved[key]}\n")
        fh.write(f"# t2_sq_reference_s = {t2_sq:.17g}\n")
        fh.write("xi,t2_zq_s\n")
        for r in results:
            fh.write(f"{r.value:.17g},{r.summary:.17g}\n")
    if plot:
        finite = [(r.value, r.summary) for r in results if math.isfinite(r.summary)]
        if finite:
            svg.line_plot(
                out / f"{label}.svg",
                [v for v, _ in finite],
                [("T2_ZQ", [t * 1e6 for _, t in finite])],
                title="Zero-quantum lifetime vs noise imbalance",
                xlabel="xi",
                ylabel="T2 (us)",
            )
    _write_summary(out / f"{label}_summary.txt", cfg, {"t2_sq_reference_s": f"{t2_sq:.17g}"})
    return {"t2_sq": t2_sq, "results": [(r.value, r.summary) for r in results]}


def _preset_electrometry(cfg, out, label, seed, trajectories, threads, plot):
    if cfg.text("sweep", "variable") != "eps_rms":
        raise ConfigError("electrometry preset needs sweep.variable = eps_rms")
    values = cfg.sweep_values()
    exp = _zq_experiment(cfg, seed, trajectories, echo=False, theta=0.0, label=label)
    if exp.electric is None:
        exp = replace(
            exp,
            electric=ElectricNoiseConfig(
                eps_rms=values[0] or 1.0,
                switch_rate=cfg.number("noise", "electric_rate"),
                seed=seed,
            ),
        )
    # no inversion pulse in this variant: evolution time equals the sweep axis
    fit_single = lambda trace: _fit_t2_of_tau_trace(trace, time_factor=1.0)
    results = engine.sweep("eps_rms", values, exp, threads=threads, reduce=fit_single)
    csv_path = out / f"{label}.csv"
    with csv_path.open("w") as fh:
        for key in sorted(cfg.resolved):
            fh.write(f"# config {key} = {cfg.resolved[key]}\n")
        fh.write("eps_rms_V_per_m,t2_zq_s\n")
        for r in results:
            fh.write(f"{r.value:.17g},{r.summary:.17g}\n")
    if plot:
        finite = [(r.value, r.summary) for r in results if math.isfinite(r.summary)]
        if finite:
            svg.line_plot(
                out / f"{label}.svg",
                [v for v, _ in finite],
                [("T2_ZQ", [t * 1e6 for _, t in finite])],
                title="Zero-quantum lifetime vs electric noise",
                xlabel="eps_rms (V/m)",
                ylabel="T2 (us)",
            )
    _write_summary(out / f"{label}_summary.txt", cfg, {"points": len(results)})
    return {"results": [(r.value, r.summary) for r in results]}


def _preset_thermometry(cfg, out, label, seed, trajectories, threads, plot):
    params = _build_params(cfg)
    sim = _build_sim(cfg, seed, trajectories)
    delta_temp = cfg.number("sweep", "delta_temp")
    delta_omega_true = params.ddelta_dT * delta_temp
    if cfg.has("sweep", "window"):
        window = cfg.number("sweep", "window")
    elif delta_omega_true != 0.0:
        window = 0.25 / abs(delta_omega_true)
    else:
        window = 5e-6
    times = sorted({_snap(t, sim.dt) for t in np.linspace(window / 12, window, 12)})
    if len(times) < 4:
        raise ConfigError("thermometry window too short for the dt grid")
    tau_zq = _snap(1.0 / (4.0 * params.j_par), sim.dt) if params.j_par else 0.0
    if tau_zq == 0.0:
        raise ConfigError("thermometry needs a nonzero j_par")
    builder = _zq_program_builder(cfg, tau_zq, echo=False, theta=math.pi / 2, j_par=params.j_par)
    exp = _base_experiment(cfg, seed, trajectories, builder, times, label, delta_temp=delta_temp)
    trace = engine.run(exp, threads=threads)
    _write_trace(out / f"{label}.csv", trace, cfg)
    delta_omega_est = analysis.slope_frequency(trace, window)
    delta_temp_est = analysis.temperature_shift(delta_omega_est, params)
    if plot:
        svg.line_plot(
            out / f"{label}.svg",
            [t * 1e6 for t in trace.times],
            [("signal", trace.signal_mean)],
            title=trace.label,
            xlabel="tau~ (us)",
            ylabel="P(m_S = 0)",
        )
    _write_summary(
        out / f"{label}_summary.txt",
        cfg,
        {
            "delta_omega_true_rad_s": f"{delta_omega_true:.17g}",
            "delta_omega_est_rad_s": f"{delta_omega_est:.17g}",
            "delta_temp_true_K": f"{delta_temp:.17g}",
            "delta_temp_est_K": f"{delta_temp_est:.17g}",
        },
    )
    return {"delta_omega_est": delta_omega_est, "delta_temp_est": delta_temp_est}


def _preset_custom(cfg, out, label, seed, trajectories, threads, plot):
    path = cfg.text("experiment", "program")
    if not path:
        raise ConfigError("custom preset needs experiment.program = <file>")
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read program file {path}: {exc}") from exc
    prog = protocol.program_from_text(text, label=label)
    # the program is fixed: a single averaged point on a dummy sweep axis
    exp = _base_experiment(cfg, seed, trajectories, lambda _t: prog, [0.0], label)
    trace = engine.run(exp, threads=threads)
    _write_trace(out / f"{label}.csv", trace, cfg)
    _write_summary(
        out / f"{label}_summary.txt",
        cfg,
        {"signal_mean": f"{trace.signal_mean[0]:.17g}", "signal_sem": f"{trace.signal_sem[0]:.17g}"},
    )
    return {"signal": float(trace.signal_mean[0])}


_PRESET_FUNCS = {
    "levels": _preset_levels,
    "echo": _preset_echo,
    "deer": lambda *a, **k: _preset_echo(*a, **k, deer_mode=True),
    "field_sweep": _preset_field_sweep,
    "pol_transfer": _preset_pol_transfer,
    "zq_decay": _preset_zq_decay,
    "xi_sweep": _preset_xi_sweep,
    "electrometry": _preset_electrometry,
    "thermometry": _preset_thermometry,
    "custom": _preset_custom,
}


def run_preset(
    cfg: ExperimentConfig,
    out_dir: str | Path,
    seed: Optional[int] = None,
    trajectories: Optional[int] = None,
    threads: int = 1,
    plot: bool = True,
) -> dict:
    """Execute a preset and write its artifacts under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    label = cfg.text("experiment", "label") or cfg.preset
    seed = int(cfg.number("sim", "seed")) if seed is None else seed
    cfg.resolved["sim.seed"] = str(seed)
    if trajectories is not None:
        cfg.resolved["sim.trajectories"] = str(trajectories)
    func = _PRESET_FUNCS[cfg.preset]
    return func(cfg, out, label, seed, trajectories, threads, plot)
