"""Stochastic fluctuator trajectories for magnetic and electric noise.

Each noise channel is a random telegraph-like fluctuator: it holds its
value and, once per propagation step of length dt, redraws it with
probability p = switch_rate * dt from a zero-mean uniform distribution.
The uniform support is [-sqrt(3) sigma, +sqrt(3) sigma] so that the
stationary root-mean-square equals the configured sigma exactly.

The magnetic field seen by the two spins is split into a shared (global)
channel and two independent site-local channels,

    beta(t)  = beta_g(t) + beta_l(t)
    beta'(t) = beta_g(t) + beta_l'(t)

with the power split controlled by the gradiometer parameter xi:
local rms = sqrt(xi) * beta_rms, global rms = sqrt(1 - xi) * beta_rms,
which keeps the per-site rms at beta_rms for every xi and makes the
time-average definition

    xi = <(beta - beta')^2> / (<beta^2> + <beta'^2>)

come out at the configured value.

Reproducibility: each trajectory is a pure function of
(seed, stream_id). Streams use the counter-based Philox generator keyed
by (seed, stream_id) with a domain tag in the counter block, so results
are bit-identical no matter how trajectories are scheduled across
workers, and a longer trajectory is a bit-exact extension of a shorter
one with the same key (draws are consumed strictly in step order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Optional

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "FluctuatorConfig",
    "ElectricNoiseConfig",
    "NoiseTrajectory",
    "partition",
    "sample_magnetic_trajectory",
    "sample_electric_trajectory",
    "empirical_xi",
    "trajectory_to_csv",
]

_SQRT3 = math.sqrt(3.0)

# Philox counter-domain tags keep the magnetic and electric streams of a
# given (seed, stream_id) statistically independent.
_DOMAIN_MAGNETIC = 0
_DOMAIN_ELECTRIC = 1

DEFAULT_SWITCH_RATE = 1e5  # Hz; comparable to |g| beta_rms at 1 uT
DEFAULT_DT = 1e-8  # s


@dataclass(frozen=True)
class FluctuatorConfig:
    """Magnetic fluctuator settings.

    Attributes:
        beta_rms: total per-site rms field (tesla), >= 0.
        xi: fraction of the noise power that is site-local, in [0, 1].
        switch_rate: fluctuator redraw rate (Hz), > 0.
        seed: 64-bit stream seed.
    """

    beta_rms: float = 1e-6
    xi: float = 0.0
    switch_rate: float = DEFAULT_SWITCH_RATE
    seed: int = 0

    def __post_init__(self):
        if self.beta_rms < 0:
            raise ValueError(f"beta_rms must be >= 0, got {self.beta_rms}")
        if not 0.0 <= self.xi <= 1.0:
            raise ValueError(f"xi must be in [0, 1], got {self.xi}")
        if not self.switch_rate > 0:
            raise ValueError(f"switch_rate must be > 0, got {self.switch_rate}")


@dataclass(frozen=True)
class ElectricNoiseConfig:
    """Electric fluctuator settings: three independent axes with a
    common per-axis rms (V/m) and a common redraw rate (Hz)."""

    eps_rms: float = 0.0
    switch_rate: float = DEFAULT_SWITCH_RATE
    seed: int = 0

    def __post_init__(self):
        if self.eps_rms < 0:
            raise ValueError(f"eps_rms must be >= 0, got {self.eps_rms}")
        if not self.switch_rate > 0:
            raise ValueError(f"switch_rate must be > 0, got {self.switch_rate}")


@dataclass
class NoiseTrajectory:
    """Piecewise-constant sampled noise over a protocol's duration.

    ``beta_s`` and ``beta_s_prime`` are per-step fields (tesla) at the
    two spin sites; ``eps`` is an optional (n_steps, 3) array of electric
    field samples (V/m). Cumulative sums are cached lazily so the engine
    can integrate diagonal phases over any step range in O(1).
    """

    dt: float
    beta_s: NDArray
    beta_s_prime: NDArray
    eps: Optional[NDArray] = None
    _cum: dict = field(default_factory=dict, repr=False)

    @property
    def n_steps(self) -> int:
        return self.beta_s.shape[0]

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    def __post_init__(self):
        if self.beta_s.shape != self.beta_s_prime.shape:
            raise ValueError("beta_s and beta_s_prime must have equal length")
        if self.eps is not None and self.eps.shape != (self.n_steps, 3):
            raise ValueError(f"eps must have shape ({self.n_steps}, 3)")

    def cumulative(self, key: str) -> NDArray:
        """Prefix sums with a leading zero: cumulative('beta_s')[k] is the
        sum of the first k samples."""
        cached = self._cum.get(key)
        if cached is None:
            if key == "eps_z":
                src = self.eps[:, 2] if self.eps is not None else np.zeros(self.n_steps)
            else:
                src = getattr(self, key)
            cached = np.concatenate(([0.0], np.cumsum(src)))
            self._cum[key] = cached
        return cached

    def refined(self, factor: int) -> "NoiseTrajectory":
        """Same physical noise path represented on a grid dt/factor.

        Values are held constant across the finer steps, so propagating
        the refined trajectory must reproduce the original signal; this
        is the step-size convergence check.
        """
        if factor < 1:
            raise ValueError("factor must be >= 1")
        rep = lambda a: np.repeat(a, factor, axis=0)
        return NoiseTrajectory(
            dt=self.dt / factor,
            beta_s=rep(self.beta_s),
            beta_s_prime=rep(self.beta_s_prime),
            eps=None if self.eps is None else rep(self.eps),
        )


def partition(xi: float, beta_rms: float) -> tuple[float, float]:
    """Split the per-site rms into (global, local) channel rms values.

    Returns (beta_global_rms, beta_local_rms) with
    global^2 + local^2 = beta_rms^2.
    """
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"xi must be in [0, 1], got {xi}")
    return beta_rms * math.sqrt(1.0 - xi), beta_rms * math.sqrt(xi)


def _stream_rng(seed: int, stream_id: int, domain: int) -> np.random.Generator:
    key = np.array([np.uint64(seed & 0xFFFFFFFFFFFFFFFF), np.uint64(stream_id)], dtype=np.uint64)
    counter = np.array([0, 0, 0, domain], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(counter=counter, key=key))


def _fluctuator_channels(
    rng: np.random.Generator, n_steps: int, p_switch: float, sigmas: NDArray
) -> NDArray:
    """Sample ``len(sigmas)`` independent hold/redraw channels.

    One (n_steps, 2c) uniform block is drawn row by row (step-major), so
    a longer trajectory extends a shorter one bit-exactly and channel
    amplitudes only scale the redraw values.
    """
    c = len(sigmas)
    u = rng.random((n_steps, 2 * c))
    switch = u[:, :c] < p_switch
    switch[0, :] = True  # stationary start: draw the initial value
    draws = (2.0 * u[:, c:] - 1.0) * (_SQRT3 * np.asarray(sigmas))[None, :]
    steps = np.arange(n_steps)[:, None]
    hold_idx = np.maximum.accumulate(np.where(switch, steps, 0), axis=0)
    return np.take_along_axis(draws, hold_idx, axis=0)


def _check_step(switch_rate: float, dt: float) -> float:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    p = switch_rate * dt
    if p > 0.5:
        raise ValueError(
            f"switch probability per step r*dt = {p:.3g} > 0.5; the noise "
            f"model is under-resolved, reduce dt"
        )
    return p


def sample_magnetic_trajectory(
    cfg: FluctuatorConfig, duration: float, dt: float, stream_id: int
) -> NoiseTrajectory:
    """Sample beta(t), beta'(t) for one trajectory.

    Three independent fluctuator channels are drawn (global, local at S,
    local at S') and summed per site. Bit-identical for identical
    (cfg.seed, stream_id, cfg, duration, dt).
    """
    p = _check_step(cfg.switch_rate, dt)
    n_steps = int(round(duration / dt))
    sig_g, sig_l = partition(cfg.xi, cfg.beta_rms)
    rng = _stream_rng(cfg.seed, stream_id, _DOMAIN_MAGNETIC)
    vals = _fluctuator_channels(rng, max(n_steps, 1), p, np.array([sig_g, sig_l, sig_l]))
    vals = vals[:n_steps]
    beta = vals[:, 0] + vals[:, 1]
    beta_prime = vals[:, 0] + vals[:, 2]
    return NoiseTrajectory(dt=dt, beta_s=beta, beta_s_prime=beta_prime)


def sample_electric_trajectory(
    cfg: ElectricNoiseConfig, duration: float, dt: float, stream_id: int
) -> NDArray:
    """Sample an (n_steps, 3) electric field path, one fluctuator per axis."""
    p = _check_step(cfg.switch_rate, dt)
    n_steps = int(round(duration / dt))
    rng = _stream_rng(cfg.seed, stream_id, _DOMAIN_ELECTRIC)
    vals = _fluctuator_channels(rng, max(n_steps, 1), p, np.full(3, cfg.eps_rms))
    return vals[:n_steps]


def empirical_xi(traj: NoiseTrajectory) -> float:
    """Time-average estimate of the gradiometer parameter from a sampled
    trajectory: <(beta - beta')^2> / (<beta^2> + <beta'^2>)."""
    if traj.n_steps == 0:
        raise ValueError("trajectory is empty")
    num = float(np.mean((traj.beta_s - traj.beta_s_prime) ** 2))
    den = float(np.mean(traj.beta_s**2) + np.mean(traj.beta_s_prime**2))
    if den == 0.0:
        return 0.0
    return num / den


def trajectory_to_csv(traj: NoiseTrajectory, stream: IO[str]) -> None:
    """Debug export: one row per step with magnetic and electric samples."""
    stream.write("step,beta_s,beta_s_prime,eps_x,eps_y,eps_z\n")
    eps = traj.eps if traj.eps is not None else np.zeros((traj.n_steps, 3))
    for k in range(traj.n_steps):
        stream.write(
            f"{k},{traj.beta_s[k]:.17g},{traj.beta_s_prime[k]:.17g},"
            f"{eps[k, 0]:.17g},{eps[k, 1]:.17g},{eps[k, 2]:.17g}\n"
        )
