"""Hamiltonians, level diagrams, and couplings of the spin dyad.

The physical system is a spin-1 with a crystal-field splitting (an NV
center in the reference configuration) dipolar-coupled to a spin-1/2
paramagnet (a P1 center), with the static field along the crystal axis.

Unit policy: every frequency-like quantity stored in :class:`DyadParams`
is angular (rad/s), except the dipolar couplings ``j_coupling``,
``j_par`` and ``j_perp`` which are cyclic (Hz) because they always enter
the Hamiltonians through explicit 2*pi*J factors. Configuration files
accept Hz/kHz/MHz/GHz and convert at the boundary, so no 2*pi ambiguity
survives inside the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

from .linalg import (
    Basis,
    full_operators,
    reduced_operators,
    require_hermitian,
)

__all__ = [
    "MU0",
    "HBAR",
    "DEFAULT_DELTA",
    "DEFAULT_GAMMA_E",
    "DyadParams",
    "LevelDiagram",
    "j_par_from_geometry",
    "j_perp_from_geometry",
    "full_hamiltonian",
    "reduced_hamiltonian",
    "sim_frame_hamiltonian",
    "coupling_from_distance",
    "distance_from_coupling",
    "anticrossing_field",
    "level_diagram",
    "electric_term",
    "thermal_term",
]

MU0 = 1.25663706212e-6  # vacuum permeability, T^2 m^3 / J
HBAR = 1.054571817e-34  # reduced Planck constant, J s

# Standard room-temperature values for an NV-like spin-1; the crystal
# field and gyromagnetic ratio are config defaults, overridable
# everywhere.
DEFAULT_DELTA = 2 * math.pi * 2.87e9  # rad/s
DEFAULT_GAMMA_E = 2 * math.pi * 28.025e9  # rad/s per tesla

# Electric and thermal susceptibilities of the spin-1 ground state.
# These are externally sourced, literature-typical NV numbers (axial and
# transverse electric couplings, thermal shift of the crystal field at
# room temperature); no quantitative result in this package depends on
# their absolute values and they are plain config inputs.
DEFAULT_D_PAR = 2 * math.pi * 3.5e-3  # rad/s per (V/m)
DEFAULT_D_PERP = 2 * math.pi * 0.17  # rad/s per (V/m)
DEFAULT_DDELTA_DT = -2 * math.pi * 74.2e3  # rad/s per kelvin


def j_par_from_geometry(j_coupling: float, theta: float) -> float:
    """Secular (longitudinal) dipolar projection J(1 - 3 cos^2 theta)."""
    return j_coupling * (1.0 - 3.0 * math.cos(theta) ** 2)


def j_perp_from_geometry(j_coupling: float, theta: float) -> float:
    """Double-quantum dipolar projection -(3/4) J sin^2 theta."""
    return -0.75 * j_coupling * math.sin(theta) ** 2


@dataclass(frozen=True)
class DyadParams:
    """Physical constants and couplings of the dyad.

    Attributes:
        delta: crystal-field splitting (rad/s), > 0.
        gamma_e: magnitude of the electronic gyromagnetic ratio
            (rad/s per tesla), > 0.
        b_field: static field along the crystal axis (tesla).
        j_par: secular dipolar coupling J_par (Hz). Derived from
            (j_coupling, theta) when left as None.
        j_perp: double-quantum dipolar coupling J_perp (Hz). Derived from
            (j_coupling, theta) when left as None.
        j_coupling: bare dipolar amplitude J (Hz), optional.
        theta: angle between the inter-spin vector and the field (rad),
            optional.
        d_par, d_perp: axial / transverse electric couplings of the
            spin-1 (rad/s per V/m).
        ddelta_dT: thermal shift of the crystal field (rad/s per kelvin).
        distance: inter-spin separation (m), optional bookkeeping field.

    When both the projections and (j_coupling, theta) are supplied they
    must agree; figure-style parameter sets that pin J_par and J_perp
    independently should simply leave j_coupling/theta unset.
    """

    delta: float = DEFAULT_DELTA
    gamma_e: float = DEFAULT_GAMMA_E
    b_field: float = 0.0
    j_par: Optional[float] = None
    j_perp: Optional[float] = None
    j_coupling: Optional[float] = None
    theta: Optional[float] = None
    d_par: float = DEFAULT_D_PAR
    d_perp: float = DEFAULT_D_PERP
    ddelta_dT: float = DEFAULT_DDELTA_DT
    distance: Optional[float] = None

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.gamma_e > 0:
            raise ValueError(f"gamma_e must be positive, got {self.gamma_e}")
        has_geometry = self.j_coupling is not None and self.theta is not None
        if has_geometry:
            jp = j_par_from_geometry(self.j_coupling, self.theta)
            jt = j_perp_from_geometry(self.j_coupling, self.theta)
            for name, given, derived in (("j_par", self.j_par, jp), ("j_perp", self.j_perp, jt)):
                if given is not None:
                    scale = max(abs(derived), abs(given), 1e-30)
                    if abs(given - derived) > 1e-9 * scale:
                        raise ValueError(
                            f"{name}={given} inconsistent with geometry value {derived} "
                            f"from (j_coupling, theta)"
                        )
            if self.j_par is None:
                object.__setattr__(self, "j_par", jp)
            if self.j_perp is None:
                object.__setattr__(self, "j_perp", jt)
        else:
            if self.j_par is None:
                object.__setattr__(self, "j_par", 0.0)
            if self.j_perp is None:
                object.__setattr__(self, "j_perp", 0.0)

    def with_field(self, b_field: float) -> "DyadParams":
        return replace(self, b_field=b_field)


def full_hamiltonian(p: DyadParams, b_field: Optional[float] = None) -> NDArray:
    """Full 6-dim Hamiltonian: crystal field, Zeeman terms, and the
    complete dipolar interaction (secular and non-secular).

    The dipolar part uses the bare amplitude and geometry (J, theta); a
    parameter set built directly from projections can only be used here
    when both projections are zero.
    """
    b = p.b_field if b_field is None else b_field
    ops = full_operators()
    h = p.delta * (ops.s_z @ ops.s_z) + p.gamma_e * b * (ops.s_z + ops.p_z)
    if p.j_coupling is None or p.theta is None:
        if p.j_par or p.j_perp:
            raise ValueError(
                "full_hamiltonian needs j_coupling and theta; only the secular "
                "projections were supplied"
            )
        return h
    j = p.j_coupling
    th = p.theta
    two_pi_j = 2 * math.pi * j
    flip_flop = ops.s_plus @ ops.p_minus + ops.s_minus @ ops.p_plus
    single_q = (ops.s_plus + ops.s_minus) @ ops.p_z + ops.s_z @ (ops.p_plus + ops.p_minus)
    double_q = ops.s_plus @ ops.p_plus + ops.s_minus @ ops.p_minus
    h_d = two_pi_j * (
        (1.0 - 3.0 * math.cos(th) ** 2) * (ops.s_z @ ops.p_z - 0.25 * flip_flop)
        - 0.75 * math.sin(2 * th) * single_q
        - 0.75 * math.sin(th) ** 2 * double_q
    )
    h = h + h_d
    require_hermitian(h, name="full Hamiltonian")
    return h


def reduced_hamiltonian(
    p: DyadParams, include_dq: bool = True, b_field: Optional[float] = None
) -> NDArray:
    """Secular 4-dim Hamiltonian on the {m_S = 0, -1} manifold.

    H = (|g|B - Delta) Tz + (|g|B - pi J_par) Pz + 2 pi J_par Tz Pz
        [+ 2 pi J_perp sqrt(2) (T+P+ + T-P-) when include_dq]

    with T the fictitious spin-1/2 and P the partner spin. Terms
    proportional to the identity are dropped. The double-quantum term is
    secular only near the level anti-crossing; ``include_dq=False`` gives
    the far-from-anti-crossing form.
    """
    b = p.b_field if b_field is None else b_field
    ops = reduced_operators()
    jpar_w = 2 * math.pi * p.j_par
    h = (
        (p.gamma_e * b - p.delta) * ops.tilde_z
        + (p.gamma_e * b - math.pi * p.j_par) * ops.prime_z
        + jpar_w * ops.zz
    )
    if include_dq:
        g = 2 * math.pi * p.j_perp * math.sqrt(2.0)
        h = h + g * (
            ops.tilde_plus @ ops.prime_plus + ops.tilde_minus @ ops.prime_minus
        )
    require_hermitian(h, name="reduced Hamiltonian")
    return h


def sim_frame_hamiltonian(
    p: DyadParams,
    delta_b: float = 0.0,
    beta: float = 0.0,
    beta_prime: float = 0.0,
    near_bm: bool = False,
) -> NDArray:
    """Generator used by the engine in the doubly rotating frame.

    In the frame resonant with both spins the large static splittings
    drop out and only the detuning from the operating point, the noise
    fields, and the dipolar terms remain:

    H = |g|(dB + beta) Tz + |g|(dB + beta') Pz + 2 pi J_par Tz Pz
        [+ 2 pi J_perp sqrt(2) (T+P+ + T-P-) when near_bm]

    ``delta_b`` is the detuning from resonance (B - B_m for runs near the
    anti-crossing, zero otherwise).
    """
    ops = reduced_operators()
    h = (
        p.gamma_e * (delta_b + beta) * ops.tilde_z
        + p.gamma_e * (delta_b + beta_prime) * ops.prime_z
        + 2 * math.pi * p.j_par * ops.zz
    )
    if near_bm:
        g = 2 * math.pi * p.j_perp * math.sqrt(2.0)
        h = h + g * (
            ops.tilde_plus @ ops.prime_plus + ops.tilde_minus @ ops.prime_minus
        )
    return h


def coupling_from_distance(distance: float, gamma_e: float = DEFAULT_GAMMA_E) -> float:
    """Dipolar amplitude J (Hz) at inter-spin separation r (m).

    2 pi J = mu0 gamma_e^2 hbar / (4 pi r^3), with gamma_e angular.
    Around 4 nm this gives J of order 1 MHz, falling off as 1/r^3.
    """
    if not distance > 0:
        raise ValueError(f"distance must be positive, got {distance}")
    return MU0 * gamma_e**2 * HBAR / (8 * math.pi**2 * distance**3)


def distance_from_coupling(j_coupling: float, gamma_e: float = DEFAULT_GAMMA_E) -> float:
    """Inverse of :func:`coupling_from_distance`."""
    if not j_coupling > 0:
        raise ValueError(f"coupling must be positive, got {j_coupling}")
    return (MU0 * gamma_e**2 * HBAR / (8 * math.pi**2 * j_coupling)) ** (1.0 / 3.0)


def anticrossing_field(p: DyadParams) -> float:
    """Field B_m (tesla) where the outer pair of the reduced manifold
    becomes degenerate: |g| B_m = (Delta + pi J_par) / 2."""
    return (p.delta + math.pi * p.j_par) / (2.0 * p.gamma_e)


@dataclass(frozen=True)
class LevelDiagram:
    """Adiabatically-continued eigenvalue branches versus field.

    ``branches[k, i]`` is the energy (rad/s) of branch ``i`` at
    ``b_values[k]``. When ``shift_applied`` every branch carries an extra
    +|g|B/2 so that, near the anti-crossing, the four branches of the
    lower manifold are flat (see :func:`level_diagram`).
    """

    b_values: NDArray
    branches: NDArray
    shift_applied: bool

    def __post_init__(self):
        if self.branches.shape[0] != len(self.b_values):
            raise ValueError("branch rows must match b_values")


def level_diagram(
    p: DyadParams, b_values: Sequence[float], apply_shift: bool = False
) -> LevelDiagram:
    """Eigenvalues of the full Hamiltonian over a field sweep.

    Branches are continued adiabatically by maximal eigenvector overlap
    between adjacent field steps; raw sorted eigenvalues would swap
    branches at crossings and corrupt the diagram.

    The optional energy shift is +|g|B/2 per level. This is the uniform
    shift that makes all four lower branches field-independent near the
    anti-crossing (the two zero-quantum-pair branches exactly, the two
    hybridized branches at the anti-crossing point): the lower-manifold
    energies are Delta/2 - |g|B/2 + (|g|B - Delta) mt + |g|B mp, so
    +|g|B/2 cancels the only term that is not paired between the two
    anti-crossing partners.
    """
    b_values = np.asarray(b_values, dtype=float)
    if b_values.size == 0:
        raise ValueError("b_values must be nonempty")
    if np.any(np.diff(b_values) <= 0):
        raise ValueError("b_values must be strictly ascending")
    dim = 6
    branches = np.empty((b_values.size, dim))
    prev_vecs = None
    for k, b in enumerate(b_values):
        evals, vecs = np.linalg.eigh(full_hamiltonian(p, b_field=b))
        if prev_vecs is not None:
            overlap = np.abs(prev_vecs.conj().T @ vecs)
            # maximize total overlap with the previous step's branches
            rows, cols = linear_sum_assignment(-overlap)
            perm = np.empty(dim, dtype=int)
            perm[rows] = cols
            evals = evals[perm]
            vecs = vecs[:, perm]
        branches[k] = evals
        prev_vecs = vecs
    if apply_shift:
        branches = branches + 0.5 * p.gamma_e * b_values[:, None]
    return LevelDiagram(b_values=b_values, branches=branches, shift_applied=apply_shift)


def electric_term(eps: Sequence[float], p: DyadParams, basis: Basis = Basis.REDUCED4) -> NDArray:
    """Coupling of the spin-1 to a static electric field (rad/s).

    Full 6-dim form:
        H = d_par eps_z (Sz^2 - 2/3) - d_perp [eps_x (SxSy + SySx)
            + eps_y (Sx^2 - Sy^2)]
    acting on the spin-1 factor only (the spin-1/2 partner is electric
    field insensitive).

    In the reduced basis the mapping S_{x,y} -> sqrt(2) T_{x,y} applies;
    the transverse products then vanish identically for a spin-1/2, and
    the axial term reduces to -d_par eps_z Tz after dropping the
    identity-proportional part.
    """
    ex, ey, ez = (float(v) for v in eps)
    if basis is Basis.FULL6:
        from .linalg import spin_operators, SpinKind, tensor, eye

        s1 = spin_operators(SpinKind.SPIN_ONE)
        h1 = p.d_par * ez * (s1.z @ s1.z - (2.0 / 3.0) * np.eye(3)) - p.d_perp * (
            ex * (s1.x @ s1.y + s1.y @ s1.x) + ey * (s1.x @ s1.x - s1.y @ s1.y)
        )
        return tensor(h1, eye(2))
    ops = reduced_operators()
    tx, ty = ops.tilde_x, ops.tilde_y
    h = -p.d_par * ez * ops.tilde_z - 2.0 * p.d_perp * (
        ex * (tx @ ty + ty @ tx) + ey * (tx @ tx - ty @ ty)
    )
    return h


def thermal_term(delta_T: float, p: DyadParams) -> NDArray:
    """Thermal frequency shift d_omega Tz with d_omega = (dDelta/dT) dT.

    Only the shift itself is returned; the static dipolar part lives in
    :func:`sim_frame_hamiltonian`.
    """
    ops = reduced_operators()
    return (p.ddelta_dT * delta_T) * ops.tilde_z
