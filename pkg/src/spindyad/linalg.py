"""Dense complex linear algebra and spin operators for small Hilbert spaces.

Everything in the simulator lives in 2-, 3-, 4- or 6-dimensional complex
Hilbert spaces, so all linear algebra here is dense and exact-to-roundoff.
Matrix exponentials of Hermitian generators are computed by
eigendecomposition, which at these dimensions is both branch-free and
accurate to machine precision.

Basis conventions (shared by every module):

* Full 6-dim product basis ``|m_S, m_S'>`` with the spin-1 projection
  ``m_S`` in {+1, 0, -1} (descending, slow index) and the spin-1/2
  projection ``m_S'`` in {+1/2, -1/2} (descending, fast index).
* Reduced 4-dim basis restricted to the ``m_S`` in {0, -1} manifold,
  ordered ``|0,+1/2>``, ``|-1,+1/2>``, ``|0,-1/2>``, ``|-1,-1/2>``.
  The spin-1 is represented there by a fictitious spin-1/2 whose +1/2
  (-1/2) projection corresponds to ``m_S = 0`` (``m_S = -1``); note the
  spin-1/2 partner is the slow index in this ordering.

All returned operator arrays are marked read-only so they can be shared
freely between concurrent workers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "Basis",
    "SpinKind",
    "SpinOperators",
    "ReducedOperators",
    "FullOperators",
    "spin_operators",
    "reduced_operators",
    "full_operators",
    "tensor",
    "eye",
    "is_hermitian",
    "require_hermitian",
    "expm_hermitian",
    "expectation",
    "assert_unitary",
    "assert_density_matrix",
    "dagger",
]

HERMITIAN_TOL = 1e-12
DENSITY_HERM_TOL = 1e-10
DENSITY_TRACE_TOL = 1e-10
DENSITY_PSD_TOL = 1e-9
UNITARY_TOL = 1e-10


class Basis(enum.Enum):
    """Hilbert-space basis of a state or operator."""

    FULL6 = "full6"
    REDUCED4 = "reduced4"


class SpinKind(enum.Enum):
    """Supported spin species for operator construction."""

    SPIN_ONE = "spin1"
    SPIN_HALF = "spin_half"
    FICTITIOUS_HALF = "fictitious_half"


def _frozen(a: NDArray) -> NDArray:
    a = np.ascontiguousarray(a, dtype=complex)
    a.setflags(write=False)
    return a


def dagger(m: NDArray) -> NDArray:
    """Conjugate transpose."""
    return m.conj().T


@dataclass(frozen=True)
class SpinOperators:
    """Cartesian and ladder operators of a single spin."""

    x: NDArray
    y: NDArray
    z: NDArray
    plus: NDArray
    minus: NDArray

    @property
    def dim(self) -> int:
        return self.z.shape[0]


def _make_spin(j: float) -> SpinOperators:
    """Build spin-j operators in the descending-m basis.

    Matrix elements follow <m'|S+|m> = sqrt(j(j+1) - m(m+1)) delta(m', m+1).
    """
    dim = int(round(2 * j)) + 1
    m = j - np.arange(dim)  # descending projections
    sz = np.diag(m.astype(complex))
    sp = np.zeros((dim, dim), dtype=complex)
    for k in range(1, dim):
        # raising operator connects m[k] -> m[k] + 1 = m[k - 1]
        sp[k - 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    sm = sp.conj().T
    sx = (sp + sm) / 2
    sy = (sp - sm) / 2j
    return SpinOperators(*(map(_frozen, (sx, sy, sz, sp, sm))))


@lru_cache(maxsize=None)
def spin_operators(kind: SpinKind = SpinKind.SPIN_HALF) -> SpinOperators:
    """Return the operator set {Sx, Sy, Sz, S+, S-} for a spin species.

    The fictitious spin-1/2 (the two-level reduction of the spin-1) uses
    the same matrices as an ordinary spin-1/2; the distinction is purely
    semantic and kept for call-site clarity.
    """
    if kind is SpinKind.SPIN_ONE:
        return _make_spin(1.0)
    return _make_spin(0.5)


def eye(dim: int) -> NDArray:
    return _frozen(np.eye(dim, dtype=complex))


def tensor(a: NDArray, b: NDArray) -> NDArray:
    """Kronecker product with the first factor as the slow index.

    For the full 6-dim space the spin-1 factor comes first, so e.g.
    ``tensor(spin1.z, eye(2))`` has eigenvalues {+1,+1,0,0,-1,-1}.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"first factor is not square: shape {a.shape}")
    if b.ndim != 2 or b.shape[0] != b.shape[1]:
        raise ValueError(f"second factor is not square: shape {b.shape}")
    return np.kron(a, b)


@dataclass(frozen=True)
class ReducedOperators:
    """Operator bundle for the reduced 4-dim basis.

    ``tilde_*`` act on the fictitious spin-1/2 replacing the spin-1 within
    the {m_S = 0, m_S = -1} manifold, ``prime_*`` on the spin-1/2 partner.
    ``zq_antisym`` and ``zq_sym`` are the two zero-quantum quadratures
    (the antisymmetric one is the magnetically protected coherence),
    ``zz`` the longitudinal two-spin order, and ``proj_ms0`` the projector
    onto ``m_S = 0`` used for optical readout.
    """

    tilde_x: NDArray
    tilde_y: NDArray
    tilde_z: NDArray
    tilde_plus: NDArray
    tilde_minus: NDArray
    prime_x: NDArray
    prime_y: NDArray
    prime_z: NDArray
    prime_plus: NDArray
    prime_minus: NDArray
    zq_antisym: NDArray
    zq_sym: NDArray
    zz: NDArray
    proj_ms0: NDArray
    identity: NDArray

    labels = ("|0,+1/2>", "|-1,+1/2>", "|0,-1/2>", "|-1,-1/2>")


@lru_cache(maxsize=None)
def reduced_operators() -> ReducedOperators:
    """Construct the shared 4-dim operator set.

    In the declared reduced ordering the spin-1/2 partner is the slow
    Kronecker index, so its operators embed as kron(s, I) and the
    fictitious spin as kron(I, s).
    """
    s = spin_operators(SpinKind.SPIN_HALF)
    i2 = np.eye(2, dtype=complex)

    def til(op):
        return np.kron(i2, op)

    def pri(op):
        return np.kron(op, i2)

    tx, ty, tz = til(s.x), til(s.y), til(s.z)
    px, py, pz = pri(s.x), pri(s.y), pri(s.z)
    zq_anti = tx @ py - ty @ px
    zq_sym = tx @ px + ty @ py
    zz = tz @ pz
    proj0 = til(np.diag([1.0, 0.0]).astype(complex))
    return ReducedOperators(
        tilde_x=_frozen(tx),
        tilde_y=_frozen(ty),
        tilde_z=_frozen(tz),
        tilde_plus=_frozen(til(s.plus)),
        tilde_minus=_frozen(til(s.minus)),
        prime_x=_frozen(px),
        prime_y=_frozen(py),
        prime_z=_frozen(pz),
        prime_plus=_frozen(pri(s.plus)),
        prime_minus=_frozen(pri(s.minus)),
        zq_antisym=_frozen(zq_anti),
        zq_sym=_frozen(zq_sym),
        zz=_frozen(zz),
        proj_ms0=_frozen(proj0),
        identity=eye(4),
    )


@dataclass(frozen=True)
class FullOperators:
    """Spin operators embedded in the full 6-dim product space."""

    s_x: NDArray
    s_y: NDArray
    s_z: NDArray
    s_plus: NDArray
    s_minus: NDArray
    p_x: NDArray
    p_y: NDArray
    p_z: NDArray
    p_plus: NDArray
    p_minus: NDArray
    identity: NDArray

    # full-basis indices of the reduced manifold, in reduced order
    reduced_indices = (2, 4, 3, 5)


@lru_cache(maxsize=None)
def full_operators() -> FullOperators:
    s1 = spin_operators(SpinKind.SPIN_ONE)
    sh = spin_operators(SpinKind.SPIN_HALF)
    i2 = np.eye(2, dtype=complex)
    i3 = np.eye(3, dtype=complex)
    return FullOperators(
        s_x=_frozen(np.kron(s1.x, i2)),
        s_y=_frozen(np.kron(s1.y, i2)),
        s_z=_frozen(np.kron(s1.z, i2)),
        s_plus=_frozen(np.kron(s1.plus, i2)),
        s_minus=_frozen(np.kron(s1.minus, i2)),
        p_x=_frozen(np.kron(i3, sh.x)),
        p_y=_frozen(np.kron(i3, sh.y)),
        p_z=_frozen(np.kron(i3, sh.z)),
        p_plus=_frozen(np.kron(i3, sh.plus)),
        p_minus=_frozen(np.kron(i3, sh.minus)),
        identity=eye(6),
    )


def is_hermitian(m: NDArray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(m - m.conj().T)) <= tol)


def require_hermitian(m: NDArray, tol: float = HERMITIAN_TOL, name: str = "matrix") -> None:
    dev = float(np.max(np.abs(m - m.conj().T)))
    if dev > tol:
        raise ValueError(f"{name} is not Hermitian: max |M - M^dag| = {dev:.3e} > {tol:.1e}")


def expm_hermitian(h: NDArray, t: float) -> NDArray:
    """Unitary propagator exp(-i H t) of a Hermitian generator.

    Computed via eigendecomposition, which is exact to roundoff for the
    small dimensions used here. ``h`` is in angular-frequency units
    (rad/s) and ``t`` in seconds.
    """
    h = np.asarray(h, dtype=complex)
    require_hermitian(h, name="generator")
    if t < 0:
        raise ValueError(f"negative evolution time t = {t}")
    evals, vecs = np.linalg.eigh(h)
    phases = np.exp(-1j * evals * t)
    return (vecs * phases) @ vecs.conj().T


def expectation(rho: NDArray, obs: NDArray, imag_tol: float = 1e-10) -> float:
    """Re Tr(rho O) for a Hermitian observable.

    The imaginary residue of the trace is asserted small; a large residue
    indicates a non-Hermitian observable or a corrupted state.
    """
    rho = np.asarray(rho)
    obs = np.asarray(obs)
    if rho.shape != obs.shape:
        raise ValueError(f"dimension mismatch: state {rho.shape} vs observable {obs.shape}")
    val = complex(np.trace(rho @ obs))
    if abs(val.imag) > imag_tol * max(1.0, abs(val.real)):
        raise ValueError(f"expectation value has imaginary residue {val.imag:.3e}")
    return val.real


def assert_unitary(u: NDArray, tol: float = UNITARY_TOL) -> None:
    dev = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
    if dev > tol:
        raise AssertionError(f"matrix is not unitary: max |U^dag U - I| = {dev:.3e}")


def assert_density_matrix(
    rho: NDArray,
    herm_tol: float = DENSITY_HERM_TOL,
    trace_tol: float = DENSITY_TRACE_TOL,
    psd_tol: float = DENSITY_PSD_TOL,
) -> None:
    """Check Hermiticity, unit trace, and positive semidefiniteness."""
    dev = float(np.max(np.abs(rho - rho.conj().T)))
    if dev > herm_tol:
        raise AssertionError(f"density matrix not Hermitian: {dev:.3e}")
    tr = complex(np.trace(rho))
    if abs(tr - 1.0) > trace_tol:
        raise AssertionError(f"density matrix trace {tr} deviates from 1")
    lo = float(np.min(np.linalg.eigvalsh((rho + rho.conj().T) / 2)))
    if lo < -psd_tol:
        raise AssertionError(f"density matrix has negative eigenvalue {lo:.3e}")
