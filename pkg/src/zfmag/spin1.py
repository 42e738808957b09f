"""Spin-1 operator algebra and the static zero-field sensor Hamiltonian.

Everything in this package works in the fixed ordered basis

    (|+1>, |0>, |-1>)

so a state is a length-3 complex vector and operators are 3x3 matrices.
The zero-field eigenstates |+-> = (|+1> +- |-1>)/sqrt(2) form a second
natural basis; :func:`to_pm_basis` / :func:`from_pm_basis` convert between
the two so sign conventions live in exactly one place.

The static sensor Hamiltonian is

    H = D Sz^2 + dBz Sz + Ex (Sx^2 - Sy^2) + Ey (Sx Sy + Sy Sx)

with D the uniaxial zero-field splitting, Ex/Ey the transverse splitting
components and dBz a Zeeman-like longitudinal offset.  Its spectrum is
known in closed form: {0, D +- sqrt(Ex^2 + Ey^2 + dBz^2)}.
"""

from dataclasses import dataclass

import numpy as np

_SQRT2 = np.sqrt(2.0)

# Spin-1 matrices in the (|+1>, |0>, |-1>) basis.
SX = np.array([[0, 1, 0],
               [1, 0, 1],
               [0, 1, 0]], dtype=complex) / _SQRT2
SY = np.array([[0, -1j, 0],
               [1j, 0, -1j],
               [0, 1j, 0]], dtype=complex) / _SQRT2
SZ = np.array([[1, 0, 0],
               [0, 0, 0],
               [0, 0, -1]], dtype=complex)

# Column-k of this matrix is |+>, |0>, |-> expressed in the (+1, 0, -1)
# basis.  The matrix is real, symmetric and involutory (B @ B = I), so it
# is its own inverse.
PM_BASIS = np.array([[1 / _SQRT2, 0, 1 / _SQRT2],
                     [0, 1, 0],
                     [1 / _SQRT2, 0, -1 / _SQRT2]], dtype=complex)

KET_PLUS1 = np.array([1, 0, 0], dtype=complex)
KET_0 = np.array([0, 1, 0], dtype=complex)
KET_MINUS1 = np.array([0, 0, 1], dtype=complex)
KET_PLUS = PM_BASIS[:, 0].copy()
KET_MINUS = PM_BASIS[:, 2].copy()


def spin_operators():
    """Return copies of (Sx, Sy, Sz) satisfying [Sx, Sy] = i Sz."""
    return SX.copy(), SY.copy(), SZ.copy()


def to_pm_basis(a):
    """Express a state vector or operator given in (+1, 0, -1) in (|+>, |0>, |->)."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        return PM_BASIS @ a          # B^dagger = B
    return PM_BASIS @ a @ PM_BASIS


def from_pm_basis(a):
    """Inverse of :func:`to_pm_basis` (the transform is involutory)."""
    return to_pm_basis(a)


def is_hermitian(m, tol=1e-12):
    return np.max(np.abs(m - m.conj().T)) <= tol


def is_unitary(m, tol=1e-9):
    return np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))) <= tol


@dataclass(frozen=True)
class SensorParams:
    """Static sensor physics, all angular frequencies in rad/s.

    ``ex`` is the full transverse splitting magnitude when ``ey`` is zero;
    the x axis is chosen along the transverse splitting so ``ex >= 0``.
    """

    d: float
    ex: float
    ey: float = 0.0
    delta_bz: float = 0.0

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError(f"uniaxial splitting must be positive, got {self.d}")
        if self.ex < 0:
            raise ValueError(f"transverse splitting ex must be >= 0, got {self.ex}")

    @property
    def e_perp(self):
        """Transverse splitting magnitude sqrt(ex^2 + ey^2)."""
        return float(np.hypot(self.ex, self.ey))


@dataclass(frozen=True)
class SensorEigensystem:
    """Closed-form eigensystem of the static Hamiltonian.

    ``energies`` is ordered (E_plus, E_zero, E_minus) and ``states`` holds
    the matching eigenvectors as rows.  ``theta``/``phi`` are the mixing
    angles of the +-1 block:  cos(theta) = dBz / r,  phi = atan2(Ey, Ex)
    with r = sqrt(Ex^2 + Ey^2 + dBz^2).
    """

    energies: np.ndarray
    states: np.ndarray
    theta: float
    phi: float
    degenerate: bool = False


def static_hamiltonian(p: SensorParams) -> np.ndarray:
    """H = D Sz^2 + dBz Sz + Ex (Sx^2 - Sy^2) + Ey (SxSy + SySx)."""
    h = (p.d * (SZ @ SZ)
         + p.delta_bz * SZ
         + p.ex * (SX @ SX - SY @ SY)
         + p.ey * (SX @ SY + SY @ SX))
    return h


def eigensystem(p: SensorParams) -> SensorEigensystem:
    """Closed-form energies and eigenstates of the static Hamiltonian.

    The |0> level is untouched at energy 0; the +-1 block splits into

        E_pm = D +- sqrt(Ex^2 + Ey^2 + dBz^2)

    with eigenstates
        |psi_+> = cos(theta/2) |+1> + e^{i phi} sin(theta/2) |-1>
        |psi_-> = sin(theta/2) |+1> - e^{i phi} cos(theta/2) |-1>

    For Ex = Ey = dBz = 0 the +-1 block is fully degenerate; an arbitrary
    orthonormal pair (here |+1>, |-1>) is returned with ``degenerate`` set.
    """
    r = float(np.sqrt(p.ex**2 + p.ey**2 + p.delta_bz**2))
    if r == 0.0:
        states = np.array([KET_PLUS1, KET_0, KET_MINUS1])
        return SensorEigensystem(
            energies=np.array([p.d, 0.0, p.d]),
            states=states, theta=0.0, phi=0.0, degenerate=True)

    theta = float(np.arccos(np.clip(p.delta_bz / r, -1.0, 1.0)))
    phi = float(np.arctan2(p.ey, p.ex))
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    ph = np.exp(1j * phi)
    psi_plus = np.array([c, 0, ph * s], dtype=complex)
    psi_minus = np.array([s, 0, -ph * c], dtype=complex)
    energies = np.array([p.d + r, 0.0, p.d - r])
    states = np.array([psi_plus, KET_0, psi_minus])

    # Deterministic tie-break: energy order is fixed by construction; for
    # theta = pi/2 both states overlap |+1> equally and the convention
    # above (psi_plus carries the +|-1> component) pins the output.
    return SensorEigensystem(energies=energies, states=states,
                             theta=theta, phi=phi)


def energy_vs_field_scan(p: SensorParams, delta_bz_grid) -> np.ndarray:
    """Eigenvalues along a longitudinal-field scan.

    Returns an array of shape (n, 4) with columns (dBz, E_plus, E_minus,
    E_zero).  The avoided crossing at dBz = 0 has width 2*sqrt(Ex^2+Ey^2).
    """
    grid = np.asarray(delta_bz_grid, dtype=float)
    r = np.sqrt(p.ex**2 + p.ey**2 + grid**2)
    out = np.empty((grid.size, 4))
    out[:, 0] = grid
    out[:, 1] = p.d + r
    out[:, 2] = p.d - r
    out[:, 3] = 0.0
    return out
