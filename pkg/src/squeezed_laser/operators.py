"""Operators on a truncated photon (x two-level atom) Hilbert space.

Operators are plain dense ``numpy`` arrays. The tensor ordering is always
photon first, atom second, so an index ``k = n * atom_levels + s`` labels
Fock state ``n`` and atomic state ``s`` (0 = ground, 1 = excited).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

TAIL_TOLERANCE = 1e-8


class TruncationWarning(UserWarning):
    """Emitted when a Fock cutoff is too small for the requested object."""


class TruncationError(RuntimeError):
    """Raised when a state carries too much population near the cutoff."""


@dataclass(frozen=True)
class HilbertSpace:
    fock_cutoff: int
    atom_levels: int = 1

    def __post_init__(self):
        if self.fock_cutoff < 1:
            raise ValueError("fock_cutoff must be >= 1")
        if self.atom_levels not in (1, 2):
            raise ValueError("atom_levels must be 1 (photon only) or 2")

    @property
    def n_fock(self) -> int:
        return self.fock_cutoff + 1

    @property
    def dim(self) -> int:
        return self.n_fock * self.atom_levels

    @property
    def has_atom(self) -> bool:
        return self.atom_levels == 2

    def photon_only(self) -> "HilbertSpace":
        return HilbertSpace(self.fock_cutoff, 1)

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)


def suggest_cutoff(n_target: float) -> int:
    """Default Fock cutoff ``ceil(n + 6 sqrt(n) + 10)`` for mean photon number n."""
    n_target = max(float(n_target), 0.0)
    return int(math.ceil(n_target + 6.0 * math.sqrt(n_target) + 10.0))


def photon_op(space: HilbertSpace, op: np.ndarray) -> np.ndarray:
    """Lift a photon-space matrix to the full space (identity on the atom)."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (space.n_fock, space.n_fock):
        raise ValueError(f"expected a {space.n_fock}x{space.n_fock} photon operator")
    if not space.has_atom:
        return op
    return np.kron(op, np.eye(2))


def atom_op(space: HilbertSpace, op: np.ndarray) -> np.ndarray:
    if not space.has_atom:
        raise ValueError("photon-only space has no atom")
    return np.kron(np.eye(space.n_fock), np.asarray(op, dtype=complex))


def dag(op: np.ndarray) -> np.ndarray:
    return op.conj().T


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def _ladder(n_fock: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1).astype(complex)


def annihilation(space: HilbertSpace) -> np.ndarray:
    """Truncated bosonic lowering operator, ``<n-1|a|n> = sqrt(n)``."""
    return photon_op(space, _ladder(space.n_fock))


def creation(space: HilbertSpace) -> np.ndarray:
    return dag(annihilation(space))


def number(space: HilbertSpace) -> np.ndarray:
    return photon_op(space, np.diag(np.arange(space.n_fock, dtype=complex)))


def parity(space: HilbertSpace) -> np.ndarray:
    signs = (-1.0) ** np.arange(space.n_fock)
    return photon_op(space, np.diag(signs.astype(complex)))


def atom_lowering(space: HilbertSpace) -> np.ndarray:
    """``sigma = |g><e|`` tensored with the photonic identity."""
    if not space.has_atom:
        raise ValueError("atom_lowering requires atom_levels=2")
    sigma = np.array([[0, 1], [0, 0]], dtype=complex)
    return atom_op(space, sigma)


def fock_ket(space: HilbertSpace, n: int, atom_state: int = 0) -> np.ndarray:
    if not 0 <= n <= space.fock_cutoff:
        raise ValueError(f"Fock state {n} outside cutoff {space.fock_cutoff}")
    ket = np.zeros(space.dim, dtype=complex)
    ket[n * space.atom_levels + atom_state] = 1.0
    return ket


def _check_leak(u_photon: np.ndarray, what: str) -> float:
    """Population of ``U|0>`` in the top two Fock levels."""
    leak = float(np.sum(np.abs(u_photon[-2:, 0]) ** 2))
    if leak > TAIL_TOLERANCE:
        warnings.warn(
            f"{what}: population {leak:.2e} reaches the Fock cutoff; increase fock_cutoff",
            TruncationWarning,
            stacklevel=3,
        )
    return leak


def squeeze_unitary(space: HilbertSpace, xi: complex) -> np.ndarray:
    """Squeeze operator ``S(xi) = exp[(xi* a^2 - xi a^dag^2) / 2]``.

    With ``xi = r exp(i phi)`` this gives ``S^dag a S = a cosh r - a^dag e^{i phi} sinh r``
    and ``S(xi)|0>`` is squeezed along the quadrature at angle ``phi / 2``.
    """
    xi = complex(xi)
    a = _ladder(space.n_fock)
    ad = dag(a)
    if xi == 0:
        s = np.eye(space.n_fock, dtype=complex)
    else:
        s = expm(0.5 * (np.conj(xi) * (a @ a) - xi * (ad @ ad)))
        _check_leak(s, "squeeze_unitary")
    return photon_op(space, s)


def displacement_unitary(space: HilbertSpace, alpha: complex) -> np.ndarray:
    """Displacement operator ``D(alpha) = exp(alpha a^dag - alpha* a)``."""
    alpha = complex(alpha)
    a = _ladder(space.n_fock)
    if alpha == 0:
        d = np.eye(space.n_fock, dtype=complex)
    else:
        d = expm(alpha * dag(a) - np.conj(alpha) * a)
        _check_leak(d, "displacement_unitary")
    return photon_op(space, d)


def rotation_unitary(space: HilbertSpace, angle: float) -> np.ndarray:
    """``exp(-i angle a^dag a)``; maps ``a -> e^{-i angle} a`` in the Heisenberg picture."""
    phases = np.exp(-1j * angle * np.arange(space.n_fock))
    return photon_op(space, np.diag(phases))


def unitarity_defect(u: np.ndarray, space: HilbertSpace) -> float:
    """``max |U U^dag - I|`` restricted to the lower 2/3 of the Fock ladder."""
    low = max(1, (2 * space.n_fock) // 3) * space.atom_levels
    defect = u @ dag(u) - np.eye(u.shape[0])
    return float(np.max(np.abs(defect[:low, :low])))


def excitation_charges(space: HilbertSpace) -> np.ndarray:
    """Excitation number ``n + s`` of every basis state (conserved by the RWA models)."""
    n = np.repeat(np.arange(space.n_fock), space.atom_levels)
    s = np.tile(np.arange(space.atom_levels), space.n_fock)
    return n + s
