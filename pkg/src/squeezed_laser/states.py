"""Reference states, photon statistics, quadratures and Wigner functions.

Phase-space convention: ``x = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(i sqrt(2))``,
so the quadrature ``X_phi = a e^{-i phi} + a^dag e^{i phi}`` equals ``sqrt(2) x_phi``,
the vacuum has ``<Delta X_phi^2> = 1`` and its Wigner function is
``exp(-x^2 - p^2)/pi``. Photonic observables are evaluated on the photon
reduced state; the atom (if any) is traced out first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from . import operators as ops
from .io import write_csv
from .operators import HilbertSpace, TruncationError

MAX_POLY_ORDER = 4


def photon_reduced(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    """Partial trace over the atom (identity for photon-only spaces)."""
    rho = np.asarray(rho)
    if not space.has_atom:
        return rho
    nf = space.n_fock
    return rho.reshape(nf, 2, nf, 2).trace(axis1=1, axis2=3)


def atom_reduced(rho: np.ndarray, space: HilbertSpace) -> np.ndarray:
    nf = space.n_fock
    return np.asarray(rho).reshape(nf, 2, nf, 2).trace(axis1=0, axis2=2)


def expect(op: np.ndarray, rho: np.ndarray) -> complex:
    return complex(np.trace(op @ rho))


def ket_to_dm(ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, ket.conj())


def tail_population(rho_photon: np.ndarray) -> float:
    """Population in the top two Fock levels."""
    diag = np.real(np.diag(rho_photon))
    return float(diag[-2:].sum())


def check_tail(rho_photon: np.ndarray, what: str, tol: float = ops.TAIL_TOLERANCE) -> float:
    tail = tail_population(rho_photon)
    if tail > tol:
        raise TruncationError(f"{what}: population {tail:.2e} in the top Fock levels; increase fock_cutoff")
    return tail


def trace_distance(rho1: np.ndarray, rho2: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(rho1 - rho2)).sum())


def fidelity_pure(ket1: np.ndarray, ket2: np.ndarray) -> float:
    return float(abs(np.vdot(ket1, ket2)) ** 2)


def coherent_ket(n_fock: int, alpha: complex) -> np.ndarray:
    """Fock amplitudes ``e^{-|alpha|^2/2} alpha^n / sqrt(n!)`` (exact, unnormalised by truncation)."""
    n = np.arange(n_fock)
    alpha = complex(alpha)
    if alpha == 0:
        ket = np.zeros(n_fock, dtype=complex)
        ket[0] = 1.0
        return ket
    log_mag = -0.5 * abs(alpha) ** 2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    return np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))


def _pad(space: HilbertSpace) -> int:
    return max(20, space.n_fock // 2)


def _squeeze_matrix(n_fock: int, xi: complex) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1).astype(complex)
    ad = a.conj().T
    return expm(0.5 * (np.conj(xi) * a @ a - xi * ad @ ad))


def _displace_matrix(n_fock: int, alpha: complex) -> np.ndarray:
    a = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1).astype(complex)
    return expm(alpha * a.conj().T - np.conj(alpha) * a)


def _embed_photon(rho_photon: np.ndarray, space: HilbertSpace, atom_state: int) -> np.ndarray:
    if not space.has_atom:
        return rho_photon
    atom = np.zeros((2, 2), dtype=complex)
    atom[atom_state, atom_state] = 1.0
    return np.kron(rho_photon, atom)


def squeeze_state(rho_photon: np.ndarray, xi: complex, n_fock_out: int | None = None) -> np.ndarray:
    """``S(xi) rho S(xi)^dag`` computed on a padded ladder, then cut to ``n_fock_out``."""
    n_in = rho_photon.shape[0]
    n_out = n_in if n_fock_out is None else n_fock_out
    big = max(n_in, n_out) + max(20, max(n_in, n_out) // 2)
    s = _squeeze_matrix(big, xi)
    padded = np.zeros((big, big), dtype=complex)
    padded[:n_in, :n_in] = rho_photon
    out = s @ padded @ s.conj().T
    return out[:n_out, :n_out]


def prepare_squeezed_coherent(
    space: HilbertSpace,
    xi: complex,
    alpha: complex,
    ordering: str = "S_then_D",
    atom_state: int = 0,
    as_ket: bool = False,
) -> np.ndarray:
    """Pure state ``S(xi) D(alpha)|0>`` (``S_then_D``) or ``D(alpha) S(xi)|0>`` (``D_then_S``)."""
    big = space.n_fock + _pad(space)
    vac = np.zeros(big, dtype=complex)
    vac[0] = 1.0
    s = _squeeze_matrix(big, xi)
    d = _displace_matrix(big, alpha)
    if ordering == "S_then_D":
        ket = s @ (d @ vac)
    elif ordering == "D_then_S":
        ket = d @ (s @ vac)
    else:
        raise ValueError("ordering must be 'S_then_D' or 'D_then_S'")
    ket = ket[: space.n_fock]
    check_tail(ket_to_dm(ket), "prepare_squeezed_coherent")
    ket = ket / np.linalg.norm(ket)
    if as_ket:
        if space.has_atom:
            atom = np.zeros(2, dtype=complex)
            atom[atom_state] = 1.0
            return np.kron(ket, atom)
        return ket
    return _embed_photon(ket_to_dm(ket), space, atom_state)


def phase_averaged_coherent(n_fock: int, n_s: float, k: int) -> np.ndarray:
    """``(1/K) sum_k |sqrt(n_s) e^{i phi_k}><...|`` on a uniform phase grid."""
    rho = np.zeros((n_fock, n_fock), dtype=complex)
    amp = math.sqrt(n_s)
    for phi in 2 * np.pi * np.arange(k) / k:
        ket = coherent_ket(n_fock, amp * np.exp(1j * phi))
        rho += np.outer(ket, ket.conj())
    return rho / k


def prepare_phase_diffused(
    space: HilbertSpace,
    xi: complex,
    n_s: float,
    k: int = 64,
    tol: float = 1e-6,
    max_k: int = 4096,
    atom_state: int = 0,
) -> np.ndarray:
    """Phase-diffused squeezed-laser state: phase mixture of ``S(xi) D(sqrt(n_s) e^{i phi})|0>``.

    ``k`` is doubled until the state moves by less than ``tol`` in trace distance.
    """
    if k < 16:
        raise ValueError("need at least 16 phase samples")
    nf = space.n_fock
    prev = phase_averaged_coherent(nf, n_s, k)
    while True:
        nxt = phase_averaged_coherent(nf, n_s, 2 * k)
        if trace_distance(prev, nxt) < tol:
            break
        k *= 2
        if k > max_k:
            raise RuntimeError(f"phase average not converged with {max_k} samples")
        prev = nxt
    rho = squeeze_state(nxt, xi) if xi else nxt
    check_tail(rho, "prepare_phase_diffused")
    rho = rho / np.trace(rho).real
    return _embed_photon(rho, space, atom_state)


def _photon_ops(rho: np.ndarray, space: HilbertSpace | None):
    if space is not None:
        rho = photon_reduced(rho, space)
    n_fock = rho.shape[0]
    a = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1).astype(complex)
    return rho, a


def quadrature_moments(rho: np.ndarray, phi: float, space: HilbertSpace | None = None) -> tuple[float, float]:
    """Mean and variance of ``X_phi = a e^{-i phi} + a^dag e^{i phi}``.

    ``<X^2>`` uses ``a a^dag = a^dag a + 1`` so the truncated top level does not bias it.
    """
    rho, a = _photon_ops(rho, space)
    ea = np.exp(-1j * phi)
    mean_a = np.trace(a @ rho)
    mean_a2 = np.trace(a @ a @ rho)
    n = np.trace(a.conj().T @ a @ rho).real
    mean_x = 2 * np.real(ea * mean_a)
    mean_x2 = 2 * np.real(ea**2 * mean_a2) + 2 * n + 1
    return float(mean_x), float(mean_x2 - mean_x**2)


def quadrature_variance(rho: np.ndarray, phi: float, space: HilbertSpace | None = None) -> float:
    return quadrature_moments(rho, phi, space)[1]


def normal_ordered_variance(rho: np.ndarray, phi: float, space: HilbertSpace | None = None) -> float:
    """``<:Delta X_phi^2:>``, negative below shot noise."""
    return quadrature_variance(rho, phi, space) - 1.0


def photon_distribution(rho: np.ndarray, space: HilbertSpace | None = None) -> np.ndarray:
    rho, _ = _photon_ops(rho, space)
    p = np.real(np.diag(rho)).copy()
    if abs(p.sum() - 1.0) > 1e-9:
        raise ValueError(f"photon distribution sums to {p.sum():.12f}")
    return p


def mean_photon_number(rho: np.ndarray, space: HilbertSpace | None = None) -> float:
    p = photon_distribution(rho, space)
    return float(np.dot(np.arange(p.size), p))


# -- bare-basis observables from squeezed-frame states ------------------------------------

Term = tuple[complex, str]
Expr = Union[str, Sequence[Term]]

_TOKENS = {"a": False, "a+": True, "ad": True}


def _parse(expr: Expr) -> list[tuple[complex, list[bool]]]:
    terms = [(1.0, expr)] if isinstance(expr, str) else list(expr)
    parsed = []
    for coeff, word in terms:
        letters = []
        for tok in word.split():
            if tok not in _TOKENS:
                raise ValueError(f"unknown ladder token {tok!r}; use 'a' or 'a+'")
            letters.append(_TOKENS[tok])
        if len(letters) > MAX_POLY_ORDER:
            raise ValueError(f"polynomial order {len(letters)} > {MAX_POLY_ORDER} not supported")
        parsed.append((complex(coeff), letters))
    return parsed


def bare_mode_operator(space: HilbertSpace, xi: complex) -> np.ndarray:
    """Bare annihilation operator written in the squeezed basis: ``a_s cosh r - a_s^dag e^{i arg xi} sinh r``."""
    r, th = abs(xi), np.angle(xi)
    a = ops.annihilation(space)
    return math.cosh(r) * a - math.sinh(r) * np.exp(1j * th) * ops.dag(a)


def bare_basis_observable(expr: Expr, rho_squeezed: np.ndarray, xi: complex, space: HilbertSpace) -> complex:
    """Expectation of a bare-mode polynomial evaluated on a squeezed-frame state.

    ``expr`` is a word such as ``"a+ a"`` (operators applied right to left as
    written, i.e. ordinary operator products) or a list of ``(coefficient, word)``.
    The substitution ``a -> a_s cosh r - a_s^dag e^{i theta} sinh r`` is applied on
    a ladder padded by the polynomial order, so no truncation error enters as long
    as the state itself is supported below the cutoff.
    """
    terms = _parse(expr)
    order = max((len(w) for _, w in terms), default=0)
    big = HilbertSpace(space.fock_cutoff + order, space.atom_levels)
    d_small = space.dim
    rho_big = np.zeros((big.dim, big.dim), dtype=complex)
    rho_big[:d_small, :d_small] = rho_squeezed
    a = bare_mode_operator(big, xi)
    ad = ops.dag(a)
    total = 0j
    for coeff, letters in terms:
        op = np.eye(big.dim, dtype=complex)
        for is_dag in letters:
            op = op @ (ad if is_dag else a)
        total += coeff * np.trace(op @ rho_big)
    return complex(total)


def bare_photon_number(rho_squeezed: np.ndarray, xi: complex, space: HilbertSpace) -> float:
    return float(np.real(bare_basis_observable("a+ a", rho_squeezed, xi, space)))


# -- Wigner functions ---------------------------------------------------------------------


@dataclass
class WignerGrid:
    x: np.ndarray
    p: np.ndarray
    values: np.ndarray  # shape (len(x), len(p))
    meta: dict = field(default_factory=dict)

    def normalization(self) -> float:
        return float(np.trapezoid(np.trapezoid(self.values, self.p, axis=1), self.x))

    def x_marginal(self) -> np.ndarray:
        return np.trapezoid(self.values, self.p, axis=1)

    def to_csv(self, path: Union[str, Path]) -> None:
        xx, pp = np.meshgrid(self.x, self.p, indexing="ij")
        rows = zip(xx.ravel(), pp.ravel(), self.values.ravel())
        write_csv(path, ["x", "p", "W"], rows, {"kind": "wigner", **self.meta})

    def to_binary(self, path: Union[str, Path]) -> None:
        """JSON header line, then ``x``, ``p`` and row-major ``W`` as little-endian float64."""
        header = {
            "kind": "wigner",
            "nx": int(self.x.size),
            "np": int(self.p.size),
            "dtype": "<f8",
            "order": "row-major",
            "layout": ["x", "p", "W"],
            **self.meta,
        }
        with open(path, "wb") as fh:
            fh.write((json.dumps(header, sort_keys=True) + "\n").encode("utf-8"))
            for arr in (self.x, self.p, self.values):
                fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path: Union[str, Path]) -> "WignerGrid":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            data = np.frombuffer(fh.read(), dtype="<f8")
        nx, n_p = header.pop("nx"), header.pop("np")
        x, p = data[:nx], data[nx : nx + n_p]
        values = data[nx + n_p :].reshape(nx, n_p)
        for key in ("kind", "dtype", "order", "layout"):
            header.pop(key, None)
        return cls(x.copy(), p.copy(), values.copy(), header)


def default_grid(n_mean: float, points: int = 201) -> np.ndarray:
    half = 6.0 + 2.0 * math.sqrt(max(n_mean, 0.0))
    return np.linspace(-half, half, points)


def wigner(
    rho: np.ndarray,
    x: Iterable[float] | None = None,
    p: Iterable[float] | None = None,
    space: HilbertSpace | None = None,
    check_norm: bool = True,
) -> WignerGrid:
    """Wigner function on a rectangular grid.

    Evaluates ``W(x, p) = (1/pi) int dy <x+y|rho|x-y> e^{-2ipy}`` with position
    wavefunctions from the Hermite recurrence. Every state of the truncated
    space is band limited, so the uniform ``y`` sum is spectrally exact, and
    no step of the evaluation can overflow at large cutoffs.
    """
    rho, _ = _photon_ops(np.asarray(rho, dtype=complex), space)
    n_mean = float(np.real(np.sum(np.arange(rho.shape[0]) * np.diag(rho))))
    x = default_grid(n_mean) if x is None else np.asarray(list(x), dtype=float)
    p = x.copy() if p is None else np.asarray(list(p), dtype=float)
    grid = WignerGrid(x, p, _wigner_weyl(rho, x, p))
    if check_norm:
        norm = grid.normalization()
        if abs(norm - 1.0) > 1e-3:
            raise ValueError(f"Wigner grid too small: normalization {norm:.6f}")
    return grid


def _wigner_weyl(rho: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    n = rho.shape[0]
    reach = math.sqrt(2 * n + 1) + 6.0  # position and momentum support of the truncated space
    h = 0.9 * math.pi / (reach + float(np.max(np.abs(p))))
    m = int(math.ceil(reach / h))
    y = h * np.arange(-m, m + 1)
    kernel = np.exp(-2j * np.outer(y, p)) * (h / math.pi)
    out = np.empty((x.size, p.size))
    for i, xi in enumerate(x):
        plus = hermite_functions(n, xi + y)
        minus = hermite_functions(n, xi - y)
        overlap = np.einsum("my,my->y", plus, rho @ minus)
        out[i] = np.real(overlap @ kernel)
    return out


def displaced_parity(rho: np.ndarray, beta: complex, space: HilbertSpace | None = None, pad: int = 40) -> float:
    """Wigner value at ``beta = (x + i p)/sqrt(2)`` from the displaced parity.

    ``W(x, p) = (1/pi) Tr[D(-beta) rho D(-beta)^dag Pi]``; the factor is ``1/pi``
    rather than ``2/pi`` because ``W`` is normalised over ``dx dp``.
    """
    rho, _ = _photon_ops(np.asarray(rho, dtype=complex), space)
    n = rho.shape[0]
    big = n + max(pad, int(4 * abs(beta) ** 2))
    padded = np.zeros((big, big), dtype=complex)
    padded[:n, :n] = rho
    d = _displace_matrix(big, -complex(beta))
    shifted = d @ padded @ d.conj().T
    signs = (-1.0) ** np.arange(big)
    return float(np.real(np.sum(signs * np.diag(shifted))) / np.pi)


def hermite_functions(n_max: int, x: np.ndarray) -> np.ndarray:
    """Oscillator eigenfunctions ``psi_n(x)`` for ``n < n_max`` (rows), by the stable recurrence."""
    x = np.asarray(x, dtype=float)
    psi = np.zeros((n_max, x.size))
    psi[0] = np.pi**-0.25 * np.exp(-0.5 * x**2)
    if n_max > 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for n in range(1, n_max - 1):
        psi[n + 1] = math.sqrt(2.0 / (n + 1)) * x * psi[n] - math.sqrt(n / (n + 1)) * psi[n - 1]
    return psi


def quadrature_distribution(
    rho: np.ndarray, x: np.ndarray, phi: float = 0.0, space: HilbertSpace | None = None
) -> np.ndarray:
    """Probability density of ``x_phi`` (the Wigner marginal along ``p_phi``)."""
    rho, _ = _photon_ops(np.asarray(rho, dtype=complex), space)
    psi = hermite_functions(rho.shape[0], x)
    phase = np.exp(-1j * phi * np.arange(rho.shape[0]))
    amp = psi * phase[:, None]
    dens = np.einsum("mx,mn,nx->x", amp, rho, amp.conj())
    return np.real(dens)
