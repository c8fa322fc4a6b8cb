"""Phase estimation: quantum and classical Fisher information, interferometer encoding, scaling fits.

The phase is imprinted by ``U_Phi = exp(i Phi G / 2)``; Fisher informations do
not depend on the sign convention. Classical Fisher information refers to a
homodyne measurement of the quadrature ``x_phi`` (phase-space convention of
:mod:`squeezed_laser.states`).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

from . import operators as ops
from .io import write_csv
from .states import (
    _displace_matrix,
    prepare_phase_diffused,
    quadrature_distribution,
)

PAIR_CUTOFF = 1e-12
PROB_FLOOR = 1e-14
THETA_GRID = tuple(k * math.pi / 4 for k in range(8))


@dataclass
class FisherResult:
    f_q: float
    f_classical: Optional[float]
    n_mean: float
    params: dict = field(default_factory=dict)


def number_generator(n_fock: int) -> np.ndarray:
    return np.diag(np.arange(n_fock, dtype=complex))


def _generator(rho: np.ndarray, g_op: Optional[np.ndarray]) -> np.ndarray:
    return number_generator(rho.shape[0]) if g_op is None else np.asarray(g_op, dtype=complex)


def qfi(rho0: np.ndarray, g_op: Optional[np.ndarray] = None) -> float:
    """Quantum Fisher information for ``exp(i Phi G/2)`` (``G`` defaults to ``a^dag a``).

    ``F_Q = (1/2) sum_ij |G_ij|^2 (l_i - l_j)^2 / (l_i + l_j)`` in the eigenbasis of ``rho0``;
    pairs with ``l_i + l_j < 1e-12`` are dropped.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    g = _generator(rho0, g_op)
    lam, vecs = np.linalg.eigh(0.5 * (rho0 + rho0.conj().T))
    lam = np.clip(lam, 0.0, None)
    g_eig = vecs.conj().T @ g @ vecs
    num = (lam[:, None] - lam[None, :]) ** 2
    den = lam[:, None] + lam[None, :]
    mask = den > PAIR_CUTOFF
    terms = np.zeros_like(num)
    terms[mask] = num[mask] / den[mask]
    return float(0.5 * np.sum(terms * np.abs(g_eig) ** 2))


def variance(rho: np.ndarray, op: np.ndarray) -> float:
    m1 = np.trace(op @ rho).real
    m2 = np.trace(op @ op @ rho).real
    return float(m2 - m1**2)


def encode(rho0: np.ndarray, phi: float, g_op: Optional[np.ndarray] = None) -> np.ndarray:
    """``U rho0 U^dag`` with ``U = exp(i Phi G / 2)``."""
    g = _generator(rho0, g_op)
    if np.allclose(g, np.diag(np.diag(g))):
        u = np.diag(np.exp(0.5j * phi * np.diag(g).real))
    else:
        w, v = np.linalg.eigh(g)
        u = (v * np.exp(0.5j * phi * w)) @ v.conj().T
    return u @ rho0 @ u.conj().T


def default_x_grid(n_fock: int, points: int = 2001) -> np.ndarray:
    """Grid wide enough for every Hermite function kept by the truncation."""
    half = math.sqrt(2.0 * n_fock + 1.0) + 6.0
    return np.linspace(-half, half, points)


def _log_density(rho: np.ndarray, x: np.ndarray, theta_meas: float) -> tuple[np.ndarray, np.ndarray]:
    p = quadrature_distribution(rho, x, theta_meas)
    if np.any(p < -1e-10):
        warnings.warn(f"negative probability {p.min():.2e} clipped", RuntimeWarning, stacklevel=3)
    p = np.clip(p, PROB_FLOOR, None)
    return p, np.log(p)


def cfi_quadrature(
    rho0: np.ndarray,
    g_op: Optional[np.ndarray] = None,
    phi: float = 0.0,
    d_phi: float = 1e-3,
    x: Optional[np.ndarray] = None,
    theta_meas: float = 0.0,
    rtol: float = 1e-4,
    atol: float = 1e-6,
    max_halvings: int = 6,
) -> float:
    """Classical Fisher information ``E[-d^2 log p_Phi / dPhi^2]`` of the ``x_theta`` distribution.

    The second derivative uses central differences; ``d_phi`` is halved and
    Richardson-extrapolated until two successive estimates agree to ``rtol`` (or ``atol`` near zero).
    """
    rho0 = np.asarray(rho0, dtype=complex)
    x = default_x_grid(rho0.shape[0]) if x is None else np.asarray(x, dtype=float)
    p0, log0 = _log_density(encode(rho0, phi, g_op), x, theta_meas)
    norm = np.trapezoid(p0, x)
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"quadrature grid does not cover the state (norm {norm:.8f})")

    def estimate(h: float) -> float:
        _, lp = _log_density(encode(rho0, phi + h, g_op), x, theta_meas)
        _, lm = _log_density(encode(rho0, phi - h, g_op), x, theta_meas)
        curv = (lp - 2.0 * log0 + lm) / h**2
        return float(-np.trapezoid(p0 * curv, x))

    # central differences carry an O(h^2) error; Richardson-combine successive halvings
    h = d_phi
    coarse = estimate(h)
    prev = None
    for _ in range(max_halvings):
        h *= 0.5
        fine = estimate(h)
        extrap = (4.0 * fine - coarse) / 3.0
        if prev is not None and abs(extrap - prev) <= max(rtol * abs(extrap), atol):
            return max(extrap, 0.0)
        prev, coarse = extrap, fine
    raise RuntimeError("finite-difference Fisher information did not converge")


def cfi_quadrature_exact(
    rho0: np.ndarray, g_op: Optional[np.ndarray] = None, phi: float = 0.0, x=None, theta_meas: float = 0.0
) -> float:
    """Same quantity from analytic derivatives ``d rho = (i/2)[G, rho]``: ``int p'^2/p - p'' dx``."""
    rho0 = np.asarray(rho0, dtype=complex)
    g = _generator(rho0, g_op)
    x = default_x_grid(rho0.shape[0]) if x is None else np.asarray(x, dtype=float)
    rho = encode(rho0, phi, g_op)
    d1 = 0.5j * (g @ rho - rho @ g)
    d2 = 0.5j * (g @ d1 - d1 @ g)
    p = np.clip(quadrature_distribution(rho, x, theta_meas), PROB_FLOOR, None)
    p1 = quadrature_distribution(d1, x, theta_meas)
    p2 = quadrature_distribution(d2, x, theta_meas)
    return float(np.trapezoid(p1**2 / p - p2, x))


def michelson_encode(
    rho: np.ndarray, phi: float, regime: str = "rotation", space: Optional[ops.HilbertSpace] = None
) -> np.ndarray:
    """Single-mode reduction of the interferometer near the dark fringe.

    ``rotation`` applies ``exp(-i Phi a^dag a / 2)``; ``displacement_approx``
    applies the equivalent small displacement ``D(-i alpha Phi/2)`` with
    ``alpha = <a>``, which requires a state with a coherent component.
    """
    rho = np.asarray(rho, dtype=complex)
    if abs(phi) > 0.3:
        warnings.warn(f"|Phi| = {abs(phi):.3g} is outside the small-phase regime", RuntimeWarning, stacklevel=2)
    n_fock = rho.shape[0] if space is None else space.n_fock
    levels = 1 if space is None else space.atom_levels
    if regime == "rotation":
        phases = np.repeat(np.exp(-0.5j * phi * np.arange(n_fock)), levels)
        return (phases[:, None] * rho) * phases.conj()[None, :]
    if regime == "displacement_approx":
        if levels != 1:
            raise ValueError("displacement_approx expects a photon-only state")
        a = np.diag(np.sqrt(np.arange(1, n_fock, dtype=float)), 1)
        alpha = np.trace(a @ rho)
        if abs(alpha) < 1e-8:
            raise ValueError("displacement_approx needs <a> != 0 (phase-diffused input has none)")
        d = _displace_matrix(n_fock, -0.5j * alpha * phi)
        return d @ rho @ d.conj().T
    raise ValueError("regime must be 'rotation' or 'displacement_approx'")


def heisenberg_fit(points: Iterable[tuple[float, float]], n_s: float) -> tuple[float, float]:
    """Least-squares ``beta`` in ``F = (n^2 - n_s^2)/(beta n_s)``; returns ``(beta, relative RMS residual)``."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise ValueError("need at least 4 (n, F) points")
    n, f = pts[:, 0], pts[:, 1]
    if n.max() < 4 * n.min():
        raise ValueError("n must span at least a factor of 4")
    y = (n**2 - n_s**2) / n_s
    denom = float(np.dot(y, y))
    if denom == 0:
        raise ValueError("degenerate fit")
    k = float(np.dot(y, f)) / denom
    if k <= 0:
        raise ValueError("degenerate fit: non-positive slope")
    resid = float(np.sqrt(np.mean(((f - k * y) / f) ** 2)))
    return 1.0 / k, resid


def phase_diffused_state(n_s: float, r: float, fock_cutoff: Optional[int] = None, max_cutoff: int = 600):
    """Phase-diffused state for squeezing ``r`` along ``theta = 0``, growing the cutoff until the tail is negligible."""
    n_bare = n_s * math.cosh(2 * r) + math.sinh(r) ** 2
    cutoff = fock_cutoff or 2 * ops.suggest_cutoff(n_bare)
    while True:
        try:
            space = ops.HilbertSpace(cutoff)
            return space, prepare_phase_diffused(space, r, n_s)
        except ops.TruncationError:
            if fock_cutoff is not None or cutoff >= max_cutoff:
                raise
            cutoff = min(max_cutoff, int(1.5 * cutoff))


def optimal_theta(rho_r: np.ndarray, thetas: Sequence[float] = THETA_GRID) -> tuple[float, float]:
    """Squeezing angle maximising the homodyne CFI: coarse grid, then bounded refinement.

    A squeezing angle ``theta`` equals a rotation of the ``theta = 0`` state by
    ``exp(i theta a^dag a / 2)``, so only ``rho_r`` is needed.
    """

    def neg_cfi(theta: float) -> float:
        return -cfi_quadrature_exact(encode(rho_r, theta))

    coarse = [(-neg_cfi(t), t) for t in thetas]
    f_best, t_best = max(coarse)
    step = (thetas[1] - thetas[0]) if len(thetas) > 1 else math.pi / 4
    opt = minimize_scalar(neg_cfi, bounds=(t_best - step, t_best + step), method="bounded",
                          options={"xatol": 1e-4})
    if opt.success and -opt.fun > f_best:
        return float(opt.x), float(-opt.fun)
    return float(t_best), float(f_best)


def fisher_point(
    n_s: float,
    r: float,
    fock_cutoff: Optional[int] = None,
    thetas: Sequence[float] = THETA_GRID,
    with_classical: bool = True,
) -> FisherResult:
    """QFI and best-angle homodyne CFI of the phase-diffused squeezed-laser state."""
    space, rho = phase_diffused_state(n_s, r, fock_cutoff)
    f_q = qfi(rho)
    n_mean = float(np.real(np.trace(number_generator(space.n_fock) @ rho)))
    params = {"n_s": n_s, "r": r, "fock_cutoff": space.fock_cutoff}
    f_x = None
    if with_classical:
        theta, _ = optimal_theta(rho, thetas)
        f_x = cfi_quadrature(encode(rho, theta))
        params["theta_opt"] = theta
    return FisherResult(f_q, f_x, n_mean, params)


def fisher_csv(path: Union[str, Path], results: Sequence[FisherResult], meta: Optional[dict] = None) -> Path:
    rows = [
        (res.params.get("r", math.nan), res.params.get("n_s", math.nan), res.n_mean, res.f_q,
         math.nan if res.f_classical is None else res.f_classical)
        for res in results
    ]
    return write_csv(path, ["r", "n_s", "n", "F_Q", "F_X"], rows, {"kind": "fisher", **(meta or {})})
