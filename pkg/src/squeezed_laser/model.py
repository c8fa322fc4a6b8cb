"""Physical parameters, squeezed-frame calibration and model Hamiltonians.

Phase conventions (used consistently across the package):

* bare Hamiltonian ``Delta_c a^dag a + (Omega_p/2)(e^{-i theta} a^2 + e^{i theta} a^dag^2)``;
* it is diagonalised by ``S(xi)`` with ``xi = r e^{i theta}``: a bare state is
  ``rho = S rho_s S^dag`` and ``a = a_s cosh r - a_s^dag e^{i theta} sinh r``;
* the squeezed quadrature is ``X_{theta/2}``;
* squeezed reservoir with moments ``N = sinh^2 r_e`` and
  ``M = cosh r_e sinh r_e e^{-i theta_e}`` enters as
  ``-(kappa/2) M L'_{a^dag} - (kappa/2) M* L'_a`` with ``L'_O = 2 O rho O - O O rho - rho O O``.

With these choices the transformed moments take the form implemented in
:func:`transformed_bath_moments` and the calibration ``theta_e = pi - theta``
cancels the anomalous noise exactly.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import epsilon_0 as EPSILON_0

from . import operators as ops
from .liouvillian import LindbladTerm, SqueezedBathTerm, Superoperator, ThermalTerm, build_liouvillian

RWA_WARN_RATIO = 0.1


class ParametricInstabilityError(ValueError):
    """The parametric drive exceeds the detuning; no squeezed normal mode exists."""


class RWAWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Rates and phases of the squeezed-laser model, in units where ``kappa`` is the reference rate.

    ``delta_sigma=None`` places the atom on resonance with the squeezed mode
    (``Delta_sigma = Delta_s``). ``thermal_override`` forces the effective
    thermal photon number of the squeezed-frame bath; ``None`` uses the
    calibrated value from :func:`bath_calibration`.
    """

    delta_c: float = 20.0
    omega_p: float = 0.0
    theta: float = 0.0
    g: float = 1.0
    n_atoms: int = 1
    delta_sigma: Optional[float] = None
    kappa: float = 1.0
    eta: float = 0.0
    pump: float = 0.0
    gamma: float = 0.0
    drive_amp: float = 0.0
    drive_phase: float = 0.0
    thermal_override: Optional[float] = 0.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        for name in ("eta", "pump", "gamma", "drive_amp"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.thermal_override is not None and self.thermal_override < 0:
            raise ValueError("thermal_override must be non-negative")

    @classmethod
    def from_lasing(
        cls,
        n_q: float,
        c_s: float,
        r: float = 0.0,
        *,
        delta_c: Optional[float] = None,
        theta: float = 0.0,
        kappa: float = 1.0,
        **kwargs,
    ) -> "ModelParams":
        """Parameters of the one-atom laser (gamma = 0) with given n_q, C_s and r.

        Uses ``P = 2 kappa n_q`` and ``g cosh r = kappa sqrt(C_s n_q / 2)``;
        ``Omega_p`` is set to ``Delta_c tanh 2r``. When ``delta_c`` is omitted it
        is chosen so that the squeezed-frame RWA ratio equals 0.01.
        """
        pump = 2.0 * kappa * n_q
        g_tilde = kappa * math.sqrt(c_s * n_q / 2.0)
        if delta_c is None:
            delta_c = max(20.0 * kappa, 100.0 * g_tilde * math.tanh(r) * math.cosh(2.0 * r))
        return cls(
            delta_c=delta_c,
            omega_p=delta_c * math.tanh(2.0 * r),
            theta=theta,
            g=g_tilde / math.cosh(r),
            kappa=kappa,
            pump=pump,
            gamma=0.0,
            **kwargs,
        )

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DerivedParams:
    alpha: float
    r: float
    delta_s: float
    delta_sigma: float
    g_tilde: float
    gamma_tilde: float
    c_bare: float
    c_s: float
    p_s: float
    n_0: float
    n_q: float
    r_e: float
    theta_e: float
    n_s_thermal: float
    rwa_ratio: float = field(default=0.0)


def squeeze_param(alpha: float) -> float:
    """Squeezing parameter ``r = ln[(1+alpha)/(1-alpha)]/4`` of the parametric drive."""
    if not abs(alpha) < 1.0:
        raise ParametricInstabilityError(
            f"parametric instability: drive exceeds detuning (|alpha| = {abs(alpha):.4g} >= 1)"
        )
    return 0.25 * math.log((1.0 + alpha) / (1.0 - alpha))


def drive_ratio(params: ModelParams) -> float:
    if params.delta_c == 0:
        if params.omega_p == 0:
            return 0.0
        raise ParametricInstabilityError("parametric instability: drive exceeds detuning (Delta_c = 0)")
    return params.omega_p / params.delta_c


def diagonalization_residual(params: ModelParams, r: Optional[float] = None) -> float:
    """Magnitude of the ``a_s^2`` coefficient left after the squeezing transformation.

    ``r`` defaults to the value from :func:`squeeze_param`; pass another value
    to probe a mis-set transformation.
    """
    if r is None:
        r = squeeze_param(drive_ratio(params))
    c, s = math.cosh(r), math.sinh(r)
    th = params.theta
    coeff = 0.5 * params.omega_p * (np.exp(-1j * th) * c**2 + np.exp(1j * th) * s**2 * np.exp(-2j * th))
    coeff -= params.delta_c * np.exp(-1j * th) * s * c
    return float(abs(coeff))


class BathCalibration(NamedTuple):
    r_e: float
    theta_e: float
    n_s: float


def bath_calibration(r: float, eta: float, theta: float = 0.0) -> BathCalibration:
    """External squeezing ``(r_e, theta_e)`` that cancels squeezed noise, and the leftover thermal number."""
    if r < 0 or eta < 0:
        raise ValueError("r and eta must be non-negative")
    sh2r = math.sinh(2.0 * r)
    r_e = r + 0.5 * math.asinh(eta * sh2r)
    n_s = 0.5 * (2.0 * eta * math.sinh(r) ** 2 + math.sqrt(1.0 + (eta * sh2r) ** 2) - 1.0)
    return BathCalibration(r_e, math.pi - theta, n_s)


def bath_calibration_first_order(r: float, eta: float) -> float:
    """Small-``eta`` approximation ``r_e ~ r + eta sinh(2r)/2``."""
    return r + 0.5 * eta * math.sinh(2.0 * r)


def bath_moments(r_e: float, theta_e: float) -> tuple[float, complex]:
    """Moments ``(N, M)`` of a broadband squeezed-vacuum reservoir."""
    n = math.sinh(r_e) ** 2
    m = math.cosh(r_e) * math.sinh(r_e) * np.exp(-1j * theta_e)
    return n, complex(m)


def transformed_bath_moments(
    n: float, m: complex, r: float, theta: float, eta: float
) -> tuple[float, complex]:
    """Bath moments ``(N_s, M_s)`` seen by the squeezed mode ``a_s``."""
    c, s = math.cosh(r), math.sinh(r)
    eth = np.exp(1j * theta)
    n_s = s**2 * (1 + eta) + n * (s**2 + c**2) + c * s * (m / eth + np.conj(m) * eth)
    m_s = c * s * eth * (2 * n + 1 + eta) + m * c**2 + np.conj(m) * eth**2 * s**2
    return float(np.real(n_s)), complex(m_s)


def rwa_ratio(params: ModelParams) -> float:
    """``sqrt(N) g sinh r / Delta_s``; the squeezed-frame RWA needs this to be small."""
    r = squeeze_param(drive_ratio(params))
    coupling = math.sqrt(params.n_atoms) * abs(params.g) * abs(math.sinh(r))
    if coupling == 0:
        return 0.0
    delta_s = abs(params.delta_c) * math.sqrt(1.0 - drive_ratio(params) ** 2)
    return math.inf if delta_s == 0 else coupling / delta_s


def derived(params: ModelParams) -> DerivedParams:
    alpha = drive_ratio(params)
    r = squeeze_param(alpha)
    delta_s = params.delta_c * math.sqrt(1.0 - alpha**2)
    delta_sigma = delta_s if params.delta_sigma is None else params.delta_sigma
    g_tilde = params.g * math.cosh(r)
    gamma_tilde = 0.5 * (params.pump + params.gamma)
    if gamma_tilde > 0:
        c_bare = 2.0 * params.g**2 / (params.kappa * gamma_tilde)
        p_s_factor = (params.pump - params.gamma) / (params.pump + params.gamma)
    else:
        c_bare = math.inf if params.g else 0.0
        p_s_factor = 0.0
    c_s = c_bare * math.cosh(r) ** 2
    p_s = params.n_atoms * c_s * p_s_factor
    n_0 = gamma_tilde**2 / (2.0 * g_tilde**2) if g_tilde else math.inf
    n_q = params.n_atoms * params.pump / (2.0 * params.kappa)
    cal = bath_calibration(abs(r), params.eta, params.theta)
    return DerivedParams(
        alpha=alpha,
        r=r,
        delta_s=delta_s,
        delta_sigma=delta_sigma,
        g_tilde=g_tilde,
        gamma_tilde=gamma_tilde,
        c_bare=c_bare,
        c_s=c_s,
        p_s=p_s,
        n_0=n_0,
        n_q=n_q,
        r_e=cal.r_e,
        theta_e=cal.theta_e,
        n_s_thermal=cal.n_s,
        rwa_ratio=rwa_ratio(params),
    )


def thermal_number(params: ModelParams) -> float:
    """Thermal photon number used in the squeezed-frame dissipators."""
    if params.thermal_override is not None:
        return float(params.thermal_override)
    return derived(params).n_s_thermal


def build_hamiltonian_bare(params: ModelParams, space: ops.HilbertSpace) -> np.ndarray:
    """Hamiltonian in the frame rotating at the pump half-frequency (single atom)."""
    a = ops.annihilation(space)
    ad = ops.dag(a)
    th = params.theta
    h = params.delta_c * ad @ a
    h = h + 0.5 * params.omega_p * (np.exp(-1j * th) * a @ a + np.exp(1j * th) * ad @ ad)
    if space.has_atom:
        sm = ops.atom_lowering(space)
        sp = ops.dag(sm)
        h = h + derived(params).delta_sigma * sp @ sm + params.g * (ad @ sm + a @ sp)
    return h


def build_hamiltonian_squeezed(
    params: ModelParams, space: ops.HilbertSpace, co_rotating: bool = False
) -> np.ndarray:
    """Jaynes-Cummings Hamiltonian of the squeezed mode after the RWA, plus optional coherent drive.

    With ``co_rotating=True`` the frame additionally rotates at the squeezed-mode
    frequency, removing ``Delta_s (a_s^dag a_s + sigma^dag sigma)``; this is
    exact because the excitation number commutes with the rest of the model.
    """
    d = derived(params)
    if d.rwa_ratio > RWA_WARN_RATIO:
        warnings.warn(
            f"squeezed-frame RWA questionable: sqrt(N) g sinh r / Delta_s = {d.rwa_ratio:.3g}",
            RWAWarning,
            stacklevel=2,
        )
    a = ops.annihilation(space)
    ad = ops.dag(a)
    shift = d.delta_s if co_rotating else 0.0
    h = (d.delta_s - shift) * ad @ a
    if space.has_atom:
        sm = ops.atom_lowering(space)
        sp = ops.dag(sm)
        h = h + (d.delta_sigma - shift) * sp @ sm + d.g_tilde * (ad @ sm + a @ sp)
    if params.drive_amp:
        ph = np.exp(1j * params.drive_phase)
        h = h + params.drive_amp * (a / ph + ad * ph)
    return h


def lasing_dissipators(params: ModelParams, space: ops.HilbertSpace) -> tuple[list[LindbladTerm], list[ThermalTerm]]:
    """Decay and thermal channels of the lasing master equation in the squeezed frame.

    The cavity couples to a thermal bath of occupation ``N_s`` at rate ``kappa``
    and to vacuum at rate ``eta kappa``; the atom is pumped at ``P`` and decays at ``gamma``.
    """
    a = ops.annihilation(space)
    decay = []
    thermal = []
    n_th = thermal_number(params)
    if n_th:
        thermal.append(ThermalTerm(a, params.kappa, n_th))
        if params.eta:
            decay.append(LindbladTerm(a, params.kappa * params.eta))
    else:
        decay.append(LindbladTerm(a, params.kappa * (1.0 + params.eta)))
    if space.has_atom:
        sm = ops.atom_lowering(space)
        if params.pump:
            decay.append(LindbladTerm(ops.dag(sm), params.pump))
        if params.gamma:
            decay.append(LindbladTerm(sm, params.gamma))
    return decay, thermal


def lasing_liouvillian(
    params: ModelParams, space: ops.HilbertSpace, co_rotating: bool = True
) -> Superoperator:
    """Liouvillian of the lasing master equation in the squeezed basis."""
    h = build_hamiltonian_squeezed(params, space, co_rotating=co_rotating)
    decay, thermal = lasing_dissipators(params, space)
    return build_liouvillian(h, decay, thermal_terms=thermal, label="lasing")


def bare_cavity_liouvillian(
    params: ModelParams, space: ops.HilbertSpace, r_e: float, theta_e: float, with_atom_terms: bool = True
) -> Superoperator:
    """Liouvillian in the bare basis with the squeezed reservoir and extra loss ``eta kappa``.

    The atom (if present) keeps its Jaynes-Cummings coupling to the bare mode.
    """
    h = build_hamiltonian_bare(params, space)
    a = ops.annihilation(space)
    n, m = bath_moments(r_e, theta_e)
    decay = []
    if params.eta:
        decay.append(LindbladTerm(a, params.kappa * params.eta))
    if space.has_atom and with_atom_terms:
        sm = ops.atom_lowering(space)
        if params.pump:
            decay.append(LindbladTerm(ops.dag(sm), params.pump))
        if params.gamma:
            decay.append(LindbladTerm(sm, params.gamma))
    squeezed = [SqueezedBathTerm(a, params.kappa, n, m)]
    return build_liouvillian(h, decay, squeezed_terms=squeezed, label="bare+squeezed-bath")


@dataclass(frozen=True)
class Crystal:
    n_0: float
    length: float
    chi: float


def pump_power(
    omega_p_over_kappa: float,
    waist_area: float,
    crystal: Crystal,
    omega_c: float,
    t_p: float,
    t_s: float,
) -> float:
    """Pump power in watts for a doubly-resonant cavity (SI inputs, ``omega_c`` in rad/s)."""
    for value in (omega_p_over_kappa, waist_area, crystal.n_0, crystal.length, crystal.chi, omega_c, t_p, t_s):
        if value <= 0:
            raise ValueError("pump_power inputs must be positive")
    p0 = EPSILON_0 * SPEED_OF_LIGHT**3 * crystal.n_0**2 * t_p * t_s**2
    p0 /= 32.0 * (crystal.chi * crystal.length * omega_c) ** 2
    return waist_area * omega_p_over_kappa**2 * p0
