"""Closed-form mean-field predictions for the squeezed laser."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .model import ModelParams, derived


@dataclass(frozen=True)
class MeanFieldPrediction:
    p_s: float
    n_s: float
    n_bare: float
    threshold_p_bare: float
    gamma_linewidth: Optional[float]  # None below threshold
    n_d: float


def meanfield_population(
    p_s: float, n_0: Optional[float] = None, n_q: Optional[float] = None, gamma_zero: bool = True
) -> float:
    """Squeezed-mode population ``n_0 (p_s - 1) H(p_s - 1)``.

    For ``gamma_zero`` the equivalent form ``n_q (1 - 1/p_s)`` is used and
    ``n_q`` must be given; otherwise ``n_0`` is required.
    """
    if p_s < 0:
        raise ValueError("p_s must be non-negative")
    if p_s <= 1.0:
        return 0.0
    if gamma_zero:
        if n_q is None:
            raise ValueError("n_q is required when gamma = 0")
        return n_q * (1.0 - 1.0 / p_s)
    if n_0 is None:
        raise ValueError("n_0 is required for gamma != 0")
    return n_0 * (p_s - 1.0)


def threshold_bare_pump(r: float) -> float:
    """Bare pump parameter at which the squeezed mode reaches threshold: ``1/cosh^2 r``."""
    if r < 0:
        raise ValueError("r must be non-negative")
    return 1.0 / math.cosh(r) ** 2


def bare_population(n_s: float, r: float) -> float:
    """Bare-mode photon number ``n_s cosh 2r + sinh^2 r`` of a phase-diffused squeezed state."""
    return n_s * math.cosh(2.0 * r) + math.sinh(r) ** 2


def linewidth(n_s: float, c_s: float, kappa: float = 1.0) -> Optional[float]:
    """Phase-diffusion linewidth ``kappa C_s / (4 n_s)``; ``None`` when the mode is empty."""
    if n_s <= 0:
        return None
    return kappa * c_s / (4.0 * n_s)


def drive_population(omega: float, kappa: float = 1.0) -> float:
    """Population ``4 Omega^2 / kappa^2`` set up by the coherent drive alone."""
    return 4.0 * omega**2 / kappa**2


def g2_deep_lasing(r: float) -> float:
    """Bare-mode ``g2(0) = (3 - sech^2 2r)/2`` of the phase-diffused state for ``n_s >> 1``."""
    return 0.5 * (3.0 - 1.0 / math.cosh(2.0 * r) ** 2)


def squeezing_threshold(r: float) -> float:
    """Largest ``n_s`` for which the phase-diffused state is squeezed: ``(e^{2r} - 1)/2``."""
    return 0.5 * math.expm1(2.0 * r)


def predicted_observables(params: ModelParams) -> MeanFieldPrediction:
    d = derived(params)
    r = abs(d.r)
    if params.gamma == 0:
        n_s = meanfield_population(d.p_s, n_q=d.n_q, gamma_zero=True)
    else:
        n_s = meanfield_population(d.p_s, n_0=d.n_0, gamma_zero=False)
    return MeanFieldPrediction(
        p_s=d.p_s,
        n_s=n_s,
        n_bare=bare_population(n_s, r),
        threshold_p_bare=threshold_bare_pump(r),
        gamma_linewidth=linewidth(n_s, d.c_s, params.kappa),
        n_d=drive_population(params.drive_amp, params.kappa),
    )
