"""Two-time correlators (quantum regression) and the spectra built from them.

Conventions:

* ``<A(t) B(t+tau)> = Tr[B e^{L tau}(rho(t) A)]`` and
  ``<A(t) B(t+tau) C(t)> = Tr[B e^{L tau}(C rho(t) A)]``;
* emission spectrum ``S(w) = (1/(pi n)) Re int_0^inf e^{i w tau} <a^dag(0) a(tau)> dtau``,
  so a mode evolving as ``e^{-i Delta t}`` peaks at ``w = +Delta``;
* the bare mode is reconstructed from the squeezed-frame evolution through
  ``a = a_s cosh r - a_s^dag e^{i theta} sinh r``. In a frame co-rotating with
  the squeezed mode the counter-rotating part carries ``e^{2 i Delta_s t}``;
  ``delta_s`` sets that offset (0 keeps both parts at the squeezed-mode frequency).

One-sided Fourier integrals use an exact transform of the piecewise-linear
interpolant of the correlator, so non-uniform delay grids are allowed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit

from . import operators as ops
from .io import write_csv
from .liouvillian import Superoperator, SolverError, liouvillian_gap, traces_over_time, vec
from .operators import HilbertSpace
from .states import bare_mode_operator

STATIONARY = math.inf
ANOMALOUS_TOL = 1e-6


@dataclass
class CorrelatorResult:
    tau: np.ndarray
    values: np.ndarray
    pair: tuple[str, str]
    t_anchor: float = STATIONARY
    meta: dict = field(default_factory=dict)

    def to_csv(self, path: Union[str, Path]) -> Path:
        meta = {"kind": "correlator", "pair": list(self.pair), "t_anchor": self.t_anchor, **self.meta}
        rows = zip(self.tau, self.values.real, self.values.imag)
        return write_csv(path, ["tau", "re", "im"], rows, meta)


@dataclass
class SpectrumResult:
    omega: np.ndarray
    values: np.ndarray
    normalization: str
    fwhm: float = math.nan
    fwhm_interp: float = math.nan
    center: float = math.nan
    fit_ok: bool = False
    meta: dict = field(default_factory=dict)

    def integral(self) -> float:
        return float(np.trapezoid(self.values, self.omega))

    def to_csv(self, path: Union[str, Path]) -> Path:
        meta = {
            "kind": "spectrum",
            "normalization": self.normalization,
            "fwhm": self.fwhm,
            "fwhm_interp": self.fwhm_interp,
            "center": self.center,
            "fit_ok": self.fit_ok,
            **self.meta,
        }
        return write_csv(path, ["omega", "S"], zip(self.omega, self.values), meta)


# -- Fourier transform on non-uniform grids ----------------------------------------------


def _phi0(x: np.ndarray) -> np.ndarray:
    """``(e^x - 1)/x`` with a series near zero."""
    out = np.empty_like(x)
    small = np.abs(x) < 0.1
    xs = x[small]
    term = np.ones_like(xs)
    acc = np.ones_like(xs)
    for k in range(1, 10):
        term = term * xs / (k + 1)
        acc = acc + term
    out[small] = acc
    xb = x[~small]
    out[~small] = np.expm1(xb) / xb
    return out


def _phi1(x: np.ndarray) -> np.ndarray:
    """``int_0^1 s e^{x s} ds = (e^x (x-1) + 1)/x^2`` with a series near zero."""
    out = np.empty_like(x)
    small = np.abs(x) < 0.1
    xs = x[small]
    acc = np.full_like(xs, 0.5)
    power = np.ones_like(xs)
    fact = 1.0
    for k in range(1, 10):
        power = power * xs
        fact *= k
        acc = acc + power / (fact * (k + 2))
    out[small] = acc
    xb = x[~small]
    out[~small] = (np.exp(xb) * (xb - 1.0) + 1.0) / xb**2
    return out


def fourier_one_sided(tau: np.ndarray, f: np.ndarray, omega: np.ndarray, chunk: int = 256) -> np.ndarray:
    """``int_{tau_0}^{tau_N} e^{i w tau} f(tau) dtau`` for the piecewise-linear interpolant of ``f``.

    Exact for the interpolant at every ``w``; reduces to the trapezoid rule at ``w = 0``.
    """
    tau = np.asarray(tau, dtype=float)
    f = np.asarray(f, dtype=complex)
    omega = np.asarray(omega, dtype=float)
    h = np.diff(tau)
    keep = h > 0
    t0, h = tau[:-1][keep], h[keep]
    f0, df = f[:-1][keep], np.diff(f)[keep]
    out = np.empty(omega.size, dtype=complex)
    for start in range(0, omega.size, chunk):
        w = omega[start : start + chunk, None]
        x = 1j * w * h[None, :]
        seg = np.exp(1j * w * t0[None, :]) * h[None, :] * (f0[None, :] * _phi0(x) + df[None, :] * _phi1(x))
        out[start : start + chunk] = seg.sum(axis=1)
    return out


# -- delay and frequency grids -----------------------------------------------------------


def default_tau_grid(gamma: float, fast_rate: float = 1.0, points: int = 801, extent: float = 20.0) -> np.ndarray:
    """Dense uniform stretch over ``extent/fast_rate`` followed by a uniform tail to ``extent/gamma``."""
    if gamma <= 0 or fast_rate <= 0:
        raise ValueError("rates must be positive")
    t_fast = extent / fast_rate
    t_max = max(extent / gamma, 2 * t_fast)
    head = np.linspace(0.0, t_fast, points)
    tail = np.linspace(t_fast, t_max, points)[1:]
    return np.concatenate([head, tail])


def default_omega_grid(gamma: float, kappa: float = 1.0, points: int = 401) -> np.ndarray:
    """Fine grid over ``+-10 gamma`` merged with a coarse grid over ``+-10 kappa``."""
    fine = np.linspace(-10 * gamma, 10 * gamma, points)
    coarse = np.linspace(-10 * kappa, 10 * kappa, points)
    return np.unique(np.concatenate([fine, coarse]))


def _tau_from_gap(lv: Superoperator, rho: np.ndarray, fast_rate: float) -> np.ndarray:
    gap = liouvillian_gap(lv, rho_ss=rho)
    gamma = gap.gamma_est
    if not gamma > 0:
        raise SolverError(f"non-positive gap estimate {gamma:.3g}")
    return default_tau_grid(gamma, fast_rate)


# -- quantum regression ------------------------------------------------------------------


def _trace_rows(ops_list: Sequence[np.ndarray]) -> np.ndarray:
    """Rows ``w_B`` with ``w_B @ vec(X) = Tr[B X]``."""
    return np.array([vec(np.asarray(b).T) for b in ops_list])


def propagated_traces(
    lv: Superoperator,
    seed: np.ndarray,
    observables: Sequence[np.ndarray],
    tau,
    space: Optional[HilbertSpace] = None,
) -> np.ndarray:
    """``Tr[B_k e^{L tau} seed]`` for every observable ``B_k`` (shape ``(k, len(tau))``).

    With ``space`` given, excitation-number conservation is exploited when the
    Liouvillian has it (no coherent drive).
    """
    rows = _trace_rows(observables)
    charges = None if space is None else ops.excitation_charges(space)
    return traces_over_time(lv, vec(seed), rows, tau, charges)


def two_time(
    lv: Superoperator,
    rho_t: np.ndarray,
    a_op: np.ndarray,
    b_op: np.ndarray,
    tau_grid: Sequence[float],
    c_op: Optional[np.ndarray] = None,
    labels: tuple[str, str] = ("A", "B"),
    t_anchor: float = STATIONARY,
    space: Optional[HilbertSpace] = None,
) -> CorrelatorResult:
    """``<A(t) B(t+tau)>`` or, with ``c_op``, ``<A(t) B(t+tau) C(t)>``."""
    tau = np.asarray(tau_grid, dtype=float)
    seed = rho_t @ a_op if c_op is None else c_op @ rho_t @ a_op
    vals = propagated_traces(lv, seed, [b_op], tau, space)[0]
    return CorrelatorResult(tau, vals, labels, t_anchor)


def _bare_parts(space: HilbertSpace, xi: complex):
    r, th = abs(xi), float(np.angle(xi))
    a = ops.annihilation(space)
    return a, math.cosh(r), math.sinh(r), th


def emission_correlator(
    lv: Superoperator,
    rho_ss: np.ndarray,
    space: HilbertSpace,
    tau: np.ndarray,
    mode: str = "squeezed",
    xi: complex = 0.0,
    delta_s: float = 0.0,
) -> tuple[np.ndarray, float, dict]:
    """Stationary ``<a^dag(0) a(tau)>`` for the squeezed or the bare mode, its ``tau = 0`` value and diagnostics."""
    a, c, s, th = _bare_parts(space, xi)
    ad = ops.dag(a)
    g_pm, g_pp = propagated_traces(lv, rho_ss @ ad, [a, ad], tau, space)  # <a^dag a(tau)>, <a^dag a^dag(tau)>
    if mode == "squeezed":
        return g_pm, float(g_pm[0].real), {}
    if mode != "bare":
        raise ValueError("mode must be 'bare' or 'squeezed'")
    g_mp, g_mm = propagated_traces(lv, rho_ss @ a, [ad, a], tau, space)  # <a a^dag(tau)>, <a a(tau)>
    rot = np.exp(2j * delta_s * tau)
    anomalous = max(float(np.max(np.abs(g_pp))), float(np.max(np.abs(g_mm))))
    normal = float(np.max(np.abs(g_pm)))
    if anomalous > ANOMALOUS_TOL * max(normal, 1e-300):
        warnings.warn(
            f"anomalous correlators not negligible ({anomalous:.2e} vs {normal:.2e}); phase is not diffused",
            RuntimeWarning,
            stacklevel=3,
        )
    g = (
        c**2 * g_pm
        + s**2 * rot * g_mp
        - c * s * np.exp(1j * th) * rot * g_pp
        - c * s * np.exp(-1j * th) * g_mm
    )
    return g, float(g[0].real), {"anomalous_ratio": anomalous / max(normal, 1e-300)}


def emission_spectrum(
    lv: Superoperator,
    rho_ss: np.ndarray,
    space: HilbertSpace,
    omega_grid: Optional[Sequence[float]] = None,
    mode: str = "squeezed",
    xi: complex = 0.0,
    delta_s: float = 0.0,
    tau_grid: Optional[Sequence[float]] = None,
    fast_rate: float = 1.0,
) -> SpectrumResult:
    """Normalised emission spectrum relative to the squeezed-mode frequency, with FWHM from a Lorentzian fit."""
    tau = _tau_from_gap(lv, rho_ss, fast_rate) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    g, n, diag = emission_correlator(lv, rho_ss, space, tau, mode, xi, delta_s)
    if n <= 1e-12:
        raise ValueError("emission spectrum undefined for an empty mode")
    if omega_grid is None:
        omega_grid = default_omega_grid(20.0 / tau[-1], fast_rate)  # tau_max = 20 / Gamma
    omega = np.asarray(omega_grid, dtype=float)
    values = fourier_one_sided(tau, g, omega).real / (math.pi * n)
    res = SpectrumResult(omega, values, "unit-area", meta={"mode": mode, "n": n, "tau_max": float(tau[-1]), **diag})
    _attach_width(res)
    return res


def squeezing_spectrum(
    lv: Superoperator,
    rho_t: np.ndarray,
    space: HilbertSpace,
    phi: float,
    omega_grid: Sequence[float],
    tau_grid: Sequence[float],
    xi: complex = 0.0,
    kappa: float = 1.0,
    t_anchor: float = 0.0,
    fit: bool = True,
) -> SpectrumResult:
    """Normal-ordered squeezing spectrum ``:S_phi(w):`` of the intracavity field anchored at ``rho_t``.

    ``2 kappa int_0^inf cos(w tau) [<a^dag(t+tau), a(t)> + e^{-2 i phi} <a(t+tau), a(t)> + c.c.] dtau``
    with ``<A, B> = <AB> - <A><B>``; ``xi != 0`` selects the bare mode.
    """
    tau = np.asarray(tau_grid, dtype=float)
    a = bare_mode_operator(space, xi) if xi else ops.annihilation(space)
    ad = ops.dag(a)
    mean_a = np.trace(a @ rho_t)
    c_pm, c_mm = propagated_traces(lv, a @ rho_t, [ad, a], tau, space)
    m_ad, m_a = propagated_traces(lv, rho_t, [ad, a], tau, space)
    cov_pm = c_pm - m_ad * mean_a
    cov_mm = c_mm - m_a * mean_a
    f = 2.0 * np.real(cov_pm + np.exp(-2j * phi) * cov_mm)
    omega = np.asarray(omega_grid, dtype=float)
    values = 2.0 * kappa * fourier_one_sided(tau, f, omega).real
    res = SpectrumResult(
        omega,
        values,
        "normal-ordered",
        meta={"phi": phi, "t_anchor": t_anchor, "normal_ordered_variance": float(f[0]), "tau_max": float(tau[-1])},
    )
    if fit:
        _attach_width(res)
    return res


def normal_ordered_from_spectrum(spec: SpectrumResult, kappa: float = 1.0) -> float:
    """``(1/(2 pi kappa)) int :S(w): dw`` over the supplied grid."""
    return spec.integral() / (2.0 * math.pi * kappa)


# -- line shapes -------------------------------------------------------------------------


def lorentzian(w, amp, center, width):
    return amp * (0.5 * width) ** 2 / ((w - center) ** 2 + (0.5 * width) ** 2)


def half_max_width(omega: np.ndarray, values: np.ndarray) -> tuple[float, float]:
    """Model-free FWHM and peak position by linear interpolation of the half-maximum crossings."""
    i = int(np.argmax(values))
    peak = values[i]
    if not peak > 0:
        return math.nan, float(omega[i])
    half = 0.5 * peak
    left = i
    while left > 0 and values[left] > half:
        left -= 1
    right = i
    while right < values.size - 1 and values[right] > half:
        right += 1
    if values[left] > half or values[right] > half:
        return math.nan, float(omega[i])

    def cross(j0, j1):
        v0, v1 = values[j0], values[j1]
        return omega[j0] + (half - v0) * (omega[j1] - omega[j0]) / (v1 - v0)

    return float(cross(right - 1, right) - cross(left, left + 1)), float(omega[i])


def fit_lorentzian(omega: np.ndarray, values: np.ndarray, window_db: float = 20.0):
    """Log-residual least-squares Lorentzian fit over the top ``window_db`` of the peak.

    Returns ``(amp, center, fwhm, ok)``.
    """
    width0, center0 = half_max_width(omega, values)
    peak = float(np.max(values))
    if not peak > 0:
        return math.nan, math.nan, math.nan, False
    mask = values > peak * 10 ** (-window_db / 10)
    w, v = omega[mask], values[mask]
    if w.size < 4 or not math.isfinite(width0):
        return peak, center0, width0, False

    def resid_model(wv, amp, center, width):
        return np.log(lorentzian(wv, abs(amp), center, abs(width)))

    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OptimizeWarning)
            popt, _ = curve_fit(resid_model, w, np.log(v), p0=(peak, center0, width0), maxfev=20000)
    except (RuntimeError, ValueError):
        return peak, center0, width0, False
    amp, center, width = popt
    return float(abs(amp)), float(center), float(abs(width)), True


def _attach_width(res: SpectrumResult) -> None:
    res.fwhm_interp, res.center = half_max_width(res.omega, res.values)
    amp, center, width, ok = fit_lorentzian(res.omega, res.values)
    res.fit_ok = ok
    if ok:
        res.fwhm, res.center = width, center
    else:
        res.fwhm = res.fwhm_interp
        res.meta["fit_failed"] = True


# -- intensity correlations --------------------------------------------------------------


def g2(
    lv: Superoperator,
    rho_ss: np.ndarray,
    space: HilbertSpace,
    tau_grid: Sequence[float],
    mode: str = "squeezed",
    xi: complex = 0.0,
    delta_s: float = 0.0,
) -> CorrelatorResult:
    """Normalised stationary ``g2(tau) = <a^dag(0) a^dag(tau) a(tau) a(0)> / <a^dag a>^2``."""
    tau = np.asarray(tau_grid, dtype=float)
    a = ops.annihilation(space)
    ad = ops.dag(a)
    if mode == "squeezed":
        big_a = a
        observables, weights = [ad @ a], [np.ones_like(tau)]
    elif mode == "bare":
        r, th = abs(xi), float(np.angle(xi))
        c, s = math.cosh(r), math.sinh(r)
        big_a = bare_mode_operator(space, xi)
        rot = np.exp(2j * delta_s * tau)
        observables = [ad @ a, a @ ad, ad @ ad, a @ a]
        weights = [
            np.full(tau.shape, c**2, dtype=complex),
            np.full(tau.shape, s**2, dtype=complex),
            -c * s * np.exp(1j * th) * rot,
            -c * s * np.exp(-1j * th) * np.conj(rot),
        ]
    else:
        raise ValueError("mode must be 'bare' or 'squeezed'")
    n = float(np.real(np.trace(ops.dag(big_a) @ big_a @ rho_ss)))
    if n <= 1e-8:
        raise ValueError("g2 undefined: vanishing photon number")
    seed = big_a @ rho_ss @ ops.dag(big_a)
    traces = propagated_traces(lv, seed, observables, tau, space)
    num = sum(w * t for w, t in zip(weights, traces))
    values = np.real(num) / n**2
    return CorrelatorResult(tau, values.astype(complex), ("I", "I"), STATIONARY, {"mode": mode, "n": n})


def decay_time(result: CorrelatorResult, baseline: float = 1.0) -> float:
    """First delay at which ``|g(tau) - baseline|`` falls below ``1/e`` of its zero-delay value."""
    dev = np.abs(result.values.real - baseline)
    target = dev[0] / math.e
    idx = np.nonzero(dev < target)[0]
    if idx.size == 0:
        return math.inf
    j = int(idx[0])
    if j == 0:
        return 0.0
    t0, t1 = result.tau[j - 1], result.tau[j]
    d0, d1 = dev[j - 1], dev[j]
    return float(t0 + (d0 - target) * (t1 - t0) / (d0 - d1))

