"""Scenario runner: ``squeezed-laser run <config>`` and ``squeezed-laser validate <config>``.

A scenario is a YAML file with the keys ``name``, ``command``, ``params``,
``sweep`` (``parameter`` and ``values``), ``output`` and ``options``; see
``configs/SCHEMA.md``. Every command writes CSV files whose first lines are a
``#``-prefixed JSON header.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure,
4 Fock-space truncation failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np
import yaml
from scipy.linalg import LinAlgError
from scipy.sparse.linalg import ArpackNoConvergence

from . import __version__
from . import correlators as co
from . import meanfield as mf
from . import metrology as me
from . import operators as ops
from . import states as st
from .io import write_csv
from .liouvillian import SolverError, evolve, liouvillian_gap, steady_state
from .model import (
    RWA_WARN_RATIO,
    Crystal,
    ModelParams,
    ParametricInstabilityError,
    bath_calibration,
    bath_calibration_first_order,
    bath_moments,
    derived,
    lasing_liouvillian,
    pump_power,
    rwa_ratio,
    transformed_bath_moments,
)

EXIT_OK, EXIT_SCHEMA, EXIT_SOLVER, EXIT_TRUNCATION = 0, 2, 3, 4

MODEL_KEYS = tuple(f.name for f in fields(ModelParams))
LASING_KEYS = ("n_q", "c_s", "r", "p")
NULLABLE_KEYS = ("delta_sigma", "thermal_override")
# keys that only make sense together with the lasing shortcut's own choices
LASING_CONFLICTS = ("omega_p", "g", "pump", "gamma", "n_atoms")

PROFILES = {
    "fast": {"tau_points": 401, "omega_points": 201, "phase_tol": 1e-4, "wigner_points": 101, "cfi_rtol": 1e-3},
    "strict": {"tau_points": 801, "omega_points": 401, "phase_tol": 1e-6, "wigner_points": 201, "cfi_rtol": 1e-4},
}


class ConfigError(ValueError):
    """The scenario file does not match the schema."""


@dataclass(frozen=True)
class CommandSpec:
    runner: Callable
    extra_params: tuple = ()
    options: tuple = ()
    needs_sweep: bool = False
    model: bool = True  # builds a lasing model from ``params``


@dataclass
class Sweep:
    parameter: str
    values: list


@dataclass
class Scenario:
    name: str
    command: str
    params: dict = field(default_factory=dict)
    sweep: Optional[Sweep] = None
    output: str = ""
    options: dict = field(default_factory=dict)

    def points(self) -> list[dict]:
        """Parameter dictionaries of every sweep point (a single point without a sweep)."""
        if self.sweep is None:
            return [dict(self.params)]
        return [{**self.params, self.sweep.parameter: v} for v in self.sweep.values]


@dataclass(frozen=True)
class RunContext:
    out_dir: Path
    threads: int
    profile: dict
    profile_name: str


# -- configuration -----------------------------------------------------------------------


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _check_finite(value: Any, what: str) -> None:
    if not _is_number(value) or not math.isfinite(value):
        raise ConfigError(f"{what} must be a finite number, got {value!r}")


def parse_scenario(data: Any) -> Scenario:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    unknown = set(data) - {"name", "command", "params", "sweep", "output", "options"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    command = data.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"command must be one of {sorted(COMMANDS)}, got {command!r}")
    spec = COMMANDS[command]
    name = str(data.get("name") or command)

    params = data.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError("params must be a mapping")
    allowed = set(spec.extra_params) | (set(MODEL_KEYS) | set(LASING_KEYS) if spec.model else set())
    for key, value in params.items():
        if key not in allowed:
            raise ConfigError(f"unknown parameter {key!r} for command {command}")
        if value is None and key in NULLABLE_KEYS:
            continue
        _check_finite(value, f"params.{key}")

    sweep = None
    if data.get("sweep") is not None:
        raw = data["sweep"]
        if not isinstance(raw, dict) or set(raw) != {"parameter", "values"}:
            raise ConfigError("sweep must be a mapping with exactly 'parameter' and 'values'")
        if raw["parameter"] not in allowed:
            raise ConfigError(f"sweep parameter {raw['parameter']!r} is not a parameter of {command}")
        values = raw["values"]
        if not isinstance(values, list) or not values:
            raise ConfigError("sweep.values must be a non-empty list")
        for v in values:
            _check_finite(v, "sweep value")
        sweep = Sweep(raw["parameter"], [float(v) for v in values])
    elif spec.needs_sweep:
        raise ConfigError(f"command {command} requires a sweep block")

    options = data.get("options") or {}
    if not isinstance(options, dict):
        raise ConfigError("options must be a mapping")
    bad = set(options) - set(spec.options)
    if bad:
        raise ConfigError(f"unknown options for {command}: {sorted(bad)}")

    output = data.get("output") or f"{name}.csv"
    if not isinstance(output, str):
        raise ConfigError("output must be a file name")
    scenario = Scenario(name, command, dict(params), sweep, output, dict(options))
    if spec.model:
        for point in scenario.points():
            _lasing_mode_check(point)
    return scenario


def load_scenario(path: os.PathLike | str) -> Scenario:
    try:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_scenario(data)


def _lasing_mode_check(point: dict) -> None:
    if any(k in point for k in LASING_KEYS):
        if "n_q" not in point:
            raise ConfigError("the lasing shortcut (n_q, c_s, r, p) needs n_q")
        if ("c_s" in point) == ("p" in point):
            raise ConfigError("give exactly one of c_s and p")
        clash = [k for k in LASING_CONFLICTS if k in point]
        if clash:
            raise ConfigError(f"{clash} cannot be combined with the lasing shortcut")


def build_params(point: dict) -> ModelParams:
    """ModelParams from a parameter block; ``n_q`` switches to the one-atom-laser shortcut.

    In the shortcut ``p`` is the bare pump parameter, ``C_s = p cosh^2 r``.
    """
    values = {k: v for k, v in point.items() if k in MODEL_KEYS}
    if "n_q" in point:
        r = float(point.get("r", 0.0))
        c_s = point["c_s"] if "c_s" in point else point["p"] * math.cosh(r) ** 2
        return ModelParams.from_lasing(point["n_q"], c_s, r, **values)
    if "n_atoms" in values:
        values["n_atoms"] = int(values["n_atoms"])
    return ModelParams(**values)


# -- shared numerics ---------------------------------------------------------------------


def solve_steady(params: ModelParams, fock_cutoff: Optional[int] = None, max_cutoff: int = 240):
    """Steady state of the lasing model with the Fock cutoff grown until the tail is negligible."""
    pred = mf.predicted_observables(params)
    cutoff = fock_cutoff or ops.suggest_cutoff(max(pred.n_s, pred.n_d, 1.0))
    while True:
        space = ops.HilbertSpace(int(cutoff), 2)
        lv = lasing_liouvillian(params, space)
        rho = steady_state(lv)
        try:
            st.check_tail(st.photon_reduced(rho, space), "steady state")
            return space, lv, rho
        except ops.TruncationError:
            if fock_cutoff is not None or cutoff >= max_cutoff:
                raise
            cutoff = min(max_cutoff, int(math.ceil(1.5 * cutoff)))


def bare_state(rho_photon: np.ndarray, xi: complex, max_cutoff: int = 600) -> np.ndarray:
    """Bare-basis photon state ``S rho S^dag`` on a cutoff grown until the tail is negligible."""
    if not xi:
        return rho_photon
    n_bare = mf.bare_population(st.mean_photon_number(rho_photon), abs(xi))
    n_fock = max(rho_photon.shape[0], ops.suggest_cutoff(n_bare) + 1)
    while True:
        rho = st.squeeze_state(rho_photon, xi, n_fock)
        try:
            st.check_tail(rho, "bare-basis state")
            return rho
        except ops.TruncationError:
            if n_fock > max_cutoff:
                raise
            n_fock = int(math.ceil(1.5 * n_fock))


def _xi(params: ModelParams) -> complex:
    return derived(params).r * np.exp(1j * params.theta)


def _map(func: Callable, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ProcessPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))


def _meta(scenario: Scenario, ctx: RunContext, **extra) -> dict:
    return {
        "scenario": scenario.name,
        "command": scenario.command,
        "params": scenario.params,
        "sweep": None if scenario.sweep is None else {"parameter": scenario.sweep.parameter, "values": scenario.sweep.values},
        "options": scenario.options,
        "tolerance_profile": ctx.profile_name,
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        **extra,
    }


def _sibling(path: Path, suffix: str) -> Path:
    return path.with_name(f"{path.stem}_{suffix}{path.suffix or '.csv'}")


# -- commands ----------------------------------------------------------------------------


def _phase_point(args):
    point, cutoff = args
    params = build_params(point)
    d = derived(params)
    space, _, rho = solve_steady(params, cutoff)
    n_s = st.mean_photon_number(rho, space)
    n_bare = st.bare_photon_number(rho, _xi(params), space)
    n_mf = mf.meanfield_population(d.p_s, n_q=d.n_q)
    return [abs(d.r), point.get("p", d.c_bare), d.p_s, n_s, n_mf, n_bare, mf.bare_population(n_mf, abs(d.r)), space.fock_cutoff]


def run_phase_diagram(scenario: Scenario, ctx: RunContext) -> list[Path]:
    r_values = scenario.options.get("r_values", [scenario.params.get("r", 0.0)])
    items = [({**p, "r": float(r)}, scenario.options.get("fock_cutoff")) for r in r_values for p in scenario.points()]
    rows = _map(_phase_point, items, ctx.threads)
    cols = ["r", "p", "p_s", "n_s_exact", "n_s_meanfield", "n_bare_exact", "n_bare_meanfield", "fock_cutoff"]
    path = ctx.out_dir / scenario.output
    return [write_csv(path, cols, rows, _meta(scenario, ctx, threshold_p={str(r): mf.threshold_bare_pump(float(r)) for r in r_values}))]


def run_wigner(scenario: Scenario, ctx: RunContext) -> list[Path]:
    opts = scenario.options
    point = scenario.params
    source = opts.get("source", "steady")
    basis = opts.get("basis", "bare")
    if basis not in ("bare", "squeezed") or source not in ("steady", "phase_diffused"):
        raise ConfigError("options.basis must be bare|squeezed and options.source steady|phase_diffused")
    params = build_params({k: v for k, v in point.items() if k != "n_s"})
    xi = _xi(params)
    if source == "steady":
        space, _, rho = solve_steady(params, opts.get("fock_cutoff"))
        rho_ph = st.photon_reduced(rho, space)
    else:
        pred = mf.predicted_observables(params)
        n_s = float(point.get("n_s", pred.n_s))
        space = ops.HilbertSpace(opts.get("fock_cutoff") or ops.suggest_cutoff(n_s))
        rho_ph = st.phase_averaged_coherent(space.n_fock, n_s, 64) if n_s else st.ket_to_dm(st.coherent_ket(space.n_fock, 0))
    if basis == "bare":
        rho_ph = bare_state(rho_ph, xi)
    n_mean = st.mean_photon_number(rho_ph)
    grid = np.linspace(-1, 1, opts.get("points", ctx.profile["wigner_points"])) * opts.get("extent", 6 + 2 * math.sqrt(n_mean))
    w = st.wigner(rho_ph, grid, grid)
    w.meta.update(_meta(scenario, ctx, basis=basis, source=source, n_mean=n_mean, normalization=w.normalization()))
    path = ctx.out_dir / scenario.output
    w.to_csv(path)
    out = [path]
    if opts.get("binary", False):
        out.append(path.with_suffix(".bin"))
        w.to_binary(out[-1])
    return out


def _symmetry_point(args):
    point, cutoff = args
    params = build_params(point)
    space, _, rho = solve_steady(params, cutoff)
    xi = _xi(params)
    a = ops.annihilation(space)
    alpha = complex(np.trace(a @ rho))
    n_s = st.mean_photon_number(rho, space)
    n_bare = st.bare_photon_number(rho, xi, space)
    # symmetry-broken reference: coherent state with the full population at the selected phase
    coh = st.ket_to_dm(np.kron(st.coherent_ket(space.n_fock, math.sqrt(n_s) * np.exp(1j * np.angle(alpha))), [1.0, 0.0]))
    n_pred = st.bare_photon_number(coh, xi, space)
    pd = st.photon_distribution(bare_state(st.photon_reduced(rho, space), xi))
    n_from_pn = float(np.dot(np.arange(pd.size), pd))
    return [params.drive_phase, params.drive_amp, n_s, n_bare, n_from_pn, alpha.real, alpha.imag, n_pred,
            mf.drive_population(params.drive_amp, params.kappa)]


def run_symmetry_breaking(scenario: Scenario, ctx: RunContext) -> list[Path]:
    items = [(p, scenario.options.get("fock_cutoff")) for p in scenario.points()]
    rows = _map(_symmetry_point, items, ctx.threads)
    cols = ["drive_phase", "drive_amp", "n_s", "n_bare", "n_bare_from_distribution", "re_a_s", "im_a_s",
            "n_bare_coherent_prediction", "n_d_meanfield"]
    return [write_csv(ctx.out_dir / scenario.output, cols, rows, _meta(scenario, ctx))]


def _spectrum_point(args):
    point, cutoff, mode, profile = args
    params = build_params(point)
    d = derived(params)
    space, lv, rho = solve_steady(params, cutoff)
    gap = liouvillian_gap(lv, rho_ss=rho)
    tau = co.default_tau_grid(gap.gamma_est, points=profile["tau_points"])
    omega = co.default_omega_grid(gap.gamma_est, params.kappa, profile["omega_points"])
    spec = co.emission_spectrum(lv, rho, space, omega, mode=mode, xi=_xi(params), tau_grid=tau)
    n_s = st.mean_photon_number(rho, space)
    n_mf = mf.meanfield_population(d.p_s, n_q=d.n_q)
    gamma_mf = mf.linewidth(n_mf, d.c_s, params.kappa)
    summary = [d.n_q, d.c_s, abs(d.r), n_s, n_mf, spec.fwhm, spec.fwhm_interp, gap.gamma_est,
               math.nan if gamma_mf is None else gamma_mf, int(spec.fit_ok)]
    return summary, spec.omega, spec.values


def run_spectrum_sweep(scenario: Scenario, ctx: RunContext) -> list[Path]:
    mode = scenario.options.get("mode", "bare")
    items = [(p, scenario.options.get("fock_cutoff"), mode, ctx.profile) for p in scenario.points()]
    results = _map(_spectrum_point, items, ctx.threads)
    cols = ["n_q", "c_s", "r", "n_s_exact", "n_s_meanfield", "fwhm_fit", "fwhm_interp", "gamma_gap",
            "gamma_meanfield", "fit_ok"]
    path = ctx.out_dir / scenario.output
    meta = _meta(scenario, ctx, mode=mode, frequency_reference="squeezed-mode frequency")
    out = [write_csv(path, cols, [r[0] for r in results], meta)]
    key = scenario.sweep.parameter if scenario.sweep else "point"
    spec_rows = []
    for i, (summary, omega, values) in enumerate(results):
        tag = scenario.sweep.values[i] if scenario.sweep else i
        spec_rows.extend([tag, w, s] for w, s in zip(omega, values))
    out.append(write_csv(_sibling(path, "spectra"), [key, "omega", "S"], spec_rows, meta))
    return out


def run_squeezing_dynamics(scenario: Scenario, ctx: RunContext) -> list[Path]:
    opts = scenario.options
    params = build_params(scenario.params)
    d = derived(params)
    xi = _xi(params)
    space, lv, rho_ss = solve_steady(params, opts.get("fock_cutoff"))
    n_s = float(opts.get("n_s", mf.meanfield_population(d.p_s, n_q=d.n_q)))
    phase = float(opts.get("initial_phase", params.theta / 2))
    atom = np.diag(np.diag(st.atom_reduced(rho_ss, space)))
    ket = st.coherent_ket(space.n_fock, math.sqrt(n_s) * np.exp(1j * phase))
    rho0 = np.kron(np.outer(ket, ket.conj()), atom)
    rho0 /= np.trace(rho0).real
    st.check_tail(st.photon_reduced(rho0, space), "initial symmetry-broken state")

    times = sorted(float(t) for t in opts.get("times", list(np.linspace(0.0, 10.0, 21))))
    phi_sq, phi_anti = params.theta / 2, (params.theta + math.pi) / 2
    states = evolve(lv, rho0, times)
    rows = []
    for t, rho in zip(times, states):
        rb = bare_state(st.photon_reduced(rho, space), xi)
        rows.append([t, st.mean_photon_number(rho, space), st.normal_ordered_variance(rb, phi_sq),
                     st.normal_ordered_variance(rb, phi_anti)])
    path = ctx.out_dir / scenario.output
    meta = _meta(scenario, ctx, initial_n_s=n_s, initial_phase=phase, phi_squeezed=phi_sq, phi_antisqueezed=phi_anti)
    out = [write_csv(path, ["t", "n_s", "normal_ordered_var_squeezed", "normal_ordered_var_antisqueezed"], rows, meta)]

    spec_times = [float(t) for t in opts.get("spectrum_times", [0.0])]
    if spec_times:
        gap = liouvillian_gap(lv, rho_ss=rho_ss)
        tau = co.default_tau_grid(gap.gamma_est, points=ctx.profile["tau_points"])
        omega = co.default_omega_grid(gap.gamma_est, params.kappa, ctx.profile["omega_points"])
        spec_rows = []
        anchors = evolve(lv, rho0, sorted(set([0.0] + spec_times)))
        lookup = dict(zip(sorted(set([0.0] + spec_times)), anchors))
        for t in spec_times:
            s1 = co.squeezing_spectrum(lv, lookup[t], space, phi_sq, omega, tau, xi=xi, kappa=params.kappa, t_anchor=t, fit=False)
            s2 = co.squeezing_spectrum(lv, lookup[t], space, phi_anti, omega, tau, xi=xi, kappa=params.kappa, t_anchor=t, fit=False)
            spec_rows.extend([t, w, a, b] for w, a, b in zip(omega, s1.values, s2.values))
        out.append(write_csv(_sibling(path, "spectra"), ["t", "omega", "S_squeezed", "S_antisqueezed"], spec_rows, meta))
    return out


def run_g2(scenario: Scenario, ctx: RunContext) -> list[Path]:
    opts = scenario.options
    params = build_params(scenario.params)
    d = derived(params)
    space, lv, rho = solve_steady(params, opts.get("fock_cutoff"))
    if "tau" in opts:
        tau = np.asarray(sorted(float(t) for t in opts["tau"]))
    else:
        tau = co.default_tau_grid(liouvillian_gap(lv, rho_ss=rho).gamma_est, points=ctx.profile["tau_points"])
    bare = co.g2(lv, rho, space, tau, mode="bare", xi=_xi(params))
    sq = co.g2(lv, rho, space, tau, mode="squeezed")
    thermal = 1.0 + np.exp(-params.kappa * tau)
    g2_mf = mf.g2_deep_lasing(abs(d.r))
    rows = [[t, b, s, th, g2_mf] for t, b, s, th in zip(tau, bare.values.real, sq.values.real, thermal)]
    meta = _meta(scenario, ctx, decay_time_bare=co.decay_time(bare), decay_time_thermal=1.0 / params.kappa)
    cols = ["tau", "g2_bare", "g2_squeezed", "g2_thermal_reference", "g2_deep_lasing_formula"]
    return [write_csv(ctx.out_dir / scenario.output, cols, rows, meta)]


def _fisher_point(args):
    n_s, r, cutoff = args
    return me.fisher_point(n_s, r, cutoff)


def run_fisher(scenario: Scenario, ctx: RunContext) -> list[Path]:
    n_s = float(scenario.params.get("n_s", 4.0))
    items = [(n_s, float(p.get("r", 0.0)), scenario.options.get("fock_cutoff")) for p in scenario.points()]
    results = _map(_fisher_point, items, ctx.threads)
    meta = {}
    if len(results) >= 4:
        for key, attr in (("beta_q", "f_q"), ("beta_x", "f_classical")):
            try:
                meta[key], meta[key + "_residual"] = me.heisenberg_fit([(x.n_mean, getattr(x, attr)) for x in results], n_s)
            except ValueError as exc:
                meta[key] = f"unavailable: {exc}"
    rows = []
    for x in results:
        model = (x.n_mean**2 - n_s**2) / n_s
        rows.append([x.params["r"], n_s, x.n_mean, x.f_q, x.f_classical, model / 2.0, model / 5.0, x.params["theta_opt"]])
    cols = ["r", "n_s", "n", "F_Q", "F_X", "F_Q_beta2", "F_X_beta5", "theta_opt"]
    return [write_csv(ctx.out_dir / scenario.output, cols, rows, _meta(scenario, ctx, **meta))]


def run_bath_calibration(scenario: Scenario, ctx: RunContext) -> list[Path]:
    r_values = scenario.options.get("r_values", list(np.linspace(0.0, 1.5, 31)))
    rows = []
    for point in scenario.points():
        eta = float(point.get("eta", 0.0))
        theta = float(point.get("theta", 0.0))
        for r in r_values:
            cal = bath_calibration(float(r), eta, theta)
            n, m = bath_moments(cal.r_e, cal.theta_e)
            _, m_s = transformed_bath_moments(n, m, float(r), theta, eta)
            rows.append([eta, r, cal.n_s, cal.r_e - r, bath_calibration_first_order(float(r), eta) - r, abs(m_s)])
    cols = ["eta", "r", "N_s", "r_e_minus_r", "r_e_minus_r_first_order", "abs_M_s"]
    return [write_csv(ctx.out_dir / scenario.output, cols, rows, _meta(scenario, ctx))]


DEFAULT_FEASIBILITY = [
    {"label": "narrow cavity", "kappa_hz": 160e3, "transmission": 1.3e-4},
    {"label": "broad cavity", "kappa_hz": 2e6, "transmission": 1e-2},
]
FEASIBILITY_DEFAULTS = {
    "omega_p_hz": 10e6,
    "waist_radius_m": 30e-6,
    "omega_c_hz": 435e12,
    "n_0": 1.8,
    "length_m": 0.5e-3,
    "chi_m_per_v": 14e-12,
}


def run_feasibility(scenario: Scenario, ctx: RunContext) -> list[Path]:
    rows = []
    for i, raw in enumerate(scenario.options.get("scenarios", DEFAULT_FEASIBILITY)):
        s = {**FEASIBILITY_DEFAULTS, **raw}
        crystal = Crystal(s["n_0"], s["length_m"], s["chi_m_per_v"])
        area = math.pi * s["waist_radius_m"] ** 2
        power = pump_power(s["omega_p_hz"] / s["kappa_hz"], area, crystal, 2 * math.pi * s["omega_c_hz"],
                           s["transmission"], s["transmission"])
        rows.append([i, s["kappa_hz"], s["transmission"], s["omega_p_hz"], s["waist_radius_m"], power])
    cols = ["scenario", "kappa_over_2pi_hz", "transmission", "omega_p_over_2pi_hz", "waist_radius_m", "power_w"]
    meta = _meta(scenario, ctx, labels=[s.get("label", "") for s in scenario.options.get("scenarios", DEFAULT_FEASIBILITY)])
    return [write_csv(ctx.out_dir / scenario.output, cols, rows, meta)]


COMMANDS: dict[str, CommandSpec] = {
    "phase-diagram": CommandSpec(run_phase_diagram, options=("r_values", "fock_cutoff"), needs_sweep=True),
    "wigner": CommandSpec(run_wigner, extra_params=("n_s",),
                          options=("source", "basis", "points", "extent", "binary", "fock_cutoff")),
    "symmetry-breaking": CommandSpec(run_symmetry_breaking, options=("fock_cutoff",), needs_sweep=True),
    "spectrum-sweep": CommandSpec(run_spectrum_sweep, options=("mode", "fock_cutoff"), needs_sweep=True),
    "squeezing-dynamics": CommandSpec(run_squeezing_dynamics,
                                      options=("times", "spectrum_times", "n_s", "initial_phase", "fock_cutoff")),
    "g2": CommandSpec(run_g2, options=("tau", "fock_cutoff")),
    "fisher": CommandSpec(run_fisher, extra_params=("n_s", "r"), options=("fock_cutoff",), needs_sweep=True, model=False),
    "bath-calibration": CommandSpec(run_bath_calibration, extra_params=("eta", "theta"), options=("r_values",),
                                    model=False),
    "feasibility": CommandSpec(run_feasibility, options=("scenarios",), model=False),
}


# -- validation --------------------------------------------------------------------------


def validate_report(path: os.PathLike | str) -> tuple[list[str], bool]:
    """Human-readable report lines and whether the config is free of violations."""
    try:
        scenario = load_scenario(path)
    except ConfigError as exc:
        return [f"schema violation: {exc}"], False
    lines, ok = [], True
    spec = COMMANDS[scenario.command]
    if not spec.model:
        if scenario.command == "fisher":
            n_s = float(scenario.params.get("n_s", 4.0))
            r_max = max(float(p.get("r", 0.0)) for p in scenario.points())
            cutoff = 2 * ops.suggest_cutoff(mf.bare_population(n_s, r_max))
            lines.append(f"OK: estimated cutoff {cutoff}, Hilbert dimension {cutoff + 1} (photon only)")
        else:
            lines.append("OK: closed-form command, no solver")
        return lines, ok
    cutoff = 0
    for point in scenario.points():
        try:
            params = build_params(point)
            derived(params)
        except ParametricInstabilityError as exc:
            ok = False
            lines.append(f"{exc} at {point}")
            continue
        except (TypeError, ValueError) as exc:
            ok = False
            lines.append(f"invalid parameters {point}: {exc}")
            continue
        ratio = rwa_ratio(params)
        if ratio > RWA_WARN_RATIO:
            lines.append(f"warning: RWA ratio sqrt(N) g sinh r / Delta_s = {ratio:.3g} exceeds {RWA_WARN_RATIO}")
        pred = mf.predicted_observables(params)
        cutoff = max(cutoff, ops.suggest_cutoff(max(pred.n_s, pred.n_d, 1.0)))
    if ok:
        cutoff = int(scenario.options.get("fock_cutoff", cutoff))
        dim = 2 * (cutoff + 1)
        lines.append(f"OK: estimated cutoff {cutoff}, Hilbert dimension {dim}, superoperator dimension {dim * dim}")
    return lines, ok


# -- entry point -------------------------------------------------------------------------


def run(path: os.PathLike | str, out_dir: os.PathLike | str = ".", threads: Optional[int] = None,
        profile: str = "strict") -> list[Path]:
    scenario = load_scenario(path)
    if profile not in PROFILES:
        raise ConfigError(f"unknown tolerance profile {profile!r}")
    ctx = RunContext(Path(out_dir), threads or os.cpu_count() or 1, PROFILES[profile], profile)
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    return COMMANDS[scenario.command].runner(scenario, ctx)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squeezed-laser", description=__doc__.splitlines()[0])
    parser.add_argument("--threads", type=int, default=None, help="worker processes for sweeps (default: all cores)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--tolerance-profile", choices=sorted(PROFILES), default="strict")
    sub = parser.add_subparsers(dest="action", required=True)
    sub.add_parser("run", help="run a scenario").add_argument("config")
    sub.add_parser("validate", help="check a scenario without solving").add_argument("config")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.action == "validate":
        lines, ok = validate_report(args.config)
        print("\n".join(lines))
        return EXIT_OK if ok else EXIT_SCHEMA
    try:
        paths = run(args.config, args.out, args.threads, args.tolerance_profile)
    except (ConfigError, ParametricInstabilityError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except ops.TruncationError as exc:
        print(f"truncation failure: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except (SolverError, LinAlgError, ArpackNoConvergence) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
