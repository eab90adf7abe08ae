"""Scenario runner: config ingestion, orchestration, and data emission.

Configs are flat INI documents (``key = value`` under ``[section]``
headers) with arrays written as bracketed row lists.  Every scenario
validates its keys strictly (unknown keys are rejected), fills documented
defaults, and echoes the fully-resolved configuration both into the report
and into ``config_resolved.ini`` so any run can be reproduced exactly.

Emitted files use shortest round-trip decimal formatting, which makes CSV
output byte-identical across runs of the same resolved config.  Plot
scripts are plain gnuplot text referencing the CSVs; nothing here ever
invokes a renderer.

Exit codes: 0 success, 2 config error, 3 scenario error (propagated from
the library), 4 certified-claim violation (an admissible certificate whose
verification checks failed on the simulated run).
"""

from __future__ import annotations

import argparse
import ast
import configparser
import importlib
import io
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import averaging, hybrid, odesim
from .fields import (
    GeneralField,
    NotPositiveDefiniteError,
    helmholtz_split,
    validate_assumption1,
)

__all__ = ["ConfigError", "ScenarioError", "ScenarioConfig", "parse_config",
           "run", "main", "SCENARIOS"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCENARIO = 3
EXIT_CLAIM = 4


class ConfigError(Exception):
    """Malformed, unknown, or inconsistent configuration input."""


class ScenarioError(Exception):
    """A scenario failed while executing library operations."""


# ------------------------------------------------------------------ value parsing

_REQUIRED = object()


def _parse_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {raw!r}") from exc


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {raw!r}") from exc


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_vector(raw: str) -> np.ndarray:
    try:
        value = ast.literal_eval(raw)
        arr = np.asarray(value, dtype=float)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"expected a bracketed number list, got {raw!r}") from exc
    if arr.ndim != 1 or arr.size == 0:
        raise ConfigError(f"expected a flat vector, got {raw!r}")
    return arr


def _parse_matrix(raw: str) -> np.ndarray:
    try:
        value = ast.literal_eval(raw)
        arr = np.asarray(value, dtype=float)
    except (ValueError, SyntaxError) as exc:
        raise ConfigError(f"expected bracketed rows, got {raw!r}") from exc
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConfigError(f"expected a square row-major matrix, got {raw!r}")
    return arr


def _parse_str(raw: str) -> str:
    return raw.strip()


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], object]
    default: object = _REQUIRED


def _fmt_scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.ndarray):
        if v.ndim == 1:
            return "[" + ", ".join(repr(float(x)) for x in v) + "]"
        rows = ("[" + ", ".join(repr(float(x)) for x in row) + "]" for row in v)
        return "[" + ", ".join(rows) + "]"
    return str(v)


# ------------------------------------------------------------------ schemas

_DEMO_Q = "[[100.0, 5.0], [-5.0, 100.0]]"

_OUTPUT = {
    "out_dir": _Key(_parse_str, "out"),
    "seed": _Key(_parse_int, 0),
}

SCHEMAS: dict[str, dict[str, dict[str, _Key]]] = {
    "decompose": {
        "field": {"Q": _Key(_parse_matrix)},
        "output": _OUTPUT,
    },
    "instability-test": {
        "field": {"Q": _Key(_parse_matrix, _parse_matrix(_DEMO_Q))},
        "averaging": {
            "nodes": _Key(_parse_int, 4096),
            "max_denominator": _Key(_parse_int, 64),
            "degeneracy_tol": _Key(_parse_float, 1e-9),
        },
        "output": _OUTPUT,
    },
    "simulate-ode": {
        "field": {"Q": _Key(_parse_matrix, None), "general": _Key(_parse_str, None)},
        "initial": {"x0": _Key(_parse_vector), "v0": _Key(_parse_vector)},
        "clock": {"T0": _Key(_parse_float, 0.1), "eta": _Key(_parse_float, 1.0)},
        "sim": {"t_end": _Key(_parse_float, 10.0), "step": _Key(_parse_float, 1e-3)},
        "output": _OUTPUT,
    },
    "simulate-pullback": {
        "field": {"Q": _Key(_parse_matrix)},
        "initial": {"z0": _Key(_parse_vector)},
        "clock": {"T0": _Key(_parse_float, 0.1)},
        "sim": {"s_end": _Key(_parse_float, 10.0), "step": _Key(_parse_float, 1e-3)},
        "output": _OUTPUT,
    },
    "simulate-average": {
        "field": {"Q": _Key(_parse_matrix)},
        "initial": {"zeta0": _Key(_parse_vector)},
        "clock": {"T0": _Key(_parse_float, 0.1)},
        "sim": {"s_end": _Key(_parse_float, 10.0), "step": _Key(_parse_float, 1e-3)},
        "output": _OUTPUT,
    },
    "simulate-hybrid": {
        "field": {"Q": _Key(_parse_matrix, None), "general": _Key(_parse_str, None)},
        "restart": {
            "eta": _Key(_parse_float),
            "T0": _Key(_parse_float),
            "T": _Key(_parse_float),
        },
        "initial": {
            "q0": _Key(_parse_vector),
            "p0": _Key(_parse_vector),
            "tau0": _Key(_parse_float, None),
        },
        "sim": {
            "t_end": _Key(_parse_float, 10.0),
            "step": _Key(_parse_float, 1e-3),
            "include_v": _Key(_parse_bool, True),
        },
        "output": _OUTPUT,
    },
    "optimal-restart": {
        "field": {"Q": _Key(_parse_matrix, None), "general": _Key(_parse_str, None)},
        "restart": {"eta": _Key(_parse_float, 0.5), "T0": _Key(_parse_float, 0.1)},
        "solve": {"tol": _Key(_parse_float, 1e-10), "refine": _Key(_parse_int, 1)},
        "output": _OUTPUT,
    },
    "figure1": {
        "field": {"Q": _Key(_parse_matrix, _parse_matrix(_DEMO_Q))},
        "initial": {"y0": _Key(_parse_vector, np.array([0.1, -0.1, 0.0, 0.0]))},
        "clock": {"T0": _Key(_parse_float, 0.1)},
        "sim": {
            "s_end_drift": _Key(_parse_float, 25.0),
            "s_end_slow": _Key(_parse_float, 40.0),
            "s_end_fast": _Key(_parse_float, 400.0),
            "step": _Key(_parse_float, 1e-2),
        },
        "output": _OUTPUT,
    },
    "figure2": {
        "field": {"Q": _Key(_parse_matrix, _parse_matrix(_DEMO_Q))},
        "restart": {
            "eta": _Key(_parse_float, 0.5),
            "T0": _Key(_parse_float, 0.1),
            "T": _Key(_parse_float, 0.471),
        },
        "initial": {
            "q0": _Key(_parse_vector, np.array([1e4, -1e4])),
            "p0": _Key(_parse_vector, np.array([1e4, -1e4])),
            "tau0": _Key(_parse_float, None),
        },
        "sim": {"t_end": _Key(_parse_float, 8.0), "step": _Key(_parse_float, 1e-3)},
        "output": _OUTPUT,
    },
}

SCENARIOS = tuple(SCHEMAS)


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully-resolved, validated configuration for one scenario run."""

    scenario: str
    values: dict[str, dict[str, object]]

    def get(self, section: str, key: str):
        return self.values[section][key]

    def resolved_ini(self) -> str:
        """INI echo of the resolved config; reruns reproduce the output."""
        lines = ["[run]", f"scenario = {self.scenario}", ""]
        for section in SCHEMAS[self.scenario]:
            lines.append(f"[{section}]")
            for key, value in self.values[section].items():
                if value is None:
                    continue
                lines.append(f"{key} = {_fmt_scalar(value)}")
            lines.append("")
        return "\n".join(lines)


def parse_config(text: str, scenario: str | None = None,
                 overrides: dict[str, str] | None = None) -> ScenarioConfig:
    """Parse and validate a config document against its scenario schema.

    ``scenario`` may come from the document's ``[run]`` section, the
    argument, or both (they must agree).  ``overrides`` maps
    ``section.key`` to raw strings (used for command-line flags) and is
    applied before validation.
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (matrices use 'Q')
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse failure: {exc}") from exc

    declared = None
    if cp.has_section("run"):
        extra = set(cp.options("run")) - {"scenario"}
        if extra:
            raise ConfigError(f"unknown keys in [run]: {sorted(extra)}")
        declared = cp.get("run", "scenario", fallback=None)
    if declared is not None and scenario is not None and declared != scenario:
        raise ConfigError(
            f"config declares scenario {declared!r} but {scenario!r} was requested"
        )
    scenario = scenario or declared
    if scenario is None:
        raise ConfigError("no scenario given (add [run] scenario = ...)")
    if scenario not in SCHEMAS:
        raise ConfigError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    schema = SCHEMAS[scenario]

    for section in cp.sections():
        if section == "run":
            continue
        if section not in schema:
            raise ConfigError(f"unknown section [{section}] for scenario {scenario}")
        for key in cp.options(section):
            if key not in schema[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")

    raw: dict[str, dict[str, str]] = {
        section: dict(cp.items(section)) if cp.has_section(section) else {}
        for section in schema
    }
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        if section not in schema or key not in schema[section]:
            raise ConfigError(f"override targets unknown key {dotted!r}")
        raw[section][key] = value

    values: dict[str, dict[str, object]] = {}
    for section, keys in schema.items():
        values[section] = {}
        for key, spec in keys.items():
            if key in raw[section]:
                try:
                    values[section][key] = spec.parse(raw[section][key])
                except ConfigError as exc:
                    raise ConfigError(f"[{section}] {key}: {exc}") from exc
            elif spec.default is _REQUIRED:
                raise ConfigError(f"missing required key {key!r} in section [{section}]")
            else:
                values[section][key] = spec.default

    cfg = ScenarioConfig(scenario=scenario, values=values)
    _validate_semantics(cfg)
    return cfg


def _load_general(ref: str) -> GeneralField:
    """Resolve a ``module:attribute`` reference to a general field.

    The attribute may be a :class:`~nestode.fields.GeneralField` or a
    zero-argument factory returning one.
    """
    mod_name, sep, attr = ref.partition(":")
    if not sep or not mod_name or not attr:
        raise ConfigError(
            f"general field reference must look like 'module:attribute', got {ref!r}"
        )
    try:
        module = importlib.import_module(mod_name)
    except ImportError as exc:
        raise ConfigError(f"cannot import field module {mod_name!r}: {exc}") from exc
    try:
        obj = getattr(module, attr)
    except AttributeError as exc:
        raise ConfigError(f"module {mod_name!r} has no attribute {attr!r}") from exc
    if isinstance(obj, GeneralField):
        return obj
    if callable(obj):
        obj = obj()
        if isinstance(obj, GeneralField):
            return obj
    raise ConfigError(f"{ref!r} did not produce a general field")


def _validate_semantics(cfg: ScenarioConfig) -> None:
    """Cross-key checks mirroring the library preconditions."""
    v = cfg.values
    field_keys = v.get("field", {})
    dim = None
    if "general" in field_keys:
        has_q = field_keys.get("Q") is not None
        has_general = field_keys.get("general") is not None
        if has_q and has_general:
            raise ConfigError("give either Q or general in [field], not both")
        if not has_q and not has_general:
            if cfg.scenario == "optimal-restart":
                v["field"]["Q"] = _parse_matrix(_DEMO_Q)
            else:
                raise ConfigError("section [field] needs either Q or general")
        if has_general:
            dim = _load_general(field_keys["general"]).dim
    if dim is None and field_keys.get("Q") is not None:
        dim = field_keys["Q"].shape[0]
    if "restart" in v and "T" in v["restart"]:
        T0, T, eta = v["restart"]["T0"], v["restart"]["T"], v["restart"]["eta"]
        if not 0.0 < T0 < T:
            raise ConfigError(f"restart window violated: need 0 < T0 < T, got T0={T0}, T={T}")
        if not 0.0 < eta <= 1.0:
            raise ConfigError(f"eta must lie in (0, 1], got {eta}")
        tau0 = v.get("initial", {}).get("tau0")
        if tau0 is None and "initial" in v and "tau0" in v["initial"]:
            v["initial"]["tau0"] = T0  # default: start at the lower reset value
        elif tau0 is not None and not T0 <= tau0 <= T:
            raise ConfigError(f"tau0 must lie in [T0, T], got {tau0}")
    if "clock" in v:
        if v["clock"]["T0"] <= 0:
            raise ConfigError("T0 must be positive")
        if "eta" in v["clock"] and not 0.0 < v["clock"]["eta"] <= 1.0:
            raise ConfigError(f"eta must lie in (0, 1], got {v['clock']['eta']}")
    if "sim" in v:
        for key in ("t_end", "s_end", "step", "s_end_drift", "s_end_slow", "s_end_fast"):
            if key in v["sim"] and v["sim"][key] <= 0:
                raise ConfigError(f"{key} must be positive")
    if dim is not None and "initial" in v:
        expected = {"x0": dim, "v0": dim, "q0": dim, "p0": dim,
                    "y0": 2 * dim, "z0": 2 * dim, "zeta0": 2 * dim}
        for key, size in expected.items():
            vec = v["initial"].get(key)
            if isinstance(vec, np.ndarray) and vec.shape != (size,):
                raise ConfigError(
                    f"{key} must have length {size} for a field of dimension "
                    f"{dim}, got length {vec.shape[0]}"
                )


# ------------------------------------------------------------------ emission

def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header: list[str], columns: list[np.ndarray]) -> None:
    rows = len(columns[0])
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for i in range(rows):
        buf.write(",".join(_fmt(col[i]) for col in columns) + "\n")
    path.write_text(buf.getvalue())


def _write_report(path: Path, cfg: ScenarioConfig, lines: list[str]) -> None:
    body = [f"scenario: {cfg.scenario}"]
    body.extend(lines)
    body.append("")
    body.append("resolved configuration:")
    body.append(cfg.resolved_ini())
    path.write_text("\n".join(body))


def _plot_script(png: str, plots: list[str], logscale: bool = False) -> str:
    lines = [
        "set datafile separator ','",
        "set terminal pngcairo size 960,640",
        f"set output '{png}'",
        "set key left top",
    ]
    if logscale:
        lines.append("set logscale y")
    lines.append("plot \\")
    lines.append(", \\\n".join("  " + p for p in plots))
    return "\n".join(lines) + "\n"


def _trajectory_files(out: Path, name: str, traj: odesim.OdeTrajectory,
                      state_names: list[str]) -> list[str]:
    csv = out / f"{name}.csv"
    cols = [traj.times] + [traj.states[:, k] for k in range(traj.states.shape[1])]
    _write_csv(csv, [traj.timescale] + state_names, cols)
    plots = [
        f"'{csv.name}' using 1:{k + 2} with lines title '{state_names[k]}'"
        for k in range(len(state_names))
    ]
    (out / f"{name}_plot.gp").write_text(_plot_script(f"{name}.png", plots))
    return [csv.name, f"{name}_plot.gp"]


# ------------------------------------------------------------------ scenarios

def _field_of(cfg: ScenarioConfig):
    general = cfg.values.get("field", {}).get("general")
    if general is not None:
        return _load_general(general)
    return helmholtz_split(cfg.get("field", "Q"))


def _run_decompose(cfg: ScenarioConfig, out: Path) -> int:
    f = _field_of(cfg)
    lines = [
        f"dim: {f.dim}",
        f"Qs: {_fmt_scalar(np.asarray(f.Qs))}",
        f"Qa: {_fmt_scalar(np.asarray(f.Qa))}",
        f"ell_j: {f.ell_j!r}",
        f"ell_k: {f.ell_k!r}",
        f"kappa_j: {f.kappa_j!r}",
        f"alpha: {f.alpha!r}",
    ]
    for w in f.warnings:
        lines.append(f"warning: {w}")
    validation = validate_assumption1(f.as_general(),
                                      seed=cfg.get("output", "seed"))
    lines += [
        f"validation_passed: {str(validation.passed).lower()}",
        f"worst_monotonicity_ratio: {validation.worst_grad_monotonicity!r}",
        f"worst_gradient_lipschitz_ratio: {validation.worst_grad_lipschitz!r}",
        f"worst_rotation_lipschitz_ratio: {validation.worst_rot_lipschitz!r}",
    ]
    _write_report(out / "report.txt", cfg, lines)
    return EXIT_OK


def _run_instability_test(cfg: ScenarioConfig, out: Path) -> int:
    f = _field_of(cfg)
    report = averaging.instability_certificate(
        f,
        degeneracy_tol=cfg.get("averaging", "degeneracy_tol"),
        max_denominator=cfg.get("averaging", "max_denominator"),
        nodes=cfg.get("averaging", "nodes"),
    )
    lines = report.to_text().rstrip("\n").split("\n")
    lines += [f"ell_j: {f.ell_j!r}", f"ell_k: {f.ell_k!r}",
              f"kappa_j: {f.kappa_j!r}", f"alpha: {f.alpha!r}"]
    _write_report(out / "report.txt", cfg, lines)
    return EXIT_OK


def _run_simulate_ode(cfg: ScenarioConfig, out: Path) -> int:
    f = _field_of(cfg)
    traj = odesim.integrate_nesterov_t(
        f, cfg.get("initial", "x0"), cfg.get("initial", "v0"),
        T0=cfg.get("clock", "T0"), eta=cfg.get("clock", "eta"),
        t_end=cfg.get("sim", "t_end"), h=cfg.get("sim", "step"),
    )
    n = f.dim
    names = [f"x_{k+1}" for k in range(n)] + [f"v_{k+1}" for k in range(n)] + ["tau"]
    files = _trajectory_files(out, "trajectory", traj, names)
    lines = [
        f"samples: {len(traj.times)}",
        f"blown_up: {str(traj.blown_up).lower()}",
        f"final_norm: {float(np.linalg.norm(traj.states[-1, :2 * n]))!r}",
        f"files: {', '.join(files)}",
    ]
    _write_report(out / "report.txt", cfg, lines)
    return EXIT_OK


def _run_simulate_pullback(cfg: ScenarioConfig, out: Path) -> int:
    f = _field_of(cfg)
    traj = odesim.integrate_pullback(
        f, cfg.get("initial", "z0"), T0=cfg.get("clock", "T0"),
        s_end=cfg.get("sim", "s_end"), h=cfg.get("sim", "step"),
    )
    names = [f"z_{k+1}" for k in range(2 * f.dim)]
    files = _trajectory_files(out, "trajectory", traj, names)
    lines = [
        f"epsilon: {traj.meta['epsilon']!r}",
        f"samples: {len(traj.times)}",
        f"blown_up: {str(traj.blown_up).lower()}",
        f"files: {', '.join(files)}",
    ]
    _write_report(out / "report.txt", cfg, lines)
    return EXIT_OK


def _run_simulate_average(cfg: ScenarioConfig, out: Path) -> int:
    f = _field_of(cfg)
    avg = averaging.average_closed_form(f)
    eps = f.ell_j ** -0.5
    traj = averaging.integrate_average(
        avg, cfg.get("initial", "zeta0"), T0=cfg.get("clock", "T0"),
        epsilon=eps, s_end=cfg.get("sim", "s_end"), h=cfg.get("sim", "step"),
    )
    names = [f"zeta_{k+1}" for k in range(2 * f.dim)]
    files = _trajectory_files(out, "trajectory", traj, names)
    lines = [
        f"epsilon: {eps!r}",
        f"max_real_part: {avg.max_real_part!r}",
        f"samples: {len(traj.times)}",
        f"blown_up: {str(traj.blown_up).lower()}",
        f"files: {', '.join(files)}",
    ]
    _write_report(out / "report.txt", cfg, lines)
    return EXIT_OK


def _certificate_lines(cert: hybrid.LyapunovCertificate) -> list[str]:
    pairs = [
        ("T_lower", cert.T_lower), ("T_upper", cert.T_upper),
        ("a", cert.a), ("b", cert.b), ("c", cert.c),
        ("delta", cert.delta), ("m", cert.m),
        ("c_lower", cert.c_lower), ("c_upper", cert.c_upper),
        ("lambda", cert.lam), ("mu", cert.mu),
        ("Gamma", cert.gamma), ("nu1", cert.nu1), ("nu2", cert.nu2),
        ("nu", cert.nu), ("rho", cert.rho),
    ]
    return [f"{k}: {v!r}" for k, v in pairs]


def _hybrid_run(cfg: ScenarioConfig, out: Path, csv_name: str,
                distance_csv: str | None) -> tuple[int, list[str], "hybrid.HybridTrajectory"]:
    f = _field_of(cfg)
    rc = hybrid.RestartConfig(
        T0=cfg.get("restart", "T0"), T=cfg.get("restart", "T"),
        eta=cfg.get("restart", "eta"),
    )
    tau0 = cfg.get("initial", "tau0")
    tau0 = rc.T0 if tau0 is None else tau0
    traj = hybrid.simulate_hybrid(
        f, rc, (cfg.get("initial", "q0"), cfg.get("initial", "p0"), tau0),
        t_end=cfg.get("sim", "t_end"), h=cfg.get("sim", "step"),
    )

    lines = [
        f"samples: {len(traj)}",
        f"jumps: {len(traj.jump_indices)}",
        f"blown_up: {str(traj.blown_up).lower()}",
    ]
    code = EXIT_OK
    cert = None
    try:
        cert = hybrid.lyapunov_certificate(f, rc)
    except (hybrid.WindowViolationError, ValueError) as exc:
        lines.append(f"certificate: refused ({exc})")

    n = f.dim
    header = (["t", "j"] + [f"q_{k+1}" for k in range(n)]
              + [f"p_{k+1}" for k in range(n)] + ["tau"])
    cols = [traj.t, traj.j] + [traj.q[:, k] for k in range(n)] \
        + [traj.p[:, k] for k in range(n)] + [traj.tau]
    include_v = bool(cfg.values.get("sim", {}).get("include_v", True)) and cert is not None
    if include_v:
        header.append("V")
        cols.append(hybrid.lyapunov_values(cert, f, traj))
    _write_csv(out / csv_name, header, cols)

    if distance_csv is not None:
        dist = traj.distance_to(f.x_star)
        marker = np.zeros(len(traj), dtype=int)
        marker[traj.jump_indices] = 1
        _write_csv(out / distance_csv, ["t", "j", "dist", "jump"],
                   [traj.t, traj.j, dist, marker])

    if cert is not None:
        lines.extend(_certificate_lines(cert))
        decrease = hybrid.verify_decrease(f, rc, traj, cert=cert)
        env = hybrid.verify_envelopes(f, rc, cert, traj)
        lines += [
            f"flow_violations: {decrease.flow_violations} of {decrease.flow_pairs}",
            f"jump_violations: {decrease.jump_violations} of {decrease.jump_count}",
            f"per_jump_contraction_ok: {str(decrease.contraction_ok).lower()}",
            f"envelope_potential_ok: {str(env.potential_ok).lower()}",
            f"envelope_drive_ok: {str(env.drive_ok).lower()}",
            f"uges_c1: {env.c1!r}",
            f"uges_c2: {env.c2!r}",
        ]
        if not (decrease.passed and decrease.contraction_ok and env.passed):
            lines.append("certified_claim: VIOLATED")
            code = EXIT_CLAIM
        else:
            lines.append("certified_claim: verified")
    return code, lines, traj


def _run_simulate_hybrid(cfg: ScenarioConfig, out: Path) -> int:
    code, lines, traj = _hybrid_run(cfg, out, "trajectory.csv", None)
    plots = [f"'trajectory.csv' using 1:3 with lines title 'q_1'"]
    (out / "trajectory_plot.gp").write_text(_plot_script("trajectory.png", plots))
    _write_report(out / "report.txt", cfg, lines)
    return code


def _run_optimal_restart(cfg: ScenarioConfig, out: Path) -> int:
    f = _field_of(cfg)
    eta = cfg.get("restart", "eta")
    T0 = cfg.get("restart", "T0")
    sol = hybrid.calibrate_optimal_restart(
        f, eta=eta, T0=T0, tol=cfg.get("solve", "tol"),
        refine=cfg.get("solve", "refine"),
    )
    lo, hi = hybrid.reset_window(f.kappa_j, f.ell_k, T0, eta)
    lines = [
        f"beta: {sol.beta!r}",
        f"c_upper: {sol.c_upper!r}",
        f"xi_star: {sol.xi_star!r}",
        f"T_opt: {sol.T_opt!r}",
        f"T_lower: {lo!r}",
        f"T_upper: {hi!r}",
        f"iterations: {sol.iterations}",
        f"history: {', '.join(repr(t) for t in sol.history)}",
        f"admissible: {str(lo < sol.T_opt <= hi).lower()}",
    ]
    _write_report(out / "report.txt", cfg, lines)
    return EXIT_OK


def _run_figure1(cfg: ScenarioConfig, out: Path) -> int:
    f = _field_of(cfg)
    y0 = cfg.get("initial", "y0")
    T0 = cfg.get("clock", "T0")
    h = cfg.get("sim", "step")
    eps = f.ell_j ** -0.5

    gen = odesim.drift_generator(f)
    drift = odesim.integrate_drift(gen, y0, s_end=cfg.get("sim", "s_end_drift"), h=h)
    names_psi = [f"psi_{k+1}" for k in range(2 * f.dim)]
    files = _trajectory_files(out, "drift", drift, names_psi)

    s_slow = cfg.get("sim", "s_end_slow")
    z = odesim.integrate_pullback(f, y0, T0=T0, s_end=s_slow, h=h)
    avg = averaging.average_closed_form(f)
    zeta = averaging.integrate_average(avg, y0, T0=T0, epsilon=eps,
                                       s_end=s_slow, h=h)
    tau = eps * z.times + T0
    header = (["s", "tau"] + [f"z_{k+1}" for k in range(2 * f.dim)]
              + [f"zeta_{k+1}" for k in range(2 * f.dim)])
    cols = [z.times, tau] + [z.states[:, k] for k in range(2 * f.dim)] \
        + [zeta.states[:, k] for k in range(2 * f.dim)]
    _write_csv(out / "slow.csv", header, cols)
    plots = [f"'slow.csv' using 2:{k+3} with lines title 'z_{k+1}'" for k in range(2 * f.dim)]
    plots += [f"'slow.csv' using 2:{k+3+2*f.dim} with lines dashtype 2 title 'zeta_{k+1}'"
              for k in range(2 * f.dim)]
    (out / "slow_plot.gp").write_text(_plot_script("slow.png", plots))
    files += ["slow.csv", "slow_plot.gp"]

    fast = odesim.integrate_scaled_y(f, y0, T0=T0,
                                     s_end=cfg.get("sim", "s_end_fast"), h=h)
    names_y = [f"y_{k+1}" for k in range(2 * f.dim)]
    files += _trajectory_files(out, "scaled", fast, names_y)

    cert = averaging.instability_certificate(f)
    gap = np.linalg.norm(z.states - zeta.states, axis=1)
    norms = np.linalg.norm(fast.states, axis=1)
    dec = max(1, len(norms) // 10)
    lines = [
        f"epsilon: {eps!r}",
        f"period: {cert.period.period!r}" if cert.period else "period: none",
        f"verdict: {cert.verdict}",
        f"max_real_part: {cert.max_real_part!r}",
        f"max_tracking_gap: {float(gap.max())!r}",
        f"growth_ratio_last_to_first_decile: {float(norms[-dec:].max() / norms[:dec].max())!r}",
        f"fast_blown_up: {str(fast.blown_up).lower()}",
        f"files: {', '.join(files)}",
    ]
    _write_report(out / "report.txt", cfg, lines)
    return EXIT_OK


def _run_figure2(cfg: ScenarioConfig, out: Path) -> int:
    f = _field_of(cfg)
    code, lines, traj = _hybrid_run(cfg, out, "hybrid.csv", "hybrid_dist.csv")

    plain = odesim.integrate_nesterov_t(
        f, cfg.get("initial", "q0"), cfg.get("initial", "p0"),
        T0=cfg.get("restart", "T0"), eta=cfg.get("restart", "eta"),
        t_end=cfg.get("sim", "t_end"), h=cfg.get("sim", "step"),
    )
    n = f.dim
    dist_plain = np.linalg.norm(plain.states[:, :n], axis=1)
    _write_csv(out / "ode_dist.csv", ["t", "dist"], [plain.times, dist_plain])

    plots = [
        "'ode_dist.csv' using 1:2 with lines title 'no resets'",
        "'hybrid_dist.csv' using 1:3 with lines title 'restarting'",
        "'hybrid_dist.csv' using ($4==1?$1:1/0):3 with points pt 7 title 'resets'",
    ]
    (out / "figure2_plot.gp").write_text(_plot_script("figure2.png", plots, logscale=True))

    dist = traj.distance_to(f.x_star)
    lines += [
        f"ode_final_dist: {float(dist_plain[-1])!r}",
        f"hybrid_final_dist: {float(dist[-1])!r}",
        f"decay_orders: {float(np.log10(dist[0] / max(dist[-1], 1e-300)))!r}",
        "files: ode_dist.csv, hybrid.csv, hybrid_dist.csv, figure2_plot.gp",
    ]
    _write_report(out / "report.txt", cfg, lines)
    return code


_RUNNERS = {
    "decompose": _run_decompose,
    "instability-test": _run_instability_test,
    "simulate-ode": _run_simulate_ode,
    "simulate-pullback": _run_simulate_pullback,
    "simulate-average": _run_simulate_average,
    "simulate-hybrid": _run_simulate_hybrid,
    "optimal-restart": _run_optimal_restart,
    "figure1": _run_figure1,
    "figure2": _run_figure2,
}


def run(cfg: ScenarioConfig) -> int:
    """Execute a resolved scenario; writes files into its output directory."""
    out = Path(cfg.get("output", "out_dir"))
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_resolved.ini").write_text(cfg.resolved_ini())
    try:
        return _RUNNERS[cfg.scenario](cfg, out)
    except (NotPositiveDefiniteError, averaging.NotCommensurateError,
            hybrid.WindowViolationError, hybrid.BetaOutOfRangeError,
            ValueError) as exc:
        raise ScenarioError(str(exc)) from exc


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nestode",
        description="Accelerated-flow instability certificates and restart stabilization",
    )
    sub = parser.add_subparsers(dest="scenario", required=True)
    for name in SCENARIOS:
        p = sub.add_parser(name, help=f"run the {name} scenario")
        p.add_argument("config", nargs="?", default=None,
                       help="INI config file (defaults apply when omitted)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", default=None, help="sampling seed")
        if "step" in SCHEMAS[name].get("sim", {}):
            p.add_argument("--step", default=None, help="integration step")
    args = parser.parse_args(argv)

    overrides: dict[str, str] = {}
    if args.out is not None:
        overrides["output.out_dir"] = args.out
    if args.seed is not None:
        overrides["output.seed"] = args.seed
    if getattr(args, "step", None) is not None:
        overrides["sim.step"] = args.step

    try:
        text = ""
        if args.config is not None:
            path = Path(args.config)
            if not path.exists():
                raise ConfigError(f"config file not found: {path}")
            text = path.read_text()
        cfg = parse_config(text, scenario=args.scenario, overrides=overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return run(cfg)
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO


if __name__ == "__main__":
    sys.exit(main())
