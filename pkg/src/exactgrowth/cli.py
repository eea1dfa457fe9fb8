"""Command-line front end.

Every run resolves a configuration from defaults, an optional JSON file
(``--config``) and explicit flags, in increasing priority, then writes

* ``<output>.csv``: the result table (header row, ``.`` decimals, LF endings),
* ``<output>.json``: the summary, holding the resolved configuration, where
  each field came from, grid settings and the results,
* ``<output>.timing.json``: the wall time of the run.

The wall time lives in its own file so that the summary is byte-identical
across runs with the same configuration and seed.

Exit status: 0 success, 1 unreadable or invalid configuration, 2 violated
hypothesis, 3 numerical non-convergence or a failed verification check.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from exactgrowth import __version__
from exactgrowth.errors import (
    ConvergenceError,
    DivergentMeasureError,
    HypothesisViolation,
    InfeasibleError,
    NormalizationError,
    ParameterError,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_HYPOTHESIS = 2
EXIT_NUMERICAL = 3

COMMANDS = ("constants", "symmetrize", "verify", "sweep", "mu-h", "solve-ode")


class ConfigError(Exception):
    """Invalid configuration; the message names the failing field."""


class NumericalFailure(Exception):
    """A computation finished without converging or a check failed."""


# ---------------------------------------------------------------------------
# configuration schema
# ---------------------------------------------------------------------------


def _as_int(name: str, value: Any) -> int:
    if isinstance(value, bool):
        raise ConfigError(f"field '{name}': expected an integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            pass
    raise ConfigError(f"field '{name}': expected an integer, got {value!r}")


def _as_float(name: str, value: Any) -> float:
    if isinstance(value, bool):
        raise ConfigError(f"field '{name}': expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        out = float(value)
    elif isinstance(value, str):
        try:
            out = float(value)
        except ValueError:
            raise ConfigError(f"field '{name}': expected a number, got {value!r}") from None
    else:
        raise ConfigError(f"field '{name}': expected a number, got {value!r}")
    if not math.isfinite(out):
        raise ConfigError(f"field '{name}': expected a finite number, got {value!r}")
    return out


def _as_list(name: str, value: Any, item: Callable[[str, Any], Any]) -> list:
    if isinstance(value, str):
        parts = [v.strip() for v in value.split(",") if v.strip()]
    elif isinstance(value, (list, tuple)):
        parts = list(value)
    else:
        raise ConfigError(f"field '{name}': expected a list, got {value!r}")
    if not parts:
        raise ConfigError(f"field '{name}': expected a non-empty list")
    return [item(name, v) for v in parts]


def _as_bool(name: str, value: Any) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.lower() in ("true", "false", "1", "0", "yes", "no"):
        return value.lower() in ("true", "1", "yes")
    raise ConfigError(f"field '{name}': expected true or false, got {value!r}")


def _as_q(name: str, value: Any) -> float | str:
    if isinstance(value, str) and value.strip().lower() == "crit":
        return "crit"
    return _as_float(name, value)


@dataclass(frozen=True)
class Field:
    name: str
    kind: str
    default: Any
    help: str
    choices: tuple[str, ...] | None = None

    def convert(self, value: Any) -> Any:
        if value is None:
            if self.default is None:
                return None
            raise ConfigError(f"field '{self.name}': null is not allowed")
        if self.kind == "int":
            return _as_int(self.name, value)
        if self.kind == "float":
            return _as_float(self.name, value)
        if self.kind == "float?":
            return _as_float(self.name, value)
        if self.kind == "int_list":
            return _as_list(self.name, value, _as_int)
        if self.kind == "float_list":
            return _as_list(self.name, value, _as_float)
        if self.kind == "bool":
            return _as_bool(self.name, value)
        if self.kind == "q":
            return _as_q(self.name, value)
        if self.kind == "str":
            if not isinstance(value, str):
                raise ConfigError(f"field '{self.name}': expected a string, got {value!r}")
            if self.choices and value not in self.choices:
                raise ConfigError(
                    f"field '{self.name}': expected one of {', '.join(self.choices)}, got {value!r}"
                )
            return value
        raise AssertionError(self.kind)


_COMMON = (
    Field("seed", "int", 0, "seed for every random draw"),
    Field("output_path", "str", None, "output stem; files get .csv/.json/.timing.json"),
)
_SPACE = (
    Field("k", "int", 2, "order of the generalized gradient"),
    Field("p", "float", 2.0, "integrability exponent"),
    Field("eta", "float", 3.0, "weight exponent of the target space"),
    Field("theta", "float?", None, "operator exponent theta (default: gamma)"),
    Field("gamma", "float?", None, "operator exponent gamma (default: (2p-1+(p-1)eta)/p)"),
)
_GRID = (
    Field("R", "float", 1.0, "outer radius"),
    Field("n_cells", "int", 4096, "cells of the geometric grid"),
)

SCHEMA: dict[str, tuple[Field, ...]] = {
    "constants": _COMMON + _SPACE,
    "symmetrize": _COMMON
    + _GRID
    + (
        Field("profile", "str", "ring", "test function", ("ring", "gaussian", "bump", "step")),
        Field("eta", "float", 1.0, "weight exponent of the input measure"),
        Field("nu", "float", 3.0, "weight exponent of the rearranged measure"),
        Field("levels", "int", 64, "number of level-set rows"),
    ),
    "verify": _COMMON,
    "sweep": _COMMON
    + _SPACE
    + (
        Field("beta_mult", "float", 1.0, "beta as a multiple of the sharp constant"),
        Field("q", "q", "crit", "denominator exponent, or 'crit' for p/(p-1)"),
        Field("n", "int_list", [100, 1000, 10000, 100000, 1000000], "concentration indices"),
        Field("mode", "str", "ratio", "ratio or bare integral", ("ratio", "integral")),
        Field("cap", "str", "tuned", "cap selection", ("tuned", "fixed")),
        Field("epsilon", "float", 0.1, "layer width for the fixed cap"),
        Field("R", "float", 1.0, "outer radius"),
        Field("n_cells", "int", 4096, "cells of the geometric grid"),
    ),
    "mu-h": _COMMON
    + (
        Field("h", "float_list", [1.5, 2.0, 2.5, 3.0, 3.5], "target l1/lp ratios"),
        Field("p", "float", 2.0, "sequence exponent"),
        Field("K", "int", 64, "sequence length"),
        Field("restarts", "int", 20, "random restarts"),
        Field("iterations", "int", 10000, "projected-gradient iterations per restart"),
        Field("step", "float", 1e-2, "gradient step"),
    ),
    "solve-ode": _COMMON
    + (
        Field("eta", "float", 2.0, "weight exponent (> 1)"),
        Field(
            "nonlinearity",
            "str",
            "linear-decay",
            "named nonlinearity",
            ("linear-decay", "cubic-decay", "zero"),
        ),
        Field("mode", "str", "maximize", "solver", ("maximize", "fixed-point")),
        Field("R", "float", 10.0, "truncation radius"),
        Field("n_cells", "int", 4096, "cells of the geometric grid"),
        Field("lam", "float", 1.0, "lambda for the fixed-point solver"),
        Field("growth_beta", "float", 1.0, "beta of the growth bound"),
        Field("truncation_check", "bool", False, "also solve on (0, 2R) and compare"),
    ),
}


def _normalize_key(key: str) -> str:
    return key.replace("-", "_")


def resolve_config(
    command: str, file_values: dict | None, cli_values: dict
) -> tuple[dict, dict]:
    """Merge defaults, file values and flags; return ``(config, provenance)``."""
    fields = {f.name: f for f in SCHEMA[command]}
    config: dict = {}
    provenance: dict = {}
    for source, values in (("config", file_values or {}), ("cli", cli_values)):
        for raw_key, value in values.items():
            key = _normalize_key(raw_key)
            if key == "command":
                continue
            if key not in fields:
                raise ConfigError(f"field '{raw_key}': unknown for command '{command}'")
            config[key] = fields[key].convert(value)
            provenance[key] = source
    for name, f in fields.items():
        if name not in config:
            config[name] = list(f.default) if isinstance(f.default, list) else f.default
            provenance[name] = "default"
    if config.get("output_path") is None:
        config["output_path"] = f"exactgrowth-{command}"
    return config, provenance


def load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"field 'config': cannot read {path}: {exc.strerror}") from None
    if not text.strip():
        raise ConfigError(f"field 'config': {path} is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"field 'config': {path} is not valid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ConfigError("field 'config': the top level must be an object")
    if not data:
        raise ConfigError(f"field 'config': {path} holds an empty object")
    return data


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _space(config: dict):
    from exactgrowth.radial_core import SpaceParams

    if config["k"] < 1:
        raise ConfigError(f"field 'k': must be a positive integer, got {config['k']}")
    if not config["p"] > 1:
        raise ConfigError(f"field 'p': must exceed 1, got {config['p']}")
    return SpaceParams.critical(config["k"], config["p"], config["eta"], config["theta"], config["gamma"])


def _finite(value):
    """JSON-safe version of ``value``: numpy scalars unwrapped, non-finite
    floats spelled as strings."""
    if isinstance(value, dict):
        return {str(k): _finite(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_finite(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def _csv_text(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buf.getvalue()


def _csv_cell(v):
    v = _finite(v)
    if isinstance(v, float):
        return repr(v)
    return v


@dataclass
class Outcome:
    header: Sequence[str]
    rows: list
    result: dict
    grid: dict
    exit_code: int = EXIT_OK


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _optional(fn: Callable[[], Any]) -> Any:
    """Value of ``fn()`` or ``{"unavailable": reason}`` when its hypotheses fail."""
    try:
        return fn()
    except ParameterError as exc:
        return {"unavailable": str(exc)}


def cmd_constants(config: dict) -> Outcome:
    from exactgrowth.special_constants import (
        beta_0k,
        c1m_closed,
        coefficient_table,
        hardy_constant_first_order,
        hardy_constant_second_order,
        verify_beta_identities,
    )

    space = _space(config)
    space.check_exact_growth()
    beta = beta_0k(space)
    lhs, rhs = verify_beta_identities(space)
    max_m = max(1, space.k // 2)
    table = coefficient_table(space.theta, space.gamma, max_m)
    c1m = {
        str(m): {"recursion": table[(1, m)], "closed_form": _optional(lambda m=m: c1m_closed(space.theta, space.gamma, m))}
        for m in range(1, max_m + 1)
    }
    result = {
        "beta_0k": beta,
        "conjugate_exponent": space.conjugate,
        "nu": space.nu,
        "alpha_k": space.alpha_k,
        "beta_identity": {"lhs": lhs, "rhs": rhs, "relative_gap": abs(lhs - rhs) / abs(rhs)},
        "c1m": c1m,
        "hardy_first_order": _optional(lambda: hardy_constant_first_order(space.alpha_k, space.p)),
        "hardy_second_order": _optional(
            lambda: hardy_constant_second_order(space.gamma, space.alphas[0], space.p)
        ),
    }
    rows = [
        ("beta_0k", beta),
        ("beta_identity_lhs", lhs),
        ("beta_identity_rhs", rhs),
        ("nu", space.nu),
        ("alpha_k", space.alpha_k),
    ]
    rows += [(f"c1{m}_recursion", table[(1, m)]) for m in range(1, max_m + 1)]
    for key in ("hardy_first_order", "hardy_second_order"):
        if isinstance(result[key], float):
            rows.append((key, result[key]))
    return Outcome(("name", "value"), rows, result, {"grid": "none"})


def _profile(name: str, R: float) -> Callable[[np.ndarray], np.ndarray]:
    if name == "ring":
        return lambda r: np.exp(-(((r - 0.5 * R) / (0.15 * R)) ** 2)) * (r < R)
    if name == "gaussian":
        return lambda r: np.exp(-((3.0 * r / R) ** 2)) * (r < R)
    if name == "bump":
        return lambda r: np.clip(1.0 - (r / R) ** 2, 0.0, None) ** 3
    if name == "step":
        return lambda r: np.where(r < 0.4 * R, 1.0, np.where(r < 0.7 * R, 0.5, 0.0))
    raise ConfigError(f"field 'profile': unknown profile {name!r}")


def cmd_symmetrize(config: dict) -> Outcome:
    from exactgrowth.radial_core import RadialFunction, make_geometric_grid
    from exactgrowth.symmetrize import (
        distribution,
        equimeasurability_check,
        maximal_function,
        symmetrize,
    )

    R, cells = config["R"], config["n_cells"]
    if not R > 0:
        raise ConfigError(f"field 'R': must be positive, got {R}")
    if cells < 16:
        raise ConfigError(f"field 'n_cells': must be at least 16, got {cells}")
    if config["levels"] < 1:
        raise ConfigError(f"field 'levels': must be positive, got {config['levels']}")
    eta, nu = config["eta"], config["nu"]
    if not (eta > -1 and nu > -1):
        raise HypothesisViolation(f"eta and nu must exceed -1, got eta={eta}, nu={nu}")
    grid = make_geometric_grid(1e-8 * R, R, cells)
    u = RadialFunction.from_callable(_profile(config["profile"], R), grid)
    ustar = symmetrize(u, eta, nu)
    top = float(np.max(np.abs(u.values)))
    levels = np.linspace(0.0, top, config["levels"] + 2)[1:-1]
    before = distribution(u, eta, levels).measures
    after = distribution(ustar, nu, levels).measures
    gaps = np.abs(before - after) / np.maximum(np.abs(before), 1e-300)
    lhs, rhs = equimeasurability_check(u, eta, nu, "power", p=2.0)
    umax = maximal_function(ustar)
    dominance = float(np.min(umax.values - ustar.samples))
    rows = [(float(t), float(a), float(b), float(g)) for t, a, b, g in zip(levels, before, after, gaps)]
    result = {
        "max_level_gap": float(np.max(gaps)),
        "l2_integral": {"original": lhs, "rearranged": rhs},
        "rearranged_radius": ustar.support_radius,
        "maximal_minus_rearranged_min": dominance,
        "monotone": bool(np.all(np.diff(ustar.samples) <= 0)),
    }
    return Outcome(
        ("level", "measure_original", "measure_rearranged", "relative_gap"),
        rows,
        result,
        {"R": R, "n_cells": cells, "r_min": grid.r_min},
    )


def _verification_checks(seed: int) -> list[tuple[str, float, float]]:
    """``(name, measured, tolerance)``; a check passes when measured <= tolerance."""
    from exactgrowth.operators import OperatorParams, apply_grad_Lk, inverse_grad_Lk
    from exactgrowth.radial_core import RadialFunction, SpaceParams, default_grid
    from exactgrowth.special_constants import (
        c1m_closed,
        coefficient_table,
        exp_p,
        verify_beta_identities,
    )
    from exactgrowth.symmetrize import equimeasurability_check

    rng = np.random.default_rng(seed)
    checks = []
    t = np.linspace(0.0, 50.0, 1000)
    worst = 0.0
    for p in (2, 3, 4, 5):
        partial = sum(t**j / math.factorial(j) for j in range(p - 1))
        worst = max(worst, float(np.max(np.abs(exp_p(p, t) - (np.exp(t) - partial)) / np.exp(t))))
    checks.append(("exp_p_closed_form", worst, 1e-10))

    worst = 0.0
    for _ in range(10):
        k = int(rng.integers(2, 9))
        p = float(rng.uniform(1.5, 4.0))
        eta = float(rng.uniform(0.0, 4.0))
        gamma = float(rng.uniform(2.0, 4.0))
        theta = gamma - 2.0 + float(rng.uniform(0.2, 0.6)) / max(1, k // 2)
        space = SpaceParams.critical(k, p, eta, theta, gamma)
        try:
            lhs, rhs = verify_beta_identities(space)
        except ParameterError:
            continue
        worst = max(worst, abs(lhs - rhs) / abs(rhs))
    checks.append(("beta_identities", worst, 1e-12))

    worst = 0.0
    for _ in range(5):
        gamma = float(rng.uniform(2.0, 4.0))
        theta = gamma - 2.0 + float(rng.uniform(0.05, 0.12))
        table = coefficient_table(theta, gamma, 8)
        for m in range(1, 9):
            closed = c1m_closed(theta, gamma, m)
            worst = max(worst, abs(table[(1, m)] - closed) / abs(closed))
    checks.append(("c1m_recursion", worst, 1e-12))

    grid = default_grid(1.0, 1024)
    worst = 0.0
    for eta, nu in ((0.0, 3.0), (1.0, 1.0), (3.0, 0.0)):
        u = RadialFunction.from_callable(_profile("ring", 1.0), grid)
        lhs, rhs = equimeasurability_check(u, eta, nu, "power", p=2.0)
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    checks.append(("equimeasurability", worst, 1e-6))

    op = OperatorParams(3.0, 3.0)
    grid = default_grid(1.0)
    worst = 0.0
    for k in (1, 2, 3, 4):
        v = RadialFunction.from_callable(lambda r: np.cos(2.0 * r) * np.exp(-r), grid)
        back = apply_grad_Lk(inverse_grad_Lk(v, k, op, 1.0), k, op)
        worst = max(worst, float(np.max(np.abs(back.values - v.values)) / np.max(np.abs(v.values))))
    checks.append(("operator_round_trip", worst, 1e-5))
    return checks


def cmd_verify(config: dict) -> Outcome:
    checks = _verification_checks(config["seed"])
    rows = [(name, value, tol, value <= tol) for name, value, tol in checks]
    failed = [name for name, value, tol in checks if not value <= tol]
    result = {
        "checks": {name: {"measured": value, "tolerance": tol, "passed": value <= tol} for name, value, tol in checks},
        "all_passed": not failed,
    }
    return Outcome(
        ("check", "measured", "tolerance", "passed"),
        rows,
        result,
        {"grid": "per check"},
        EXIT_OK if not failed else EXIT_NUMERICAL,
    )


def cmd_sweep(config: dict) -> Outcome:
    from exactgrowth.extremal import MoserSequenceParams, sharpness_sweep
    from exactgrowth.special_constants import beta_0k

    space = _space(config)
    space.check_exact_growth()
    beta0 = beta_0k(space)
    if not config["beta_mult"] > 0:
        raise ConfigError(f"field 'beta_mult': must be positive, got {config['beta_mult']}")
    q = space.conjugate if config["q"] == "crit" else config["q"]
    if q < 0:
        raise ConfigError(f"field 'q': must be nonnegative, got {q}")
    n_list = config["n"]
    if len(n_list) < 3:
        raise ConfigError("field 'n': needs at least 3 entries")
    if any(b <= a for a, b in zip(n_list, n_list[1:])) or n_list[0] < 2:
        raise ConfigError("field 'n': must be ascending integers >= 2")
    if not 0 < config["epsilon"] < 0.5:
        raise ConfigError(f"field 'epsilon': must lie in (0, 1/2), got {config['epsilon']}")
    if not config["R"] > 0:
        raise ConfigError(f"field 'R': must be positive, got {config['R']}")
    base = MoserSequenceParams(n_list[0], config["epsilon"], config["R"], space, n_cells=config["n_cells"])
    beta = config["beta_mult"] * beta0
    table = sharpness_sweep(beta, q, n_list, base, mode=config["mode"], cap_mode=config["cap"])
    header = (
        "n", "ratio", "log_ratio", "epsilon", "bracket", "grad_norm", "amplitude", "log_space",
    )
    rows = [
        (r.n, r.ratio, r.log_ratio, r.epsilon, r.bracket, r.grad_norm, r.amplitude, r.log_space)
        for r in table.rows
    ]
    result = {
        "beta_0k": beta0,
        "beta": beta,
        "q": q,
        "slope": table.slope,
        "fit_points": table.fit_points,
        "rate_exponent": 1.0 - q * (space.p - 1.0) / space.p,
        "rows": [r.as_dict() for r in table.rows],
    }
    return Outcome(header, rows, result, {"R": config["R"], "n_cells": config["n_cells"], "head_ratio": "min(1e-8, 1e-2/n)"})


def cmd_mu_h(config: dict) -> Outcome:
    from exactgrowth.functionals import mu_h_descent

    for name in ("K", "restarts", "iterations"):
        if config[name] < 1:
            raise ConfigError(f"field '{name}': must be positive, got {config[name]}")
    if not config["p"] > 1:
        raise ConfigError(f"field 'p': must exceed 1, got {config['p']}")
    rows, entries = [], []
    for h in config["h"]:
        est = mu_h_descent(
            h,
            config["p"],
            config["K"],
            seed=config["seed"],
            restarts=config["restarts"],
            step=config["step"],
            iterations=config["iterations"],
        )
        window = est.value * h * math.exp(-h * h / 2.0) if config["p"] == 2.0 else math.nan
        rows.append((h, est.value, window, est.converged))
        entries.append(
            {
                "h": h,
                "mu_h": est.value,
                "window": window,
                "iterations": est.iterations,
                "converged": est.converged,
                "restart_values": list(est.restart_values),
            }
        )
    code = EXIT_OK if all(e["converged"] for e in entries) else EXIT_NUMERICAL
    return Outcome(
        ("h", "mu_h", "window", "converged"), rows, {"estimates": entries}, {"K": config["K"]}, code
    )


def _named_nonlinearity(name: str):
    from exactgrowth.ode_app import Nonlinearity

    if name == "linear-decay":
        return Nonlinearity(lambda r, t: 2.0 * t * np.exp(-r), True, name)
    if name == "cubic-decay":
        return Nonlinearity(lambda r, t: (t + t**3) * np.exp(-r), True, name)
    if name == "zero":
        return Nonlinearity(lambda r, t: np.zeros(np.broadcast(r, t).shape), True, name)
    raise ConfigError(f"field 'nonlinearity': unknown {name!r}")


def cmd_solve_ode(config: dict) -> Outcome:
    from exactgrowth.ode_app import (
        ProblemSpec,
        constrained_maximize,
        fixed_point_solve,
        truncation_sensitivity,
    )
    from exactgrowth.radial_core import RadialFunction, make_geometric_grid

    R, cells = config["R"], config["n_cells"]
    if not R > 0:
        raise ConfigError(f"field 'R': must be positive, got {R}")
    if cells < 16:
        raise ConfigError(f"field 'n_cells': must be at least 16, got {cells}")
    spec = ProblemSpec(config["eta"], _named_nonlinearity(config["nonlinearity"]), config["growth_beta"])
    grid = make_geometric_grid(1e-8 * R, R, cells)
    if config["mode"] == "maximize":
        report = constrained_maximize(spec, R, config["seed"], grid=grid)
    else:
        if config["lam"] == 0:
            raise ConfigError("field 'lam': must be nonzero")
        rng = np.random.default_rng(config["seed"])
        start = RadialFunction.sampled(grid, rng.uniform(0.0, 1.0) * np.clip(1.0 - grid.nodes / R, 0.0, None))
        report = fixed_point_solve(spec, config["lam"], start, R)
    result = {"problem": spec.as_dict(), "report": report.summary()}
    if config["truncation_check"] and config["mode"] == "maximize":
        result["truncation"] = truncation_sensitivity(spec, R, config["seed"])
    r = report.solution.grid.nodes
    rows = list(zip(r.tolist(), report.solution.values.tolist(), report.laplacian(r).tolist()))
    code = EXIT_OK if report.converged else EXIT_NUMERICAL
    return Outcome(("r", "u", "laplacian"), rows, result, {"R": R, "n_cells": cells, "r_min": grid.r_min}, code)


HANDLERS: dict[str, Callable[[dict], Outcome]] = {
    "constants": cmd_constants,
    "symmetrize": cmd_symmetrize,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "mu-h": cmd_mu_h,
    "solve-ode": cmd_solve_ode,
}


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors become configuration errors."""

    def error(self, message):
        raise ConfigError(f"field 'arguments': {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="exactgrowth", description="Exact-growth inequality toolkit.")
    parser.add_argument("--config", help="JSON configuration file")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for command, fields in SCHEMA.items():
        p = sub.add_parser(command, help=f"run the {command} experiment")
        p.add_argument("--config", dest="sub_config", help="JSON configuration file")
        for f in fields:
            flag = "--" + f.name.replace("_", "-")
            p.add_argument(flag, dest=f.name, default=argparse.SUPPRESS, help=f.help)
    return parser


def run(command: str | None, config_path: str | None, cli_values: dict) -> tuple[int, dict | None]:
    """Resolve, dispatch and write outputs; return ``(exit code, summary)``."""
    file_values = load_config_file(config_path) if config_path else None
    if command is None:
        if not file_values or "command" not in file_values:
            raise ConfigError("field 'command': missing")
        command = file_values["command"]
    if command not in SCHEMA:
        raise ConfigError(f"field 'command': expected one of {', '.join(COMMANDS)}, got {command!r}")
    if file_values and file_values.get("command", command) != command:
        raise ConfigError(
            f"field 'command': config names {file_values['command']!r} but {command!r} was requested"
        )
    config, provenance = resolve_config(command, file_values, cli_values)
    start = time.perf_counter()
    outcome = HANDLERS[command](config)
    wall = time.perf_counter() - start
    stem = Path(config["output_path"])
    if stem.suffix in (".json", ".csv"):
        stem = stem.with_suffix("")
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_name(stem.name + ".csv")
    json_path = stem.with_name(stem.name + ".json")
    timing_path = stem.with_name(stem.name + ".timing.json")
    summary = {
        "command": command,
        "version": __version__,
        "config": {"command": command, **config},
        "provenance": provenance,
        "grid": outcome.grid,
        "result": outcome.result,
        "exit_code": outcome.exit_code,
        "outputs": {"csv": csv_path.name, "wall_time": timing_path.name},
    }
    text = json.dumps(_finite(summary), indent=2, sort_keys=True, allow_nan=False) + "\n"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(_csv_text(outcome.header, outcome.rows))
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    with open(timing_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"wall_time_s": wall}) + "\n")
    return outcome.exit_code, summary


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = vars(parser.parse_args(argv))
        command = args.pop("command", None)
        config_path = args.pop("sub_config", None) or args.pop("config", None)
        args.pop("config", None)
        code, summary = run(command, config_path, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HypothesisViolation, InfeasibleError, DivergentMeasureError) as exc:
        print(f"hypothesis violation: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (ConvergenceError, NormalizationError, NumericalFailure) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(_finite(summary["result"]), sort_keys=True, allow_nan=False))
    return code


if __name__ == "__main__":
    sys.exit(main())
