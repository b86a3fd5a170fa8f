"""Experiment configuration files and CSV input/output.

Experiment configs are TOML. Every key is checked against the schema below
and unknown keys are rejected with their dotted path::

    n = 1000                      # required
    trials = 2000                 # required
    base_seed = 0
    bound_variant = "second_moment_only"   # or "full"
    variance_mode = "known"       # or "plug_in"
    p_grid = [1.0]                # optional, "full" variant only
    pp_grid = [2.0, 3.0, 4.0]     # optional, "full" variant only
    lambda_override = 0.01        # optional
    check_coverage = true         # simulate: exit 3 when the coverage test fails

    [confidence]
    delta = 0.05
    mu = 0.25

    [generator]                   # required
    family = "student_t"
    d = 20
    mean_shift = 0.0              # scalar or list of length d
    [generator.params]
    df = 3.0

    [[estimators]]                # default: thresholded + empirical
    kind = "thresholded"
    [[estimators]]
    kind = "mom"
    blocks = 10

    [mixed_moments]               # optional, keyed by exponent
    "2.0" = 5.0

Bound configs (``bound --config``) are flat TOML with keys ``mu``,
``delta``, ``v``, ``T``, ``n``, ``variant``, ``mean_norm``, ``p_grid``,
``pp_grid`` and tables ``[norm_moments]`` / ``[mixed_moments]``.
"""

import csv
import io
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .bounds import ConfidenceSpec
from .distributions import GeneratorSpec
from .harness import EstimatorConfig, ExperimentSpec

__all__ = [
    "ConfigError",
    "CsvFormatError",
    "load_toml",
    "parse_experiment",
    "load_experiment",
    "parse_bound_config",
    "read_csv_matrix",
    "write_csv_matrix",
    "fmt",
]

_TOP_KEYS = {
    "n", "trials", "base_seed", "bound_variant", "variance_mode", "p_grid", "pp_grid",
    "lambda_override", "check_coverage", "confidence", "generator", "estimators", "mixed_moments",
}
_BOUND_KEYS = {"mu", "delta", "v", "T", "n", "variant", "mean_norm", "p_grid", "pp_grid", "norm_moments", "mixed_moments"}


class ConfigError(ValueError):
    """Schema violation; ``key`` is the dotted path of the offending entry."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class CsvFormatError(ValueError):
    pass


def fmt(x: float) -> str:
    """Shortest decimal string that round-trips to the same double."""
    return repr(float(x))


def load_toml(path) -> dict:
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("<file>", f"invalid TOML: {exc}") from None


def _reject_unknown(table, allowed, prefix):
    for key in table:
        if key not in allowed:
            path = f"{prefix}.{key}" if prefix else key
            raise ConfigError(path, "unknown key")


def _num(table, key, prefix, default=None, required=False, kind=float):
    path = f"{prefix}.{key}" if prefix else key
    if key not in table:
        if required:
            raise ConfigError(path, "missing required key")
        return default
    val = table[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(path, f"expected a number, got {val!r}")
    if kind is int:
        if isinstance(val, float) and not val.is_integer():
            raise ConfigError(path, f"expected an integer, got {val!r}")
        return int(val)
    return float(val)


def _grid(table, key, prefix=""):
    if key not in table:
        return None
    path = f"{prefix}.{key}" if prefix else key
    val = table[key]
    if not isinstance(val, list) or not val:
        raise ConfigError(path, "expected a non-empty list of numbers")
    out = []
    for i, p in enumerate(val):
        if isinstance(p, bool) or not isinstance(p, (int, float)):
            raise ConfigError(f"{path}[{i}]", f"expected a number, got {p!r}")
        out.append(float(p))
    return tuple(out)


def _moment_table(table, key):
    if key not in table:
        return {}
    if not isinstance(table[key], dict):
        raise ConfigError(key, "expected a table keyed by exponent")
    out = {}
    for k, v in table[key].items():
        try:
            p = float(k)
        except ValueError:
            raise ConfigError(f"{key}.{k}", "exponent keys must be numbers") from None
        out[p] = _num(table[key], k, key)
    return out


def _generator(table) -> GeneratorSpec:
    if "generator" not in table:
        raise ConfigError("generator", "missing required section")
    g = table["generator"]
    if not isinstance(g, dict):
        raise ConfigError("generator", "expected a table")
    _reject_unknown(g, {"family", "d", "params", "mean_shift"}, "generator")
    if "family" not in g:
        raise ConfigError("generator.family", "missing required key")
    d = _num(g, "d", "generator", required=True, kind=int)
    params = g.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("generator.params", "expected a table")
    try:
        return GeneratorSpec(family=g["family"], d=d, params=dict(params), mean_shift=g.get("mean_shift", 0.0))
    except (ValueError, TypeError) as exc:
        raise ConfigError("generator", str(exc)) from None


def _estimators(table):
    if "estimators" not in table:
        return (EstimatorConfig("thresholded"), EstimatorConfig("empirical"))
    items = table["estimators"]
    if not isinstance(items, list) or not items:
        raise ConfigError("estimators", "expected a non-empty array of tables")
    out = []
    for i, item in enumerate(items):
        path = f"estimators[{i}]"
        if not isinstance(item, dict):
            raise ConfigError(path, "expected a table")
        _reject_unknown(item, {"kind", "blocks", "fraction"}, path)
        if "kind" not in item:
            raise ConfigError(f"{path}.kind", "missing required key")
        try:
            out.append(
                EstimatorConfig(
                    kind=item["kind"],
                    blocks=_num(item, "blocks", path, kind=int),
                    fraction=_num(item, "fraction", path),
                )
            )
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(path, str(exc)) from None
    return tuple(out)


def parse_experiment(table: dict):
    """Build ``(ExperimentSpec, options)`` from a parsed config table."""
    _reject_unknown(table, _TOP_KEYS, "")
    conf = table.get("confidence", {})
    if not isinstance(conf, dict):
        raise ConfigError("confidence", "expected a table")
    _reject_unknown(conf, {"delta", "mu"}, "confidence")
    try:
        confidence = ConfidenceSpec(
            delta=_num(conf, "delta", "confidence", 0.05), mu=_num(conf, "mu", "confidence", 0.25)
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("confidence", str(exc)) from None
    generator = _generator(table)
    check = table.get("check_coverage", False)
    if not isinstance(check, bool):
        raise ConfigError("check_coverage", "expected true or false")
    for key in ("bound_variant", "variance_mode"):
        if key in table and not isinstance(table[key], str):
            raise ConfigError(key, "expected a string")
    try:
        spec = ExperimentSpec(
            generator=generator,
            n=_num(table, "n", "", required=True, kind=int),
            trials=_num(table, "trials", "", required=True, kind=int),
            confidence=confidence,
            estimators=_estimators(table),
            bound_variant=table.get("bound_variant", "second_moment_only"),
            p_grid=_grid(table, "p_grid"),
            pp_grid=_grid(table, "pp_grid"),
            mixed_moments=_moment_table(table, "mixed_moments"),
            base_seed=_num(table, "base_seed", "", 0, kind=int),
            variance_mode=table.get("variance_mode", "known"),
            lambda_override=_num(table, "lambda_override", ""),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("<root>", str(exc)) from None
    return spec, {"check_coverage": check}


def load_experiment(path):
    return parse_experiment(load_toml(path))


def parse_bound_config(table: dict) -> dict:
    """Validate a bound config table; returns plain values (None when absent)."""
    _reject_unknown(table, _BOUND_KEYS, "")
    out = {k: _num(table, k, "") for k in ("mu", "delta", "v", "T", "mean_norm")}
    out["n"] = _num(table, "n", "", kind=int)
    variant = table.get("variant")
    if variant is not None and not isinstance(variant, str):
        raise ConfigError("variant", "expected a string")
    out["variant"] = variant
    out["p_grid"] = _grid(table, "p_grid")
    out["pp_grid"] = _grid(table, "pp_grid")
    out["norm_moments"] = _moment_table(table, "norm_moments")
    out["mixed_moments"] = _moment_table(table, "mixed_moments")
    return out


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def read_csv_matrix(path) -> np.ndarray:
    """Read a numeric CSV into an (n, d) array.

    A single header row is skipped when its first row contains a
    non-numeric cell. Errors name the 1-based line number.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise CsvFormatError("CSV contains no data rows")
    width = len(rows[0][1])
    data = []
    for line, row in rows:
        if len(row) != width:
            raise CsvFormatError(f"row {line}: expected {width} columns, got {len(row)}")
        vals = []
        for j, cell in enumerate(row, start=1):
            try:
                x = float(cell)
            except ValueError:
                raise CsvFormatError(f"row {line}, column {j}: non-numeric cell {cell!r}") from None
            if not math.isfinite(x):
                raise CsvFormatError(f"row {line}, column {j}: non-finite value {cell!r}")
            vals.append(x)
        data.append(vals)
    return np.array(data, dtype=float)


def write_csv_matrix(matrix, header=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    for row in np.atleast_2d(np.asarray(matrix, dtype=float)):
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()
