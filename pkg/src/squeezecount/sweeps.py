"""Parameter sweeps: config parsing, presets, engines, CSV/JSON output.

A sweep walks one or two axes over the device parameters (or the input
occupation, or the input kind), evaluates the requested engines at every
grid point, and emits one row per grid point per engine. Rows keep each
engine's numbers verbatim; when engines disagree beyond tolerance the later
row is flagged with the relative gap instead of anything being averaged.

Output is deterministic: grid points are assembled in grid order whatever
the executor does, floats are printed with %.12g, and the JSON metadata
echoes the resolved configuration plus its hash so a run can be replayed.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import analytic, fock
from ._version import __version__
from .gaussian import gaussian_signal_point
from .params import DeviceParams, InputState, SignalPoint

__all__ = [
    "ConfigError",
    "Axis",
    "SweepSpec",
    "SweepResult",
    "PRESETS",
    "preset_spec",
    "parse_config",
    "run_sweep",
    "emit_csv",
    "emit_json",
    "run_verify",
]

CSV_COLUMNS = ("na_mean", "nb_mean", "m_minus", "c_mean", "c_var", "snr",
               "g12", "cov_ab", "corr_ab")
ENGINES = ("analytic", "fock", "gaussian")
AXIS_VARIABLES = ("N", "nalpha", "ns", "r", "eta", "eta1", "eta2",
                  "dark", "dark1", "dark2", "input")
INPUT_KINDS = ("fock", "thermal", "coherent", "vacuum")


class ConfigError(ValueError):
    """Configuration problem, with 1-based line/column when it came from a
    config file."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, column {col or 1}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Axis:
    variable: str
    values: tuple

    def __post_init__(self):
        if self.variable not in AXIS_VARIABLES:
            raise ConfigError(f"unknown axis variable {self.variable!r}; "
                              f"one of {', '.join(AXIS_VARIABLES)}")
        if len(self.values) < 1:
            raise ConfigError(f"axis {self.variable} has no values")
        if self.variable == "input":
            bad = [v for v in self.values if v not in INPUT_KINDS]
            if bad:
                raise ConfigError(f"unknown input kind {bad[0]!r}")
        elif self.variable == "N":
            for v in self.values:
                if v < 0:
                    raise ConfigError(f"N axis value {v} is negative")


@dataclass
class SweepSpec:
    axis: Axis
    axis2: Axis | None = None
    params: DeviceParams = field(default_factory=DeviceParams)
    input_kind: str = "fock"
    input_value: float = 0.0
    engines: tuple[str, ...] = ("analytic",)
    seed: int = 0
    tolerance: float = fock.CONVERGE_TOL_DEFAULT
    cutoff_ceiling: int = fock.CUTOFF_CEILING_DEFAULT
    output: str | None = None
    format: str = "csv"
    preset: str | None = None
    plot_kind: str = "lines"

    def __post_init__(self):
        if self.input_kind not in INPUT_KINDS:
            raise ConfigError(f"unknown input kind {self.input_kind!r}")
        if not self.engines:
            raise ConfigError("engines must name at least one engine")
        for e in self.engines:
            if e not in ENGINES:
                raise ConfigError(f"unknown engine {e!r}; one of {', '.join(ENGINES)}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}; csv or json")
        if self.tolerance <= 0:
            raise ConfigError(f"tolerance must be positive: {self.tolerance}")
        if self.cutoff_ceiling < 8:
            raise ConfigError(f"cutoff ceiling too small: {self.cutoff_ceiling}")
        if self.input_value < 0:
            raise ConfigError(f"input occupation must be >= 0: {self.input_value}")
        self._check_compatibility()

    def _check_compatibility(self):
        kinds = set(self.axis.values) if self.axis.variable == "input" else None
        if kinds is None and self.axis2 is not None and self.axis2.variable == "input":
            kinds = set(self.axis2.values)
        if kinds is None:
            kinds = {self.input_kind}
        if "analytic" in self.engines and "coherent" in kinds:
            raise ConfigError("analytic engine has no closed form for coherent input")
        if "gaussian" in self.engines and "fock" in kinds:
            has_n_axis = self.axis.variable == "N" or \
                (self.axis2 is not None and self.axis2.variable == "N")
            top = max(self.axis.values) if self.axis.variable == "N" else \
                max(self.axis2.values) if has_n_axis else self.input_value
            if top > 0:
                raise ConfigError("gaussian engine cannot represent fock input with N > 0")

    def grid(self) -> list[tuple]:
        """Grid points in output order: axis outer, axis2 inner."""
        if self.axis2 is None:
            return [(v,) for v in self.axis.values]
        return [(v1, v2) for v1 in self.axis.values for v2 in self.axis2.values]

    def resolve_point(self, point: tuple) -> tuple[DeviceParams, InputState]:
        """Device parameters and input state at one grid point."""
        params = self.params
        kind = self.input_kind
        value = self.input_value
        axes = [self.axis] + ([self.axis2] if self.axis2 is not None else [])
        for ax, v in zip(axes, point):
            var = ax.variable
            if var == "N":
                value = v
            elif var == "input":
                kind = v
            elif var == "eta":
                params = params.replace(eta1=v, eta2=v)
            elif var == "dark":
                params = params.replace(dark1=v, dark2=v)
            else:
                params = params.replace(**{var: v})
        if kind == "fock" and value != int(value):
            raise ConfigError(f"fock input needs integer occupation, got {value}")
        state = InputState(kind=kind, value=float(value) if kind != "vacuum" else 0.0)
        return params, state

    def as_config_dict(self) -> dict:
        """Resolved configuration for the JSON metadata echo."""
        d = {
            "axis": {"variable": self.axis.variable, "values": list(self.axis.values)},
            "axis2": None if self.axis2 is None else
                {"variable": self.axis2.variable, "values": list(self.axis2.values)},
            "input": self.input_kind,
            "N": self.input_value,
            "params": self.params.as_dict(),
            "engines": list(self.engines),
            "seed": self.seed,
            "tolerance": self.tolerance,
            "cutoff_ceiling": self.cutoff_ceiling,
            "format": self.format,
        }
        if self.preset:
            d["preset"] = self.preset
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.as_config_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# config file parsing

_SCALAR_KEYS = ("N", "ns", "r", "nalpha", "eta", "eta1", "eta2",
                "dark", "dark1", "dark2", "seed", "tolerance", "cutoff_ceiling")
_ALL_KEYS = _SCALAR_KEYS + ("preset", "axis", "axis2", "input", "engines",
                            "output", "format", "plot")


def _parse_number(tok: str, line: int, col: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ConfigError(f"expected a number, got {tok!r}", line, col) from None


def _parse_axis_expr(text: str, line: int, col0: int) -> Axis:
    """`VAR : a .. b : count`, `VAR : a .. b` (unit step), or `VAR : [v, ...]`."""
    name, sep, rest = text.partition(":")
    if not sep:
        raise ConfigError("axis needs 'VARIABLE : values'", line, col0)
    name = name.strip()
    rest = rest.strip()
    col = col0 + text.index(rest) if rest else col0
    if name not in AXIS_VARIABLES:
        raise ConfigError(f"unknown axis variable {name!r}", line, col0)
    if rest.startswith("["):
        if not rest.endswith("]"):
            raise ConfigError("unterminated axis list", line, col)
        items = [t.strip() for t in rest[1:-1].split(",") if t.strip()]
        if name == "input":
            return Axis(name, tuple(items))
        return Axis(name, tuple(_parse_number(t, line, col) for t in items))
    if ".." in rest:
        lo, _, hi = rest.partition("..")
        hi, sep2, count = hi.partition(":")
        a = _parse_number(lo.strip(), line, col)
        b = _parse_number(hi.strip(), line, col)
        if sep2:
            n = int(_parse_number(count.strip(), line, col))
            if n < 2:
                raise ConfigError(f"axis needs at least 2 steps, got {n}", line, col)
            return Axis(name, tuple(np.linspace(a, b, n).tolist()))
        if name != "N":
            raise ConfigError("ranges without a step count are only for N", line, col)
        if a != int(a) or b != int(b) or b < a:
            raise ConfigError(f"bad N range {rest!r}", line, col)
        return Axis(name, tuple(float(v) for v in range(int(a), int(b) + 1)))
    raise ConfigError("axis values must be '[v, ...]' or 'a .. b [: count]'", line, col)


def parse_config(text: str) -> SweepSpec:
    """Parse `key = value` lines ('#' comments allowed) into a SweepSpec.
    A `preset = NAME` line pulls in that preset's settings; explicit keys
    override it regardless of order."""
    raw: dict[str, tuple[str, int, int]] = {}
    for ln, full in enumerate(text.splitlines(), start=1):
        stripped = full.split("#", 1)[0].rstrip()
        if not stripped.strip():
            continue
        if "=" not in stripped:
            raise ConfigError("expected 'key = value'", ln, 1)
        key, _, value = stripped.partition("=")
        k = key.strip()
        vcol = stripped.index("=") + 2 + (len(value) - len(value.lstrip()))
        v = value.strip()
        if k not in _ALL_KEYS:
            raise ConfigError(f"unknown key {k!r}", ln, 1 + (len(key) - len(key.lstrip())))
        if not v:
            raise ConfigError(f"key {k!r} has no value", ln, vcol)
        if k in raw:
            raise ConfigError(f"duplicate key {k!r}", ln, 1)
        raw[k] = (v, ln, vcol)
    merged: dict[str, tuple[str, int, int]] = {}
    preset_name = None
    if "preset" in raw:
        preset_name, ln, col = raw["preset"]
        if preset_name not in PRESETS:
            raise ConfigError(f"unknown preset {preset_name!r}; "
                              f"one of {', '.join(sorted(PRESETS))}", ln, col)
        for k, v in _preset_config(preset_name).items():
            merged[k] = (v, 0, 0)
    merged.update({k: v for k, v in raw.items() if k != "preset"})
    return _build_spec(merged, preset_name)


def _build_spec(entries: dict[str, tuple[str, int, int]], preset_name: str | None) -> SweepSpec:
    kw: dict = {"preset": preset_name}
    pkw: dict = {}
    for k, (v, ln, col) in entries.items():
        if k in ("axis", "axis2"):
            kw[k] = _parse_axis_expr(v, ln, col)
        elif k == "input":
            kw["input_kind"] = v
        elif k == "N":
            kw["input_value"] = _parse_number(v, ln, col)
        elif k == "engines":
            kw["engines"] = tuple(t.strip() for t in v.split(",") if t.strip())
        elif k == "seed":
            kw["seed"] = int(_parse_number(v, ln, col))
        elif k == "tolerance":
            kw["tolerance"] = _parse_number(v, ln, col)
        elif k == "cutoff_ceiling":
            kw["cutoff_ceiling"] = int(_parse_number(v, ln, col))
        elif k == "output":
            kw["output"] = v
        elif k == "format":
            kw["format"] = v
        elif k == "plot":
            kw["plot_kind"] = v
        elif k == "eta":
            x = _parse_number(v, ln, col)
            if not 0.0 <= x <= 1.0:
                raise ConfigError(f"transmissivity out of [0,1]: {x}", ln or None, col)
            pkw["eta1"] = pkw["eta2"] = x
        elif k == "dark":
            x = _parse_number(v, ln, col)
            if x < 0:
                raise ConfigError(f"dark occupation must be >= 0: {x}", ln or None, col)
            pkw["dark1"] = pkw["dark2"] = x
        else:
            x = _parse_number(v, ln, col)
            if k in ("eta1", "eta2") and not 0.0 <= x <= 1.0:
                raise ConfigError(f"transmissivity out of [0,1]: {x}", ln or None, col)
            if k in ("dark1", "dark2", "ns", "nalpha", "r") and x < 0:
                raise ConfigError(f"{k} must be >= 0: {x}", ln or None, col)
            pkw[k] = x
    if "axis" not in kw:
        raise ConfigError("config needs an 'axis' line")
    try:
        kw["params"] = DeviceParams(**pkw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return SweepSpec(**kw)


# ---------------------------------------------------------------------------
# presets reproducing the reference figures

PRESETS: dict[str, dict] = {
    "fig2": {
        "description": "coincidence mean and variance vs input occupation, "
                       "vacuum probe vs bright probe",
        "config": {"axis": "N : 0 .. 10", "axis2": "nalpha : [0, 25]",
                   "input": "fock", "ns": "2"},
    },
    "fig3": {
        "description": "coincidence mean over the (nalpha, ns) plane at N = 0",
        "config": {"axis": "nalpha : 0 .. 8 : 81", "axis2": "ns : 0.1 .. 8 : 80",
                   "N": "0", "plot": "heatmap"},
    },
    "fig4": {
        "description": "per-photon step size against the counting noise",
        "config": {"axis": "N : 0 .. 10", "ns": "2", "nalpha": "25",
                   "plot": "steps"},
    },
    "fig5": {
        "description": "arm-to-arm number correlation vs input occupation",
        "config": {"axis": "N : 0 .. 10", "ns": "2", "nalpha": "25"},
    },
    "fig6a": {
        "description": "coincidence mean vs N at several symmetric efficiencies",
        "config": {"axis": "N : 0 .. 10", "axis2": "eta : [0.25, 0.5, 0.75, 1.0]",
                   "ns": "2", "nalpha": "25"},
    },
    "fig6b": {
        "description": "SNR vs symmetric efficiency at N = 1 and N = 5",
        "config": {"axis": "eta : 0.1 .. 1.0 : 10", "axis2": "N : [1, 5]",
                   "ns": "2", "nalpha": "25"},
    },
    "fig7": {
        "description": "coincidence observables over the (eta1, eta2) plane",
        "config": {"axis": "eta1 : 0.1 .. 1.0 : 10", "axis2": "eta2 : 0.1 .. 1.0 : 10",
                   "N": "1", "ns": "2", "nalpha": "25", "plot": "heatmap"},
    },
    "fig8": {
        "description": "number-state input against a thermal input of the same mean",
        "config": {"axis": "N : 0 .. 10", "axis2": "input : [fock, thermal]",
                   "ns": "2", "nalpha": "25"},
    },
    "fig9a": {
        "description": "cross-correlation g12 vs N at several probe strengths",
        "config": {"axis": "N : 0 .. 10", "axis2": "nalpha : [0, 1, 4, 25]",
                   "ns": "2"},
    },
    "fig9b": {
        "description": "cross-correlation g12 vs probe strength at N = 0, 1",
        "config": {"axis": "nalpha : 0 .. 1000 : 101", "axis2": "N : [0, 1]",
                   "ns": "2"},
    },
    "fig10a": {
        "description": "thermal-input coincidence mean vs N under loss and dark counts",
        "config": {"axis": "N : 0 .. 10", "axis2": "eta : [0.25, 0.5, 0.75, 1.0]",
                   "input": "thermal", "ns": "2", "nalpha": "25",
                   "dark": f"{analytic.dark_mean(9.7e-6, 300.0):.12g}"},
    },
    "fig10b": {
        "description": "SNR vs efficiency for thermal input with dark counts",
        "config": {"axis": "eta : 0.1 .. 1.0 : 10", "axis2": "N : [1, 5]",
                   "input": "thermal", "ns": "2", "nalpha": "25",
                   "dark": f"{analytic.dark_mean(9.7e-6, 300.0):.12g}"},
    },
}
PRESETS["fig6"] = {"description": PRESETS["fig6a"]["description"] + " (alias of fig6a)",
                   "config": dict(PRESETS["fig6a"]["config"])}
PRESETS["fig9"] = {"description": PRESETS["fig9a"]["description"] + " (alias of fig9a)",
                   "config": dict(PRESETS["fig9a"]["config"])}
PRESETS["fig10"] = {"description": PRESETS["fig10a"]["description"] + " (alias of fig10a)",
                    "config": dict(PRESETS["fig10a"]["config"])}


def _preset_config(name: str) -> dict[str, str]:
    return dict(PRESETS[name]["config"])


def preset_spec(name: str, **overrides) -> SweepSpec:
    """SweepSpec for a preset; keyword overrides replace preset keys."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; one of {', '.join(sorted(PRESETS))}")
    entries = {k: (v, 0, 0) for k, v in _preset_config(name).items()}
    for k, v in overrides.items():
        if v is None:
            continue
        entries[k] = (str(v), 0, 0)
    return _build_spec(entries, name)


# ---------------------------------------------------------------------------
# engines

def _point_from_moments(m: fock.MomentSet, N: float) -> SignalPoint:
    c_var = m.na2nb2 - m.nanb**2
    var_a = m.na2 - m.na**2
    var_b = m.nb2 - m.nb**2
    cov = m.nanb - m.na * m.nb
    corr = cov / math.sqrt(var_a * var_b) if var_a > 0 and var_b > 0 else 0.0
    return SignalPoint(
        N=N, c_mean=m.nanb, c_var=max(c_var, 0.0),
        snr=m.nanb / math.sqrt(c_var) if c_var > 0 else float("nan"),
        g12=m.nanb / (m.na * m.nb) if m.na * m.nb > 0 else float("nan"),
        na_mean=m.na, nb_mean=m.nb, m_minus=m.na - m.nb,
        cov_ab=cov, corr_ab=corr,
    )


def _eval_engine(engine: str, params: DeviceParams, state: InputState,
                 tolerance: float, ceiling: int) -> SignalPoint:
    if engine == "analytic":
        return analytic.signal_point(params, state)
    if engine == "gaussian":
        return gaussian_signal_point(params, state, N=state.value)
    mset, _ = fock.converge(params, state, tol=tolerance, ceiling=ceiling)
    return _point_from_moments(mset, N=state.value)


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[dict]

    def column(self, name: str, engine: str | None = None) -> list:
        rows = self.rows if engine is None else \
            [r for r in self.rows if r["engine"] == engine]
        return [r[name] for r in rows]


def _flags_for(engine: str, point: SignalPoint, base: SignalPoint | None,
               tolerance: float) -> str:
    flags = []
    if engine == "gaussian":
        flags.append("variance-not-available")
    if base is not None:
        for col in CSV_COLUMNS:
            a = getattr(base, _COL_ATTR[col])
            b = getattr(point, _COL_ATTR[col])
            if math.isnan(a) or math.isnan(b):
                continue
            # unit absolute floor so a true zero against rounding noise
            # does not read as total disagreement
            gap = abs(a - b) / max(abs(a), abs(b), 1.0)
            if gap > tolerance:
                flags.append(f"disagree:{col}:rel={gap:.3g}:other={a:.12g}")
    return ";".join(flags)


_COL_ATTR = {"na_mean": "na_mean", "nb_mean": "nb_mean", "m_minus": "m_minus",
             "c_mean": "c_mean", "c_var": "c_var", "snr": "snr", "g12": "g12",
             "cov_ab": "cov_ab", "corr_ab": "corr_ab"}


def run_sweep(spec: SweepSpec, workers: int = 4) -> SweepResult:
    """Evaluate every engine at every grid point. Points run in a thread
    pool; rows come out in grid order with engines in spec order."""
    points = spec.grid()

    def compute(point):
        params, state = spec.resolve_point(point)
        return [_eval_engine(e, params, state, spec.tolerance, spec.cutoff_ceiling)
                for e in spec.engines]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(compute, points))

    rows = []
    for point, per_engine in zip(points, results):
        base = per_engine[0]
        for k, (engine, sp) in enumerate(zip(spec.engines, per_engine)):
            row = {"axis": point[0]}
            if spec.axis2 is not None:
                row["axis2"] = point[1]
            for col in CSV_COLUMNS:
                row[col] = getattr(sp, _COL_ATTR[col])
            row["engine"] = engine
            row["flags"] = _flags_for(engine, sp, base if k > 0 else None,
                                      spec.tolerance)
            rows.append(row)
    return SweepResult(spec=spec, rows=rows)


# ---------------------------------------------------------------------------
# serialization

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.12g}"


def emit_csv(result: SweepResult) -> str:
    two_d = result.spec.axis2 is not None
    header = ["axis"] + (["axis2"] if two_d else []) + list(CSV_COLUMNS) \
        + ["engine", "flags"]
    lines = [",".join(header)]
    for row in result.rows:
        cells = [_fmt(row["axis"])]
        if two_d:
            cells.append(_fmt(row["axis2"]))
        cells += [_fmt(row[c]) for c in CSV_COLUMNS]
        cells += [row["engine"], row["flags"]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def emit_json(result: SweepResult) -> str:
    two_d = result.spec.axis2 is not None
    cols = ["axis"] + (["axis2"] if two_d else []) + list(CSV_COLUMNS) \
        + ["engine", "flags"]
    columns = {}
    for c in cols:
        vals = [row[c] for row in result.rows]
        columns[c] = [None if isinstance(v, float) and math.isnan(v) else v
                      for v in vals]
    payload = {
        "columns": columns,
        "metadata": {
            "tool": "squeezecount",
            "version": __version__,
            "config": result.spec.as_config_dict(),
            "config_hash": result.spec.config_hash(),
            "seed": result.spec.seed,
            "rows": len(result.rows),
        },
    }
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def load_json(text: str) -> dict:
    return json.loads(text)


# ---------------------------------------------------------------------------
# invariant battery

def _max_rel(pairs) -> float:
    worst = 0.0
    for got, want in pairs:
        worst = max(worst, abs(got - want) / max(abs(want), 1e-300))
    return worst


def run_verify(tolerance: float | None = None, inject_sign_flip: bool = False,
               ceiling: int = 512) -> dict:
    """Cross-engine and closed-form identity battery.

    Every check reports its worst relative deviation over a small grid, so a
    zero tolerance fails all of them. `inject_sign_flip` flips the sign of
    one factor of the Fock-space squeezer (an inconsistent unitary) to prove
    the battery actually exercises that path."""
    checks = []
    old = fock._INJECT_SIGN_FLIP
    fock._INJECT_SIGN_FLIP = bool(inject_sign_flip)

    def _converge_or_err(p, state, **kw):
        # a numeric route that cannot even converge is a failing check, not
        # a crash; the caller turns the message into an error row
        try:
            m, _ = fock.converge(p, state, ceiling=ceiling, **kw)
            return m, None
        except (fock.CutoffCeilingError, fock.TruncationLeakError) as exc:
            return None, f"{type(exc).__name__}: {exc}"

    try:
        # every check compares two independent computation routes, so the
        # measured deviation is a genuine float residual, never exactly zero
        grid = [(DeviceParams(ns=ns, nalpha=na), n)
                for ns in (0.5, 2.0) for na in (1.0, 4.0) for n in (0, 2)]
        conv, grid_err = {}, None
        for p, n in grid:
            m, grid_err = _converge_or_err(p, InputState.fock(n), tol=1e-10)
            if grid_err is not None:
                grid_err = f"ns={p.ns} nalpha={p.nalpha} N={n}: {grid_err}"
                break
            conv[(p, n)] = m

        gridsz = f"{len(grid)} points"
        if grid_err is None:
            pairs_int, pairs_sig, pairs_var, pairs_snr, pairs_g12 = [], [], [], [], []
            for (p, n), m in conv.items():
                na, nb, _ = analytic.intensities(p, n)
                pairs_int += [(m.na, na), (m.nb, nb)]
                pairs_sig.append((m.nanb, analytic.correlation_signal(p, n)))
                var = m.na2nb2 - m.nanb**2
                pairs_var.append((var, analytic.correlation_variance(p, n)))
                # negative variance means the numeric route is broken; report
                # a flat mismatch instead of crashing the battery
                snr_f = m.nanb / math.sqrt(var) if var > 0 else 0.0
                pairs_snr.append((snr_f, analytic.snr(p, n)))
                pairs_g12.append((m.nanb / (m.na * m.nb), analytic.g12(p, n)))
            checks.append(("intensity-moments", gridsz, _max_rel(pairs_int), 1e-8, None))
            checks.append(("pair-signal-equivalence", gridsz, _max_rel(pairs_sig), 1e-8, None))
            checks.append(("variance-equivalence", gridsz, _max_rel(pairs_var), 1e-8, None))
            checks.append(("snr-lossless-identity", gridsz, _max_rel(pairs_snr), 1e-8, None))
            checks.append(("g12-ratio-identity", gridsz, _max_rel(pairs_g12), 1e-8, None))
        else:
            for name in ("intensity-moments", "pair-signal-equivalence",
                         "variance-equivalence", "snr-lossless-identity",
                         "g12-ratio-identity"):
                checks.append((name, gridsz, math.inf, 1e-8, grid_err))

        pairs, err = [], None
        for ns in (0.5, 1.0, 2.0):
            p = DeviceParams(ns=ns, nalpha=0.0)
            m, err = _converge_or_err(p, InputState.vacuum(), tol=1e-10)
            if err is not None:
                break
            pairs.append((m.nanb / (m.na * m.nb), 2.0 + 1.0 / ns))
        checks.append(("g12-vacuum-limit", "3 points",
                       math.inf if err else _max_rel(pairs), 1e-9, err))

        pairs, err = [], None
        p0 = DeviceParams(ns=2.0, nalpha=4.0)
        for e1, e2 in ((0.25, 0.5), (0.75, 1.0)):
            p = p0.replace(eta1=e1, eta2=e2)
            for n in (0, 2):
                m, err = _converge_or_err(p, InputState.fock(n), tol=1e-9,
                                          keys=("nanb",))
                if err is not None:
                    break
                pairs.append((m.nanb, e1 * e2 * analytic.correlation_signal(p0, n)))
            if err is not None:
                break
        checks.append(("loss-scaling", "4 points",
                       math.inf if err else _max_rel(pairs), 1e-8, err))

        pairs, err = [], None
        for mean in (0.5, 1.0):
            p = DeviceParams(ns=2.0, nalpha=1.0)
            st = InputState.thermal(mean)
            m, err = _converge_or_err(p, st, tol=1e-8, keys=("na", "nb", "nanb"))
            if err is not None:
                break
            mom = analytic.channel_moments(p, st)
            pairs += [(m.na, mom["na"]), (m.nb, mom["nb"]), (m.nanb, mom["nanb"])]
        checks.append(("thermal-branch-mixing", "2 points",
                       math.inf if err else _max_rel(pairs), 1e-7, err))

        pairs = []
        for mean in (0.0, 1.0):
            p = DeviceParams(ns=2.0, nalpha=1.0, eta1=0.7, eta2=0.9)
            st = InputState.thermal(mean) if mean > 0 else InputState.vacuum()
            g = gaussian_signal_point(p, st, N=mean)
            mom = analytic.channel_moments(p, st)
            pairs += [(g.na_mean, mom["na"]), (g.nb_mean, mom["nb"]),
                      (g.c_mean, mom["nanb"])]
        checks.append(("gaussian-agreement", "2 points", _max_rel(pairs), 1e-10, None))
    finally:
        fock._INJECT_SIGN_FLIP = old

    report_checks = []
    all_pass = True
    for name, gridsz, dev, default_tol, err in checks:
        tol = default_tol if tolerance is None else tolerance
        # strict: tolerance=0 must fail even a bit-exact route pair
        ok = bool(dev < tol)
        all_pass = all_pass and ok
        entry = {
            "invariant": name, "grid": gridsz,
            "max_deviation": dev if math.isfinite(dev) else None,
            "tolerance": tol, "pass": ok,
        }
        if err is not None:
            entry["error"] = err
        report_checks.append(entry)
    return {"pass": all_pass, "sign_flip_injected": bool(inject_sign_flip),
            "checks": report_checks}
