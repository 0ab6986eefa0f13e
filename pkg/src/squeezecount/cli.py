"""Command-line interface.

Exit codes: 0 on success, 1 when an invariant or resource check fails
(verification failures, truncation leaks, cutoff ceilings), 2 for usage and
configuration errors (unknown keys, out-of-range parameters, bad files).
"""
from __future__ import annotations

import json
import pathlib
import sys

import click

from . import analytic, fock, inference, sweeps
from ._version import __version__
from .params import DeviceParams

_FAIL = 1
_USAGE = 2


def _die(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


@click.group()
@click.version_option(version=__version__, prog_name="squeezecount")
def main():
    """Photon-number sensing with a two-mode squeezer: sweeps, verification,
    classification."""


def _sweep_overrides(output, fmt, seed, tolerance, ceiling, engines):
    ov = {}
    if output is not None:
        ov["output"] = output
    if fmt is not None:
        ov["format"] = fmt
    if seed is not None:
        ov["seed"] = seed
    if tolerance is not None:
        ov["tolerance"] = tolerance
    if ceiling is not None:
        ov["cutoff_ceiling"] = ceiling
    if engines is not None:
        ov["engines"] = engines
    return ov


@main.command()
@click.option("--preset", "preset_name", type=str, default=None,
              help="Start from a named preset (see 'squeezecount presets').")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="Sweep configuration file (key = value lines).")
@click.option("--output", type=click.Path(), default=None,
              help="Output path (default sweep.csv / sweep.json).")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None)
@click.option("--seed", type=int, default=None)
@click.option("--tolerance", type=float, default=None,
              help="Convergence and cross-engine comparison tolerance.")
@click.option("--cutoff-ceiling", type=int, default=None)
@click.option("--engines", type=str, default=None,
              help="Comma-separated subset of: analytic, fock, gaussian.")
@click.option("--no-plot", is_flag=True, default=False,
              help="Skip rendering the PNG next to the output file.")
def sweep(preset_name, config_path, output, fmt, seed, tolerance,
          cutoff_ceiling, engines, no_plot):
    """Run a parameter sweep and write delimited output (plus a figure)."""
    if preset_name is None and config_path is None:
        _die(_USAGE, "sweep needs --preset or --config")
    try:
        if config_path is not None:
            try:
                text = pathlib.Path(config_path).read_text()
            except OSError as exc:
                _die(_USAGE, f"cannot read config {config_path}: {exc}")
            if preset_name is not None:
                text = f"preset = {preset_name}\n" + text
            spec = sweeps.parse_config(text)
            if output is not None:
                spec.output = output
            if fmt is not None:
                spec.format = fmt
            if seed is not None:
                spec.seed = seed
            if tolerance is not None:
                spec.tolerance = tolerance
            if cutoff_ceiling is not None:
                spec.cutoff_ceiling = cutoff_ceiling
            if engines is not None:
                spec.engines = tuple(t.strip() for t in engines.split(","))
            spec.__post_init__()
        else:
            spec = sweeps.preset_spec(
                preset_name,
                **_sweep_overrides(output, fmt, seed, tolerance,
                                   cutoff_ceiling, engines))
    except sweeps.ConfigError as exc:
        _die(_USAGE, str(exc))
    try:
        result = sweeps.run_sweep(spec)
    except fock.CutoffCeilingError as exc:
        _die(_FAIL, str(exc))
    except fock.TruncationLeakError as exc:
        _die(_FAIL, str(exc))
    out_path = spec.output or f"sweep.{spec.format}"
    text = sweeps.emit_csv(result) if spec.format == "csv" else sweeps.emit_json(result)
    try:
        pathlib.Path(out_path).write_text(text)
    except OSError as exc:
        _die(_USAGE, f"cannot write {out_path}: {exc}")
    click.echo(f"wrote {out_path} ({len(result.rows)} rows)")
    if not no_plot:
        from . import plotting
        png = str(pathlib.Path(out_path).with_suffix(".png"))
        plotting.render(result, png)
        click.echo(f"wrote {png}")


@main.command()
@click.option("--tolerance", type=float, default=None,
              help="Override every check's tolerance (0 fails everything).")
@click.option("--output", type=click.Path(), default=None,
              help="Write the JSON report here instead of stdout.")
@click.option("--cutoff-ceiling", type=int, default=512)
@click.option("--inject-squeezer-sign-flip", is_flag=True, default=False, hidden=True,
              help="Corrupt one squeezer factor to prove the battery bites.")
def verify(tolerance, output, cutoff_ceiling, inject_squeezer_sign_flip):
    """Run the cross-engine invariant battery; exit 1 on any failure."""
    if tolerance is not None and tolerance < 0:
        _die(_USAGE, f"tolerance must be >= 0, got {tolerance}")
    report = sweeps.run_verify(tolerance=tolerance,
                               inject_sign_flip=inject_squeezer_sign_flip,
                               ceiling=cutoff_ceiling)
    text = json.dumps(report, indent=2) + "\n"
    if output is not None:
        pathlib.Path(output).write_text(text)
        click.echo(f"wrote {output}")
    else:
        click.echo(text, nl=False)
    if not report["pass"]:
        sys.exit(_FAIL)


def _params_from_flags(ns, r, nalpha, eta1, eta2, dark1, dark2) -> DeviceParams:
    kw = {}
    if ns is not None:
        kw["ns"] = ns
    if r is not None:
        kw["r"] = r
    kw.update(nalpha=nalpha, eta1=eta1, eta2=eta2, dark1=dark1, dark2=dark2)
    return DeviceParams(**kw)


@main.command()
@click.option("--measured-mean", type=float, default=None,
              help="Sample mean of the per-shot coincidence product.")
@click.option("--shots-file", type=click.Path(), default=None,
              help="Shot record file written by the library.")
@click.option("--n-max", type=int, default=10, show_default=True)
@click.option("--confidence", type=float, default=0.95, show_default=True,
              help="Also report the shot budget per level at this confidence.")
@click.option("--ns", type=float, default=None, help="Squeezer mean photon gain.")
@click.option("--r", type=float, default=None, help="Squeeze parameter.")
@click.option("--nalpha", type=float, default=25.0, show_default=True)
@click.option("--eta1", type=float, default=1.0, show_default=True)
@click.option("--eta2", type=float, default=1.0, show_default=True)
@click.option("--dark1", type=float, default=0.0, show_default=True)
@click.option("--dark2", type=float, default=0.0, show_default=True)
def classify(measured_mean, shots_file, n_max, confidence, ns, r, nalpha,
             eta1, eta2, dark1, dark2):
    """Infer the input photon number from a measured coincidence mean."""
    if (measured_mean is None) == (shots_file is None):
        _die(_USAGE, "classify needs exactly one of --measured-mean / --shots-file")
    try:
        params = _params_from_flags(ns, r, nalpha, eta1, eta2, dark1, dark2)
    except ValueError as exc:
        _die(_USAGE, str(exc))
    shots = None
    if shots_file is not None:
        try:
            record = inference.load_shots(shots_file)
        except (OSError, ValueError) as exc:
            _die(_USAGE, f"cannot load shots: {exc}")
        measured_mean = record.product_mean
        shots = record.shots
    try:
        model = inference.build_classifier(params, n_max)
        res = inference.classify(model, measured_mean)
        budget = inference.required_shots(model, res.n_hat, confidence) \
            if n_max > 0 else None
    except ValueError as exc:
        _die(_USAGE, str(exc))
    payload = {
        "n_hat": res.n_hat,
        "margin": res.margin,
        "saturated": res.saturated,
        "measured_mean": measured_mean,
        "shots": shots,
        "required_shots": budget,
        "confidence": confidence,
        "params": params.as_dict(),
    }
    click.echo(json.dumps(payload, indent=2))


@main.command("dark-mean")
@click.option("--wavelength", type=float, required=True, help="Wavelength in meters.")
@click.option("--temperature", type=float, required=True, help="Temperature in kelvin.")
def dark_mean_cmd(wavelength, temperature):
    """Thermal occupation of one mode at the given wavelength/temperature."""
    try:
        value = analytic.dark_mean(wavelength, temperature)
    except ValueError as exc:
        _die(_USAGE, str(exc))
    click.echo(f"{value:.12g}")


@main.command()
def presets():
    """List sweep presets and what they reproduce."""
    width = max(len(n) for n in sweeps.PRESETS)
    for name in sorted(sweeps.PRESETS):
        click.echo(f"{name:<{width}}  {sweeps.PRESETS[name]['description']}")


if __name__ == "__main__":
    main()
