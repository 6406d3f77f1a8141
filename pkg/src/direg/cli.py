"""Batch command-line front end.

Runs one registration per invocation and writes every artifact into the
output directory: the warped template (PGM + PNG), the deformed grid (CSV +
SVG), Jacobian-determinant and relaxation-function hot maps (CSV + PNG),
the convergence trace (CSV + PNG), and a metrics JSON.

Conventions for the delimited artifacts: indices (i, j) are 1-based with i
along x and j along y; rows are emitted row-major in j (j varies fastest).
Image files store column c = i-1 and row r = j-1, so the top image row is
the y = 0 edge of the domain.  All floating-point values are written with
17 significant digits.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np
from PIL import Image

from .fields import Deformation
from .grid import GridSpec, ScalarField
from .registration import (ConfigError, RegistrationResult, SolverConfig,
                           multilevel_register)
from .energy import PenaltyVariant
from .report import render_grid, render_hotmap, render_trace
from .synth import EXAMPLE_NAMES, ExampleSpec, generate

FLOAT_FMT = "%.17g"


class CliError(click.ClickException):
    exit_code = 2


def read_image(path: Path) -> ScalarField:
    """Read an 8-bit grayscale image (PGM or PNG) as a [0,255] field."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=float)
    except FileNotFoundError:
        raise CliError(f"input image not found: {path}")
    except Exception as exc:  # malformed file
        raise CliError(f"cannot read image {path}: {exc}")
    # file rows are y, columns are x; internal layout is [i, j] = [x, y]
    return ScalarField(GridSpec(*arr.T.shape), arr.T)


def write_image(field: ScalarField, path: Path) -> None:
    """Write a [0,255] field as an 8-bit grayscale image."""
    arr = np.clip(np.rint(field.values.T), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def _fmt(x: float) -> str:
    return FLOAT_FMT % x


def write_grid_csv(phi: Deformation, path: Path) -> None:
    p1, p2 = phi.phi.comp1, phi.phi.comp2
    with open(path, "w") as fh:
        fh.write("i,j,phi1,phi2\n")
        for i in range(p1.shape[0]):
            for j in range(p1.shape[1]):
                fh.write(f"{i + 1},{j + 1},{_fmt(p1[i, j])},{_fmt(p2[i, j])}\n")


def write_field_csv(field: ScalarField, path: Path) -> None:
    """One CSV row per i, columns running over j."""
    with open(path, "w") as fh:
        for row in field.values:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_trace_csv(result: RegistrationResult, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write("level,iter,lambda,data,reg_u,reg_phi,reg_f,constraint,"
                 "total,det_mean\n")
        for rec in result.trace:
            e = rec.energy
            fields = [str(rec.level), str(rec.iteration), _fmt(rec.lam),
                      _fmt(e.data), _fmt(e.reg_u), _fmt(e.reg_phi),
                      _fmt(e.reg_f), _fmt(e.constraint), _fmt(e.total),
                      _fmt(rec.det_mean)]
            fh.write(",".join(fields) + "\n")


def _json_value(x: float):
    if isinstance(x, float) and not np.isfinite(x):
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def write_metrics_json(result: RegistrationResult, path: Path) -> None:
    m = result.metrics
    payload = {
        "re_ssd": _json_value(m.re_ssd),
        "ssim": _json_value(m.ssim),
        "psnr": _json_value(m.psnr),
        "det_mean": _json_value(m.det_mean),
        "det_min": _json_value(m.det_min),
        "det_max": _json_value(m.det_max),
        "r_min": _json_value(m.r_min),
        "gfr": _json_value(m.gfr),
        "degraded": result.degraded,
    }
    if isinstance(m.re_ssd, float) and np.isnan(m.re_ssd):
        payload["re_ssd_reason"] = "identical inputs"
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


_CONFIG_FIELDS = {
    "tau1": float, "tau2": float, "tau3": float, "lambda1": float,
    "gamma": float, "rho": float, "levels": int, "max_iter": int,
    "eps_L": float, "eps_u": float, "variant": str,
    "correction_eps": float, "correction": bool,
}


def build_config(config_path: Path | None, overrides: dict) -> SolverConfig:
    """Merge a JSON config file with command-line overrides (flags win)."""
    settings: dict = {}
    if config_path is not None:
        try:
            with open(config_path) as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise CliError(f"config file not found: {config_path}")
        except json.JSONDecodeError as exc:
            raise CliError(f"malformed config {config_path}: {exc}")
        if not isinstance(raw, dict):
            raise CliError(f"config {config_path} must be a JSON object")
        for key, value in raw.items():
            if key not in _CONFIG_FIELDS:
                raise CliError(f"unknown config key {key!r}")
            try:
                settings[key] = _CONFIG_FIELDS[key](value)
            except (TypeError, ValueError):
                raise CliError(f"config key {key!r}: bad value {value!r}")
    settings.update({k: v for k, v in overrides.items() if v is not None})
    if isinstance(settings.get("variant"), str):
        try:
            settings["variant"] = PenaltyVariant(settings["variant"].lower())
        except ValueError:
            raise CliError(f"variant must be one of "
                           f"{[v.value for v in PenaltyVariant]}")
    try:
        return SolverConfig(**settings)
    except ConfigError as exc:
        raise CliError(str(exc))


@click.command(name="direg")
@click.option("--ref", "ref_path", type=click.Path(path_type=Path),
              help="Reference (fixed) image.")
@click.option("--template", "template_path", type=click.Path(path_type=Path),
              help="Template (moving) image.")
@click.option("--example", type=click.Choice(EXAMPLE_NAMES),
              help="Generate a built-in synthetic pair instead of reading files.")
@click.option("--size", type=int, default=64, show_default=True,
              help="Side length for --example (power of two, >= 32).")
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              help="JSON file with solver settings; flags override it.")
@click.option("--levels", type=int, default=None)
@click.option("--tau1", type=float, default=None)
@click.option("--tau2", type=float, default=None)
@click.option("--tau3", type=float, default=None)
@click.option("--lambda", "lambda1", type=float, default=None,
              help="Initial constraint penalty weight.")
@click.option("--gamma", type=float, default=None)
@click.option("--rho", type=float, default=None)
@click.option("--max-iter", type=int, default=None)
@click.option("--variant", type=click.Choice(["phi1", "phi2"]), default=None)
@click.option("--no-correction", is_flag=True,
              help="Disable grid-folding correction and the fold guard.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path),
              default=Path("direg_out"), show_default=True)
def main(ref_path, template_path, example, size, config_path, levels,
         tau1, tau2, tau3, lambda1, gamma, rho, max_iter, variant,
         no_correction, out_dir):
    """Register a template image onto a reference image."""
    have_files = ref_path is not None or template_path is not None
    if have_files == (example is not None):
        raise CliError("provide either --ref and --template, or --example")
    if have_files and (ref_path is None or template_path is None):
        raise CliError("--ref and --template must be given together")

    overrides = {
        "levels": levels, "tau1": tau1, "tau2": tau2, "tau3": tau3,
        "lambda1": lambda1, "gamma": gamma, "rho": rho, "max_iter": max_iter,
        "variant": variant,
    }
    if no_correction:
        overrides["correction"] = False
    cfg = build_config(config_path, overrides)

    # load all inputs before touching the output directory, so a bad input
    # never leaves partial artifacts behind
    if example is not None:
        try:
            T, R = generate(ExampleSpec(example, (size, size)))
        except ValueError as exc:
            raise CliError(str(exc))
    else:
        R = read_image(ref_path)
        T = read_image(template_path)
        if R.spec != T.spec:
            raise CliError(
                f"image sizes differ: reference {R.spec.m}x{R.spec.n}, "
                f"template {T.spec.m}x{T.spec.n}"
            )

    try:
        result = multilevel_register(R, T, cfg)
    except ConfigError as exc:
        raise CliError(str(exc))
    except Exception as exc:
        raise CliError(f"registration failed: {exc}")

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        write_image(result.warped, out_dir / "warped.pgm")
        write_image(result.warped, out_dir / "warped.png")
        write_grid_csv(result.phi_final, out_dir / "grid.csv")
        render_grid(result.phi_final, out_dir / "grid.svg")
        from .jacobian import jacobian_det
        det = jacobian_det(result.phi_final)
        write_field_csv(det, out_dir / "det.csv")
        write_field_csv(result.f_final, out_dir / "f.csv")
        render_hotmap(det, out_dir / "det.png", "jacobian determinant")
        render_hotmap(result.f_final, out_dir / "f.png", "relaxation function f")
        write_trace_csv(result, out_dir / "trace.csv")
        render_trace(result.trace, out_dir / "trace.png")
        write_metrics_json(result, out_dir / "metrics.json")
    except OSError as exc:
        raise CliError(f"cannot write artifacts to {out_dir}: {exc}")

    m = result.metrics
    status = " (degraded)" if result.degraded else ""
    re_ssd_txt = ("n/a" if isinstance(m.re_ssd, float) and np.isnan(m.re_ssd)
                  else f"{m.re_ssd:.4%}")
    click.echo(f"registered{status}: re_ssd={re_ssd_txt} ssim={m.ssim:.4f} "
               f"det_mean={m.det_mean:.4f} gfr={m.gfr:.4f} -> {out_dir}")


if __name__ == "__main__":
    main()
