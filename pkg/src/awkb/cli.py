"""Command-line front end.

Exit codes: 0 success, 2 configuration or problem-specification error,
3 numerical tolerance failure, 4 internal error.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import ScenarioConfig, default_config
from .errors import (
    AwkbError,
    BranchError,
    ConvergenceError,
    SingularityError,
    ToleranceError,
)
from .scenarios import RUNNERS, ScenarioResult, Table

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4
NUMERIC_ERRORS = (ToleranceError, ConvergenceError, SingularityError, BranchError)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else None
    if isinstance(v, complex):
        return {"re": _jsonable(v.real), "im": _jsonable(v.imag)}
    return v


def render_csv(table: Table, preamble: dict) -> str:
    buf = io.StringIO()
    for k in sorted(preamble):
        buf.write(f"# {k}: {json.dumps(_jsonable(preamble[k]), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def render_json(table: Table, preamble: dict) -> str:
    doc = {"metadata": _jsonable(preamble), "columns": table.columns, "data": _jsonable(table.rows)}
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def write_outputs(result: ScenarioResult, cfg: ScenarioConfig, out_dir: Path, fmt: str, seedless: bool):
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for table in result.tables:
        preamble = {"command": result.command, "table": table.name, "version": __version__}
        preamble.update(table.metadata)
        text = render_csv(table, preamble) if fmt == "csv" else render_json(table, preamble)
        name = f"{table.name}.{fmt}"
        data = text.encode()
        (out_dir / name).write_bytes(data)
        files.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "rows": len(table.rows)})
    manifest = {
        "tool": "awkb",
        "version": __version__,
        "command": result.command,
        "config": cfg.to_dict(),
        "methods": result.methods,
        "summary": result.summary,
        "files": files,
    }
    if not seedless:
        manifest["timings"] = result.timings
        manifest["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    (out_dir / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return files


def _load_config(command, path):
    if path is None:
        return default_config(command)
    p = Path(path)
    return ScenarioConfig.from_json(p.read_text(), source=str(p))


def run_command(command, config_path, out, fmt, seedless, n_max=None):
    cfg = _load_config(command, config_path)
    fmt = fmt or cfg.output["format"]
    out_dir = Path(out or cfg.output["path"] or f"awkb-{command}")
    runner = RUNNERS[command]
    result = runner(cfg, n_max) if command == "quantize" else runner(cfg)
    files = write_outputs(result, cfg, out_dir, fmt, seedless)
    return result, files, out_dir


def _common(f):
    f = click.option("--seedless", is_flag=True, help="Omit timestamps and timings from the manifest.")(f)
    f = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default=None, help="Output format.")(f)
    f = click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")(f)
    f = click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="Scenario JSON.")(f)
    return f


@click.group()
@click.version_option(__version__, prog_name="awkb")
def cli():
    """Alternating-WKB scenarios: wavefunctions, series, scattering, quantization."""


def _make(command, doc):
    @_common
    def cmd(config_path, out, fmt, seedless, **kw):
        _, files, out_dir = run_command(command, config_path, out, fmt, seedless, **kw)
        for f in files:
            click.echo(str(out_dir / f["path"]))
        click.echo(str(out_dir / "manifest.json"))

    cmd.__doc__ = doc
    return cmd


for _name, _doc in (
    ("bound", "Bound-state wavefunctions per method with pairwise error metrics."),
    ("series", "WKB series terms and asymptoticity flags."),
    ("scatter", "Centrifugal scattering wavefunctions against the Riccati-Bessel solution."),
    ("convergence", "Nested-series deviation from the ODE oracle, by order and coupling scale."),
    ("contour-check", "Winding and reflection contour terms on three paths."),
):
    cli.command(_name)(_make(_name, _doc))

_quantize = _make("quantize", "Eigenenergies and contour diagnostics for levels 0..n_max.")
_quantize = click.option("--n-max", type=int, default=None, help="Highest level (overrides config).")(_quantize)
cli.command("quantize")(_quantize)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="awkb", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_CONFIG
    except click.exceptions.Abort:
        return EXIT_INTERNAL
    except NUMERIC_ERRORS as exc:
        click.echo(f"numerical failure: {exc}", err=True)
        return EXIT_NUMERIC
    except (AwkbError, OSError) as exc:
        click.echo(f"configuration error: {exc}", err=True)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - top-level guard maps to exit code 4
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return EXIT_INTERNAL
    return EXIT_OK


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
