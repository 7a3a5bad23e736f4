"""Command line frontend.

Exit codes: 0 success, 2 parse error, 3 analysis error, 4 soundness
violation found by simulate.
"""

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib.resources import files as resource_files
from pathlib import Path

import click

from ..analyzer import (
    AnalysisConfig,
    AnalysisError,
    _form_of,
    _loop_of,
    analyze,
)
from ..accel import AccelerationConfig
from ..jordan import ComplexEigen, JordanError, shape_coeff_functions
from ..matdom import GeneratorCapError
from ..numerics import Interval, QuadExt
from .parser import ParseError, parse
from .report import polyhedra_from_report, render_json, render_text, report_data
from .simulate import simulate

EXIT_PARSE = 2
EXIT_ANALYSIS = 3
EXIT_UNSOUND = 4


def _read_program(path, flatten=False):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(EXIT_PARSE)
    try:
        return parse(text, flatten_nested=flatten)
    except ParseError as e:
        click.echo(f"{path}: {e}", err=True)
        sys.exit(EXIT_PARSE)
    except AnalysisError as e:
        click.echo(f"{path}: {e}", err=True)
        sys.exit(EXIT_ANALYSIS)


def _parse_template(value):
    if value == "oct":
        return "oct"
    if value.startswith("log:"):
        try:
            ell = int(value[4:])
        except ValueError:
            ell = 0
        if ell >= 1:
            return ("log", ell)
    raise click.BadParameter("expected oct or log:<l> with l >= 1")


def _analysis_config(template, widen_delay, enum_cap, precision):
    accel = AccelerationConfig(
        template=_parse_template(template),
        enum_cap=enum_cap,
        precision=precision,
    )
    return AnalysisConfig(widen_delay=widen_delay, accel=accel)


def _run_analysis(program, cfg):
    try:
        return analyze(program, cfg)
    except (AnalysisError, JordanError, GeneratorCapError) as e:
        click.echo(f"analysis error: {e}", err=True)
        sys.exit(EXIT_ANALYSIS)


_shared_options = [
    click.option("--template", default="oct", show_default=True,
                 help="Template rows over the parameter space: oct or log:<l>."),
    click.option("--widen-delay", default=2, show_default=True, type=int,
                 help="Growths tolerated at a widening point before widening."),
    click.option("--enum-cap", default=4096, show_default=True, type=int,
                 help="Exact enumeration budget for crossing searches."),
    click.option("--precision", default=128, show_default=True, type=int,
                 help="Starting interval precision in bits."),
]


def _with_shared(f):
    for opt in reversed(_shared_options):
        f = opt(f)
    return f


@click.group()
@click.version_option(package_name="linaccel")
def main():
    """Polyhedral invariants for linear loops via acceleration."""


@main.command("analyze")
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@_with_shared
@click.option("--out", "fmt", type=click.Choice(["json", "text"]),
              default="text", show_default=True)
@click.option("--location", default=None,
              help="Restrict the report to one location.")
@click.option("--flatten-nested", is_flag=True,
              help="Fold one level of loop nesting into a single head over "
                   "a control variable (trades precision for acceleration).")
@click.option("--output", "-o", type=click.Path(dir_okay=False), default=None,
              help="Write the report to a file instead of stdout.")
def cmd_analyze(source, template, widen_delay, enum_cap, precision, fmt,
                location, flatten_nested, output):
    """Infer invariants for every program location."""
    program = _read_program(source, flatten=flatten_nested)
    if location is not None and location not in program.locations:
        click.echo(f"analysis error: no location named {location!r}", err=True)
        sys.exit(EXIT_ANALYSIS)
    cfg = _analysis_config(template, widen_delay, enum_cap, precision)
    result = _run_analysis(program, cfg)
    if fmt == "json":
        text = render_json(report_data(program, result, location))
    else:
        text = render_text(program, result, location)
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@main.command("simulate")
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@_with_shared
@click.option("--steps", default=1000, show_default=True, type=int,
              help="Total loop iteration budget per sampled run.")
@click.option("--samples", default=100, show_default=True, type=int,
              help="Random interior start points besides the vertices.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--check", "check_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Check against this JSON report instead of reanalyzing.")
def cmd_simulate(source, template, widen_delay, enum_cap, precision, steps,
                 samples, seed, check_path):
    """Run exact simulations against the computed invariants."""
    program = _read_program(source)
    if check_path is not None:
        try:
            data = json.loads(Path(check_path).read_text(encoding="utf-8"))
            invariants = polyhedra_from_report(data, program)
        except (ValueError, KeyError, OSError) as e:
            click.echo(f"analysis error: bad report: {e}", err=True)
            sys.exit(EXIT_ANALYSIS)
    else:
        cfg = _analysis_config(template, widen_delay, enum_cap, precision)
        invariants = _run_analysis(program, cfg).invariants
    try:
        violations = simulate(
            program, invariants, steps=steps, samples=samples, seed=seed
        )
    except ValueError as e:
        click.echo(f"analysis error: {e}", err=True)
        sys.exit(EXIT_ANALYSIS)
    total = len(program.initial.vertices) + samples
    if violations:
        for v in violations[:25]:
            click.echo(str(v), err=True)
        if len(violations) > 25:
            click.echo(f"... {len(violations) - 25} more", err=True)
        click.echo(f"unsound: {len(violations)} violation(s)", err=True)
        sys.exit(EXIT_UNSOUND)
    click.echo(f"ok: {total} starts, {steps} step budget, no violations")


def _scalar_str(v):
    if isinstance(v, Interval):
        return f"[{float(v.lo):.6g}, {float(v.hi):.6g}]"
    return str(v)


def _phi_str(phi, idx):
    head = f"m{idx + 1}(n) = "
    factors = []
    if phi.k:
        factors.append(f"C(n,{phi.k})")
    power = f"^(n-{phi.k})" if phi.k else "^n"
    lam = _scalar_str(phi.lam) if phi.lam is not None else f"sqrt({phi.lam_sq})"
    if phi.theta.kind == "pi":
        factors.append(f"(-{lam}){power}")
    else:
        factors.append(f"({lam}){power}")
    if phi.theta.kind == "rot":
        theta = phi.theta_interval(64)
        mid = (float(theta.lo) + float(theta.hi)) / 2
        trig = "sin" if phi.r else "cos"
        arg = f"(n-{phi.k})*{mid:.6g}" if phi.k else f"n*{mid:.6g}"
        factors.append(f"{trig}({arg})")
    return head + " * ".join(factors)


def _block_data(block):
    if isinstance(block.eigen, ComplexEigen):
        eig = block.eigen
        lam = eig.lam_interval(64)
        theta = eig.theta_interval(64)
        return {
            "kind": "complex",
            "re": str(eig.alpha),
            "im": str(eig.beta),
            "size": block.size,
            "modulus": f"{(float(lam.lo) + float(lam.hi)) / 2:.6g}",
            "angle": f"{(float(theta.lo) + float(theta.hi)) / 2:.6g}",
        }
    return {
        "kind": "real",
        "value": _scalar_str(block.eigen.value),
        "size": block.size,
    }


@main.command("jordan")
@click.argument("source", type=click.Path(exists=True, dir_okay=False))
@click.option("--loop", "loop_name", default=None,
              help="Dump only this loop (head name or head/branch).")
@click.option("--out", "fmt", type=click.Choice(["json", "text"]),
              default="text", show_default=True)
def cmd_jordan(source, loop_name, fmt):
    """Dump the real Jordan decomposition behind each accelerable loop."""
    program = _read_program(source)
    entries = []
    matched = False
    for t in program.transitions:
        if not t.accelerate:
            continue
        if loop_name is not None and loop_name not in (t.name, t.source):
            continue
        matched = True
        entry = {"name": t.name}
        try:
            form = _form_of(t, _loop_of(t))
        except JordanError as e:
            entry["error"] = str(e)
            entries.append(entry)
            continue
        entry["certification"] = form.certification
        entry["blocks"] = [_block_data(b) for b in form.blocks]
        entry["coefficients"] = [
            _phi_str(phi, i)
            for i, phi in enumerate(shape_coeff_functions(form))
        ]
        entry["R"] = [[str(c) for c in row] for row in form.R]
        entries.append(entry)
    if loop_name is not None and not matched:
        click.echo(f"analysis error: no loop named {loop_name!r}", err=True)
        sys.exit(EXIT_ANALYSIS)
    if fmt == "json":
        click.echo(json.dumps({"loops": entries}, indent=2))
        return
    for entry in entries:
        click.echo(f"loop {entry['name']}")
        if "error" in entry:
            click.echo(f"  no decomposition: {entry['error']}")
            continue
        click.echo(f"  certification: {entry['certification']}")
        for b in entry["blocks"]:
            if b["kind"] == "complex":
                click.echo(
                    f"  block complex({b['re']}, {b['im']}) size {b['size']}"
                    f"  |lam| ~ {b['modulus']}, angle ~ {b['angle']}"
                )
            else:
                click.echo(f"  block real({b['value']}) size {b['size']}")
        for line in entry["coefficients"]:
            click.echo(f"  {line}")
    if not entries:
        click.echo("no accelerable loops")


def _benchmark_dir(directory):
    if directory is not None:
        return Path(directory)
    return resource_files("linaccel") / "benchmarks"


def _bench_one(path, cfg):
    program = parse(path.read_text(encoding="utf-8"))
    result = analyze(program, cfg)
    return report_data(program, result), result.seconds


@main.command("bench")
@click.argument("directory", required=False,
                type=click.Path(exists=True, file_okay=False))
@_with_shared
@click.option("--filter", "name_filter", default=None,
              help="Run only benchmarks whose name contains this.")
@click.option("--jobs", default=1, show_default=True, type=int)
@click.option("--out", "fmt", type=click.Choice(["json", "text"]),
              default="text", show_default=True)
@click.option("--write-golden", default=None, type=click.Path(dir_okay=False),
              help="Record current reports as the golden expectations.")
def cmd_bench(directory, template, widen_delay, enum_cap, precision,
              name_filter, jobs, fmt, write_golden):
    """Analyze the benchmark corpus and diff against golden reports."""
    base = _benchmark_dir(directory)
    paths = sorted(
        (p for p in base.iterdir() if p.name.endswith(".loop")),
        key=lambda p: p.name,
    )
    if name_filter:
        paths = [p for p in paths if name_filter in p.name]
    cfg = _analysis_config(template, widen_delay, enum_cap, precision)
    golden = {}
    golden_path = base / "golden.json"
    try:
        golden = json.loads(golden_path.read_text(encoding="utf-8"))
    except (OSError, ValueError):
        pass
    try:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                outcomes = list(pool.map(lambda p: _bench_one(p, cfg), paths))
        else:
            outcomes = [_bench_one(p, cfg) for p in paths]
    except ParseError as e:
        click.echo(f"parse error: {e}", err=True)
        sys.exit(EXIT_PARSE)
    except (AnalysisError, JordanError, GeneratorCapError) as e:
        click.echo(f"analysis error: {e}", err=True)
        sys.exit(EXIT_ANALYSIS)
    rows = []
    failed = False
    for path, (data, seconds) in zip(paths, outcomes):
        name = path.name[: -len(".loop")]
        if name in golden:
            status = "pass" if golden[name] == data else "FAIL"
        else:
            status = "new"
        failed = failed or status == "FAIL"
        rows.append((name, data, seconds, status))
    if write_golden:
        payload = {name: data for name, data, _, _ in rows}
        Path(write_golden).write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
        click.echo(f"wrote golden expectations for {len(rows)} benchmarks")
        return
    if fmt == "json":
        payload = [
            {"name": n, "report": d, "seconds": round(s, 3), "status": st}
            for n, d, s, st in rows
        ]
        click.echo(json.dumps(payload, indent=2))
    else:
        for name, data, seconds, status in rows:
            spans = ", ".join(
                f"{l['name']}: N={'inf' if l['N'] is None else l['N']}"
                for l in data["loops"]
            )
            click.echo(f"{name:<12} {seconds:7.2f} s  {status:<5} {spans}")
        if not rows:
            click.echo("no benchmarks found")
    if failed:
        sys.exit(EXIT_ANALYSIS)


if __name__ == "__main__":
    main()
