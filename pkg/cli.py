#!/usr/bin/env python3
"""
Command-line runner for H2 analysis, parameter studies and the verification suite.

Subcommands:
    analyze   certify an H2 bound for a model file or the consensus example
    contour   best gamma over a grid of spectral intervals
    span      certified bound against Monte-Carlo estimates over p
    verify    oracle suite on small instances
    spectrum  Laplacian spectra and interval check of a graph family

Exit codes: 0 success, 1 usage or parse error, 2 no certificate, 3 verification failure.
"""
import argparse
import csv
import json
import logging
import sys
from contextlib import contextmanager
from dataclasses import replace
from typing import Optional

from pydantic import BaseModel, ValidationError
from rich.console import Console
from rich.table import Table

from checks import all_checks, run_checks
from decomposable_model import SwitchedMas, consensus_example
from experiments import ContourConfig, SpanConfig, run_contour, run_span
from experiments.span import default_p_grid
from graphs import GraphError, GraphFamily, check_probability, circulant_graph, spectral_bounds, validate_family
from lmi_analysis import (
    NoCertificate,
    SpectralRadiusError,
    format_certificate,
    solve_h2_bound,
    verify_certificate_lifting,
)
from model_io import ModelFormatError, dump_family, load_model, write_spectra_csv
from montecarlo import McConfig, write_samples_csv, write_summary_csv
from sdp_core import SolverOptions, write_trace_csv
from settings import TOOL_NAME, TOOL_VERSION, configure_logging, console, get_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NO_CERTIFICATE = 2
EXIT_VERIFY_FAILED = 3


class UsageError(Exception):
    pass


class ExperimentConfig(BaseModel):
    """Provenance written at the top of every CSV."""
    command: str
    parameters: dict
    tool: str = TOOL_NAME
    version: str = TOOL_VERSION

    def header_lines(self) -> list[str]:
        return [
            f"# {self.tool} {self.version}",
            f"# command: {self.command}",
            f"# config: {json.dumps(self.parameters, sort_keys=True)}",
        ]


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; that code means "no certificate" here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        console.print(f"[red]Error:[/red] {message}")
        sys.exit(EXIT_USAGE)


@contextmanager
def _output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as handle:
            yield handle


def _write_header(handle, config: ExperimentConfig) -> None:
    for line in config.header_lines():
        handle.write(line + "\n")


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


# --- ANALYZE ---

def cmd_analyze(args) -> int:
    if args.model:
        description = load_model(args.model)
        if args.lo is not None or args.hi is not None:
            description = replace(
                description,
                lambda_lo=args.lo if args.lo is not None else description.lambda_lo,
                lambda_hi=args.hi if args.hi is not None else description.lambda_hi,
            )
        mas = description.to_mas(args.p, strict=not args.lenient)
    elif args.consensus:
        if args.lo is None or args.hi is None:
            raise UsageError("--consensus needs --lo and --hi")
        check_probability(args.p)
        blocks = consensus_example(args.kappa, swapped=args.swapped)
        mas = SwitchedMas.from_bounds(args.n_agents, args.lo, args.hi, args.p, blocks)
    else:
        raise UsageError("Give a model file (--model) or --consensus")

    opts = SolverOptions(record_trace=bool(args.trace))
    cert = solve_h2_bound(mas, deflated=args.deflate, opts=opts)
    Console(soft_wrap=True).print(format_certificate(cert), markup=False, highlight=False, end="")

    if args.trace:
        write_trace_csv(cert.solution, args.trace)

    if args.lift:
        report = verify_certificate_lifting(mas, cert)
        for r in report.residuals:
            status = "[green]ok[/green]" if r.passed else "[red]FAIL[/red]"
            console.print(f"topology {r.topology}: gramian {r.gramian:.3e} trace {r.trace:.3e} {status}")
        if not report.passed:
            return EXIT_VERIFY_FAILED
    return EXIT_OK


# --- CONTOUR ---

def cmd_contour(args, threads: int) -> int:
    cfg = ContourConfig(
        n_agents=args.n_agents, kappa=args.kappa, p=args.p, variant=args.variant,
        grid_points=args.grid,
    )
    cells = run_contour(cfg, threads)
    with _output(args.output) as handle:
        _write_header(handle, ExperimentConfig(command="contour", parameters=cfg.model_dump()))
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["lambda_lo", "lambda_hi", "gamma"])
        for cell in cells:
            writer.writerow([repr(cell.lambda_lo), repr(cell.lambda_hi), _fmt(cell.gamma)])
    missing = sum(cell.gamma is None for cell in cells)
    console.print(f"[green]{len(cells) - missing} certified cells[/green], {missing} without certificate")
    return EXIT_OK


# --- SPAN ---

def cmd_span(args, threads: int) -> int:
    cfg = SpanConfig(
        n_agents=args.n_agents,
        kappa=args.kappa,
        lambda_lo=args.lo,
        lambda_hi=args.hi,
        forward_links=args.links,
        p_values=args.p_values or default_p_grid(args.p_points),
        random_seeds=args.random_seeds,
        period=args.period,
        mc=McConfig(n_samples=args.samples, horizon=args.horizon, seed=args.seed),
    )
    points = run_span(cfg, threads)
    config = ExperimentConfig(command="span", parameters=cfg.model_dump())
    with _output(args.output) as handle:
        _write_header(handle, config)
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["p", "h2_bound", "h2_mc_min", "h2_mc_max"])
        for point in points:
            writer.writerow([repr(point.p), _fmt(point.h2_bound), _fmt(point.h2_mc_min), _fmt(point.h2_mc_max)])

    rows = [(point.p, est) for point in points for est in point.estimates]
    if args.summary:
        with _output(args.summary) as handle:
            _write_header(handle, config)
            write_summary_csv(rows, handle)
    if args.samples_csv:
        with _output(args.samples_csv) as handle:
            _write_header(handle, config)
            write_samples_csv(rows, handle)
    return EXIT_OK


# --- VERIFY ---

def cmd_verify(args) -> int:
    results = run_checks(seed=args.seed, only=args.only, corrupt_second_moment=args.corrupt_second_moment)
    table = Table(title="Verification suite")
    table.add_column("check")
    table.add_column("cases", justify="right")
    table.add_column("worst residual", justify="right")
    table.add_column("result")
    for r in results:
        table.add_row(r.name, str(r.cases), f"{r.worst:.2e}", "[green]pass[/green]" if r.passed else "[red]FAIL[/red]")
    Console().print(table)
    for r in results:
        for failure in r.failures:
            console.print(f"[red]{r.name}[/red] {failure}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAILED


# --- SPECTRUM ---

def cmd_spectrum(args) -> int:
    if args.model:
        family = load_model(args.model).family
        if family is None:
            raise UsageError(f"{args.model} lists no graphs")
    elif args.circulant:
        graphs = tuple(circulant_graph(args.n_agents, k) for k in args.circulant)
        lo, hi = (args.lo, args.hi) if args.lo is not None and args.hi is not None else spectral_bounds(graphs)
        family = GraphFamily(graphs, lo, hi)
    else:
        raise UsageError("Give a model file (--model) or --circulant K [K ...]")

    report = validate_family(family)
    for r in report.graphs:
        status = "[green]inside[/green]" if r.inside else "[yellow]outside[/yellow]"
        connected = "" if r.connected else " (disconnected)"
        console.print(f"graph {r.index}: [{r.lambda_2:.6g}, {r.lambda_n:.6g}] {status}{connected}")
    console.print(
        f"claimed [{report.lambda_lo:g}, {report.lambda_hi:g}], "
        f"tightest [{report.tightest_lo:.6g}, {report.tightest_hi:.6g}]"
    )
    config = ExperimentConfig(command="spectrum", parameters={
        "n_agents": family.n_vertices,
        "graphs": len(family),
        "lambda_lo": family.lambda_lo,
        "lambda_hi": family.lambda_hi,
    })
    with _output(args.output) as handle:
        _write_header(handle, config)
        write_spectra_csv(family, handle)
    if args.dump:
        with _output(args.dump) as handle:
            handle.write(dump_family(family))
    return EXIT_OK


# --- ARGUMENTS ---

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=TOOL_NAME, description="H2 analysis of multi-agent systems with packet loss")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging on stderr")
    parser.add_argument("--version", action="version", version=f"{TOOL_NAME} {TOOL_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def consensus_flags(p, with_p=True):
        p.add_argument("-N", "--agents", dest="n_agents", type=int, default=20)
        p.add_argument("--kappa", type=float, default=0.1)
        if with_p:
            p.add_argument("-p", type=float, default=0.5, help="Transmission probability")

    analyze = sub.add_parser("analyze", help="Certify an H2 bound")
    analyze.add_argument("--model", help="Model description file")
    analyze.add_argument("--consensus", action="store_true", help="Use the consensus example")
    analyze.add_argument("--swapped", action="store_true", help="Disturbance through L_j, state as output")
    consensus_flags(analyze)
    analyze.add_argument("--lo", type=float)
    analyze.add_argument("--hi", type=float)
    analyze.add_argument("--deflate", action="store_true", help="Analyse the disagreement space only")
    analyze.add_argument("--lenient", action="store_true", help="Warn instead of failing on bounds the spectra leave")
    analyze.add_argument("--lift", action="store_true", help="Also check the lifted certificate per topology")
    analyze.add_argument("--trace", help="Write solver iterates to this CSV")

    contour = sub.add_parser("contour", help="gamma over (lambda_lo, lambda_hi)")
    consensus_flags(contour)
    contour.add_argument("--variant", choices=["consensus", "swapped"], default="consensus")
    contour.add_argument("--grid", type=int, default=50)
    contour.add_argument("-o", "--output")

    span = sub.add_parser("span", help="Bound and Monte-Carlo estimates over p")
    consensus_flags(span, with_p=False)
    span.add_argument("--lo", type=float, default=2.68)
    span.add_argument("--hi", type=float, default=18.24)
    span.add_argument("--links", type=int, nargs="+", default=list(range(1, 8)), help="Forward links per circulant graph")
    span.add_argument("--p-values", type=float, nargs="+")
    span.add_argument("--p-points", type=int, default=20)
    span.add_argument("--samples", type=int, default=10, help="Draws per input channel")
    span.add_argument("--horizon", type=int, default=2000)
    span.add_argument("--seed", type=int, default=0)
    span.add_argument("--random-seeds", type=int, nargs="*", default=[1, 2])
    span.add_argument("--period", type=int, default=1)
    span.add_argument("-o", "--output")
    span.add_argument("--summary", help="Per-sequence means and standard errors CSV")
    span.add_argument("--samples-csv", help="Raw per-draw energies CSV")

    verify = sub.add_parser("verify", help="Run the oracle suite")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--only", nargs="+", choices=list(all_checks))
    verify.add_argument("--corrupt-second-moment", action="store_true", help=argparse.SUPPRESS)

    spectrum = sub.add_parser("spectrum", help="Laplacian spectra of a graph family")
    spectrum.add_argument("--model")
    spectrum.add_argument("--circulant", type=int, nargs="+", metavar="K")
    spectrum.add_argument("-N", "--agents", dest="n_agents", type=int, default=20)
    spectrum.add_argument("--lo", type=float)
    spectrum.add_argument("--hi", type=float)
    spectrum.add_argument("-o", "--output")
    spectrum.add_argument("--dump", help="Write the family in model-file format")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "contour":
            return cmd_contour(args, get_settings().threads)
        if args.command == "span":
            return cmd_span(args, get_settings().threads)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_spectrum(args)
    except NoCertificate as e:
        console.print(f"[yellow]No certificate:[/yellow] {e}")
        return EXIT_NO_CERTIFICATE
    except (UsageError, ModelFormatError, SpectralRadiusError, GraphError, ValidationError, ValueError) as e:
        console.print(f"[red]Error:[/red] {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
