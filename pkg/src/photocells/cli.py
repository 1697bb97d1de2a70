"""Command-line interface.

Usage:
    photocells pmf detection --nbar 1 --kmax 10
    photocells pmf window --nbar 0.1 --t-over-tau 10 --format json
    photocells simulate response --nbar 1 --trials 1000000 --seed 42
    photocells sweep mean-transition --nbar-grid log:1e-4:10:6
    photocells localization volume-ratio --v 0.5 --v0 1 --n 2

Exit codes: 0 ok, 2 bad arguments or degenerate input, 3 truncation cap
exceeded, 4 linearization domain violated.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .counting import ergodicity_gap, response_count_pmf, window_count_pmf
from .distributions import (
    DEFAULT_POLICY,
    ModelMode,
    TruncatedPmf,
    TruncationPolicy,
    absorption_pmf,
    cell_filling_pmf,
    conditional_response_pmf,
    detection_pmf,
    mean_transition_probability,
    transition_probability,
)
from .errors import DegenerateInputError, LinearizationDomainError, TruncationCapExceeded
from .localization import (
    ClassicalBeam,
    LocalizationScenario,
    classical_mean_count,
    linearization_error_bound,
    relative_detection_probability,
    volume_occupation_ratio,
)
from .montecarlo import SimulationConfig, compare, sample_single_response, sample_window

__all__ = ["main", "build_parser", "parse_grid"]

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_TRUNCATION = 3
EXIT_DOMAIN = 4

PMF_KINDS = ("cells", "absorption", "detection", "conditional", "responses", "window")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # one-line diagnostic instead of argparse's usage dump
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# output


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def _meta_value(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def render(meta: dict, columns: Sequence[str], rows: Sequence[Sequence], fmt: str) -> str:
    """Serialize a table as ``#``-prefixed csv or a ``{meta, rows}`` json object."""
    meta = {k: _meta_value(v) for k, v in meta.items()}
    if fmt == "json":
        records = [{c: _meta_value(v) for c, v in zip(columns, row)} for row in rows]
        return json.dumps({"meta": meta, "rows": records}, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    for key, value in meta.items():
        # repr keeps floats round-trip exact
        buf.write(f"# {key}: {value!r}\n" if isinstance(value, float) else f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _base_meta(command: str) -> dict:
    return {"tool": "photocells", "version": __version__, "command": command}


# ---------------------------------------------------------------------------
# argument helpers


def _float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"not a finite number: {text!r}")
    return value


def _nonneg_float(text: str) -> float:
    value = _float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return value


def _pos_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def _nonneg_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return value


def parse_grid(text: str) -> list[float]:
    """Comma list (``0.1,1,10``) or log range ``log:START:STOP:NUM``."""
    text = text.strip()
    if not text:
        raise UsageError("empty nbar grid")
    if text.startswith("log:"):
        parts = text[4:].split(":")
        if len(parts) != 3:
            raise UsageError(f"log grid must be log:START:STOP:NUM, got {text!r}")
        try:
            start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        except ValueError:
            raise UsageError(f"bad log grid {text!r}")
        if start <= 0 or stop <= 0 or num < 1:
            raise UsageError(f"log grid needs START, STOP > 0 and NUM >= 1, got {text!r}")
        grid = [float(x) for x in np.geomspace(start, stop, num)]
    else:
        try:
            grid = [float(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"bad nbar grid {text!r}")
    if not grid:
        raise UsageError("empty nbar grid")
    for x in grid:
        if not math.isfinite(x) or x < 0:
            raise UsageError(f"grid values must be finite and >= 0, got {x!r}")
    return grid


def _policy(args) -> TruncationPolicy:
    try:
        return TruncationPolicy(args.eps, args.max_terms)
    except ValueError as exc:
        raise UsageError(str(exc))


# ---------------------------------------------------------------------------
# commands


def _analytic_pmf(args, policy: TruncationPolicy) -> TruncatedPmf:
    mode = ModelMode.parse(args.mode)
    kind = args.distribution
    if kind == "cells":
        return cell_filling_pmf(args.nbar, policy)
    if kind == "absorption":
        return absorption_pmf(args.nbar, policy)
    if kind == "detection":
        return detection_pmf(args.nbar, policy)
    if kind == "conditional":
        return conditional_response_pmf(args.nbar, mode, policy)
    if kind == "responses":
        return response_count_pmf(args.nbar, args.t_over_tau, mode, policy)
    return window_count_pmf(args.nbar, args.t_over_tau, mode, policy)


def cmd_pmf(args) -> str:
    policy = _policy(args)
    pmf = _analytic_pmf(args, policy)
    k = pmf.k
    probs = pmf.probs
    omitted = 0.0
    if args.kmax is not None:
        keep = k <= args.kmax
        omitted = math.fsum(probs[~keep])
        k, probs = k[keep], probs[keep]

    meta = _base_meta("pmf")
    meta.update(
        distribution=args.distribution,
        mode=ModelMode.parse(args.mode).value,
        nbar=args.nbar,
        t_over_tau=args.t_over_tau,
        epsilon=policy.epsilon,
        max_terms=policy.max_terms,
        kmax=args.kmax,
        k_min=pmf.k_min,
        tail_bound=pmf.tail_bound + omitted,
        transition_probability=transition_probability(args.nbar),
    )
    columns = ["k", "probability"]
    rows = [[int(kk), float(p)] for kk, p in zip(k, probs)]
    if args.scale is not None:
        meta["scale"] = args.scale
        columns.append("scaled_probability")
        for row in rows:
            row.append(row[1] * args.scale)
    return render(meta, columns, rows, args.format)


def cmd_simulate(args) -> str:
    mode = ModelMode.parse(args.mode)
    config = SimulationConfig(args.seed, args.trials, args.workers, mode)
    if args.target == "response":
        hist = sample_single_response(args.nbar, config)
        analytic = detection_pmf(args.nbar)
    else:
        hist = sample_window(args.nbar, args.t_over_tau, config)
        analytic = window_count_pmf(args.nbar, args.t_over_tau, mode)
    report = compare(hist, analytic)

    meta = _base_meta("simulate")
    # workers is left out: output must not depend on it
    meta.update(
        target=args.target,
        mode=mode.value,
        nbar=args.nbar,
        t_over_tau=args.t_over_tau if args.target == "window" else None,
        seed=args.seed,
        trials=args.trials,
        epsilon=DEFAULT_POLICY.epsilon,
        empirical_mean=hist.mean(),
        analytic_mean=analytic.mean(),
        tv_distance=report.tv_distance,
        chi_square=report.chi_square,
        dof=report.dof,
        p_value=report.p_value,
    )
    counts = hist.counts
    rows = [
        [b.k, int(counts[b.k]) if b.k < counts.size else 0, b.empirical, b.analytic, b.delta]
        for b in report.per_bin
    ]
    return render(meta, ["k", "count", "empirical", "analytic", "delta"], rows, args.format)


def cmd_sweep(args) -> str:
    grid = parse_grid(args.nbar_grid)
    mode = ModelMode.parse(args.mode)
    policy = _policy(args)
    meta = _base_meta("sweep")
    meta.update(quantity=args.quantity, mode=mode.value, epsilon=policy.epsilon, nbar_grid=args.nbar_grid)

    if args.quantity == "ratio21":
        rows = []
        for nbar in grid:
            if nbar == 0:
                raise DegenerateInputError("U_2/U_1 is undefined at nbar = 0")
            u = detection_pmf(nbar, policy)
            rows.append([nbar, u.prob(2) / u.prob(1)])
        return render(meta, ["nbar", "ratio21"], rows, args.format)

    if args.quantity == "mean-transition":
        rows = []
        for nbar in grid:
            exact = mean_transition_probability(nbar, ModelMode.EXACT)
            paper = mean_transition_probability(nbar, ModelMode.PAPER_APPROX)
            rows.append([nbar, exact, paper, exact / paper if paper > 0 else float("nan")])
        return render(meta, ["nbar", "exact", "paper_approx", "exact_over_paper"], rows, args.format)

    if args.t_over_tau < 1:
        raise UsageError("ergodicity-gap needs --t-over-tau >= 1")
    meta["t_over_tau"] = args.t_over_tau
    rows = [[nbar, ergodicity_gap(nbar, args.t_over_tau, mode, policy)] for nbar in grid]
    return render(meta, ["nbar", "ergodicity_gap"], rows, args.format)


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.which} requires {', '.join(missing)}")


def cmd_localization(args) -> str:
    meta = _base_meta("localization")
    meta["quantity"] = args.which
    if args.which == "volume-ratio":
        _require(args, "v", "v0", "n")
        scenario = LocalizationScenario(v0=args.v0, v=args.v, n_photons=args.n)
        value = volume_occupation_ratio(scenario)
        meta.update(v=args.v, v0=args.v0, n=args.n)
    elif args.which == "detect-prob":
        if args.dv_over_v is not None:
            v, dv = 1.0, args.dv_over_v
        else:
            _require(args, "dv", "v")
            v, dv = args.v, args.dv
        if args.n is None:
            _require(args, "z", "nbar")
        scenario = LocalizationScenario(
            v0=v, v=v, delta_v=dv, n_photons=args.n, z_cells=args.z, nbar=args.nbar
        )
        value = relative_detection_probability(scenario)
        meta.update(
            n=args.n,
            z=args.z,
            nbar=args.nbar,
            dv_over_v=scenario.dv_over_v,
            linearization_error_bound=linearization_error_bound(scenario),
        )
    else:
        _require(args, "rho", "u", "tau", "area")
        value = classical_mean_count(ClassicalBeam(args.rho, args.u, args.tau, args.area))
        meta.update(rho=args.rho, u=args.u, tau=args.tau, area=args.area)
    meta["value"] = value
    return render(meta, ["quantity", "value"], [[args.which, value]], args.format)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="photocells", description="Photon-counting statistics of thermal light.")
    parser.add_argument("--version", action="version", version=f"photocells {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, truncation=True):
        p.add_argument("--mode", choices=("exact", "paper"), default="exact")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if truncation:
            p.add_argument("--eps", type=_float, default=1e-12)
            p.add_argument("--max-terms", type=_pos_int, default=10**6)

    p = sub.add_parser("pmf", help="analytic PMF table")
    p.add_argument("distribution", choices=PMF_KINDS)
    p.add_argument("--nbar", type=_nonneg_float, required=True,
                   help="mean cell occupancy (mean absorbed count for 'absorption')")
    p.add_argument("--t-over-tau", type=_nonneg_float, default=1.0)
    p.add_argument("--kmax", type=_nonneg_int)
    p.add_argument("--scale", type=_nonneg_float, help="detection-volume factor, display only")
    common(p)
    p.set_defaults(func=cmd_pmf)

    p = sub.add_parser("simulate", help="Monte Carlo vs analytic comparison")
    p.add_argument("target", choices=("response", "window"))
    p.add_argument("--nbar", type=_nonneg_float, required=True)
    p.add_argument("--t-over-tau", type=_nonneg_float, default=1.0)
    p.add_argument("--trials", type=_pos_int, default=10**6)
    p.add_argument("--seed", type=_nonneg_int, default=0)
    p.add_argument("--workers", type=_pos_int, default=1)
    common(p, truncation=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="scalar quantity over an nbar grid")
    p.add_argument("quantity", choices=("ratio21", "mean-transition", "ergodicity-gap"))
    p.add_argument("--nbar-grid", required=True, help="comma list or log:START:STOP:NUM")
    p.add_argument("--t-over-tau", type=_nonneg_float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("localization", help="volume-fluctuation and classical baselines")
    p.add_argument("which", choices=("volume-ratio", "detect-prob", "classical-mean"))
    for name in ("v", "v0", "dv", "dv-over-v", "nbar", "rho", "u", "tau", "area"):
        p.add_argument(f"--{name}", type=_nonneg_float)
    p.add_argument("--n", type=_nonneg_int)
    p.add_argument("--z", type=_pos_int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_localization)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        out = args.func(args)
    except LinearizationDomainError as exc:
        print(f"photocells: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except TruncationCapExceeded as exc:
        print(f"photocells: truncation error: {exc}", file=sys.stderr)
        return EXIT_TRUNCATION
    except DegenerateInputError as exc:
        print(f"photocells: degenerate input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"photocells: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
