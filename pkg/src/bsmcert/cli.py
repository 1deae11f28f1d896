"""Command-line front end.

    bsmcert bounds    certificates from observed statistics
    bsmcert simulate  simulate the protocol under noise, then certify
    bsmcert verify    run the numerical verification suite
    bsmcert figures   emit bound curves as CSV

Exit status: 0 success, 1 verification failure, 2 input error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import bounds, figures, selftest
from .scenario import (
    DeltaModel,
    ExperimentStatistics,
    ScenarioConfig,
    scaled_delta,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT_ERROR = 2


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT_ERROR, f"{self.prog}: error: {message}\n")


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json(data) -> str:
    return json.dumps(data, indent=2, default=float) + "\n"


def _flatten(prefix: str, data) -> list[tuple[str, object]]:
    if isinstance(data, dict):
        items = data.items()
    else:
        items = ((str(i), v) for i, v in enumerate(data))
    rows = []
    for key, value in items:
        name = f"{prefix}{key}"
        if key == "flags":
            rows.append((name, ";".join(value)))
        elif isinstance(value, (dict, list, tuple)):
            rows.extend(_flatten(name + ".", value))
        else:
            rows.append((name, value))
    return rows


def _key_value_csv(data: dict) -> str:
    rows = []
    for key, value in _flatten("", data):
        if value is None:
            cell = ""
        elif isinstance(value, bool) or isinstance(value, str):
            cell = str(value)
        else:
            cell = figures.format_cell(value)
        rows.append([key, cell])
    return figures.to_csv(["field", "value"], rows)


def _render(data: dict, fmt: str) -> str:
    return _json(data) if fmt == "json" else _key_value_csv(data)


def _add_format(p: argparse.ArgumentParser, default: str = "json") -> None:
    p.add_argument("--format", choices=("csv", "json"), default=default)
    p.add_argument("--output", help="write to this path instead of stdout")


def _add_delta(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=float, help="four-party Bell value delta in [0, 1]")
    p.add_argument("--delta-model", choices=("explicit", "chsh-scaled"), default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="bsmcert", description="Device-independent Bell state measurement certificates")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    p = sub.add_parser("bounds", help="certify from observed statistics")
    p.add_argument("--input", help="statistics JSON file")
    for k in range(4):
        p.add_argument(f"--beta{k}", type=float)
        p.add_argument(f"--p{k}", type=float)
    _add_delta(p)
    p.add_argument("--mode", choices=("deterministic", "independent-sources", "partial"), default="deterministic")
    _add_format(p)

    p = sub.add_parser("simulate", help="simulate the protocol and certify the result")
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--visibility", type=float, nargs="+", help="source visibility (one value, or one per source)")
    p.add_argument("--bsm-depolarization", type=float)
    p.add_argument("--misalignment", type=float, help="rotation of B2's observables, radians")
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    _add_delta(p)
    p.add_argument("--mode", choices=("deterministic", "independent-sources", "partial"), default="deterministic")
    p.add_argument("--oracle", action="store_true", help="append fidelities achieved by explicit maps")
    p.add_argument("--stats-output", help="also write the statistics JSON here")
    _add_format(p)

    p = sub.add_parser("verify", help="run the verification suite")
    p.add_argument("--suite", choices=("all",) + selftest.SUITES, default="all")
    p.add_argument("--grid-points", type=int, default=101)
    p.add_argument("--negative-control", action="store_true", help="use the uncorrected extraction weight")
    _add_format(p)

    p = sub.add_parser("figures", help="emit bound curves")
    p.add_argument("which", choices=sorted(figures.FIGURES))
    p.add_argument("--resolution", type=int, default=201)
    _add_format(p, default="csv")
    return parser


def _statistics_from_args(args) -> ExperimentStatistics:
    if args.input:
        with open(args.input, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = {}
    beta = list(data.get("beta", [None] * 4))
    p = list(data.get("p", [0.0] * 4))
    for k in range(4):
        if getattr(args, f"beta{k}") is not None:
            beta[k] = getattr(args, f"beta{k}")
        if getattr(args, f"p{k}") is not None:
            p[k] = getattr(args, f"p{k}")
    data["beta"], data["p"] = beta, p
    if args.delta is not None:
        data["delta"] = args.delta
    if args.delta_model is not None:
        data["delta_model"] = args.delta_model.replace("-", "_")
    stats = ExperimentStatistics.from_dict(data)
    if stats.delta_model is DeltaModel.CHSH_SCALED and stats.delta is None:
        stats = ExperimentStatistics.from_dict({**stats.to_dict(), "delta": scaled_delta(stats.beta, stats.p)})
    return stats


def cmd_bounds(stats: ExperimentStatistics, mode: str = "deterministic") -> bounds.CertificateReport:
    return bounds.certify(stats, mode)


def _config_from_args(args) -> ScenarioConfig:
    data = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
    overrides = {
        "visibility": args.visibility,
        "bsm_depolarization": args.bsm_depolarization,
        "misalignment": args.misalignment,
        "shots": args.shots,
        "seed": args.seed,
        "delta": args.delta,
        "delta_model": args.delta_model.replace("-", "_") if args.delta_model else None,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    vis = data.get("visibility")
    if isinstance(vis, list) and len(vis) == 1:
        data["visibility"] = vis[0]
    return ScenarioConfig.from_dict(data)


def cmd_simulate(config: ScenarioConfig, mode: str = "deterministic", oracle: bool = False) -> dict:
    stats = config.statistics()
    report = bounds.certify(stats, mode)
    out = {"statistics": stats.to_dict(), "report": report.to_dict()}
    if oracle:
        truth = selftest.oracle_values(config.scenario())
        out["oracle"] = {
            "f_o_k": truth.f_o_k,
            "f_o": truth.f_o,
            "f_bsm": truth.f_bsm,
            "f_cond": truth.f_cond,
            "zeta_0": truth.zeta_0,
            "source_fidelity": truth.source_fidelity,
        }
    return out


def cmd_verify(suite: str = "all", grid_points: int = 101, negative_control: bool = False) -> tuple[int, dict]:
    report = selftest.run_verification(suite, grid_points, negative_control)
    return (EXIT_OK if report["passed"] else EXIT_VERIFY_FAILED), report


def cmd_figures(which: str, resolution: int = 201) -> figures.Table:
    return figures.FIGURES[which](resolution)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "bounds":
            report = cmd_bounds(_statistics_from_args(args), args.mode)
            _emit(_render(report.to_dict(), args.format), args.output)
            return EXIT_OK
        if args.command == "simulate":
            config = _config_from_args(args)
            result = cmd_simulate(config, args.mode, args.oracle)
            if args.stats_output:
                Path(args.stats_output).write_text(_json(result["statistics"]), encoding="utf-8")
            _emit(_render(result, args.format), args.output)
            return EXIT_OK
        if args.command == "verify":
            code, report = cmd_verify(args.suite, args.grid_points, args.negative_control)
            _emit(_render(report, args.format), args.output)
            return code
        if args.command == "figures":
            header, rows = cmd_figures(args.which, args.resolution)
            if args.format == "json":
                text = _json({"columns": header, "rows": rows})
            else:
                text = figures.to_csv(header, rows)
            _emit(text, args.output)
            return EXIT_OK
    except (ValueError, TypeError, OSError, json.JSONDecodeError) as exc:
        print(f"bsmcert: error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
