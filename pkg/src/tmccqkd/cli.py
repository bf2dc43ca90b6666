"""Command-line front end: ``stats``, ``sweep``, ``session`` and ``detect``.

All output is deterministic for a given command line.  Floats are printed
with 6 significant digits unless ``--precision`` says otherwise
(``--precision full`` prints shortest round-trip reprs).  Undefined
correlations are empty CSV fields or JSON ``null``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, dataclass
from typing import Any, Optional, Sequence

import numpy as np

from .eavesdrop import SplitterConfig, correlation_surface
from .protocol import (
    DEFAULT_DISCLOSE_FRACTION,
    DEFAULT_RHO_MIN,
    ProtocolConfig,
    SessionReport,
    bit_balance,
    run_session,
)
from .tmcc_state import (
    DEFAULT_TAIL_EPSILON,
    UndefinedCorrelationError,
    correlation_ab,
    mean_photon,
    new_state,
    second_moment,
    variance,
)

PROG = "tmccqkd"

DEFAULT_LAMBDA_GRID = [round(0.1 * i, 10) for i in range(1, 51)]
DEFAULT_PSI_GRID = [float(v) for v in np.linspace(0.0, math.pi / 2, 51)]
DEFAULT_Q_GRID = [0.0, 0.5, math.sqrt(0.5), math.sqrt(0.75), 1.0]

SWEEP_HEADER = ["lambda", "psi", "p", "g_ab", "g_ae", "rho_ab", "rho_ae"]
DETECT_HEADER = ["lambda", "q", "detection_rate", "mean_disclosed_rho",
                 "mean_agreement_ab", "mean_n_e"]


class Formatter:
    def __init__(self, precision: Optional[int]):
        self.precision = precision

    def __call__(self, x: Any) -> str:
        if x is None:
            return ""
        if isinstance(x, str):
            return x
        if isinstance(x, (bool, np.bool_)):
            return "true" if x else "false"
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        x = float(x)
        if self.precision is None:
            return repr(x)
        return format(x, f"#.{self.precision}g")

    def number(self, x: Any) -> Any:
        """JSON-ready value rounded to the output precision."""
        if x is None or isinstance(x, (bool, int, np.bool_, np.integer)):
            return x if not isinstance(x, (np.bool_, np.integer)) else x.item()
        return float(self(x))


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run's output bytes."""

    command: str
    params: dict
    output_path: Optional[str]
    output_format: str
    seed: Optional[int]

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        skip = {"command", "out", "format", "seed", "func"}
        params = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
        return cls(args.command, params, args.out, args.format, getattr(args, "seed", None))

    def to_dict(self) -> dict:
        return asdict(self)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _precision(text: str) -> Optional[int]:
    if text == "full":
        return None
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("precision must be a positive integer or 'full'")
    if value < 1:
        raise argparse.ArgumentTypeError("precision must be a positive integer or 'full'")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return value


def _write(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]], fmt: Formatter) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def cmd_stats(args: argparse.Namespace) -> int:
    fmt = Formatter(args.precision)
    state = new_state(args.lambda_, 0.0, args.tail_epsilon)
    try:
        g, rho = correlation_ab(state)
    except UndefinedCorrelationError:
        g, rho = 0.0, None
    moments = {
        "mean_n": mean_photon(state),
        "mean_n2": second_moment(state),
        "variance": variance(state),
        "g_ab": g,
        "rho_ab": rho,
    }
    pmf = state.pmf()
    if args.format == "csv":
        text = _csv_text(["quantity", "value"], list(moments.items()), fmt)
        text += "\n" + _csv_text(["n", "probability"], list(enumerate(pmf)), fmt)
    else:
        text = _json_text({
            "run_config": RunConfig.from_args(args).to_dict(),
            "lambda": fmt.number(state.lambda_mag),
            "n_max": state.n_max,
            "moments": {k: fmt.number(v) for k, v in moments.items()},
            "pmf": {str(n): fmt.number(p) for n, p in enumerate(pmf)},
        })
    _write(text, args.out)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    fmt = Formatter(args.precision)
    rows = correlation_surface(args.lambdas, args.psis, args.tail_epsilon)
    table = [(r.lambda_mag, r.psi, r.p, r.g_ab, r.g_ae, r.rho_ab, r.rho_ae) for r in rows]
    _write(_csv_text(SWEEP_HEADER, table, fmt), args.out)
    return 0


def _splitter(args: argparse.Namespace) -> SplitterConfig:
    if args.psi is not None:
        return SplitterConfig.from_psi(args.psi)
    if args.q is not None:
        return SplitterConfig.from_q(args.q)
    if args.p is not None:
        return SplitterConfig.from_p(args.p)
    return SplitterConfig.no_eavesdropper()


def _protocol_config(args: argparse.Namespace, lambda_mag: float) -> ProtocolConfig:
    return ProtocolConfig(
        lambda_mag=lambda_mag,
        slot_count=args.slots,
        threshold=args.threshold,
        disclose_fraction=args.disclose_fraction,
        rho_min=args.rho_min,
        tail_epsilon=args.tail_epsilon,
    )


def session_payload(report: SessionReport, fmt: Formatter) -> dict:
    """Stable, ordered mapping of a session report."""
    m = report.empirical
    state = new_state(report.stream.lambda_mag)
    p0, p1, p_discard = bit_balance(state, report.threshold)
    keys = {}
    for name, key in (("alice", report.alice_key), ("bob", report.bob_key), ("eve", report.eve_key)):
        keys[name] = {"bits": len(key), "hex": key.to_hex()}
    return {
        "threshold": fmt.number(report.threshold),
        "slots": len(report.stream),
        "disclosed_slots": len(report.disclosed_slots),
        "keys": keys,
        "agreement_ab": fmt.number(report.agreement_ab),
        "agreement_ae": fmt.number(report.agreement_ae),
        "disclosed_rho": fmt.number(report.disclosed_rho),
        "eavesdropping_detected": report.eavesdropping_detected,
        "bit_balance": {"p0": fmt.number(p0), "p1": fmt.number(p1),
                        "p_discard": fmt.number(p_discard)},
        "empirical": {k: fmt.number(v) for k, v in asdict(m).items()},
        "rng_algorithm": report.stream.algorithm,
    }


def _flatten(prefix: str, obj: Any, out: list) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else k, v, out)
    else:
        out.append((prefix, obj))


def cmd_session(args: argparse.Namespace) -> int:
    fmt = Formatter(args.precision)
    report = run_session(_protocol_config(args, args.lambda_), _splitter(args), args.seed)
    payload = session_payload(report, fmt)
    if args.format == "csv":
        rows: list = []
        _flatten("", payload, rows)
        text = _csv_text(["field", "value"], rows, fmt)
    else:
        payload = {"run_config": RunConfig.from_args(args).to_dict(), **payload}
        text = _json_text(payload)
    _write(text, args.out)
    if args.dump_slots:
        with open(args.dump_slots, "w") as fh:
            report.stream.write_columns(fh)
    return 0


def detection_rows(lambda_mag: float, q_grid: Sequence[float], cfg: ProtocolConfig,
                   seeds: Sequence[int]) -> list[tuple]:
    """Detection statistics per q over an ensemble of session seeds."""
    rows = []
    for q in q_grid:
        splitter = SplitterConfig.from_q(q)
        detected, rhos, agreements, n_e = [], [], [], []
        for seed in seeds:
            report = run_session(cfg, splitter, seed)
            if report.eavesdropping_detected is not None:
                detected.append(report.eavesdropping_detected)
            if report.disclosed_rho is not None:
                rhos.append(report.disclosed_rho)
            if report.agreement_ab is not None:
                agreements.append(report.agreement_ab)
            n_e.append(report.empirical.mean_e)
        rows.append((
            lambda_mag, q,
            sum(detected) / len(detected) if detected else None,
            math.fsum(rhos) / len(rhos) if rhos else None,
            math.fsum(agreements) / len(agreements) if agreements else None,
            math.fsum(n_e) / len(n_e),
        ))
    return rows


def cmd_detect(args: argparse.Namespace) -> int:
    fmt = Formatter(args.precision)
    cfg = _protocol_config(args, args.lambda_)
    seeds = [args.seed + i for i in range(args.seeds)]
    rows = detection_rows(args.lambda_, args.q_grid, cfg, seeds)
    _write(_csv_text(DETECT_HEADER, rows, fmt), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Pair-coherent twin-beam key distribution simulator.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fmt_default):
        p.add_argument("--tail-epsilon", type=float, default=DEFAULT_TAIL_EPSILON)
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=["csv", "json"], default=fmt_default)
        p.add_argument("--precision", type=_precision, default=6,
                       help="significant digits, or 'full'")

    def protocol_flags(p):
        p.add_argument("--lambda", dest="lambda_", type=float, default=1.0)
        p.add_argument("--slots", type=int, default=100_000)
        p.add_argument("--seed", type=_seed, default=0)
        p.add_argument("--rho-min", type=float, default=DEFAULT_RHO_MIN)
        p.add_argument("--disclose-fraction", type=float, default=DEFAULT_DISCLOSE_FRACTION)
        p.add_argument("--threshold", type=float, default=None,
                       help="override the bit threshold (default: mean photon number)")

    p = sub.add_parser("stats", help="photon statistics of the unsplit state")
    p.add_argument("--lambda", dest="lambda_", type=float, required=True)
    common(p, "json")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sweep", help="correlation surfaces over lambda and psi")
    p.add_argument("--lambda", dest="lambdas", type=_float_list, default=DEFAULT_LAMBDA_GRID,
                   help="comma-separated lambda grid")
    p.add_argument("--psi", dest="psis", type=_float_list, default=DEFAULT_PSI_GRID,
                   help="comma-separated splitter angles in radians")
    common(p, "csv")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("session", help="run one key-exchange session")
    protocol_flags(p)
    tap = p.add_mutually_exclusive_group()
    tap.add_argument("--psi", type=float, default=None, help="splitter angle, p = cos(psi)")
    tap.add_argument("--p", type=float, default=None, help="amplitude fraction reaching Bob")
    tap.add_argument("--q", type=float, default=None, help="amplitude fraction diverted to Eve")
    p.add_argument("--dump-slots", default=None, help="write per-slot counts to this file")
    common(p, "json")
    p.set_defaults(func=cmd_session)

    p = sub.add_parser("detect", help="detection rate versus tap strength")
    protocol_flags(p)
    p.add_argument("--q", dest="q_grid", type=_float_list, default=DEFAULT_Q_GRID,
                   help="comma-separated diverted amplitude fractions")
    p.add_argument("--seeds", type=int, default=100, help="sessions per grid point")
    common(p, "csv")
    p.set_defaults(func=cmd_detect)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seeds", 1) < 1:
        parser.error("--seeds must be at least 1")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
