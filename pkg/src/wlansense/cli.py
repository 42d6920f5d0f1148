"""``wlansense`` command line: simulate | sequences | quant-bench | af."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .ambiguity import ambiguity, lag_axis
from .protocol import ProtocolError
from .protocol.validate import InvariantViolation
from .scenario import ScenarioError, load
from .sequences import build_ce, build_sync, correlation_summary, sync_family

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3
LOCAL_DOPPLER_HZ = 1000.0
LOCAL_MAX_LAG = 64


@dataclass(frozen=True)
class RunConfig:
    command: str
    seed: int
    out: Path
    scenario: Path | None = None
    overrides: tuple = ()
    options: dict = field(default_factory=dict)


def _out(cfg: RunConfig) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    return cfg.out


def cmd_simulate(cfg: RunConfig) -> int:
    from .simulate import simulate
    if cfg.scenario is None:
        print("error: --scenario is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        sc = load(cfg.scenario, cfg.overrides)
        res = simulate(sc, cfg.seed, _out(cfg), evaluate=not cfg.options.get("no_eval", False))
    except (ScenarioError, ProtocolError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantViolation as e:
        print(f"invariant violated: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    print(f"trace    {res.trace_path}")
    print(f"payloads {res.payload_path}")
    print(f"curve    {res.curve_path}")
    print(f"hist     {res.hist_path}")
    return EXIT_OK


def _write_matrix(m, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "col", "value"])
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                w.writerow([i + 1, j + 1, int(m[i, j]) if float(m[i, j]).is_integer() else m[i, j]])


def cmd_sequences(cfg: RunConfig) -> int:
    which = cfg.options.get("which", "matrix")
    out = _out(cfg)
    if which == "ce":
        for v in ("CE0", "CE1"):
            build_ce(v).to_csv(out / f"{v.lower()}.csv")
    elif which == "sync":
        for r in range(1, 9):
            build_sync(r).to_csv(out / f"sync_{r}.csv")
    elif which == "matrix":
        m = correlation_summary(sync_family())
        _write_matrix(m, out / "sync_matrix.csv")
        print(np.array2string(m.astype(int)))
    else:
        print(f"error: unknown sequence set {which!r}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def cmd_quant_bench(cfg: RunConfig) -> int:
    n = int(cfg.options.get("channels", 1000))
    bits = tuple(cfg.options.get("n_b") or (8,))
    if n < 1 or any(b < 2 for b in bits):
        print("error: need at least one channel and n_b >= 2", file=sys.stderr)
        return EXIT_CONFIG
    rows = ev.quantizer_benchmark(n, bits, cfg.seed)
    ev.write_bench_csv(rows, _out(cfg) / "quant_bench.csv")
    for r in rows:
        print(f"{r['scheme']:<11} n_b={r['n_b']:<2} nmse={r['nmse_db']:.2f} dB")
    return EXIT_OK


def cmd_af(cfg: RunConfig) -> int:
    out = _out(cfg)
    ce0, ce1 = build_ce("CE0"), build_ce("CE1")
    fs = ce0.chip_rate
    n_full = int(cfg.options.get("full_doppler_points", 33))
    full_dop = np.linspace(-fs / 2, fs / 2, n_full)
    local_dop = np.linspace(-LOCAL_DOPPLER_HZ, LOCAL_DOPPLER_HZ, 21)
    local_lags = lag_axis(ce0, ce1, LOCAL_MAX_LAG)
    ambiguity(ce0, ce0, None, full_dop).to_csv(out / "af_ce0_full.csv")
    ambiguity(ce0, ce1, None, full_dop).to_csv(out / "caf_ce0_ce1_full.csv")
    ambiguity(ce0, ce0, local_lags, local_dop).to_csv(out / "af_ce0_local.csv")
    ambiguity(ce0, ce1, local_lags, local_dop).to_csv(out / "caf_ce0_ce1_local.csv")
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "sequences": cmd_sequences,
            "quant-bench": cmd_quant_bench, "af": cmd_af}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wlansense", description=__doc__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, required=True)
    common.add_argument("--out", type=Path, default=Path("out"))
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="run a scenario end to end")
    s.add_argument("--scenario", type=Path, required=True)
    s.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    s.add_argument("--no-eval", action="store_true", help="skip the accuracy experiments")

    q = sub.add_parser("sequences", parents=[common], help="emit CE/Sync sequences or the Sync correlation matrix")
    q.add_argument("which", nargs="?", default="matrix", choices=("ce", "sync", "matrix"))

    b = sub.add_parser("quant-bench", parents=[common], help="MSE/NMSE of each CSI quantizer")
    b.add_argument("--channels", type=int, default=1000)
    b.add_argument("--n-b", type=int, nargs="+", default=[8])

    a = sub.add_parser("af", parents=[common], help="ambiguity function grids for CE0 and CE0 x CE1")
    a.add_argument("--full-doppler-points", type=int, default=33)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code else EXIT_OK
    opts = {k: v for k, v in vars(args).items()
            if k not in ("command", "seed", "out", "scenario", "overrides")}
    cfg = RunConfig(args.command, args.seed, args.out, getattr(args, "scenario", None),
                    tuple(getattr(args, "overrides", ())), opts)
    return COMMANDS[cfg.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
