"""Command line front end.

Exit codes: 0 success, 1 configuration/validation problem, 2 campaign
failure (too many degenerate trials).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time

import numpy as np

from .airlink import Constellation, build_frame
from .channel import reference_channel, sample_scenario
from .estimators import average_and_tile, detect, pls_estimate, zf_equalize
from .harness import (
    EXPERIMENTS,
    CampaignError,
    ConfigError,
    SystemConfig,
    parse_config,
    run_campaign,
    trial_rng,
    write_csv,
)
from .numerics import right_pinv


def _load_config(path: str | None) -> SystemConfig:
    if path is None:
        return SystemConfig().validate()
    return parse_config(path)


def _apply_overrides(cfg: SystemConfig, args) -> SystemConfig:
    changes = {}
    if getattr(args, "trials", None) is not None:
        changes["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        changes["master_seed"] = args.seed
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    return cfg.validate()


def _parse_snr_list(text: str | None):
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"--snr-list: {exc}") from None


def _cmd_simulate(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    snr_list = _parse_snr_list(args.snr_list)
    records = run_campaign(cfg, args.experiment, snr_list=snr_list,
                           workers=args.workers)
    write_csv(records, args.output)
    print(f"{args.experiment}: wrote {len(records)} records to {args.output}")
    return 0


def _complex_text(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def _cmd_dump_channel(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    rng = trial_rng(cfg.master_seed, "dump", 0.0, 0)
    state = sample_scenario(rng, cfg.scenario())
    timing = cfg.timing()
    layout = cfg.frame_layout()
    h_ref = reference_channel(state, timing, timing.subcarrier,
                              np.arange(layout.n_symbols))

    lines = [f"# steering matrix, {state.steering.shape[0]} x {state.steering.shape[1]}"]
    for row in state.steering:
        lines.append(",".join(_complex_text(z) for z in row))
    lines.append(f"# reference channel, {h_ref.shape[0]} x {h_ref.shape[1]}")
    for row in h_ref:
        lines.append(",".join(_complex_text(z) for z in row))
    text = "\n".join(lines) + "\n"

    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote scenario dump to {args.output}")
    else:
        sys.stdout.write(text)
    return 0


def _time_call(fn, repeats: int = 50) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cmd_bench(args) -> int:
    cfg = _apply_overrides(_load_config(args.config), args)
    rng = trial_rng(cfg.master_seed, "bench", 0.0, 0)
    state = sample_scenario(rng, cfg.scenario())
    timing = cfg.timing()
    layout = cfg.frame_layout()
    constellation = Constellation.qam(cfg.constellation_order)
    frame = build_frame(state, timing, layout, constellation, 10.0, rng)
    pinv = right_pinv(state.steering)

    tile = average_and_tile(pls_estimate(frame.rx_pilot, frame.pilots, pinv), cfg.d)
    rx1 = frame.rx_data_block(1)

    rows = [
        ("right_pinv", lambda: right_pinv(state.steering)),
        ("pls_estimate", lambda: pls_estimate(frame.rx_pilot, frame.pilots, pinv)),
        ("zf_equalize", lambda: zf_equalize(rx1, pinv, tile)),
        ("detect", lambda: detect(zf_equalize(rx1, pinv, tile), constellation)),
    ]
    print(f"kernel timings, K={cfg.k_users} M={cfg.m_x * cfg.m_y} "
          f"P={cfg.p} D={cfg.d} (best of 50)")
    for name, fn in rows:
        print(f"  {name:<14s} {_time_call(fn) * 1e6:9.1f} us")
    return 0


def _cmd_print_defaults(_args) -> int:
    sys.stdout.write(SystemConfig().to_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leolink",
        description="Link-level Monte Carlo simulator for uplink massive-MIMO "
                    "satellite channel estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one experiment and write a CSV")
    sim.add_argument("experiment", choices=EXPERIMENTS)
    sim.add_argument("--config", default=None, help="flat key = value config file")
    sim.add_argument("--trials", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--snr-list", default=None, help='comma separated, e.g. "0,5,10"')
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--output", required=True)
    sim.set_defaults(func=_cmd_simulate)

    dump = sub.add_parser("dump-channel", help="dump one scenario's matrices as CSV")
    dump.add_argument("--config", default=None)
    dump.add_argument("--seed", type=int, default=None)
    dump.add_argument("--output", default=None)
    dump.set_defaults(func=_cmd_dump_channel)

    bench = sub.add_parser("bench", help="time the hot kernels")
    bench.add_argument("--config", default=None)
    bench.add_argument("--seed", type=int, default=None)
    bench.set_defaults(func=_cmd_bench)

    dflt = sub.add_parser("print-defaults", help="emit the default configuration")
    dflt.set_defaults(func=_cmd_print_defaults)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except CampaignError as exc:
        print(f"campaign error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
