"""Reproduce the latency/energy trend experiments.

Sweeps newcomer/member/neighbor-head counts and the channel bitrate with
batching on and off, writes one CSV per sweep, and prints the reduction
summary. Run: python scripts/run_experiments.py --outdir results
"""
import argparse
import os
from dataclasses import replace

from clusterauth.cli import SWEEP_COLUMNS, _fmt_metrics_row, write_atomic
from clusterauth.sim import ScenarioConfig, derive_seed, run_scenario

SWEEPS = {
    "n_nuav": (3, 4, 5, 6, 7),
    "n_cm": (3, 4, 5, 6, 7),
    "n_ch": (3, 4, 5, 6, 7),
    "bitrate": (1e6, 11e6, 24e6, 48e6, 54e6),
}


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results")
    parser.add_argument("--seed", type=int, default=1)
    args = parser.parse_args()
    os.makedirs(args.outdir, exist_ok=True)

    base = ScenarioConfig(rng_seed=args.seed)
    for param, values in SWEEPS.items():
        lines = [",".join(SWEEP_COLUMNS)]
        print(f"\n== sweep {param} ==")
        idx = 0
        for value in values:
            metrics = {}
            for mam in (True, False):
                cfg = replace(base, **{param: value}, mam=mam,
                              rng_seed=derive_seed(args.seed, param,
                                                   value, mam))
                metrics[mam] = run_scenario(cfg)
                lines.append(_fmt_metrics_row(f"s{idx:03d}", cfg,
                                              metrics[mam]))
                idx += 1
            on, off = metrics[True], metrics[False]
            red = 1 - on.join_latency_ms / off.join_latency_ms
            label = f"{value / 1e6:.0f}Mbps" if param == "bitrate" else value
            print(f"  {param}={label}: {on.join_latency_ms:8.2f} ms vs "
                  f"{off.join_latency_ms:8.2f} ms  "
                  f"(latency cut {100 * red:.1f}%)  "
                  f"head {on.e_ch_j * 1e3:.2f}/{off.e_ch_j * 1e3:.2f} mJ")
        path = os.path.join(args.outdir, f"sweep_{param}.csv")
        write_atomic(path, "\r\n".join(lines) + "\r\n")
        print(f"  -> {path}")


if __name__ == "__main__":
    main()
