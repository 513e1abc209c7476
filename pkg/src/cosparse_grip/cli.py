"""Command-line front end: run one campaign from a JSON config.

    cosparse-grip <experiment> --config <path> [--seed N] [--out <dir>]

Exit codes: 0 success; 2 config error (including a config whose named
experiment disagrees with the command); 3 bound-violation finding (some
verified inequality came out below -num_tol); 4 solver non-convergence.
When both 3 and 4 apply, 4 wins: an unconverged solve makes the recorded
slacks unreliable, so non-convergence is the more fundamental finding.
A crashed trial flushes the completed rows and exits 1. Outputs land in
--out (falling back to the config's output_path, then the working
directory) as results.csv, results.jsonl and config_echo.json.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .campaign import (
    EXPERIMENTS,
    CampaignTrialError,
    ConfigError,
    ExperimentConfig,
    run,
    write_outputs,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="cosparse-grip",
        description="seeded experiment campaigns for analysis-sparse recovery",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", required=True, metavar="PATH",
                        help="JSON campaign config")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's campaign seed")
    parser.add_argument("--out", default=None, metavar="DIR",
                        help="output directory (default: config output_path or '.')")
    args = parser.parse_args(argv)

    try:
        config = ExperimentConfig.from_file(args.config)
        if config.experiment != args.experiment:
            raise ConfigError(
                f"config names experiment {config.experiment!r}, "
                f"command asked for {args.experiment!r}"
            )
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            config = replace(config, seed=args.seed)
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2

    out_dir = args.out or config.output_path or "."

    try:
        result = run(config)
    except ConfigError as err:
        # instance-pool diagnostics (e.g. hypothesis unsatisfiable at
        # these dimensions) are config problems found at run time
        print(f"error: {err}", file=sys.stderr)
        return 2
    except CampaignTrialError as err:
        write_outputs(err.partial, out_dir)
        print(f"error: {err}; partial results written to {out_dir}", file=sys.stderr)
        return 1

    paths = write_outputs(result, out_dir)
    print(f"{config.experiment}: {len(result.rows)} rows -> {paths['csv']}")
    for key, val in result.summary.items():
        print(f"  {key} = {val}")

    if result.summary.get("unconverged", 0) > 0:
        print("finding: solver failed to converge on at least one trial", file=sys.stderr)
        return 4
    if result.summary.get("violations", 0) > 0:
        print("finding: bound violated beyond numerical tolerance", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
