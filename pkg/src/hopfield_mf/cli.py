"""Command line: ``hopfield-mf <mode> [--config FILE] [--key value ...] --out DIR``.

Exit codes: 0 success, 1 invalid config, 2 compute failure, 3 comparison failed.
"""

import argparse
import logging
import sys

from .runner import MODES, ComparisonError, ConfigError, build_config, format_report, \
    read_config_file, run_experiment

log = logging.getLogger("hopfield_mf")

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_COMPARE = 0, 1, 2, 3


def _overrides(extra):
    """Turn ``--key value`` / ``--key=value`` pairs into a dict."""
    out = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(tok, "expected --key value")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            try:
                val = next(it)
            except StopIteration:
                raise ConfigError(key, "missing value") from None
        out[key.replace("-", "_")] = val
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(prog="hopfield-mf", description=__doc__.splitlines()[0])
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", help="flat key = value file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("-v", "--verbose", action="store_true")
    args, extra = ap.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        values = read_config_file(args.config) if args.config else {}
        values.update(_overrides(extra))
        values["mode"] = args.mode
        if args.out:
            values["out"] = args.out
        cfg = build_config(values)
        if not cfg.out:
            raise ConfigError("out", "output directory required")
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run_experiment(cfg)
    except ComparisonError as exc:
        print(f"comparison error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # any numerical or I/O failure during the run
        log.debug("run failed", exc_info=True)
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE

    if cfg.mode == "compare":
        sys.stdout.write(format_report(result))
        return EXIT_OK if result["passed"] else EXIT_COMPARE
    log.info("wrote %s (content %s)", cfg.out, result["content_hash"])
    print(cfg.out)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
