"""Command line entry point: ``beyondwords run|stage|synth``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import synth
from .config import STAGES, load_config
from .errors import BeyondWordsError, ConfigError, ExternalServiceError

EXIT_OK, EXIT_CONFIG, EXIT_STAGE, EXIT_EXTERNAL = 0, 1, 2, 3

log = logging.getLogger("beyondwords")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="beyondwords", description="Latent theme extraction pipeline.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run every stage in order")
    run.add_argument("--config", required=True)
    run.add_argument("--force", action="store_true", help="rerun stages even when cached")

    st = sub.add_parser("stage", help="run a single stage")
    st.add_argument("name", choices=STAGES)
    st.add_argument("--config", required=True)
    st.add_argument("--force", action="store_true")

    sy = sub.add_parser("synth", help="write a synthetic corpus with planted topics")
    sy.add_argument("--posts", type=int, required=True)
    sy.add_argument("--topics", type=int, default=3)
    sy.add_argument("--out", required=True)
    sy.add_argument("--seed", type=int, default=0)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            try:
                records = synth.generate_posts(args.posts, args.topics, args.seed)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            path = synth.write_jsonl(records, args.out)
            print(f"wrote {len(records)} posts to {path}")
            return EXIT_OK

        from .pipeline import run_all, stage_run
        cfg = load_config(args.config)
        if args.command == "run":
            root = run_all(cfg, force=args.force)
            print(f"run complete: {root}")
        else:
            res = stage_run(args.name, cfg, force=args.force)
            state = "skipped (up to date)" if res.skipped else "done"
            print(f"stage {res.stage}: {state}, {len(res.artifacts)} artifact(s) in {cfg.run_path}")
        return EXIT_OK
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except ExternalServiceError as exc:
        log.error("external service failure: %s", exc)
        return EXIT_EXTERNAL
    except BeyondWordsError as exc:
        log.error("stage failure: %s", exc)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
