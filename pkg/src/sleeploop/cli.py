"""Command line entry point.

Headless mode runs the configured session start to finish and prints a
summary; server mode exposes the control API (and optionally starts a session
immediately when --config is given). The data directory comes from
--data-dir, the SLEEPLOOP_DATA_DIR environment variable, or ./sleeploop-data.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .session.api import ApiServer
from .session.config import BadConfig, config_from_dict
from .session.runner import SessionRunner, SessionService


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="sleeploop", description=__doc__)
    parser.add_argument("--config", help="session config JSON file")
    parser.add_argument("--listen", default="127.0.0.1:8765", help="control API address (addr:port)")
    parser.add_argument("--headless", action="store_true", help="run the session to completion without the API server")
    parser.add_argument("--data-dir", default=None, help="journal/export directory")
    args = parser.parse_args(argv)

    data_dir = args.data_dir or os.environ.get("SLEEPLOOP_DATA_DIR", "./sleeploop-data")

    cfg = None
    if args.config:
        try:
            with open(args.config) as f:
                cfg = config_from_dict(json.load(f))
        except (OSError, json.JSONDecodeError, BadConfig) as e:
            print(f"bad config: {e}", file=sys.stderr)
            return 2

    if args.headless:
        if cfg is None:
            print("--headless requires --config", file=sys.stderr)
            return 2
        try:
            runner = SessionRunner(cfg, data_dir)
        except BadConfig as e:
            print(f"bad config: {e}", file=sys.stderr)
            return 2
        runner.run_blocking()
        report = runner.snapshot()
        print(
            f"session {cfg.session_id}: {report.epochs} epochs, "
            f"{report.stim_delivered} stimuli delivered, {report.stim_missed} missed, "
            f"journal in {data_dir}"
        )
        return 0

    service = SessionService(data_dir)
    host, _, port = args.listen.partition(":")
    server = ApiServer(service, host or "127.0.0.1", int(port or 8765))
    server.start()
    print(f"control API listening on http://{host or '127.0.0.1'}:{server.port}")
    if cfg is not None:
        service.start_session(cfg)
        print(f"session {cfg.session_id} started")
    try:
        while True:
            import time

            time.sleep(0.5)
    except KeyboardInterrupt:
        server.stop()
        return 0


if __name__ == "__main__":
    sys.exit(main())
