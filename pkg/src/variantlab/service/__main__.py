"""Service entry point: python3 -m variantlab.service."""

from __future__ import annotations

import argparse
from pathlib import Path

import uvicorn

from variantlab.service.api import create_app
from variantlab.service.config import build_context, load_settings
from variantlab.service.storage import SqliteStore


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="variantlab.service", description="Run the campaign service.")
    parser.add_argument("--db", default="variantlab.sqlite", help="SQLite database path")
    parser.add_argument("--settings", default=None, help="YAML settings file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8321)
    parser.add_argument("--token", default=None, help="shared bearer token (overrides settings)")
    parser.add_argument("--dashboard-dist", default=None, help="built dashboard assets to serve at /")
    args = parser.parse_args(argv)

    settings = load_settings(args.settings)
    if args.token:
        settings["token"] = args.token
    store = SqliteStore(args.db)
    workdir = Path(args.db).resolve().parent if args.db != ":memory:" else Path(".")
    ctx = build_context(settings, store, workdir=workdir)
    app = create_app(ctx, dashboard_dist=args.dashboard_dist)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
