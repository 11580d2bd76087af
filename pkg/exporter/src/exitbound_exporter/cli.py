"""Minimal command line: read an ExporterConfig from a JSON file and run it.

Example config::

    {"model": "reference-2exit", "exit_layers": ["exit1", "exit2"],
     "dataset": "builtin:reference", "output_path": "ref.trace",
     "split": "test", "max_samples": 32}
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ExporterConfig
from .errors import ExporterError
from .export import export_trace
from .registry import resolve_exit_layers


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="exitbound-export")
    parser.add_argument("config", help="JSON file with ExporterConfig fields")
    args = parser.parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        raw["exit_layers"] = resolve_exit_layers(raw["exit_layers"])
        path = export_trace(ExporterConfig(**raw))
    except (ExporterError, OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
