#!/usr/bin/env python3
"""Run the full pipeline against the in-repo fixture site.

Spins up the local fixture server, then executes
probe -> crawl -> annotate -> clean -> norms -> policy -> report
into ./out-fixture (override with --out). Everything is hermetic.
"""
from __future__ import annotations

import argparse
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))
sys.path.insert(0, str(REPO))

from formnorms import cli  # noqa: E402
from formnorms.fixtureserver import FixtureServer  # noqa: E402
from tests.pipeline_site import PIPELINE_PAGES  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="out-fixture")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--provider", default="static",
                        help='"static" or "adapter:<command>"')
    parser.add_argument("--figures", action="store_true")
    args = parser.parse_args()

    with FixtureServer.from_pages(PIPELINE_PAGES) as server, \
            tempfile.TemporaryDirectory() as tmp:
        sites = Path(tmp) / "sites.txt"
        sites.write_text(server.base_url + "\n", encoding="utf-8")
        cats = Path(tmp) / "cats.tsv"
        cats.write_text("127.0.0.1\tHealth\t\n", encoding="utf-8")
        argv = ["--sites", str(sites), "--out", args.out,
                "--category-map", str(cats), "--rate-limit", "600",
                "--seed", str(args.seed), "--provider", args.provider]
        if args.figures:
            argv.append("--figures")
        for stage in ("probe", "crawl", "annotate", "clean", "norms",
                      "policy", "report"):
            print(f"== {stage}")
            code = cli.main([*argv, stage])
            if code != 0:
                print(f"stage {stage} failed with exit code {code}",
                      file=sys.stderr)
                return code
    print(f"\nartifacts in {args.out}/; see report/summary.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
