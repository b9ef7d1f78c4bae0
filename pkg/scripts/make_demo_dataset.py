#!/usr/bin/env python3
"""Regenerate the committed demo dataset and its golden norms CSVs.

The dataset plants one strong contextual pattern (Tax ID in Health/Payment)
and one uncommon case (Date of Birth in an uncategorized Subscription form)
so the norms stage has something to find.
"""
from __future__ import annotations

import random
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from formnorms.dataset import AnnotatedForm, WebsiteCategory, write_jsonl  # noqa: E402

OUT = REPO / "tests" / "fixtures" / "datasets" / "cleaned_demo.jsonl"
GOLDENS = REPO / "tests" / "goldens"


def build_records():
    rng = random.Random(20240202)
    records = []

    def add(domain, cats, form_type, pi):
        records.append(AnnotatedForm(
            domain=domain,
            categories=frozenset(WebsiteCategory.parse(c) for c in cats),
            form_type=form_type, pi_types=frozenset(pi),
            form_id=f"f{len(records):03d}", page_lang="en"))

    # Health sites: Payment forms usually collect Tax ID (the hot context)
    for i in range(30):
        pi = ["Email Address", "Person Name"]
        if i < 24:
            pi.append("Tax ID")
        add(f"health{i:02d}.test", ["Health"], "Payment", pi)
        add(f"health{i:02d}.test", ["Health"], "Contact",
            ["Email Address", "Phone Number"])

    # Travel sites: Contact and Subscription forms, no Tax ID
    for i in range(30):
        add(f"travel{i:02d}.test", ["Travel"], "Contact",
            ["Email Address", "Person Name"])
        if i < 20:
            add(f"travel{i:02d}.test", ["Travel"], "Subscription",
                ["Email Address"])

    # uncategorized subscription sites; exactly one collects Date of Birth
    for i in range(40):
        pi = ["Email Address"]
        if i == 7:
            pi.append("Date of Birth")
        add(f"plain{i:02d}.test", [], "Subscription", pi)

    # a couple of duplicated records (storage keeps duplicates)
    records.append(records[0])
    records.append(records[45])
    return records


def main() -> None:
    records = build_records()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    write_jsonl(OUT, records, "annotated_forms", config_hash="demo", rng_seed=0)
    print(f"wrote {len(records)} records -> {OUT}")

    # regenerate goldens by running the norms stage on a scratch outdir
    GOLDENS.mkdir(exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "out"
        (out / "clean").mkdir(parents=True)
        shutil.copy(OUT, out / "clean" / "dataset.jsonl")
        code = subprocess.run(
            [sys.executable, "-m", "formnorms.cli", "--out", str(out), "norms"],
            cwd=REPO).returncode
        if code != 0:
            raise SystemExit(f"norms stage failed: {code}")
        for name in ("heatmap.csv", "uncommon.csv"):
            shutil.copy(out / "norms" / name, GOLDENS / name)
            print(f"golden -> {GOLDENS / name}")


if __name__ == "__main__":
    main()
