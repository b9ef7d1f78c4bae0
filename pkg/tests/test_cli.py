import json
from pathlib import Path

import pytest

from formnorms import cli
from formnorms.fixtureserver import FixtureServer
from tests.pipeline_site import PIPELINE_PAGES

GOLDEN_DIR = Path(__file__).parent / "goldens"
DATASET_DIR = Path(__file__).parent / "fixtures" / "datasets"


def run_cli(*argv):
    return cli.main(list(argv))


class TestUsage:
    def test_unknown_subcommand_is_usage_error(self, capsys):
        assert run_cli("frobnicate") == cli.EXIT_USAGE
        assert "usage" in capsys.readouterr().err.lower()

    def test_no_subcommand_is_usage_error(self):
        assert run_cli() == cli.EXIT_USAGE

    def test_unknown_provider_is_usage_error(self, tmp_path, capsys):
        sites = tmp_path / "sites.txt"
        sites.write_text("example.test\n", encoding="utf-8")
        assert run_cli("--sites", str(sites), "--out", str(tmp_path / "out"),
                       "--provider", "teleport", "probe") == cli.EXIT_USAGE

    def test_missing_config_file(self):
        assert run_cli("--config", "/nonexistent.conf", "probe") == cli.EXIT_USAGE

    def test_bad_config_key_rejected(self, tmp_path):
        conf = tmp_path / "bad.conf"
        conf.write_text("nonsense_key = 1\n", encoding="utf-8")
        assert run_cli("--config", str(conf), "probe") == cli.EXIT_USAGE


class TestStageSequencing:
    def test_missing_prior_artifact_names_stage(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run_cli("--out", str(out), "crawl") == cli.EXIT_STAGE
        err = capsys.readouterr().err
        assert "probe" in err

    def test_norms_requires_clean(self, tmp_path, capsys):
        out = tmp_path / "out"
        out.mkdir()
        assert run_cli("--out", str(out), "norms") == cli.EXIT_STAGE
        assert "clean" in capsys.readouterr().err


@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    """Run the full pipeline against the fixture site, twice (same outdir),
    snapshotting artifact bytes after each pass."""
    base = tmp_path_factory.mktemp("pipeline")
    out = base / "out"
    with FixtureServer.from_pages(PIPELINE_PAGES) as server:
        sites = base / "sites.txt"
        sites.write_text(server.base_url + "\n", encoding="utf-8")
        category_map = base / "cats.tsv"
        category_map.write_text("127.0.0.1\tHealth\t\n", encoding="utf-8")
        argv_common = ["--sites", str(sites), "--out", str(out),
                       "--category-map", str(category_map),
                       "--rate-limit", "6000", "--seed", "11"]

        def run_all():
            for stage in ("probe", "crawl", "annotate", "clean", "norms",
                          "policy", "report"):
                code = cli.main([*argv_common, stage])
                assert code == cli.EXIT_OK, stage
            return {p.relative_to(out).as_posix(): p.read_bytes()
                    for p in sorted(out.rglob("*")) if p.is_file()}

        first = run_all()
        second = run_all()
    return {"first": first, "second": second, "out": out}


class TestPipeline:
    def test_all_stage_artifacts_exist(self, pipeline_run):
        files = set(pipeline_run["first"])
        for expected in ("probe.jsonl", "crawl/forms.jsonl", "crawl/pages.jsonl",
                         "crawl/report.jsonl", "annotate/annotated.jsonl",
                         "clean/dataset.jsonl", "clean/cleaning_report.json",
                         "norms/heatmap.csv", "norms/uncommon.csv",
                         "policy/links.jsonl", "policy/disclosures.jsonl",
                         "policy/comparison.csv", "policy/summary.json",
                         "report/summary.txt"):
            assert expected in files, expected

    def test_rerun_is_byte_identical(self, pipeline_run):
        assert set(pipeline_run["first"]) == set(pipeline_run["second"])
        for name, blob in pipeline_run["first"].items():
            assert pipeline_run["second"][name] == blob, name

    def test_crawl_found_the_planted_forms(self, pipeline_run):
        lines = pipeline_run["first"]["crawl/forms.jsonl"].decode().splitlines()
        records = [json.loads(l) for l in lines[1:]]
        # login, signup, contact, german and the synthetic newsletter group
        assert len(records) == 5
        synthetic = [r for r in records if r["synthetic"]]
        assert len(synthetic) == 1
        assert {f["attributes"]["name"] for f in synthetic[0]["fields"]} == \
            {"nl_email", "nl_zip"}

    def test_annotation_assigns_expected_pi_types(self, pipeline_run):
        lines = pipeline_run["first"]["annotate/annotated.jsonl"].decode().splitlines()
        records = [json.loads(l) for l in lines[1:]]
        by_id = {}
        for r in records:
            by_id.setdefault(frozenset(r["pi_types"]), []).append(r)
        all_pi = {t for r in records for t in r["pi_types"]}
        assert "Email Address" in all_pi
        assert "Date of Birth" in all_pi
        assert "Password" in all_pi  # auxiliary, removed later by clean

    def test_clean_drops_german_and_auxiliary(self, pipeline_run):
        report = json.loads(pipeline_run["first"]["clean/cleaning_report.json"])
        assert report["dropped_non_english"] == 1
        cleaned = [json.loads(l) for l in
                   pipeline_run["first"]["clean/dataset.jsonl"].decode().splitlines()[1:]]
        for record in cleaned:
            assert "Password" not in record["pi_types"]
            assert record["categories"] == ["Health"]

    def test_policy_stage_found_disclosures(self, pipeline_run):
        disclosures = [json.loads(l) for l in
                       pipeline_run["first"]["policy/disclosures.jsonl"].decode().splitlines()[1:]]
        assert len(disclosures) == 1
        assert "Email Address" in disclosures[0]["disclosed"]
        assert "Phone Number" in disclosures[0]["disclosed"]
        comparison = pipeline_run["first"]["policy/comparison.csv"].decode()
        assert "Email Address" in comparison

    def test_artifact_headers_carry_meta(self, pipeline_run):
        header = json.loads(
            pipeline_run["first"]["crawl/forms.jsonl"].decode().splitlines()[0])
        assert header["_schema"].startswith("raw_forms/")
        assert header["_rng_seed"] == 11
        assert len(header["_config_hash"]) == 16
        csv_head = pipeline_run["first"]["norms/heatmap.csv"].decode().splitlines()[0]
        assert csv_head.startswith("# schema=norms_heatmap/")
        assert "seed=11" in csv_head


class TestNormsGolden:
    def test_committed_dataset_reproduces_golden_csvs(self, tmp_path):
        out = tmp_path / "out"
        (out / "clean").mkdir(parents=True)
        dataset = (DATASET_DIR / "cleaned_demo.jsonl").read_bytes()
        (out / "clean" / "dataset.jsonl").write_bytes(dataset)
        assert cli.main(["--out", str(out), "norms"]) == cli.EXIT_OK
        got_heatmap = (out / "norms" / "heatmap.csv").read_bytes()
        got_uncommon = (out / "norms" / "uncommon.csv").read_bytes()
        assert got_heatmap == (GOLDEN_DIR / "heatmap.csv").read_bytes()
        assert got_uncommon == (GOLDEN_DIR / "uncommon.csv").read_bytes()
