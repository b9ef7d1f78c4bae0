"""Pipeline CLI: probe -> crawl -> annotate -> clean -> norms -> policy -> report.

Each stage reads the previous stage's artifacts from the output directory and
writes schema-versioned files of its own. Every artifact embeds the schema
version, the config hash, and the RNG seed, so re-running a stage with the
same inputs reproduces identical bytes.

Exit codes: 0 ok, 1 usage error, 2 stage failure, 3 external-service failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import shlex
import sys
from pathlib import Path

from . import annotate as ann
from . import dataset as ds
from . import form_extract, frontier, norms, page_provider, policy
from .config import ConfigError, PipelineConfig
from .textsim import TrigramEmbedder
from .urltools import apex_of
from .wire import AdapterProvider

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_STAGE = 2
EXIT_EXTERNAL = 3

STAGES = ("probe", "crawl", "annotate", "clean", "norms", "policy", "report")


class UsageError(Exception):
    pass


class StageError(Exception):
    pass


class ExternalServiceError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> _Parser:
    parser = _Parser(prog="formnorms", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--out", dest="output_dir", help="output directory")
    parser.add_argument("--sites", dest="sites_file", help="file of site URLs, one per line")
    parser.add_argument("--seeds-file", dest="seeds_file")
    parser.add_argument("--budget", type=int)
    parser.add_argument("--rate-limit", dest="rate_limit", type=float,
                        help="tasks per minute per site")
    parser.add_argument("--seed", dest="rng_seed", type=int)
    parser.add_argument("--failure-cap", dest="failure_cap", type=int)
    parser.add_argument("--provider", help='"static" or "adapter:<command>"')
    parser.add_argument("--category-map", dest="category_map")
    parser.add_argument("--form-votes", dest="form_votes_file")
    parser.add_argument("--pi-labels", dest="pi_labels_file")
    parser.add_argument("--policy-extractor", dest="policy_extractor")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--uncommon-threshold", dest="uncommon_threshold", type=float)
    parser.add_argument("--figures", action="store_true", default=None)
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("stage", choices=STAGES, metavar="stage",
                        help=f"one of: {', '.join(STAGES)}")
    return parser


def load_config(args) -> PipelineConfig:
    config = PipelineConfig()
    if args.config:
        if not Path(args.config).exists():
            raise UsageError(f"config file not found: {args.config}")
        config.update_from_file(args.config)
    for key in PipelineConfig.field_names():
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    config.validate_paths()
    return config


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise StageError(f"missing artifact {path}; run the '{stage}' stage first")
    return path


def _meta(config: PipelineConfig) -> dict:
    return {"config_hash": config.config_hash(), "rng_seed": config.rng_seed}


def _make_provider(config: PipelineConfig):
    if config.provider == "static":
        return page_provider.StaticProvider()
    if config.provider.startswith("adapter:"):
        command = shlex.split(config.provider[len("adapter:"):])
        if not command:
            raise UsageError("adapter provider needs a command")
        return AdapterProvider(command)
    raise UsageError(f"unknown provider {config.provider!r}")


def _read_sites(config: PipelineConfig) -> list[str]:
    if not config.sites_file:
        raise UsageError("no sites_file configured")
    lines = Path(config.sites_file).read_text(encoding="utf-8").splitlines()
    sites = [ln.strip() for ln in lines if ln.strip() and not ln.startswith("#")]
    if not sites:
        raise UsageError(f"{config.sites_file} lists no sites")
    return sites


def _site_url(site: str) -> str:
    return site if site.startswith(("http://", "https://")) else f"http://{site}/"


# ---------------------------------------------------------------------------
# stages

def stage_probe(config: PipelineConfig) -> None:
    provider = page_provider.StaticProvider()
    results = []
    for site in _read_sites(config):
        url = _site_url(site)
        domain = url.split("//", 1)[1].split("/", 1)[0]
        result = page_provider.probe_domain(domain, provider)
        log.info("probe %s -> %s", domain, result.status)
        results.append({"domain": result.domain, "status": result.status,
                        "detail": result.detail})
    ds.write_jsonl(config.out_path("probe.jsonl"), results, "probe_results",
                   **_meta(config))


def stage_crawl(config: PipelineConfig) -> None:
    probe_path = _require(config.out_path("probe.jsonl"), "probe")
    approved = [r["domain"] for r in ds.read_jsonl(probe_path, "probe_results")
                if r["status"] == "ok"]
    if config.seeds_file:
        seeds = frontier.SeedPhraseSet.from_file(config.seeds_file)
    else:
        seeds = frontier.SeedPhraseSet.default()
    scorer = frontier.SeedScorer(seeds, TrigramEmbedder())

    def crawl_one(domain: str) -> frontier.CrawlReport:
        # per-site rate limiting: each site gets its own sequential loop and
        # provider instance (adapters are one subprocess each)
        provider = _make_provider(config)
        try:
            report = frontier.run_site(_site_url(domain), provider, scorer,
                                       budget=config.budget,
                                       rate_limit=config.rate_limit,
                                       rng_seed=config.rng_seed,
                                       failure_cap=config.failure_cap,
                                       proximity=config.proximity)
        finally:
            if hasattr(provider, "close"):
                provider.close()
        log.info("crawl %s: %d tasks, %d forms%s", domain,
                 report.tasks_executed, len(report.forms),
                 " (failed)" if report.failed else "")
        return report

    if config.workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            reports = list(pool.map(crawl_one, approved))
    else:
        reports = [crawl_one(domain) for domain in approved]

    # artifacts are emitted in site input order regardless of worker timing
    form_records, page_records, report_records = [], [], []
    for report in reports:
        form_records.extend(report.forms)
        page_records.extend(
            {"url": p.final_url, "title": p.title, "html": p.html,
             "lang_attr": p.lang_attr} for p in report.pages)
        report_records.extend(r.to_json() for r in report.records)
        report_records.append({"site": report.site, "failed": report.failed,
                               "failure_reason": report.failure_reason,
                               "tasks": report.tasks_executed,
                               "forms": len(report.forms)})

    ds.write_jsonl(config.out_path("crawl", "forms.jsonl"), form_records,
                   "raw_forms", **_meta(config))
    ds.write_jsonl(config.out_path("crawl", "pages.jsonl"), page_records,
                   "pages", **_meta(config))
    ds.write_jsonl(config.out_path("crawl", "report.jsonl"), report_records,
                   "crawl_report", **_meta(config))


def _pi_model(config: PipelineConfig) -> ann.TextClassifier:
    if config.pi_labels_file:
        labeled = ann.load_labeled_jsonl(config.pi_labels_file)
    else:
        from importlib import resources
        path = resources.files("formnorms.data").joinpath("seed_pi_labels.jsonl")
        labeled = ann.load_labeled_jsonl(path)
    return ann.train_pi_classifier(labeled, seed=config.rng_seed)


def _form_model(config: PipelineConfig) -> ann.TextClassifier:
    if config.form_votes_file:
        votes = ann.load_votes_jsonl(config.form_votes_file)
    else:
        from importlib import resources
        path = resources.files("formnorms.data").joinpath("seed_form_votes.jsonl")
        votes = ann.load_votes_jsonl(path)
    samples = [(text, ann.soft_labels_from_votes(v).probabilities)
               for text, v in votes]
    # the seed-vote corpus is small; more epochs than the AL default are cheap
    return ann.train(samples, ann.FORM_TYPE_LABELS, seed=config.rng_seed,
                     epochs=50, lr=3.0)


def stage_annotate(config: PipelineConfig) -> None:
    forms_path = _require(config.out_path("crawl", "forms.jsonl"), "crawl")
    pages_path = _require(config.out_path("crawl", "pages.jsonl"), "crawl")

    lang_by_url: dict[str, str] = {}
    for page in ds.read_jsonl(pages_path, "pages"):
        snapshot = page_provider.make_snapshot(page["url"], page["html"], "static")
        lang_by_url[page["url"]] = ds.detect_language(snapshot)

    pi_model = _pi_model(config)
    form_model = _form_model(config)
    models_dir = config.out_path("models")
    models_dir.mkdir(parents=True, exist_ok=True)
    pi_model.save(models_dir / "pi_classifier.json")
    form_model.save(models_dir / "form_classifier.json")

    mapping = None
    if config.category_map:
        mapping = ds.CategoryMapping.from_tsv(config.category_map)

    records = []
    for obj in ds.read_jsonl(forms_path, "raw_forms"):
        raw = form_extract.RawForm.from_json(obj)
        label, _ = form_model.best_label(ann.clean_form_text(raw.html))
        form_type = label if label is not None else ann.FormType.UNKNOWN.value
        pi_types = set()
        for field in raw.fields:
            pi, _ = ann.classify_pi_type(pi_model, form_extract.featurize_field(field))
            if pi is not None:
                pi_types.add(pi)
        domain = apex_of(raw.page_url) or raw.page_url
        categories = mapping.categories(domain) if mapping else frozenset()
        records.append(ds.AnnotatedForm(
            domain=domain, categories=categories, form_type=form_type,
            pi_types=frozenset(pi_types), form_id=raw.form_id,
            synthetic=raw.synthetic,
            page_lang=lang_by_url.get(raw.page_url, "unknown")))

    ds.write_jsonl(config.out_path("annotate", "annotated.jsonl"), records,
                   "annotated_forms", **_meta(config))


def stage_clean(config: PipelineConfig) -> None:
    path = _require(config.out_path("annotate", "annotated.jsonl"), "annotate")
    records = ds.load_annotated(path)
    kept, report = ds.clean(records)
    ds.write_jsonl(config.out_path("clean", "dataset.jsonl"), kept,
                   "annotated_forms", **_meta(config))
    payload = {"_schema": f"cleaning_report/v{ds.SCHEMA_VERSION}", **_meta(config),
               **report.to_json()}
    out = config.out_path("clean", "cleaning_report.json")
    out.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                   encoding="utf-8")
    log.info("clean: kept %d of %d records", report.kept, report.input_count)


def _csv_header(config: PipelineConfig, schema: str) -> str:
    return (f"# schema={schema}/v{ds.SCHEMA_VERSION}"
            f" config={config.config_hash()} seed={config.rng_seed}\n")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def stage_norms(config: PipelineConfig) -> None:
    path = _require(config.out_path("clean", "dataset.jsonl"), "clean")
    records = ds.load_annotated(path)
    pi_types = sorted({t for r in records for t in r.pi_types})

    lines = [_csv_header(config, "norms_heatmap"),
             "pi_type,category,form_type,n_collect,n_total,rate,t_stat,dof,p_value,significant\n"]
    for pi_type in pi_types:
        for cell in norms.heatmap(records, pi_type, alpha=config.alpha):
            wildcard = cell.category == norms.WILDCARD or cell.form_type == norms.WILDCARD
            if not (cell.significant or (wildcard and cell.n_total > 0)):
                continue  # insignificant contexts are suppressed
            lines.append(",".join([
                _csv_quote(cell.pi_type), _csv_quote(cell.category),
                _csv_quote(cell.form_type), str(cell.n_collect), str(cell.n_total),
                _fmt(cell.rate), _fmt(cell.t_stat), _fmt(cell.dof),
                _fmt(cell.p_value), _fmt(cell.significant)]) + "\n")
    heatmap_path = config.out_path("norms", "heatmap.csv")
    heatmap_path.parent.mkdir(parents=True, exist_ok=True)
    heatmap_path.write_text("".join(lines), encoding="utf-8")

    flagged = norms.uncommon_cases(records, config.uncommon_threshold)
    lines = [_csv_header(config, "uncommon_cases"),
             "domain,form_id,form_type,pi_type,max_context_rate\n"]
    for row in flagged:
        lines.append(",".join([
            _csv_quote(row["domain"]), row["form_id"], _csv_quote(row["form_type"]),
            _csv_quote(row["pi_type"]), _fmt(row["max_context_rate"])]) + "\n")
    config.out_path("norms", "uncommon.csv").write_text("".join(lines),
                                                        encoding="utf-8")


def _csv_quote(value: str) -> str:
    if any(ch in value for ch in ",\"\n"):
        return '"' + value.replace('"', '""') + '"'
    return value


def stage_policy(config: PipelineConfig) -> None:
    pages_path = _require(config.out_path("crawl", "pages.jsonl"), "crawl")
    forms_path = _require(config.out_path("crawl", "forms.jsonl"), "crawl")
    dataset_path = _require(config.out_path("clean", "dataset.jsonl"), "clean")
    records = ds.load_annotated(dataset_path)

    detector = policy.PolicyLinkDetector()
    link_records = []
    policy_urls_by_site: dict[str, set[str]] = {}
    inform_sites_by_form_type: dict[str, set[str]] = {}

    for page in ds.read_jsonl(pages_path, "pages"):
        domain = apex_of(page["url"]) or page["url"]
        for link in detector.detect(page["html"], "page", base_url=page["url"]):
            link_records.append({"page_url": page["url"], "form_id": None,
                                 **link.to_json()})
            policy_urls_by_site.setdefault(domain, set()).add(link.url)

    form_type_by_id = {r.form_id: r.form_type for r in records}
    site_by_form_id = {r.form_id: r.domain for r in records}
    for obj in ds.read_jsonl(forms_path, "raw_forms"):
        raw = form_extract.RawForm.from_json(obj)
        for link in detector.detect(raw.html, "form", base_url=raw.page_url):
            link_records.append({"page_url": raw.page_url, "form_id": raw.form_id,
                                 **link.to_json()})
            domain = apex_of(raw.page_url) or raw.page_url
            policy_urls_by_site.setdefault(domain, set()).add(link.url)
            form_type = form_type_by_id.get(raw.form_id)
            if form_type:
                inform_sites_by_form_type.setdefault(form_type, set()).add(
                    site_by_form_id[raw.form_id])

    ds.write_jsonl(config.out_path("policy", "links.jsonl"), link_records,
                   "policy_links", **_meta(config))

    # fetch policies (cache keyed by URL hash) and extract disclosures
    provider = page_provider.StaticProvider()
    cache_dir = config.out_path("policy", "cache")
    cache_dir.mkdir(parents=True, exist_ok=True)
    extractor = shlex.split(config.policy_extractor) if config.policy_extractor else None
    pi_sites = {r.domain for r in records}

    disclosures: dict[str, frozenset[str]] = {}
    inaccessible: list[str] = []
    for domain in sorted(policy_urls_by_site):
        if domain not in pi_sites:
            continue
        texts = []
        for url in sorted(policy_urls_by_site[domain]):
            cached = policy.policy_cache_path(cache_dir, url)
            if cached.exists():
                html = cached.read_text(encoding="utf-8")
            else:
                origin = apex_of(url) or domain
                result = provider.fetch(url, origin)
                if result.status != "ok":
                    continue
                html = result.snapshot.html
                cached.write_text(html, encoding="utf-8")
            texts.append(_visible_text(html))
        if not texts:
            inaccessible.append(domain)
            continue
        disclosed = frozenset()
        for text in texts:  # all policy versions of a site are combined
            disclosed |= policy.extract_disclosures(text, extractor)
        if disclosed:
            disclosures[domain] = disclosed

    disclosure_records = [{"domain": d, "disclosed": sorted(disclosures[d])}
                          for d in sorted(disclosures)]
    ds.write_jsonl(config.out_path("policy", "disclosures.jsonl"),
                   disclosure_records, "policy_disclosures", **_meta(config))

    # comparison restricted to sites with a non-empty disclosure set
    universe = sorted(disclosures)
    collected = {d: frozenset(t for r in records if r.domain == d
                              for t in r.pi_types) for d in universe}
    lines = [_csv_header(config, "policy_comparison"),
             "pi_type,n_cp,n_c_only,p_omitted,n_p_only,p_notcollected,omission_rate,phi\n"]
    for pi_type in policy.MAPPABLE_PI_TYPES:
        row = policy.compare(collected, disclosures, pi_type)
        lines.append(",".join([
            _csv_quote(row.pi_type), str(row.n_cp), str(row.n_c_only),
            _fmt(row.p_omitted), str(row.n_p_only), _fmt(row.p_notcollected),
            _fmt(row.omission_rate), _fmt(row.phi)]) + "\n")
    config.out_path("policy", "comparison.csv").write_text("".join(lines),
                                                           encoding="utf-8")

    # per-category disclosure rates among analyzed sites
    cats_by_site = {r.domain: sorted({str(c) for c in r.categories})
                    for r in records}
    lines = [_csv_header(config, "category_disclosure"),
             "category,pi_type,n_disclosing,n_sites,rate\n"]
    by_category: dict[str, set[str]] = {}
    for domain in universe:
        for cat in cats_by_site.get(domain, []):
            by_category.setdefault(cat, set()).add(domain)
    for cat in sorted(by_category):
        sites = by_category[cat]
        for pi_type in policy.MAPPABLE_PI_TYPES:
            n_disc = sum(1 for d in sites if pi_type in disclosures[d])
            lines.append(",".join([
                _csv_quote(cat), _csv_quote(pi_type), str(n_disc),
                str(len(sites)), _fmt(n_disc / len(sites))]) + "\n")
    config.out_path("policy", "category_disclosure.csv").write_text(
        "".join(lines), encoding="utf-8")

    # in-form link placement by form type
    lines = [_csv_header(config, "inform_links"),
             "form_type,n_sites_with_inform_link,n_sites_with_form_type\n"]
    for form_type in sorted({r.form_type for r in records}):
        with_form = {r.domain for r in records if r.form_type == form_type}
        with_link = inform_sites_by_form_type.get(form_type, set()) & with_form
        lines.append(",".join([_csv_quote(form_type), str(len(with_link)),
                               str(len(with_form))]) + "\n")
    config.out_path("policy", "inform_links.csv").write_text("".join(lines),
                                                             encoding="utf-8")

    summary = {"_schema": f"policy_summary/v{ds.SCHEMA_VERSION}", **_meta(config),
               "sites_with_pi_forms": len(pi_sites),
               "sites_with_policy_links": len(set(policy_urls_by_site) & pi_sites),
               "sites_policy_inaccessible": len(inaccessible),
               "sites_analyzed": len(universe)}
    config.out_path("policy", "summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _visible_text(html: str) -> str:
    from .htmldom import parse_html
    return parse_html(html).visible_text()


def stage_report(config: PipelineConfig) -> None:
    heatmap_path = _require(config.out_path("norms", "heatmap.csv"), "norms")
    comparison_path = _require(config.out_path("policy", "comparison.csv"), "policy")
    lines = ["formnorms report", "================", ""]
    lines.append("norms heatmap (significant contexts + averages):")
    lines.extend("  " + ln.rstrip("\n")
                 for ln in heatmap_path.read_text(encoding="utf-8").splitlines()[1:])
    lines.append("")
    lines.append("policy comparison:")
    lines.extend("  " + ln.rstrip("\n")
                 for ln in comparison_path.read_text(encoding="utf-8").splitlines()[1:])
    lines.append("")
    out = config.out_path("report", "summary.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if config.figures:
        _render_figures(config)


def _render_figures(config: PipelineConfig) -> None:
    import csv
    import io

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    text = config.out_path("norms", "heatmap.csv").read_text(encoding="utf-8")
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("#"))
    rows = list(csv.DictReader(io.StringIO(body)))

    # dataset-average collection rate per PI type, as a bar chart
    rates = {r["pi_type"]: float(r["rate"]) for r in rows
             if r["category"] == "*" and r["form_type"] == "*" and r["rate"]}
    if rates:
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.bar(list(rates), list(rates.values()))
        ax.set_ylabel("collection rate")
        ax.tick_params(axis="x", rotation=60)
        fig.tight_layout()
        fig.savefig(config.out_path("report", "collection_rates.png"),
                    metadata={"Software": "formnorms"})
        plt.close(fig)

    # per-PI-type context heatmap over the emitted (significant + average) cells
    for pi_type in sorted({r["pi_type"] for r in rows}):
        cells = [r for r in rows if r["pi_type"] == pi_type and r["rate"]]
        cats = sorted({r["category"] for r in cells})
        fts = sorted({r["form_type"] for r in cells})
        if len(cats) < 2 and len(fts) < 2:
            continue
        grid = [[float("nan")] * len(fts) for _ in cats]
        for r in cells:
            grid[cats.index(r["category"])][fts.index(r["form_type"])] = \
                float(r["rate"])
        fig, ax = plt.subplots(figsize=(1.2 + 0.8 * len(fts),
                                        1.0 + 0.5 * len(cats)))
        im = ax.imshow(grid, vmin=0.0, cmap="viridis", aspect="auto")
        ax.set_xticks(range(len(fts)), fts, rotation=45, ha="right")
        ax.set_yticks(range(len(cats)), cats)
        ax.set_title(pi_type)
        fig.colorbar(im, ax=ax, label="collection rate")
        fig.tight_layout()
        safe = "".join(c if c.isalnum() else "_" for c in pi_type.lower())
        fig.savefig(config.out_path("report", f"heatmap_{safe}.png"),
                    metadata={"Software": "formnorms"})
        plt.close(fig)


STAGE_FUNCS = {
    "probe": stage_probe,
    "crawl": stage_crawl,
    "annotate": stage_annotate,
    "clean": stage_clean,
    "norms": stage_norms,
    "policy": stage_policy,
    "report": stage_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
        STAGE_FUNCS[args.stage](config)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except ExternalServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    except (ann.OracleError,) as exc:
        print(f"external service error: {exc}", file=sys.stderr)
        return EXIT_EXTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
