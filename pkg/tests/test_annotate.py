import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from formnorms import annotate as ann


class TestSoftLabels:
    def test_seven_three_split(self):
        votes = ["Account Registration"] * 7 + ["Account Login"] * 3
        soft = ann.soft_labels_from_votes(votes)
        assert soft.probabilities["Account Registration"] == pytest.approx(0.7)
        assert soft.probabilities["Account Login"] == pytest.approx(0.3)
        others = [v for k, v in soft.probabilities.items()
                  if k not in ("Account Registration", "Account Login")]
        assert all(v == 0.0 for v in others)

    def test_all_unknown_is_all_zero(self):
        soft = ann.soft_labels_from_votes(["Unknown"] * 10)
        assert all(v == 0.0 for v in soft.probabilities.values())

    def test_unknown_exclusion_rule(self):
        soft = ann.soft_labels_from_votes(["Unknown"] * 5 + ["Contact"] * 5)
        assert soft.probabilities["Contact"] == pytest.approx(0.5)
        assert sum(soft.probabilities.values()) == pytest.approx(0.5)

    def test_search_and_configuration_map_to_unknown(self):
        soft = ann.soft_labels_from_votes(["Search Form", "Configuration Form",
                                           "Payment", "Payment"])
        assert soft.probabilities["Payment"] == pytest.approx(0.5)
        assert sum(soft.probabilities.values()) == pytest.approx(0.5)

    def test_unrecognized_vote_warns_and_drops(self, caplog):
        with caplog.at_level("WARNING"):
            soft = ann.soft_labels_from_votes(["Gibberish Form", "Contact"])
        assert "unrecognized vote" in caplog.text
        assert soft.probabilities["Contact"] == pytest.approx(0.5)

    def test_empty_votes_rejected(self):
        with pytest.raises(ValueError):
            ann.soft_labels_from_votes([])

    @given(st.lists(st.sampled_from(list(ann.FORM_TYPE_LABELS) + ["Unknown"]),
                    min_size=1, max_size=20))
    @settings(max_examples=80)
    def test_entries_in_unit_interval_and_sum_at_most_one(self, votes):
        soft = ann.soft_labels_from_votes(votes)
        assert all(0.0 <= v <= 1.0 for v in soft.probabilities.values())
        assert sum(soft.probabilities.values()) <= 1.0 + 1e-12


class TestSeedSample:
    def test_weighted_groups_balance(self):
        # 9:1 group sizes, weights 1/|group| give each group equal total
        # weight, so a small draw splits evenly in expectation
        pi_sets = [("Email Address",)] * 900 + [("Phone Number", "Age")] * 100
        totals = 0
        draws = 300
        for trial in range(draws):
            rng = random.Random(trial)
            picked = ann.seed_sample(pi_sets, 20, rng)
            totals += sum(1 for i in picked if i >= 900)
        mean_b = totals / draws
        # analytic expectation ~= 10 of 20; allow sampling noise and the
        # without-replacement depletion of the smaller group
        assert 8.5 < mean_b < 11.5

    def test_uniform_when_single_group(self):
        pi_sets = [("Email Address",)] * 50
        counts = np.zeros(50)
        for trial in range(400):
            rng = random.Random(trial)
            for i in ann.seed_sample(pi_sets, 5, rng):
                counts[i] += 1
        # every index drawn a plausible number of times under uniformity
        assert counts.min() > 10 and counts.max() < 80

    def test_n_equal_to_size_returns_permutation(self):
        pi_sets = [("A",)] * 7 + [("B",)] * 3
        picked = ann.seed_sample(pi_sets, 10, random.Random(0))
        assert sorted(picked) == list(range(10))

    def test_n_larger_than_dataset_returns_all(self):
        picked = ann.seed_sample([("A",)] * 4, 99, random.Random(0))
        assert sorted(picked) == [0, 1, 2, 3]


def _separable_corpus(n=200, seed=3):
    rng = random.Random(seed)
    vocab = {"Contact": ["message", "inquiry", "question"],
             "Payment": ["card", "billing", "invoice"]}
    samples, truth = [], []
    for _ in range(n):
        label = rng.choice(list(vocab))
        tokens = rng.sample(vocab[label], 2) + [f"n{rng.randint(0, 30)}"]
        samples.append((" ".join(tokens), {label: 1.0}))
        truth.append(label)
    return samples, truth


class TestTraining:
    def test_linearly_separable_accuracy(self):
        samples, truth = _separable_corpus()
        model = ann.train(samples, ("Contact", "Payment"), dim=512,
                          epochs=10, seed=0)
        held_samples, held_truth = _separable_corpus(n=80, seed=77)
        probas = model.predict_proba([t for t, _ in held_samples])
        predicted = [model.labels[int(np.argmax(p))] for p in probas]
        accuracy = np.mean([p == t for p, t in zip(predicted, held_truth)])
        assert accuracy >= 0.95

    def test_overfits_single_hard_labeled_sample(self):
        samples = [("transfer funds wire routing", {"Payment": 1.0})] * 2
        model = ann.train(samples, ("Contact", "Payment"), dim=256,
                          epochs=10, lr=2.0, seed=0)
        label, prob = model.best_label("transfer funds wire routing")
        assert label == "Payment"
        assert prob >= 0.9

    def test_empty_training_set_rejected(self):
        with pytest.raises(ValueError):
            ann.train([], ("A",))

    def test_all_zero_targets_trains_bias_only(self, caplog):
        samples = [("anything here", {}), ("more text", {})]
        with caplog.at_level("WARNING"):
            model = ann.train(samples, ("Contact",), dim=64, seed=0)
        assert "bias-only" in caplog.text
        assert float(np.abs(model.weights).sum()) == 0.0
        assert model.predict_proba(["anything here"])[0][0] < 0.01

    def test_records_per_epoch_validation_loss(self):
        samples, _ = _separable_corpus()
        model = ann.train(samples, ("Contact", "Payment"), dim=512,
                          epochs=10, seed=0)
        assert len(model.history) == 10
        assert all("val_loss" in h for h in model.history)

    def test_training_invariant_to_sample_order(self):
        samples, _ = _separable_corpus()
        shuffled = list(samples)
        random.Random(5).shuffle(shuffled)
        m1 = ann.train(samples, ("Contact", "Payment"), dim=512, seed=9)
        m2 = ann.train(shuffled, ("Contact", "Payment"), dim=512, seed=9)
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.bias, m2.bias)

    def test_save_load_roundtrip(self, tmp_path):
        samples, _ = _separable_corpus(n=40)
        model = ann.train(samples, ("Contact", "Payment"), dim=128, seed=0)
        model.save(tmp_path / "m.json")
        loaded = ann.TextClassifier.load(tmp_path / "m.json")
        assert np.array_equal(loaded.weights, model.weights)
        assert loaded.labels == model.labels


class TestGradientCheck:
    def test_analytic_gradient_matches_central_differences(self):
        rng = np.random.default_rng(0)
        n, dim, n_labels = 12, 20, 3
        x = rng.normal(size=(n, dim))
        targets = rng.uniform(0, 1, size=(n, n_labels))
        weights = rng.normal(scale=0.3, size=(n_labels, dim))
        bias = rng.normal(scale=0.1, size=n_labels)
        _, grad_w, grad_b = ann.loss_and_grad(weights, bias, x, targets)
        eps = 1e-6

        def numeric(param, setter):
            flat = param.ravel()
            out = np.zeros_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up, _, _ = ann.loss_and_grad(weights, bias, x, targets)
                flat[i] = orig - eps
                down, _, _ = ann.loss_and_grad(weights, bias, x, targets)
                flat[i] = orig
                out[i] = (up - down) / (2 * eps)
            return out.reshape(param.shape)

        num_w = numeric(weights, None)
        num_b = numeric(bias, None)
        rel_w = np.abs(grad_w - num_w) / np.maximum(np.abs(num_w), 1e-8)
        rel_b = np.abs(grad_b - num_b) / np.maximum(np.abs(num_b), 1e-8)
        assert float(rel_w.max()) < 1e-5
        assert float(rel_b.max()) < 1e-5


def exhaustive_scan_oracle(probas, n, rng, minority=None, exclude=()):
    """Pure-python reference for select_queries."""
    probas = [list(row) for row in probas]
    columns = sorted(minority) if minority else range(len(probas[0]))
    picked = []
    taken = set(exclude)
    for _ in range(n):
        if len(taken) == len(probas):
            break
        target = 0.5 + rng.gauss(0.0, 0.15)
        best_i, best_d = None, None
        for i, row in enumerate(probas):
            if i in taken:
                continue
            d = min(abs(row[j] - target) for j in columns)
            if best_d is None or d < best_d:
                best_i, best_d = i, d
        picked.append(best_i)
        taken.add(best_i)
    return picked


class _ZeroGauss(random.Random):
    def gauss(self, mu, sigma):
        return 0.0


class TestSelectQueries:
    def test_picks_probability_closest_to_half(self):
        probas = np.array([[0.1], [0.48], [0.9]])
        picked = ann.select_queries(probas, 1, _ZeroGauss())
        assert picked == [1]

    def test_minority_restriction(self):
        # sample A: minority label prob 0.4; sample B: other label at 0.5
        # but minority prob 0.01 -> restriction forces A
        probas = np.array([[0.2, 0.4], [0.5, 0.01]])
        picked = ann.select_queries(probas, 1, _ZeroGauss(),
                                    minority_preference=[1])
        assert picked == [0]

    def test_matches_exhaustive_scan_oracle_on_1000_samples(self):
        rng_data = np.random.default_rng(21)
        probas = rng_data.uniform(0, 1, size=(1000, 4))
        for seed in (0, 1, 2):
            mine = ann.select_queries(probas, 50, random.Random(seed))
            oracle = exhaustive_scan_oracle(probas, 50, random.Random(seed))
            assert mine == oracle

    def test_oracle_equality_with_minority_and_exclusions(self):
        rng_data = np.random.default_rng(33)
        probas = rng_data.uniform(0, 1, size=(300, 5))
        exclude = set(range(0, 300, 7))
        mine = ann.select_queries(probas, 40, random.Random(4),
                                  minority_preference=[1, 3], exclude=exclude)
        oracle = exhaustive_scan_oracle(probas, 40, random.Random(4),
                                        minority=[1, 3], exclude=exclude)
        assert mine == oracle

    def test_pool_exhaustion_returns_fewer(self):
        probas = np.array([[0.5], [0.4]])
        picked = ann.select_queries(probas, 10, _ZeroGauss())
        assert sorted(picked) == [0, 1]


@pytest.fixture(scope="module")
def pi_model():
    from importlib import resources
    path = resources.files("formnorms.data").joinpath("seed_pi_labels.jsonl")
    return ann.train_pi_classifier(ann.load_labeled_jsonl(path), seed=0)


class TestPIClassification:
    def test_date_of_birth_block(self, pi_model):
        block = ("tagName: INPUT\n"
                 "label: DATE OF BIRTH\n"
                 "attributes:\n"
                 "- placeholder: MM/DD/YYYY\n"
                 "- id: dateOfBirth")
        label, prob = ann.classify_pi_type(pi_model, block)
        assert label == "Date of Birth"
        assert prob >= 0.5

    def test_password_exact_attribute_cue(self, pi_model):
        block = "tagName: INPUT\nattributes:\n- type: password"
        assert ann.classify_pi_type(pi_model, block) == ("Password", 1.0)

    def test_below_threshold_is_unknown_equivalent(self, pi_model):
        label, _ = ann.classify_pi_type(
            pi_model, "tagName: INPUT\nattributes:\n- name: zzqqxx")
        assert label is None

    def test_synthetic_per_label_precision(self, pi_model):
        # 50 fresh fields per label from the same cue vocabularies
        import sys
        sys.path.insert(0, "scripts")
        from make_seed_labels import PI_VOCAB, _camel

        rng = random.Random(4242)
        fields, truth = [], []
        for label, (labels, names, placeholders, types, tags) in PI_VOCAB.items():
            for _ in range(50):
                attrs = {"name": rng.choice(names)}
                if rng.random() < 0.5:
                    attrs["id"] = _camel(rng.choice(names))
                if rng.random() < 0.6 and placeholders[0]:
                    attrs["placeholder"] = rng.choice(placeholders)
                if rng.random() < 0.7:
                    attrs["type"] = rng.choice(types)
                from formnorms.form_extract import RawField, featurize_field
                text = featurize_field(RawField(rng.choice(tags), attrs,
                                                rng.choice(labels),
                                                "for_attr"))
                fields.append(text)
                truth.append(label)
        predictions = [ann.classify_pi_type(pi_model, t)[0] for t in fields]
        for label in set(truth):
            tp = sum(1 for p, t in zip(predictions, truth)
                     if p == label and t == label)
            fp = sum(1 for p, t in zip(predictions, truth)
                     if p == label and t != label)
            if tp + fp:
                precision = tp / (tp + fp)
                assert precision >= 0.9, (label, precision)


class TestOracleClient:
    def test_parse_vote_json_and_bare(self):
        assert ann.parse_vote('{"Classification": "Contact"}') == "Contact"
        assert ann.parse_vote("  Payment \n") == "Payment"

    def test_prompt_fill(self):
        template = ann.load_prompt("form_type_label")
        filled = ann.fill_prompt(template, url="http://x.test/",
                                 page_title="T", html_code="<form></form>")
        assert "http://x.test/" in filled
        assert "<form></form>" in filled
        assert "{url}" not in filled and "{html_code}" not in filled

    def test_requires_endpoint(self, monkeypatch):
        monkeypatch.delenv("FORMNORMS_ORACLE_URL", raising=False)
        with pytest.raises(ann.OracleError):
            ann.OracleClient()

    def test_votes_per_sample_validated(self):
        with pytest.raises(ValueError):
            ann.OracleClient(endpoint="http://localhost:1/", votes_per_sample=0)

    def test_http_round_trip_against_fake_oracle(self):
        import json as json_mod
        from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
        import threading

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *a):
                pass

            def do_POST(self):
                length = int(self.headers["Content-Length"])
                body = json_mod.loads(self.rfile.read(length))
                assert "prompt" in body
                payload = json_mod.dumps(
                    {"text": '{"Classification": "Contact"}'}).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

        httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=httpd.serve_forever, daemon=True).start()
        try:
            url = f"http://127.0.0.1:{httpd.server_address[1]}/"
            client = ann.OracleClient(endpoint=url, votes_per_sample=3)
            assert client.votes("<form>x</form>") == ["Contact"] * 3
        finally:
            httpd.shutdown()
