"""Form-type and PI-type annotation.

Form types come from an oracle-assisted pipeline: an external text oracle
votes on samples, votes become soft labels, and a small hashed bag-of-words
classifier is trained on them, expanded over several active-learning rounds
that query the samples the classifier is least certain about. PI types use
the same classifier machinery trained from a hand-labeled seed file of
featurized fields.
"""
from __future__ import annotations

import enum
import json
import logging
import os
import re
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class FormType(str, enum.Enum):
    ACCOUNT_REGISTRATION = "Account Registration"
    ACCOUNT_LOGIN = "Account Login"
    ACCOUNT_RECOVERY = "Account Recovery"
    PAYMENT = "Payment"
    FINANCIAL_APPLICATION = "Financial Application"
    ROLE_APPLICATION = "Role Application"
    SUBSCRIPTION = "Subscription"
    RESERVATION = "Reservation"
    CONTACT = "Contact"
    CONTENT_SUBMISSION = "Content Submission"
    UNKNOWN = "Unknown"


FORM_TYPE_LABELS = tuple(ft.value for ft in FormType if ft is not FormType.UNKNOWN)

# vote strings that carry no label probability
UNKNOWN_VOTES = frozenset({"Unknown", "Search Form", "Configuration Form"})


class PIType(str, enum.Enum):
    ADDRESS = "Address"
    DATE_OF_BIRTH = "Date of Birth"
    EMAIL_ADDRESS = "Email Address"
    ETHNICITY = "Ethnicity"
    GENDER = "Gender"
    TAX_ID = "Tax ID"
    GOVERNMENT_ID = "Government ID"
    COARSE_LOCATION = "Coarse Location"
    POSTAL_CODE = "Postal Code"
    BANK_ACCOUNT_NUMBER = "Bank Account Number"
    PERSON_NAME = "Person Name"
    PHONE_NUMBER = "Phone Number"
    ONLINE_ALIAS = "Online Alias"
    AGE = "Age"
    IMMIGRATION_STATUS = "Immigration Status"
    MILITARY_STATUS = "Military Status"
    # auxiliary training labels, treated like Unknown downstream
    PASSWORD = "Password"
    BUSINESS_INFO = "Business Info"
    FINGERPRINTS = "Fingerprints"


PI_TYPE_LABELS = tuple(pi.value for pi in PIType)

AUXILIARY_PI_TYPES = frozenset({PIType.PASSWORD.value, PIType.BUSINESS_INFO.value,
                                PIType.FINGERPRINTS.value})

IDENTIFIER_PI_TYPES = frozenset({
    PIType.ADDRESS.value, PIType.EMAIL_ADDRESS.value, PIType.GOVERNMENT_ID.value,
    PIType.BANK_ACCOUNT_NUMBER.value, PIType.PERSON_NAME.value,
    PIType.PHONE_NUMBER.value, PIType.ONLINE_ALIAS.value, PIType.TAX_ID.value,
})


def is_identifier(pi_type: str) -> bool:
    return pi_type in IDENTIFIER_PI_TYPES


@dataclass
class SoftLabel:
    """Per-label probabilities from oracle votes; Unknown votes are dropped,
    so entries need not sum to 1."""
    probabilities: dict[str, float]

    def to_json(self) -> dict:
        return {k: self.probabilities[k] for k in sorted(self.probabilities)}


def soft_labels_from_votes(votes: list[str],
                           labels: tuple[str, ...] = FORM_TYPE_LABELS) -> SoftLabel:
    if not votes:
        raise ValueError("votes must be non-empty")
    counts = {label: 0 for label in labels}
    for vote in votes:
        vote = vote.strip()
        if vote in counts:
            counts[vote] += 1
        elif vote not in UNKNOWN_VOTES:
            log.warning("unrecognized vote %r mapped to Unknown", vote)
    total = len(votes)
    return SoftLabel({label: counts[label] / total for label in labels})


# ---------------------------------------------------------------------------
# hashed bag-of-words classifier

_CAMEL_BOUNDARY = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def tokenize(text: str) -> list[str]:
    text = _CAMEL_BOUNDARY.sub(" ", text)
    return [t for t in _NON_ALNUM.split(text.lower()) if t]


def hash_features(text: str, dim: int) -> np.ndarray:
    vec = np.zeros(dim, dtype=np.float64)
    for token in tokenize(text):
        vec[zlib.crc32(token.encode("utf-8")) % dim] += 1.0
    norm = np.linalg.norm(vec)
    return vec / norm if norm > 0 else vec


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -60.0, 60.0)))


def loss_and_grad(weights: np.ndarray, bias: np.ndarray,
                  x: np.ndarray, targets: np.ndarray):
    """Summed per-label mean binary cross-entropy and its gradients."""
    n = x.shape[0]
    z = x @ weights.T + bias
    p = _sigmoid(z)
    eps = 1e-12
    loss = float(-np.sum(targets * np.log(p + eps)
                         + (1.0 - targets) * np.log(1.0 - p + eps)) / n)
    dz = (p - targets) / n
    return loss, dz.T @ x, dz.sum(axis=0)


@dataclass
class TextClassifier:
    """Per-label logistic heads over a hashed feature space: each label is an
    independent sigmoid output."""
    labels: tuple[str, ...]
    dim: int
    weights: np.ndarray
    bias: np.ndarray
    history: list[dict] = field(default_factory=list)

    def vectorize(self, texts: list[str]) -> np.ndarray:
        return np.stack([hash_features(t, self.dim) for t in texts])

    def predict_proba(self, texts: list[str]) -> np.ndarray:
        return self.predict_proba_matrix(self.vectorize(texts))

    def predict_proba_matrix(self, x: np.ndarray) -> np.ndarray:
        return _sigmoid(x @ self.weights.T + self.bias)

    def predict_one(self, text: str) -> dict[str, float]:
        probs = self.predict_proba([text])[0]
        return {label: float(p) for label, p in zip(self.labels, probs)}

    def best_label(self, text: str, threshold: float = 0.5) -> tuple[str | None, float]:
        probs = self.predict_proba([text])[0]
        idx = int(np.argmax(probs))
        prob = float(probs[idx])
        if prob < threshold:
            return None, prob
        return self.labels[idx], prob

    def save(self, path) -> None:
        obj = {"labels": list(self.labels), "dim": self.dim,
               "weights": self.weights.tolist(), "bias": self.bias.tolist()}
        Path(path).write_text(json.dumps(obj, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TextClassifier":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(tuple(obj["labels"]), obj["dim"],
                   np.asarray(obj["weights"], dtype=np.float64),
                   np.asarray(obj["bias"], dtype=np.float64))


def _canonical_order(samples: list[tuple[str, dict[str, float]]]) -> list[int]:
    # stable canonical ordering: training must not depend on input order
    def key(i: int):
        text, targets = samples[i]
        return (text, json.dumps(targets, sort_keys=True))
    return sorted(range(len(samples)), key=key)


def train(samples: list[tuple[str, dict[str, float]]],
          labels: tuple[str, ...], dim: int = 4096, epochs: int = 10,
          val_fraction: float = 0.2, lr: float = 1.5, batch_size: int = 32,
          seed: int = 0) -> TextClassifier:
    """Fit the classifier to soft targets by minibatch gradient descent.

    Samples are canonically sorted before the seeded shuffle, so results are
    invariant to input order under a fixed seed. The last ``val_fraction`` of
    the shuffled data is held out for per-epoch validation loss.
    """
    if not samples:
        raise ValueError("empty training set")
    order = _canonical_order(samples)
    rng = np.random.default_rng(seed)
    order = [order[i] for i in rng.permutation(len(order))]

    x = np.stack([hash_features(samples[i][0], dim) for i in order])
    targets = np.zeros((len(order), len(labels)), dtype=np.float64)
    label_idx = {label: j for j, label in enumerate(labels)}
    for row, i in enumerate(order):
        for label, prob in samples[i][1].items():
            if label in label_idx:
                targets[row, label_idx[label]] = prob

    model = TextClassifier(tuple(labels), dim,
                           np.zeros((len(labels), dim)), np.zeros(len(labels)))
    if targets.sum() == 0.0:
        log.warning("all-zero soft targets; training a bias-only model")
        model.bias[:] = -12.0
        return model

    n_val = int(round(len(order) * val_fraction)) if len(order) >= 5 else 0
    n_train = len(order) - n_val
    x_train, t_train = x[:n_train], targets[:n_train]
    x_val, t_val = x[n_train:], targets[n_train:]

    for epoch in range(epochs):
        perm = rng.permutation(n_train)
        for start in range(0, n_train, batch_size):
            batch = perm[start:start + batch_size]
            _, gw, gb = loss_and_grad(model.weights, model.bias,
                                      x_train[batch], t_train[batch])
            model.weights -= lr * gw
            model.bias -= lr * gb
        train_loss, _, _ = loss_and_grad(model.weights, model.bias, x_train, t_train)
        entry = {"epoch": epoch, "train_loss": train_loss}
        if n_val:
            val_loss, _, _ = loss_and_grad(model.weights, model.bias, x_val, t_val)
            entry["val_loss"] = val_loss
        model.history.append(entry)
    return model


# ---------------------------------------------------------------------------
# sampling strategies

def seed_sample(pi_sets: list, n: int, rng) -> list[int]:
    """Draw ~n indices without replacement, each weighted by one over the
    number of items sharing the same PI-type set."""
    counts: dict = {}
    keys = []
    for pi_set in pi_sets:
        key = tuple(sorted(pi_set))
        keys.append(key)
        counts[key] = counts.get(key, 0) + 1
    # weighted sampling without replacement via exponential sort keys
    scored = []
    for i, key in enumerate(keys):
        weight = 1.0 / counts[key]
        scored.append((rng.random() ** (1.0 / weight), i))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [i for _, i in scored[:min(n, len(keys))]]


QUERY_NOISE_SD = 0.15


def select_queries(probas: np.ndarray, n: int, rng,
                   minority_preference: list[int] | None = None,
                   exclude: set[int] | None = None) -> list[int]:
    """Uncertainty sampling: per draw, target probability 0.5 + N(0, 0.15^2)
    noise and take the unpicked sample whose closest label probability is
    nearest the target. With a minority preference, only those labels'
    probabilities are considered. Ties go to the lowest index.
    """
    probas = np.asarray(probas, dtype=np.float64)
    considered = probas
    if minority_preference:
        considered = probas[:, sorted(minority_preference)]
    picked: list[int] = []
    excluded = np.zeros(len(probas), dtype=bool)
    for i in exclude or ():
        excluded[i] = True
    for _ in range(n):
        if excluded.all():
            break
        target = 0.5 + rng.gauss(0.0, QUERY_NOISE_SD)
        distance = np.abs(considered - target).min(axis=1)
        distance[excluded] = np.inf
        choice = int(np.argmin(distance))
        picked.append(choice)
        excluded[choice] = True
    return picked


def minority_labels(probas: np.ndarray, threshold: float = 0.5) -> list[int]:
    """Label columns never predicted at or above threshold anywhere."""
    probas = np.asarray(probas)
    return [j for j in range(probas.shape[1])
            if not np.any(probas[:, j] >= threshold)]


# ---------------------------------------------------------------------------
# oracle client

class OracleError(RuntimeError):
    pass


PROMPT_PLACEHOLDERS = ("{url}", "{page_title}", "{html_code}")


def load_prompt(name: str) -> str:
    from importlib import resources
    data = resources.files("formnorms.data").joinpath("prompts").joinpath(f"{name}.txt")
    return data.read_text(encoding="utf-8")


def fill_prompt(template: str, url: str = "", page_title: str = "",
                html_code: str = "") -> str:
    return (template.replace("{url}", url)
            .replace("{page_title}", page_title)
            .replace("{html_code}", html_code))


def parse_vote(text: str) -> str:
    """Oracle responses are either a bare label or JSON with Classification."""
    text = text.strip()
    try:
        obj = json.loads(text)
        if isinstance(obj, dict) and "Classification" in obj:
            return str(obj["Classification"]).strip()
    except json.JSONDecodeError:
        pass
    return text


class OracleClient:
    """HTTP oracle: POST {"prompt": ...} -> {"text": ...}, queried k times
    per sample to build soft labels."""

    def __init__(self, endpoint: str | None = None, api_key: str | None = None,
                 votes_per_sample: int = 10, temperature: float = 0.8,
                 prompt_name: str = "form_type_label", timeout: float = 60.0,
                 session=None):
        self.endpoint = endpoint or os.environ.get("FORMNORMS_ORACLE_URL")
        self.api_key = api_key or os.environ.get("FORMNORMS_ORACLE_KEY")
        if not self.endpoint:
            raise OracleError("no oracle endpoint configured")
        if votes_per_sample < 1:
            raise ValueError("votes_per_sample must be >= 1")
        self.votes_per_sample = votes_per_sample
        self.temperature = temperature
        self.template = load_prompt(prompt_name)
        self.timeout = timeout
        if session is None:
            import requests
            session = requests.Session()
        self._session = session

    def complete(self, prompt: str) -> str:
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = self._session.post(
                self.endpoint,
                json={"prompt": prompt, "temperature": self.temperature},
                headers=headers, timeout=self.timeout)
        except Exception as exc:
            raise OracleError(f"oracle request failed: {exc}") from exc
        if resp.status_code != 200:
            raise OracleError(f"oracle returned HTTP {resp.status_code}")
        return str(resp.json()["text"])

    def votes(self, text: str, url: str = "", page_title: str = "") -> list[str]:
        prompt = fill_prompt(self.template, url=url, page_title=page_title,
                             html_code=text)
        return [parse_vote(self.complete(prompt))
                for _ in range(self.votes_per_sample)]


# ---------------------------------------------------------------------------
# active learning loop

@dataclass
class ALResult:
    model: TextClassifier
    labeled: dict[int, SoftLabel]
    metrics: list[dict]
    rounds_completed: int


def _save_checkpoint(path: Path, labeled: dict[int, SoftLabel],
                     rounds_completed: int) -> None:
    obj = {"rounds_completed": rounds_completed,
           "labeled": {str(i): sl.to_json() for i, sl in labeled.items()}}
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(obj, sort_keys=True), encoding="utf-8")
    tmp.replace(path)


def _load_checkpoint(path: Path) -> tuple[dict[int, SoftLabel], int]:
    obj = json.loads(path.read_text(encoding="utf-8"))
    labeled = {int(i): SoftLabel(dict(probs)) for i, probs in obj["labeled"].items()}
    return labeled, int(obj["rounds_completed"])


def active_learning_run(pool_texts: list[str], pool_pi_sets: list | None,
                        oracle, labels: tuple[str, ...] = FORM_TYPE_LABELS,
                        rounds: int = 5, per_round: int = 1000,
                        seed_n: int = 500, seed: int = 0, dim: int = 4096,
                        epochs: int = 10, lr: float = 1.5,
                        checkpoint_dir=None, eval_fn=None) -> ALResult:
    """Seed-label, train, then iterate (predict, query, label, retrain).

    ``oracle.votes(text)`` supplies label votes; an outage mid-round leaves a
    checkpoint behind and the same call with the same checkpoint_dir resumes.
    """
    import random as _random
    rng = _random.Random(seed)
    checkpoint = Path(checkpoint_dir) / "al_state.json" if checkpoint_dir else None

    labeled: dict[int, SoftLabel] = {}
    start_round = 0
    if checkpoint and checkpoint.exists():
        labeled, start_round = _load_checkpoint(checkpoint)
        log.info("resuming active learning after round %d with %d labels",
                 start_round, len(labeled))

    def query(indices: list[int]) -> None:
        try:
            for i in indices:
                if i in labeled:
                    continue
                labeled[i] = soft_labels_from_votes(oracle.votes(pool_texts[i]),
                                                    labels)
        except Exception:
            if checkpoint:
                _save_checkpoint(checkpoint, labeled, start_round)
            raise

    if not labeled:
        pi_sets = pool_pi_sets if pool_pi_sets is not None else [()] * len(pool_texts)
        query(seed_sample(pi_sets, min(seed_n, len(pool_texts)), rng))

    def retrain() -> TextClassifier:
        samples = [(pool_texts[i], labeled[i].probabilities)
                   for i in sorted(labeled)]
        return train(samples, labels, dim=dim, epochs=epochs, lr=lr, seed=seed)

    model = retrain()
    metrics: list[dict] = []

    def record(round_no: int) -> None:
        entry = {"round": round_no, "labeled": len(labeled)}
        if model.history:
            entry["val_loss"] = model.history[-1].get("val_loss")
        if eval_fn is not None:
            entry.update(eval_fn(model))
        metrics.append(entry)

    if start_round == 0:
        record(0)

    for round_no in range(start_round + 1, rounds + 1):
        if len(labeled) >= len(pool_texts):
            break
        probas = model.predict_proba(pool_texts)
        minority = minority_labels(probas)
        want = min(per_round, len(pool_texts) - len(labeled))
        picked = select_queries(probas, want, rng,
                                minority_preference=minority or None,
                                exclude=set(labeled))
        query(picked)
        model = retrain()
        start_round = round_no
        record(round_no)
        if checkpoint:
            _save_checkpoint(checkpoint, labeled, round_no)

    return ALResult(model, labeled, metrics, start_round)


def macro_accuracy(model: TextClassifier, texts: list[str],
                   truth: list[str]) -> float:
    """Mean over labels of per-label argmax accuracy (labels present in truth)."""
    probas = model.predict_proba(texts)
    predicted = [model.labels[int(np.argmax(row))] for row in probas]
    per_label = []
    for label in sorted(set(truth)):
        rows = [i for i, t in enumerate(truth) if t == label]
        correct = sum(1 for i in rows if predicted[i] == label)
        per_label.append(correct / len(rows))
    return float(np.mean(per_label))


# ---------------------------------------------------------------------------
# PI type classification

PASSWORD_CUE = re.compile(r"^- type: password$", re.MULTILINE | re.IGNORECASE)


def train_pi_classifier(samples: list[tuple[str, str]], seed: int = 0,
                        dim: int = 4096, epochs: int = 30,
                        lr: float = 2.0) -> TextClassifier:
    """One-vs-rest training from (feature_text, pi_label) pairs."""
    for _, label in samples:
        if label not in PI_TYPE_LABELS:
            raise ValueError(f"unknown PI label {label!r}")
    soft = [(text, {label: 1.0}) for text, label in samples]
    return train(soft, PI_TYPE_LABELS, dim=dim, epochs=epochs, lr=lr, seed=seed)


def classify_pi_type(model: TextClassifier, feature_text: str,
                     threshold: float = 0.5) -> tuple[str | None, float]:
    """Best PI label with probability; below threshold means no PI recognized.

    Password fields are recognized from the type attribute directly.
    """
    if PASSWORD_CUE.search(feature_text):
        return PIType.PASSWORD.value, 1.0
    return model.best_label(feature_text, threshold)


def load_labeled_jsonl(path) -> list[tuple[str, str]]:
    """Read {feature_text, pi_label} JSON lines."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "pi_label" in obj:
                out.append((obj["feature_text"], obj["pi_label"]))
    return out


def load_votes_jsonl(path) -> list[tuple[str, list[str]]]:
    """Read {feature_text, votes} JSON lines."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "votes" in obj:
                out.append((obj["feature_text"], list(obj["votes"])))
    return out


def clean_form_text(form_html: str, max_attr_value: int = 128) -> str:
    """Classifier input for a form: visible text plus retained attribute
    values, scripts and styles stripped, whitespace collapsed."""
    from .htmldom import parse_html
    doc = parse_html(form_html)
    parts = [doc.visible_text()]
    for el in doc.iter_elements():
        for key, value in el.attrs.items():
            if key in ("name", "placeholder", "type", "id", "value",
                       "action") or key.startswith("aria-"):
                if len(value) <= max_attr_value:
                    parts.append(value)
    return " ".join(" ".join(parts).split())
