"""Text embeddings and cosine similarity.

Two backends share one contract: a deterministic hashed character-trigram
embedder for hermetic desk-scale runs, and an HTTP client for an external
embedding service when fidelity matters. Vectors are L2-normalized (except
the zero vector for empty text), so cosine against them is a plain dot
product plus the zero-norm convention.
"""
from __future__ import annotations

import os
import zlib

import numpy as np

PAD_START = "\x02"
PAD_END = "\x03"


class EmbeddingBackendError(RuntimeError):
    def __init__(self, message: str, retries: int = 0):
        super().__init__(message)
        self.retries = retries


class TrigramEmbedder:
    """Hashed character-trigram embedder; pure function of the input text."""

    kind = "builtin_trigram"

    def __init__(self, dim: int = 256):
        if dim <= 0:
            raise ValueError("dim must be positive")
        self.dim = dim

    def trigrams(self, text: str) -> list[str]:
        normalized = " ".join(text.split()).casefold()
        if not normalized:
            return []
        padded = PAD_START + normalized + PAD_END
        return [padded[i:i + 3] for i in range(len(padded) - 2)]

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        grams = self.trigrams(text)
        if not grams:
            return vec  # empty text embeds to the zero vector
        for gram in grams:
            vec[zlib.crc32(gram.encode("utf-8")) % self.dim] += 1.0
        return vec / np.linalg.norm(vec)


class ExternalEmbedder:
    """Client for an embedding endpoint: POST {"text": ...} -> {"vector": [...]}.

    Endpoint and auth come from arguments or the FORMNORMS_EMBED_URL /
    FORMNORMS_EMBED_TOKEN environment variables.
    """

    kind = "external_service"

    def __init__(self, url: str | None = None, token: str | None = None,
                 dim: int = 384, retries: int = 2, timeout: float = 10.0,
                 session=None):
        self.url = url or os.environ.get("FORMNORMS_EMBED_URL")
        self.token = token or os.environ.get("FORMNORMS_EMBED_TOKEN")
        if not self.url:
            raise EmbeddingBackendError("no embedding endpoint configured")
        self.dim = dim
        self.retries = retries
        self.timeout = timeout
        if session is None:
            import requests
            session = requests.Session()
        self._session = session

    def embed(self, text: str) -> np.ndarray:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        last_error = None
        for attempt in range(self.retries + 1):
            try:
                resp = self._session.post(self.url, json={"text": text},
                                          headers=headers, timeout=self.timeout)
                if resp.status_code != 200:
                    raise EmbeddingBackendError(
                        f"embedding service returned HTTP {resp.status_code}", attempt)
                vector = np.asarray(resp.json()["vector"], dtype=np.float64)
                if vector.shape != (self.dim,) or not np.all(np.isfinite(vector)):
                    raise EmbeddingBackendError(
                        f"bad vector from embedding service (shape {vector.shape})", attempt)
                return vector
            except EmbeddingBackendError as exc:
                last_error = exc
            except Exception as exc:
                last_error = EmbeddingBackendError(str(exc), attempt)
        raise EmbeddingBackendError(
            f"embedding service failed after {self.retries + 1} attempts: {last_error}",
            self.retries)


def cosine(v1: np.ndarray, v2: np.ndarray) -> float:
    """Standard cosine similarity; 0.0 when either vector has zero norm."""
    v1 = np.asarray(v1, dtype=np.float64)
    v2 = np.asarray(v2, dtype=np.float64)
    if v1.shape != v2.shape:
        raise ValueError(f"dimension mismatch: {v1.shape} vs {v2.shape}")
    n1 = np.linalg.norm(v1)
    n2 = np.linalg.norm(v2)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    value = float(np.dot(v1, v2) / (n1 * n2))
    return max(-1.0, min(1.0, value))
