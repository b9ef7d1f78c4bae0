"""Pipeline configuration: a flat key-value file overridable by CLI flags."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    sites_file: str = ""
    output_dir: str = "out"
    seeds_file: str = ""          # empty -> packaged default seed phrases
    budget: int = 100
    rate_limit: float = 10.0      # tasks per minute, per site
    rng_seed: int = 0
    failure_cap: int = 5
    provider: str = "static"      # "static" or "adapter:<command>"
    proximity: int = 3
    category_map: str = ""        # TSV domain -> level1/level2
    form_votes_file: str = ""     # empty -> packaged seed votes
    pi_labels_file: str = ""      # empty -> packaged seed labels
    policy_extractor: str = ""    # empty -> builtin phrase baseline
    alpha: float = 0.05
    uncommon_threshold: float = 0.025
    workers: int = 1
    figures: bool = False

    _INT_FIELDS = ("budget", "rng_seed", "failure_cap", "proximity", "workers")
    _FLOAT_FIELDS = ("rate_limit", "alpha", "uncommon_threshold")
    _BOOL_FIELDS = ("figures",)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        config = cls()
        config.update_from_file(path)
        return config

    def update_from_file(self, path) -> None:
        known = set(self.field_names())
        for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{line_no}: expected key = value")
            key = key.strip()
            if key not in known:
                raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
            self.set_field(key, value.strip())

    def set_field(self, key: str, raw: str) -> None:
        try:
            if key in self._INT_FIELDS:
                setattr(self, key, int(raw))
            elif key in self._FLOAT_FIELDS:
                setattr(self, key, float(raw))
            elif key in self._BOOL_FIELDS:
                setattr(self, key, raw.lower() in ("1", "true", "yes", "on"))
            else:
                setattr(self, key, raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc

    def validate_paths(self) -> None:
        for key in ("sites_file", "seeds_file", "category_map",
                    "form_votes_file", "pi_labels_file"):
            value = getattr(self, key)
            if value and not Path(value).exists():
                raise ConfigError(f"{key} does not exist: {value}")
        if self.provider != "static" and not self.provider.startswith("adapter:"):
            raise ConfigError(f'unknown provider {self.provider!r}; '
                              'use "static" or "adapter:<command>"')

    def to_json(self) -> dict:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def config_hash(self) -> str:
        # output_dir is where artifacts land, not what they contain; leaving
        # it out keeps goldens byte-stable across working directories
        payload = {k: v for k, v in self.to_json().items() if k != "output_dir"}
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def out_path(self, *parts) -> Path:
        return Path(self.output_dir).joinpath(*parts)
