"""Flat ``section.key=value`` configuration shared by all CLI stages."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .evaluation import CvConfig
from .labeling import LabelingConfig
from .models import MlpConfig, RcnnConfig
from .preprocess import ConfigError, FilterSpec
from .synth import ScenarioConfig, default_scenario, easy_scenario

SECTIONS = {
    "filter": FilterSpec,
    "labeling": LabelingConfig,
    "mlp": MlpConfig,
    "rcnn": RcnnConfig,
    "cv": CvConfig,
    "synth": ScenarioConfig,
}
# set from --seed / --events or nested, never from key=value overrides
NOT_CONFIGURABLE = {"seed", "duration_samples", "n_events", "mlp", "rcnn", "sample_rate_hz"}


def known_keys() -> dict[str, object]:
    """Every accepted key mapped to its default value."""
    keys = {}
    for section, cls in SECTIONS.items():
        defaults = default_scenario(1) if cls is ScenarioConfig else cls()
        for f in dataclasses.fields(cls):
            if f.name not in NOT_CONFIGURABLE:
                keys[f"{section}.{f.name}"] = getattr(defaults, f.name)
    return keys


def _parse_value(key: str, text: str, default):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            parts = tuple(float(p) for p in text.split(","))
            if len(parts) != len(default):
                raise ValueError(text)
            return parts
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {type(default).__name__}") from None
    return text


def parse_assignment(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"expected key=value, got {item!r}")
    key, value = item.split("=", 1)
    return key.strip(), value


def read_config_file(path) -> list[tuple[str, str]]:
    """``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse_assignment(line))
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


@dataclass
class RunConfig:
    """Validated overrides plus the seed; builds each module's config on demand."""

    seed: int = 0
    overrides: dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_sources(cls, seed: int, assignments: list[tuple[str, str]]) -> "RunConfig":
        keys = known_keys()
        values = {}
        for key, text in assignments:
            if key not in keys:
                raise ConfigError(f"unknown configuration key {key!r}")
            values[key] = _parse_value(key, text, keys[key])
        rc = cls(seed, values)
        rc.validate()
        return rc

    def set(self, key: str, value) -> None:
        if key not in known_keys():
            raise ConfigError(f"unknown configuration key {key!r}")
        self.overrides[key] = value

    def section(self, name: str) -> dict[str, object]:
        prefix = name + "."
        return {k[len(prefix):]: v for k, v in self.overrides.items() if k.startswith(prefix)}

    def filter_spec(self) -> FilterSpec:
        return FilterSpec(**self.section("filter"))

    def labeling(self) -> LabelingConfig:
        return LabelingConfig(**self.section("labeling"), seed=self.seed)

    def mlp(self) -> MlpConfig:
        return MlpConfig(**self.section("mlp"), seed=self.seed)

    def rcnn(self) -> RcnnConfig:
        return RcnnConfig(**self.section("rcnn"), seed=self.seed)

    def cv(self) -> CvConfig:
        return CvConfig(**self.section("cv"), seed=self.seed, mlp=self.mlp(), rcnn=self.rcnn())

    def scenario(self, n_events: int = 1, easy: bool = False) -> ScenarioConfig:
        base = (easy_scenario if easy else default_scenario)(n_events, self.seed)
        return dataclasses.replace(base, **self.section("synth"))

    def validate(self) -> None:
        """Build every module config once so range violations surface early."""
        self.filter_spec()
        self.labeling()
        self.cv()
        self.scenario()
