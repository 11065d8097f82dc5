from __future__ import annotations

import copy
import logging
import os
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional, Tuple, Union, get_args

# Charger les variables d'environnement depuis .env si disponible
try:
    from dotenv import load_dotenv
    load_dotenv()
except ImportError:
    pass  # python-dotenv non installé, continuer sans

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .analyzers.profiler import ProfilerConfig
from .compaction.hot_compaction import CompactionConfig
from .detectors.hotness_tracker import TrackerConfig
from .generators.kv_workload import KvWorkloadSpec
from .heap.heap_model import LARGE_OBJECT_THRESHOLD, REGION_SIZE
from .tiering.page_tier import TierConfig

LOG = logging.getLogger(__name__)

Policy = Literal[
    "clove",
    "page_only",
    "oracle_object",
    "oracle_4k",
    "oracle_2m",
    "clove_no_cutoff",
    "clove_one_shot",
]
POLICIES: Tuple[str, ...] = get_args(Policy)
# older descriptive names still accepted in scenario files
POLICY_ALIASES: Dict[str, str] = {
    "compaction": "clove",
    "compaction_no_cutoff": "clove_no_cutoff",
    "compaction_one_shot": "clove_one_shot",
}

DEFAULT_RESULTS_DIR = "results"


class ConfigError(ValueError):
    """Scenario file missing, unreadable, or not a mapping; or a bad override."""
    pass


class HeapConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    region_size: int = Field(REGION_SIZE, gt=0)
    large_object_threshold: int = Field(LARGE_OBJECT_THRESHOLD, gt=0)
    min_spare_regions: int = Field(4, ge=1)
    check_invariants: bool = False


class ScenarioConfig(BaseModel):
    """One simulation run: workload, module knobs, policy and duration."""

    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    policy: Policy = "clove"
    seed: int = 0
    duration_events: int = Field(1_000_000, gt=0)
    workload: KvWorkloadSpec = Field(default_factory=KvWorkloadSpec)
    profiler: ProfilerConfig = Field(default_factory=ProfilerConfig)
    tracker: TrackerConfig = Field(default_factory=TrackerConfig)
    compaction: CompactionConfig = Field(default_factory=CompactionConfig)
    tier: TierConfig = Field(default_factory=TierConfig)
    heap: HeapConfig = Field(default_factory=HeapConfig)
    metrics_window_events: int = Field(10_000, gt=0)
    line_cache_lines: int = Field(0, ge=0)
    # replay this trace instead of generating events; ids refer to the built KV heap
    trace: Optional[str] = None

    @model_validator(mode="before")
    @classmethod
    def _inherit_seed(cls, data: Any) -> Any:
        # sections without their own seed follow the scenario seed
        if isinstance(data, dict) and "seed" in data:
            for section in ("workload", "profiler"):
                block = data.get(section)
                if block is None:
                    data = {**data, section: {"seed": data["seed"]}}
                elif isinstance(block, dict) and "seed" not in block:
                    data = {**data, section: {**block, "seed": data["seed"]}}
        return data

    @field_validator("policy", mode="before")
    @classmethod
    def _canonical_policy(cls, value: Any) -> Any:
        if isinstance(value, str):
            return POLICY_ALIASES.get(value, value)
        return value

    @field_validator("name")
    @classmethod
    def _plain_name(cls, value: str) -> str:
        if not value or "/" in value or "\\" in value or value in (".", ".."):
            raise ValueError(f"scenario name must be a plain directory name, got {value!r}")
        return value

    @model_validator(mode="after")
    def _region_page_fit(self) -> "ScenarioConfig":
        region, page = self.heap.region_size, self.tier.page_size
        if region % page and page % region:
            raise ValueError(f"heap.region_size {region} and tier.page_size {page} must divide one another")
        return self

    @property
    def epoch_samples(self) -> int:
        if self.tier.epoch_samples is not None:
            return self.tier.epoch_samples
        return max(1, self.profiler.decay_window // 10)


# --------------------------------------------------------------- environment

def results_dir() -> Path:
    return Path(os.environ.get("TIERSIM_RESULTS_DIR", DEFAULT_RESULTS_DIR))


def log_level() -> str:
    return os.environ.get("TIERSIM_LOG_LEVEL", "INFO").upper()


def sweep_jobs() -> int:
    try:
        return max(1, int(os.environ.get("TIERSIM_SWEEP_JOBS", "1")))
    except ValueError:
        LOG.warning("TIERSIM_SWEEP_JOBS is not an integer; using 1")
        return 1


def check_invariants_env() -> bool:
    return os.environ.get("TIERSIM_CHECK_INVARIANTS", "0").lower() in ("1", "true", "yes")


# ------------------------------------------------------------------ loading

def load_raw(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Fichier de configuration introuvable: {path}")
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"YAML invalide dans {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: la configuration doit etre un mapping, pas {type(data).__name__}")
    return data


def parse_override(text: str) -> Tuple[List[str], Any]:
    """`tier.fast_fraction=0.2` -> (["tier", "fast_fraction"], 0.2); values are parsed as YAML."""
    if "=" not in text:
        raise ConfigError(f"override must look like path.to.key=value, got {text!r}")
    key, raw_value = text.split("=", 1)
    parts = [p for p in key.strip().split(".") if p]
    if not parts:
        raise ConfigError(f"empty key in override {text!r}")
    try:
        value = yaml.safe_load(raw_value) if raw_value.strip() else ""
    except yaml.YAMLError as exc:
        raise ConfigError(f"bad value in override {text!r}: {exc}") from exc
    return parts, value


def set_path(raw: Dict[str, Any], parts: List[str], value: Any) -> None:
    node = raw
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"cannot set {'.'.join(parts)}: {part} is not a mapping")
        node = child
    node[parts[-1]] = value


def apply_overrides(raw: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    result = copy.deepcopy(raw)
    for text in overrides:
        parts, value = parse_override(text)
        set_path(result, parts, value)
    return result


def apply_seed(raw: Dict[str, Any], seed: int) -> Dict[str, Any]:
    """Seed override reaches the scenario, the workload generator and the sampler."""
    result = copy.deepcopy(raw)
    result["seed"] = seed
    for section in ("workload", "profiler"):
        set_path(result, [section, "seed"], seed)
    return result


def build_scenario(
    raw: Dict[str, Any], overrides: Iterable[str] = (), seed: Optional[int] = None
) -> ScenarioConfig:
    data = apply_overrides(raw, overrides)
    if seed is not None:
        data = apply_seed(data, seed)
    return ScenarioConfig.model_validate(data)


def load_scenario(
    path: Union[str, Path], overrides: Iterable[str] = (), seed: Optional[int] = None
) -> ScenarioConfig:
    scenario = build_scenario(load_raw(path), overrides, seed)
    LOG.info(f"scenario {scenario.name!r} loaded from {path} (policy={scenario.policy}, seed={scenario.seed})")
    return scenario


def format_validation_error(exc: ValidationError) -> List[str]:
    """Render each pydantic error as `path.to.field: message`."""
    lines = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err.get("loc", ())) or "<root>"
        lines.append(f"{loc}: {err.get('msg', 'invalid value')}")
    return lines
