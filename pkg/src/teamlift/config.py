"""Run configuration: one nested dataclass tree, serialized as dotted keys.

Every knob of a full run lives here so a run is reproducible from its
``config.kv`` echo plus the seed. Parsing is strict: an unknown key is a
ConfigError, not a warning.
"""
from __future__ import annotations

import dataclasses
import datetime as dt
from dataclasses import dataclass, field
from typing import Mapping

from . import dataio
from .errors import ConfigError
from .synthgen import CityConfig, DGPConfig, EffectConfig, PanelConfig, effect_from_kv, effect_kv_items

__all__ = [
    "GenerateConfig",
    "SplitConfig",
    "TrainConfig",
    "EvalConfig",
    "SimulateConfig",
    "ServeConfig",
    "RunConfig",
    "default_config",
    "config_to_kv",
    "config_from_kv",
    "load_config",
    "save_config",
]


@dataclass(frozen=True)
class GenerateConfig:
    n_cities: int = 4
    drivers_per_city: int = 900
    signups_per_contest: int = 350
    train_contests_per_city: int = 4
    val_contests_per_city: int = 1
    test_contests_per_city: int = 2
    train_start: dt.date = dt.date(2018, 2, 15)
    test_last_start: dt.date = dt.date(2018, 8, 20)
    team_size_options: tuple[int, ...] = (4, 5, 6)
    group_size_options: tuple[int, ...] = (5,)
    contest_days_options: tuple[int, ...] = (3, 5, 7)
    signup_days_options: tuple[int, ...] = (3, 4, 5, 6, 7)
    first_prize_range: tuple[float, ...] = (500.0, 2000.0)
    prize_decay: tuple[float, ...] = (0.6, 0.4, 0.25)
    reward_fifth_prob: float = 0.4
    fifth_prize_frac: float = 0.15
    captain_bonus_prob: float = 0.5
    captain_bonus_frac: float = 0.2
    exclude_worst_prob: float = 0.3
    metric_probs: tuple[float, ...] = (0.7, 0.2, 0.1)

    def validate(self) -> None:
        for name in ("n_cities", "drivers_per_city", "signups_per_contest"):
            if getattr(self, name) < 1:
                raise ConfigError(f"generate.{name} must be positive")
        if self.train_contests_per_city < 1:
            raise ConfigError("generate.train_contests_per_city must be positive")
        if min(self.val_contests_per_city, self.test_contests_per_city) < 0:
            raise ConfigError("per-city contest counts must be non-negative")
        if self.signups_per_contest > self.drivers_per_city:
            raise ConfigError("signups_per_contest cannot exceed drivers_per_city")
        if len(self.prize_decay) != 3:
            raise ConfigError("prize_decay needs factors for ranks 2..4")
        if sorted(self.prize_decay, reverse=True) != list(self.prize_decay) or max(
            self.prize_decay
        ) > 1:
            raise ConfigError("prize_decay must be non-increasing fractions of the first prize")
        if len(self.metric_probs) != 3 or abs(sum(self.metric_probs) - 1.0) > 1e-9:
            raise ConfigError("metric_probs must be three probabilities summing to 1")
        if not 0 < self.fifth_prize_frac <= min(self.prize_decay):
            raise ConfigError("fifth_prize_frac must keep the prize schedule non-increasing")


@dataclass(frozen=True)
class SplitConfig:
    train_end: dt.date = dt.date(2018, 6, 30)
    val_start: dt.date = dt.date(2018, 7, 1)
    val_end: dt.date = dt.date(2018, 7, 31)
    test_start: dt.date = dt.date(2018, 8, 1)


@dataclass(frozen=True)
class TrainConfig:
    families: tuple[str, ...] = ("lasso", "ridge", "gbrt", "uniform", "random")
    linear_scalings: tuple[str, ...] = ("standardize", "minmax", "none")
    lasso_n_lambdas: int = 12
    lam_min_ratio: float = 1e-4
    gbrt_n_trees: tuple[int, ...] = (150, 300)
    gbrt_max_depth: tuple[int, ...] = (2, 3)
    gbrt_learning_rate: tuple[float, ...] = (0.1,)
    gbrt_subsample: tuple[float, ...] = (0.8, 1.0)
    gbrt_min_samples_leaf: int = 20


@dataclass(frozen=True)
class EvalConfig:
    permutation_rounds: int = 2000


@dataclass(frozen=True)
class SimulateConfig:
    n_prototypes: int = 3
    n_boot: int = 1000
    noise_levels: tuple[str, ...] = ("none", "period", "contest")
    commission_rate: float = 0.2
    max_designs: int = 64


@dataclass(frozen=True)
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8777
    max_sim_cells: int = 5_000_000  # n_boot * n_drivers guard per request


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    generate: GenerateConfig = field(default_factory=GenerateConfig)
    city: CityConfig = field(default_factory=CityConfig)
    panel: PanelConfig = field(default_factory=PanelConfig)
    effect: EffectConfig = field(default_factory=EffectConfig.plausible_default)
    self_form_frac: float = 0.5
    holdout_frac: float = 0.10
    split: SplitConfig = field(default_factory=SplitConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    evaluate: EvalConfig = field(default_factory=EvalConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    serve: ServeConfig = field(default_factory=ServeConfig)

    def dgp(self) -> DGPConfig:
        return DGPConfig(
            panel=self.panel,
            effect=self.effect,
            self_form_frac=self.self_form_frac,
            holdout_frac=self.holdout_frac,
        )

    def validate(self) -> None:
        self.generate.validate()
        self.city.validate()
        self.dgp().validate()
        if not (
            self.split.train_end
            < self.split.val_start
            <= self.split.val_end
            < self.split.test_start
        ):
            raise ConfigError("split dates must be ordered train < val < test")
        if self.generate.train_start > self.split.train_end:
            raise ConfigError("generate.train_start is after split.train_end")
        if self.simulate.n_boot < 1 or self.simulate.n_prototypes < 1:
            raise ConfigError("simulate.n_boot and n_prototypes must be positive")
        unknown = set(self.simulate.noise_levels) - {"none", "period", "contest"}
        if unknown:
            raise ConfigError(f"unknown noise levels: {sorted(unknown)}")
        from .models.bundle import FAMILIES

        bad = set(self.train.families) - set(FAMILIES)
        if bad:
            raise ConfigError(f"unknown model families: {sorted(bad)}")


def default_config() -> RunConfig:
    return RunConfig()


# ---------------------------------------------------------------------------
# kv mapping
# ---------------------------------------------------------------------------

_SECTIONS: tuple[tuple[str, str], ...] = (
    ("generate", "generate"),
    ("city", "city"),
    ("panel", "panel"),
    ("split", "split"),
    ("train", "train"),
    ("evaluate", "evaluate"),
    ("simulate", "simulate"),
    ("serve", "serve"),
)
_TOP_SCALARS = ("seed", "self_form_frac", "holdout_frac")


def config_to_kv(cfg: RunConfig) -> dict[str, object]:
    out: dict[str, object] = {name: getattr(cfg, name) for name in _TOP_SCALARS}
    for attr, prefix in _SECTIONS:
        section = getattr(cfg, attr)
        for f in dataclasses.fields(section):
            out[f"{prefix}.{f.name}"] = getattr(section, f.name)
    out.update(effect_kv_items(cfg.effect, prefix="effect"))
    return out


def _parse_like(key: str, default, text: str):
    if isinstance(default, bool):
        return dataio.parse_bool(text)
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float):
        return float(text)
    if isinstance(default, dt.date):
        return dt.date.fromisoformat(text)
    if isinstance(default, str):
        return text
    if isinstance(default, tuple):
        if not default:
            raise ConfigError(f"{key}: cannot infer element type for empty tuple")
        elem = default[0]
        parts = [p for p in text.split(",") if p != ""]
        return tuple(_parse_like(key, elem, p) for p in parts)
    raise ConfigError(f"{key}: unsupported config value type {type(default).__name__}")


def config_from_kv(raw: Mapping[str, str]) -> RunConfig:
    """Build a RunConfig from dotted keys, starting from defaults.

    Effect-function keys (effect.base, effect.linear.<name>,
    effect.interaction.<a>*<b>) replace the whole default effect if any of
    them is present.
    """
    cfg = default_config()
    effect_keys = {k: v for k, v in raw.items() if k == "effect" or k.startswith("effect.")}
    effect = effect_from_kv(raw, prefix="effect") if effect_keys else cfg.effect

    sections: dict[str, dict[str, object]] = {attr: {} for attr, _ in _SECTIONS}
    top: dict[str, object] = {}
    for key, text in raw.items():
        if key in effect_keys:
            continue
        if key in _TOP_SCALARS:
            top[key] = _parse_like(key, getattr(cfg, key), text)
            continue
        prefix, _, rest = key.partition(".")
        section_attr = None
        for attr, pfx in _SECTIONS:
            if pfx == prefix:
                section_attr = attr
                break
        if section_attr is None or not rest:
            raise ConfigError(f"unknown config key {key!r}")
        section = getattr(cfg, section_attr)
        names = {f.name for f in dataclasses.fields(section)}
        if rest not in names:
            raise ConfigError(f"unknown config key {key!r}")
        sections[section_attr][rest] = _parse_like(key, getattr(section, rest), text)

    kwargs: dict[str, object] = dict(top)
    kwargs["effect"] = effect
    for attr, _ in _SECTIONS:
        if sections[attr]:
            kwargs[attr] = dataclasses.replace(getattr(cfg, attr), **sections[attr])
    cfg = dataclasses.replace(cfg, **kwargs)
    cfg.validate()
    return cfg


def save_config(cfg: RunConfig, path) -> None:
    dataio.write_kv(path, config_to_kv(cfg))


def load_config(path) -> RunConfig:
    return config_from_kv(dataio.read_kv(path))
