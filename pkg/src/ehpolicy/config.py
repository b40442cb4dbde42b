"""Scenario configuration: YAML schema, validation, and model builders."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import yaml

from .chain import Partition
from .core import (
    ActionSet,
    ArrivalModel,
    BatteryModel,
    ConstantEfficiency,
    DeviceTableConsumption,
    IdentityConsumption,
    LogSnrReward,
    QuadraticCapacitor,
    ShannonReward,
    TabulatedEfficiency,
    arrival_model_from_pmf,
    check_reward_shape,
    make_truncated_geometric,
    make_truncated_poisson,
)
from .errors import ConfigurationError

_POLICY_SOURCES = ("solve", "search", "lcp", "bp", "fixed", "cross_apply")


def _take(d: dict, section: str, allowed: set):
    unknown = set(d) - allowed
    if unknown:
        raise ConfigurationError(f"{section}: unknown keys {sorted(unknown)}")


@dataclass
class BatteryConfig:
    e_max: int = 100
    profile: str = "quadratic"       # quadratic | constant | tabulated
    beta_nl: float | None = 1.05
    eta: float | None = None
    values: list | None = None
    frame_length: float = 1.0
    slot_length: float = 0.005
    quantum_joules: float = 1e-5
    integration_steps: int = 256

    @classmethod
    def from_dict(cls, d: dict) -> "BatteryConfig":
        _take(d, "battery", {f for f in cls.__dataclass_fields__})
        return cls(**d)

    def build(self, e_max: int | None = None, ideal: bool = False) -> BatteryModel:
        if ideal:
            profile = ConstantEfficiency(eta=1.0)
        elif self.profile == "quadratic":
            if self.beta_nl is None:
                raise ConfigurationError("battery.beta_nl required for quadratic profile")
            profile = QuadraticCapacitor(beta_nl=self.beta_nl)
        elif self.profile == "constant":
            if self.eta is None:
                raise ConfigurationError("battery.eta required for constant profile")
            profile = ConstantEfficiency(eta=self.eta)
        elif self.profile == "tabulated":
            if not self.values:
                raise ConfigurationError("battery.values required for tabulated profile")
            profile = TabulatedEfficiency(values=tuple(self.values))
        else:
            raise ConfigurationError(f"battery.profile: unknown profile {self.profile!r}")
        return BatteryModel(
            e_max=int(e_max if e_max is not None else self.e_max),
            efficiency=profile,
            frame_length_t=self.frame_length,
            slot_length_delta=self.slot_length,
            integration_steps=self.integration_steps,
        )


@dataclass
class ArrivalConfig:
    family: str = "geometric"        # geometric | poisson | explicit
    mean: float | None = 20.0
    b_max: int | None = 50
    pmf: list | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ArrivalConfig":
        _take(d, "arrivals", {f for f in cls.__dataclass_fields__})
        return cls(**d)

    def build(self) -> ArrivalModel:
        if self.family == "explicit":
            if not self.pmf:
                raise ConfigurationError("arrivals.pmf required for explicit family")
            return arrival_model_from_pmf(self.pmf)
        if self.mean is None or self.b_max is None:
            raise ConfigurationError("arrivals.mean and arrivals.b_max are required")
        if self.family == "geometric":
            return make_truncated_geometric(self.mean, self.b_max)
        if self.family == "poisson":
            return make_truncated_poisson(self.mean, self.b_max)
        raise ConfigurationError(f"arrivals.family: unknown family {self.family!r}")


@dataclass
class RewardConfig:
    family: str = "log_snr"          # log_snr | shannon
    snr_scale: float | None = 0.01
    bandwidth: float | None = None
    noise_density: float | None = None
    channel_gain: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "RewardConfig":
        _take(d, "reward", {f for f in cls.__dataclass_fields__})
        return cls(**d)

    def build(self, battery_cfg: BatteryConfig):
        if self.family == "log_snr":
            if self.snr_scale is None:
                raise ConfigurationError("reward.snr_scale required for log_snr")
            model = LogSnrReward(snr_scale=self.snr_scale)
        elif self.family == "shannon":
            for name in ("bandwidth", "noise_density", "channel_gain"):
                if getattr(self, name) is None:
                    raise ConfigurationError(f"reward.{name} required for shannon")
            model = ShannonReward(
                bandwidth_w=self.bandwidth,
                noise_density_n0=self.noise_density,
                channel_h=self.channel_gain,
                slot_length_delta=battery_cfg.slot_length,
                frame_length_t=battery_cfg.frame_length,
                quantum_joules=battery_cfg.quantum_joules,
            )
        else:
            raise ConfigurationError(f"reward.family: unknown family {self.family!r}")
        check_reward_shape(model, rho_max=max(1, battery_cfg.e_max))
        return model


@dataclass
class ConsumptionConfig:
    kind: str = "identity"           # identity | device
    band: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ConsumptionConfig":
        _take(d, "consumption", {f for f in cls.__dataclass_fields__})
        return cls(**d)

    def build(self, battery_cfg: BatteryConfig, band: str | None = None):
        if self.kind == "identity":
            return IdentityConsumption()
        if self.kind == "device":
            from .presets import device_consumption_table

            chosen = band or self.band
            if chosen is None:
                raise ConfigurationError("consumption.band required for device tables")
            rows = device_consumption_table(
                chosen, battery_cfg.quantum_joules, battery_cfg.slot_length)
            return DeviceTableConsumption(rows=rows)
        raise ConfigurationError(f"consumption.kind: unknown kind {self.kind!r}")


@dataclass
class ActionConfig:
    values: list | None = None       # explicit tx powers
    max_power: int | None = None     # or a 0..max_power range
    step: int = 1
    from_device: bool = False        # take tx levels from the device table

    @classmethod
    def from_dict(cls, d: dict) -> "ActionConfig":
        _take(d, "actions", {f for f in cls.__dataclass_fields__})
        return cls(**d)

    def build(self, e_max: int, cons) -> ActionSet:
        if self.from_device or isinstance(cons, DeviceTableConsumption):
            if not isinstance(cons, DeviceTableConsumption):
                raise ConfigurationError("actions.from_device needs a device table")
            return ActionSet(actions=(0,) + tuple(t for t, _ in cons.rows if t >= 1))
        if self.values is not None:
            acts = sorted(set(int(a) for a in self.values) | {0})
            return ActionSet(actions=tuple(acts))
        stop = self.max_power if self.max_power is not None else e_max
        acts = sorted(set(range(0, stop + 1, max(1, self.step))) | {0})
        return ActionSet(actions=tuple(acts))


@dataclass
class PartitionConfig:
    n_subsets: int = 2
    boundaries: list | None = None   # explicit subset start levels

    @classmethod
    def from_dict(cls, d: dict) -> "PartitionConfig":
        _take(d, "partition", {f for f in cls.__dataclass_fields__})
        return cls(**d)

    def build(self, e_max: int, n_subsets: int | None = None) -> Partition:
        if self.boundaries is not None and n_subsets is None:
            return Partition(e_max=e_max, starts=tuple(self.boundaries))
        n = n_subsets if n_subsets is not None else self.n_subsets
        return Partition.uniform(e_max, n)


@dataclass
class SweepConfig:
    e_max: list = field(default_factory=list)
    n_subsets: list = field(default_factory=list)
    bands: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        _take(d, "sweep", {f for f in cls.__dataclass_fields__})
        return cls(**d)


@dataclass
class SearchConfig:
    budget: int = 10 ** 7
    refine_above: int | None = None  # two-stage search for partitions larger than this
    coarse_step: int = 4

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        _take(d, "search", {f for f in cls.__dataclass_fields__})
        return cls(**d)


@dataclass
class ScenarioConfig:
    """Complete experiment description; see README for the YAML schema."""

    scenario: str = "scenario"
    battery: BatteryConfig = field(default_factory=BatteryConfig)
    arrivals: ArrivalConfig = field(default_factory=ArrivalConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    consumption: ConsumptionConfig = field(default_factory=ConsumptionConfig)
    actions: ActionConfig = field(default_factory=ActionConfig)
    partition: PartitionConfig = field(default_factory=PartitionConfig)
    policy_source: str = "search"
    fixed_actions: list | None = None
    seed: int = 1
    frames: int = 10 ** 6
    include_ideal: bool = False      # also run the lossless-battery twin (solve)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    search: SearchConfig = field(default_factory=SearchConfig)

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        _take(d, "config", {f for f in cls.__dataclass_fields__})
        if "policy_source" in d and d["policy_source"] not in _POLICY_SOURCES:
            raise ConfigurationError(
                f"policy_source must be one of {_POLICY_SOURCES}, got {d['policy_source']!r}")
        kwargs = dict(d)
        for key, sub in (("battery", BatteryConfig), ("arrivals", ArrivalConfig),
                         ("reward", RewardConfig), ("consumption", ConsumptionConfig),
                         ("actions", ActionConfig), ("partition", PartitionConfig),
                         ("sweep", SweepConfig), ("search", SearchConfig)):
            if key in kwargs:
                kwargs[key] = sub.from_dict(dict(kwargs[key]))
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_yaml(cls, text: str) -> "ScenarioConfig":
        data = yaml.safe_load(text)
        if not isinstance(data, dict):
            raise ConfigurationError("config file must contain a mapping")
        return cls.from_dict(data)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_yaml(fh.read())
