"""Physical model of an energy-harvesting device with a lossy battery.

Energy is quantized: the battery holds an integer number of quanta in
{0..e_max}. Charging during a frame follows the continuous dynamics
dy/dt = (b/T) * eta(y), integrated with fixed-step RK4, after which the
level is floored back onto the quantum grid (flooring never creates
energy, which keeps the discrete chain consistent with the continuous
throughput bound).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import DomainError

# Snap tolerance before flooring: absorbs integrator round-off so exact
# integer levels (e.g. lossless charging) are not floored down a quantum.
_FLOOR_EPS = 1e-9


# ---------------------------------------------------------------------------
# Storage efficiency profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstantEfficiency:
    """A fixed fraction eta of incoming power is stored, at any level."""

    eta: float

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise DomainError(f"eta must be in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class QuadraticCapacitor:
    """Capacitor-like losses: efficiency peaks at half charge.

    eta(e) = 1 - (e - e_max/2)^2 / (beta_nl * (e_max/2)^2); beta_nl > 1
    guarantees eta(0) = 1 - 1/beta_nl > 0 so charging is always possible.
    """

    beta_nl: float

    def __post_init__(self):
        if not self.beta_nl > 1.0:
            raise DomainError(f"beta_nl must be > 1, got {self.beta_nl}")


@dataclass(frozen=True)
class TabulatedEfficiency:
    """Efficiency given on evenly spaced knots over [0, e_max], interpolated linearly."""

    values: tuple

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise DomainError("tabulated profile needs at least 2 knots")
        if any(not 0.0 < v <= 1.0 for v in vals):
            raise DomainError("tabulated efficiencies must be in (0, 1]")
        object.__setattr__(self, "values", vals)


EfficiencyProfile = Union[ConstantEfficiency, QuadraticCapacitor, TabulatedEfficiency]


def efficiency_at(profile: EfficiencyProfile, e, e_max: int):
    """Storage efficiency at (possibly fractional) charge level ``e``.

    Accepts scalars or arrays; raises DomainError outside [0, e_max].
    """
    arr = np.asarray(e, dtype=float)
    if np.any(arr < 0.0) or np.any(arr > e_max):
        raise DomainError(f"charge level outside [0, {e_max}]")
    out = _efficiency_unchecked(profile, arr, e_max)
    return float(out) if np.isscalar(e) or arr.ndim == 0 else out


def _efficiency_unchecked(profile, y, e_max):
    """Efficiency evaluated without the domain check (integrator internals)."""
    if isinstance(profile, ConstantEfficiency):
        return np.full_like(np.asarray(y, dtype=float), profile.eta)
    if isinstance(profile, QuadraticCapacitor):
        half = e_max / 2.0
        return 1.0 - (np.asarray(y, dtype=float) - half) ** 2 / (profile.beta_nl * half * half)
    if isinstance(profile, TabulatedEfficiency):
        knots = np.linspace(0.0, e_max, len(profile.values))
        return np.interp(np.asarray(y, dtype=float), knots, profile.values)
    raise TypeError(f"unknown efficiency profile: {profile!r}")


# ---------------------------------------------------------------------------
# Battery
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BatteryModel:
    """Finite quantized battery with state-dependent storage efficiency."""

    e_max: int
    efficiency: EfficiencyProfile
    frame_length_t: float = 1.0
    slot_length_delta: float = 0.005
    integration_steps: int = 256

    def __post_init__(self):
        if self.e_max < 1:
            raise DomainError(f"e_max must be >= 1, got {self.e_max}")
        if self.frame_length_t <= 0 or self.slot_length_delta <= 0:
            raise DomainError("frame and slot lengths must be positive")
        if self.slot_length_delta >= self.frame_length_t:
            raise DomainError("slot length must be shorter than the frame")
        if self.integration_steps < 1:
            raise DomainError("integration_steps must be >= 1")
        # eta must be strictly positive everywhere so recharge never stalls
        grid = np.linspace(0.0, self.e_max, 101)
        eff = _efficiency_unchecked(self.efficiency, grid, self.e_max)
        if np.any(eff <= 0.0) or np.any(eff > 1.0 + 1e-12):
            raise DomainError("efficiency profile must map [0, e_max] into (0, 1]")


def _rk4_charge(battery: BatteryModel, y0: np.ndarray, b, saturate: bool) -> np.ndarray:
    """Integrate dy/dt = (b/T) eta(y) over one frame, vectorized over start levels.

    ``b`` may be a scalar or an array broadcastable against ``y0``. With
    ``saturate`` the level freezes at e_max (a full battery cannot keep
    charging); without it the raw ODE solution is returned, which is what
    the storage bound needs.
    """
    e_max = battery.e_max
    prof = battery.efficiency
    y = np.array(y0, dtype=float, copy=True)
    h = 1.0 / battery.integration_steps  # time normalized to the frame
    c = np.asarray(b, dtype=float)
    if np.all(c == 0.0):
        return y

    if saturate:
        def f(yy):
            return c * _efficiency_unchecked(prof, np.minimum(yy, e_max), e_max)
    else:
        def f(yy):
            return c * _efficiency_unchecked(prof, yy, e_max)

    for _ in range(battery.integration_steps):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if saturate:
            np.minimum(y, e_max, out=y)
    return y


def integrate_frame(battery: BatteryModel, e_start: float, b: int, *, saturate: bool = True) -> float:
    """Continuous end-of-frame level after charging from ``e_start`` with ``b`` quanta.

    Pre-rounding and (with ``saturate=False``) pre-clipping.
    """
    if not 0.0 <= e_start <= battery.e_max:
        raise DomainError(f"e_start {e_start} outside [0, {battery.e_max}]")
    if b < 0:
        raise DomainError(f"arrivals must be nonnegative, got {b}")
    return float(_rk4_charge(battery, np.asarray([e_start]), b, saturate)[0])


def _floor_level(y):
    """Quantize a continuous level down to whole quanta (never creates energy)."""
    return np.floor(np.asarray(y) + _FLOOR_EPS).astype(int)


def battery_step(battery: BatteryModel, e: int, d: int, b: int) -> int:
    """Battery state after one frame: drain ``d`` (clipped at empty), charge ``b``, quantize."""
    if not 0 <= e <= battery.e_max:
        raise DomainError(f"state {e} outside battery range")
    if d < 0:
        raise DomainError("consumption must be nonnegative")
    if b < 0:
        raise DomainError("arrivals must be nonnegative")
    y = integrate_frame(battery, max(0, e - d), b)
    return int(min(_floor_level(y), battery.e_max))


@lru_cache(maxsize=64)
def next_state_table(battery: BatteryModel, b_max: int) -> np.ndarray:
    """Table[e_start, b] of post-frame integer states for e_start in 0..e_max, b in 0..b_max."""
    n = battery.e_max + 1
    table = np.empty((n, b_max + 1), dtype=np.int64)
    starts = np.arange(n, dtype=float)
    for b in range(b_max + 1):
        y = _rk4_charge(battery, starts, b, saturate=True)
        table[:, b] = np.minimum(_floor_level(y), battery.e_max)
    return table


# ---------------------------------------------------------------------------
# Energy arrivals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArrivalModel:
    """I.i.d. per-frame energy arrivals on {0..b_max}."""

    pmf: tuple
    b_max: int
    mean_b: float

    def __post_init__(self):
        pmf = tuple(float(p) for p in self.pmf)
        object.__setattr__(self, "pmf", pmf)
        if len(pmf) != self.b_max + 1:
            raise DomainError("pmf must have b_max + 1 entries")
        if any(p < 0.0 for p in pmf):
            raise DomainError("pmf entries must be nonnegative")
        if abs(sum(pmf) - 1.0) > 1e-12:
            raise DomainError("pmf must sum to 1 within 1e-12")
        mean = sum(b * p for b, p in enumerate(pmf))
        if abs(mean - self.mean_b) > 1e-9:
            raise DomainError(f"declared mean {self.mean_b} != pmf mean {mean}")

    def pmf_array(self) -> np.ndarray:
        return np.asarray(self.pmf, dtype=float)

    def cdf_array(self) -> np.ndarray:
        return np.cumsum(self.pmf)


def arrival_model_from_pmf(pmf) -> ArrivalModel:
    pmf = np.asarray(pmf, dtype=float)
    total = pmf.sum()
    if total <= 0:
        raise DomainError("pmf must have positive mass")
    pmf = pmf / total
    mean = float(np.arange(len(pmf)) @ pmf)
    return ArrivalModel(pmf=tuple(pmf), b_max=len(pmf) - 1, mean_b=mean)


def _fit_mean_by_bisection(log_weight, mean_target, b_max):
    """Find theta such that the normalized pmf exp(log_weight(b, theta)) has the target mean.

    log_weight must be increasing in theta in the mean sense.
    """
    bs = np.arange(b_max + 1, dtype=float)

    def mean_at(theta):
        lw = log_weight(bs, theta)
        lw = lw - lw.max()
        w = np.exp(lw)
        w /= w.sum()
        return float(bs @ w), w

    lo, hi = 1e-12, 1.0
    while mean_at(hi)[0] < mean_target:
        hi *= 2.0
        if hi > 1e9:
            raise DomainError("mean target unreachable for this family")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_at(mid)[0] < mean_target:
            lo = mid
        else:
            hi = mid
    mean, w = mean_at(0.5 * (lo + hi))
    if abs(mean - mean_target) > 1e-9:
        raise DomainError(f"bisection failed to match mean (got {mean})")
    # Re-declare the mean from the fitted pmf so the invariant holds exactly.
    return ArrivalModel(pmf=tuple(w), b_max=b_max, mean_b=float(bs @ w))


def make_truncated_geometric(mean_target: float, b_max: int) -> ArrivalModel:
    """Geometric-shaped pmf on {0..b_max}, renormalized, mean fitted by bisection."""
    if not 0.0 < mean_target < b_max:
        raise DomainError(f"mean must be in (0, {b_max})")
    return _fit_mean_by_bisection(lambda bs, p: bs * math.log(p), mean_target, b_max)


def make_truncated_poisson(mean_target: float, b_max: int) -> ArrivalModel:
    """Poisson-shaped pmf on {0..b_max}, renormalized, rate fitted by bisection."""
    if not 0.0 < mean_target < b_max:
        raise DomainError(f"mean must be in (0, {b_max})")
    from scipy.special import gammaln

    return _fit_mean_by_bisection(
        lambda bs, lam: bs * math.log(lam) - gammaln(bs + 1.0), mean_target, b_max
    )


def sample_arrival(model: ArrivalModel, rng: np.random.Generator) -> int:
    """One arrival draw; deterministic given the generator state."""
    return int(np.searchsorted(model.cdf_array(), rng.random(), side="right"))


def sample_arrivals(model: ArrivalModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Vector of i.i.d. arrival draws."""
    u = rng.random(size)
    return np.searchsorted(model.cdf_array(), u, side="right").astype(np.int64)


# ---------------------------------------------------------------------------
# Rewards
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LogSnrReward:
    """r(rho) = ln(1 + snr_scale * rho); rate in nats per transmission."""

    snr_scale: float

    def __post_init__(self):
        if self.snr_scale <= 0:
            raise DomainError("snr_scale must be positive")

    def rate(self, rho):
        return np.log1p(self.snr_scale * np.asarray(rho, dtype=float))


@dataclass(frozen=True)
class ShannonReward:
    """Shannon-rate reward in bits per second, duty-cycled over the frame.

    Quanta convert to watts assuming the transmit energy is spent uniformly
    over the slot: rho_watts = rho_quanta * quantum_joules / slot_length.
    """

    bandwidth_w: float
    noise_density_n0: float
    channel_h: float
    slot_length_delta: float
    frame_length_t: float
    quantum_joules: float

    def __post_init__(self):
        for name in ("bandwidth_w", "noise_density_n0", "channel_h",
                     "slot_length_delta", "frame_length_t", "quantum_joules"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")

    @property
    def duty(self) -> float:
        return self.slot_length_delta / self.frame_length_t

    def rate(self, rho):
        watts = np.asarray(rho, dtype=float) * self.quantum_joules / self.slot_length_delta
        snr = self.channel_h * watts / (self.bandwidth_w * self.noise_density_n0)
        return self.duty * self.bandwidth_w * np.log2(1.0 + snr)


RewardModel = Union[LogSnrReward, ShannonReward]


def check_reward_shape(reward: RewardModel, rho_max: float, points: int = 200) -> None:
    """Numeric sanity check: r(0) = 0, strictly increasing, concave on [0, rho_max]."""
    grid = np.linspace(0.0, rho_max, points)
    r = np.asarray(reward.rate(grid), dtype=float)
    if abs(r[0]) > 1e-12:
        raise DomainError("reward must vanish at zero power")
    if np.any(np.diff(r) <= 0):
        raise DomainError("reward must be strictly increasing")
    if np.any(np.diff(r, 2) > 1e-9 * max(1.0, r[-1])):
        raise DomainError("reward must be concave")


# ---------------------------------------------------------------------------
# Consumption
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdentityConsumption:
    """No circuitry overhead: consumed quanta equal transmitted quanta."""

    def consumption(self, rho: int) -> int:
        if rho < 0:
            raise DomainError("tx power must be nonnegative")
        return int(rho)


@dataclass(frozen=True)
class DeviceTableConsumption:
    """Measured device profile: (tx quanta -> consumed quanta), plus free idling."""

    rows: tuple  # of (tx_power_quanta, consumption_quanta)

    def __post_init__(self):
        rows = tuple((int(t), int(c)) for t, c in self.rows)
        object.__setattr__(self, "rows", rows)
        txs = [t for t, _ in rows]
        if txs != sorted(txs) or len(set(txs)) != len(txs):
            raise DomainError("rows must be sorted with strictly increasing tx power")
        if any(c < t for t, c in rows):
            raise DomainError("consumption cannot be below tx power")
        if any(t < 0 for t, _ in rows):
            raise DomainError("tx powers must be nonnegative")

    def consumption(self, rho: int) -> int:
        if rho == 0:
            return 0
        for t, c in self.rows:
            if t == rho:
                return c
        raise DomainError(f"tx power {rho} not in device table")


ConsumptionMap = Union[IdentityConsumption, DeviceTableConsumption]


@dataclass(frozen=True)
class ActionSet:
    """Sorted distinct nonnegative transmit powers (quanta), always containing 0."""

    actions: tuple

    def __post_init__(self):
        acts = tuple(int(a) for a in self.actions)
        if sorted(set(acts)) != list(acts):
            raise DomainError("actions must be sorted and distinct")
        if not acts or acts[0] != 0:
            raise DomainError("action set must contain 0 (idle)")
        object.__setattr__(self, "actions", acts)

    def __contains__(self, rho) -> bool:
        return int(rho) in self.actions

    def __len__(self) -> int:
        return len(self.actions)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.actions, dtype=np.int64)


def attained_reward(reward: RewardModel, cons: ConsumptionMap, rho: int, e: int,
                    actions: ActionSet | None = None) -> float:
    """Reward earned in a frame: r(rho) on success, 0 if the battery cannot cover it."""
    if actions is not None and rho not in actions:
        raise DomainError(f"tx power {rho} not in action set")
    if rho < 0:
        raise DomainError("tx power must be nonnegative")
    if rho == 0:
        return 0.0
    if cons.consumption(rho) <= e:
        return float(reward.rate(rho))
    return 0.0


# ---------------------------------------------------------------------------
# Recharge hypothesis
# ---------------------------------------------------------------------------

def validate_recharge_hypothesis(battery: BatteryModel, arrivals: ArrivalModel):
    """Check that a maximal arrival stores at least one quantum from every non-full state.

    Returns (ok, violating_states).
    """
    table = next_state_table(battery, arrivals.b_max)
    states = np.arange(battery.e_max)
    bad = states[table[:-1, arrivals.b_max] < states + 1]
    return len(bad) == 0, [int(e) for e in bad]
