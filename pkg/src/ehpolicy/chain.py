"""Finite Markov chain induced by a transmission policy.

Builds the state-transition matrix over battery levels, evaluates the
long-run average reward from a given initial charge (robust to reducible
chains, e.g. the failed-transmission trap), and cross-validates the
analytic value with Monte Carlo simulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .core import (
    ActionSet,
    ArrivalModel,
    BatteryModel,
    ConsumptionMap,
    RewardModel,
    attained_reward,
    next_state_table,
    sample_arrivals,
)
from .errors import ConfigurationError, ConvergenceError, DomainError, NumericError

_EDGE_EPS = 1e-15  # probabilities below this do not count as edges


# ---------------------------------------------------------------------------
# Observation partition and policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """Contiguous partition of the battery levels {0..e_max} into N observable subsets.

    ``starts[i]`` is the lowest level of subset i; subsets cover the range
    exactly and in order.
    """

    e_max: int
    starts: tuple

    def __post_init__(self):
        starts = tuple(int(s) for s in self.starts)
        object.__setattr__(self, "starts", starts)
        if not starts or starts[0] != 0:
            raise ConfigurationError("first subset must start at level 0")
        if list(starts) != sorted(set(starts)):
            raise ConfigurationError("subset starts must be strictly increasing")
        if starts[-1] > self.e_max:
            raise ConfigurationError("subset start beyond e_max")

    @classmethod
    def uniform(cls, e_max: int, n_subsets: int) -> "Partition":
        """Near-equal contiguous split; earlier subsets take the extra state.

        For N=2 this yields LOW = {0..floor(e_max/2)} and HIGH above it.
        """
        if not 1 <= n_subsets <= e_max + 1:
            raise ConfigurationError(f"n_subsets must be in [1, {e_max + 1}]")
        pieces = np.array_split(np.arange(e_max + 1), n_subsets)
        return cls(e_max=e_max, starts=tuple(int(p[0]) for p in pieces))

    @classmethod
    def singleton(cls, e_max: int) -> "Partition":
        """Full-resolution partition: one subset per level (perfect SoC)."""
        return cls(e_max=e_max, starts=tuple(range(e_max + 1)))

    @property
    def n_subsets(self) -> int:
        return len(self.starts)

    def subsets(self):
        """List of integer arrays, one per subset."""
        bounds = list(self.starts) + [self.e_max + 1]
        return [np.arange(bounds[i], bounds[i + 1]) for i in range(self.n_subsets)]

    def labels(self) -> np.ndarray:
        """Observation map psi: level -> subset index, as an array over {0..e_max}."""
        out = np.empty(self.e_max + 1, dtype=np.int64)
        for i, sub in enumerate(self.subsets()):
            out[sub] = i
        return out

    def refines(self, other: "Partition") -> bool:
        """True if every subset of ``other`` is a union of subsets of self."""
        return self.e_max == other.e_max and set(other.starts) <= set(self.starts)


@dataclass(frozen=True)
class StatePolicy:
    """Deterministic tx power per battery level (perfect SoC knowledge)."""

    actions: tuple

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))

    @property
    def e_max(self) -> int:
        return len(self.actions) - 1

    def action_vector(self, e_max: int) -> np.ndarray:
        if e_max != self.e_max:
            raise ConfigurationError(
                f"policy defined for e_max={self.e_max}, scenario has {e_max}")
        return np.asarray(self.actions, dtype=np.int64)


@dataclass(frozen=True)
class PartitionPolicy:
    """Deterministic tx power per observable subset (imperfect SoC knowledge)."""

    partition: Partition
    actions: tuple

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(int(a) for a in self.actions))
        if len(self.actions) != self.partition.n_subsets:
            raise ConfigurationError("one action per subset required")

    def action_vector(self, e_max: int) -> np.ndarray:
        if e_max != self.partition.e_max:
            raise ConfigurationError(
                f"policy partition has e_max={self.partition.e_max}, scenario has {e_max}")
        return np.asarray(self.actions, dtype=np.int64)[self.partition.labels()]


Policy = Union[StatePolicy, PartitionPolicy]


def check_policy_actions(policy: Policy, actions: ActionSet) -> None:
    for a in policy.actions:
        if a not in actions:
            raise ConfigurationError(f"policy action {a} not in action set")


# ---------------------------------------------------------------------------
# Chain construction
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def charge_matrix(battery: BatteryModel, arrivals: ArrivalModel) -> np.ndarray:
    """Row ``a`` is the post-frame state distribution when charging starts from level ``a``.

    Any policy's transition row for state e under consumption D is the
    charge row at max(0, e - D), so this matrix is policy-independent.
    """
    table = next_state_table(battery, arrivals.b_max)
    pmf = arrivals.pmf_array()
    n = battery.e_max + 1
    rows = np.zeros((n, n))
    starts = np.arange(n)
    for b in range(arrivals.b_max + 1):
        np.add.at(rows, (starts, table[:, b]), pmf[b])
    return rows


def consumption_vector(policy: Policy, cons: ConsumptionMap, e_max: int) -> np.ndarray:
    acts = policy.action_vector(e_max)
    return np.asarray([cons.consumption(int(a)) for a in acts], dtype=np.int64)


def build_chain(battery: BatteryModel, arrivals: ArrivalModel, cons: ConsumptionMap,
                reward: RewardModel, policy: Policy):
    """Transition matrix and per-state reward vector induced by a policy.

    Returns (transition, state_reward); rows of ``transition`` sum to 1.
    """
    n = battery.e_max + 1
    acts = policy.action_vector(battery.e_max)
    if len(acts) != n:
        raise ConfigurationError("policy dimension does not match battery size")
    dvec = consumption_vector(policy, cons, battery.e_max)
    rows = charge_matrix(battery, arrivals)
    starts = np.maximum(np.arange(n) - dvec, 0)
    transition = rows[starts]
    state_reward = np.array([
        attained_reward(reward, cons, int(a), e) for e, a in enumerate(acts)
    ])
    return transition, state_reward


# ---------------------------------------------------------------------------
# Long-run average reward
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainAnalysis:
    transition: np.ndarray
    state_reward: np.ndarray
    stationary: np.ndarray
    long_run_reward: float


def _check_stochastic(transition: np.ndarray) -> np.ndarray:
    p = np.asarray(transition, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise NumericError("transition matrix must be square")
    if np.any(p < -1e-12) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-10):
        raise NumericError("transition matrix is not row-stochastic")
    return p


def long_run_average(transition: np.ndarray, state_reward: np.ndarray, e0: int,
                     tol: float = 1e-10, max_iter: int = 10 ** 6):
    """Limiting occupation from a point mass at ``e0`` and the induced average reward.

    Power iteration with a running (Cesaro) average. Iteration uses the lazy
    kernel (P + I)/2, which has the same recurrent classes, per-class
    stationary laws and absorption weights as P but is aperiodic, so the
    iterates themselves converge and periodic chains do not stall the
    average. Returns (g, pi).
    """
    p = _check_stochastic(transition)
    r = np.asarray(state_reward, dtype=float)
    n = p.shape[0]
    if not 0 <= e0 < n:
        raise DomainError(f"initial state {e0} out of range")

    lazy = 0.5 * (p + np.eye(n))
    v = np.zeros(n)
    v[e0] = 1.0
    avg = v.copy()
    for k in range(1, max_iter + 1):
        v_next = v @ lazy
        step = np.abs(v_next - v).sum()
        v = v_next
        avg_next = avg + (v - avg) / (k + 1.0)
        diff = np.abs(avg_next - avg).sum()
        avg = avg_next
        if step < 1e-14:
            # v reached the lazy chain's fixed point; that fixed point IS the
            # Cesaro limit, so skip the slow tail of the averaging.
            avg = v
            break
        if diff < tol:
            break
    else:
        raise ConvergenceError(
            f"occupation did not converge in {max_iter} iterations", residual=diff)

    avg = np.maximum(avg, 0.0)
    avg /= avg.sum()
    return float(avg @ r), avg


def exact_occupation(transition: np.ndarray, e0: int) -> np.ndarray:
    """Algebraic limiting occupation from ``e0``: absorption weights into each
    recurrent class reachable from e0, times the class stationary laws.

    Same mathematical object as long_run_average's output; used where many
    chains must be evaluated quickly.
    """
    p = _check_stochastic(transition)
    n = p.shape[0]
    sparse = csr_matrix(p > _EDGE_EPS)
    order = np.atleast_1d(breadth_first_order(sparse, e0, return_predecessors=False))
    idx = np.sort(order)
    pr = p[np.ix_(idx, idx)]
    m = len(idx)

    ncomp, labels = connected_components(
        csr_matrix(pr > _EDGE_EPS), directed=True, connection="strong")
    recurrent = np.array([
        pr[labels == c][:, labels != c].sum() < 1e-13 for c in range(ncomp)
    ])

    class_pi = {}
    for c in np.where(recurrent)[0]:
        mask = labels == c
        k = int(mask.sum())
        a = pr[np.ix_(mask, mask)].T - np.eye(k)
        a[-1, :] = 1.0
        rhs = np.zeros(k)
        rhs[-1] = 1.0
        class_pi[c] = np.linalg.solve(a, rhs)

    e0_local = int(np.searchsorted(idx, e0))
    rec_classes = np.where(recurrent)[0]
    weights = {}
    if recurrent[labels[e0_local]]:
        weights[labels[e0_local]] = 1.0
    elif len(rec_classes) == 1:
        # absorption is certain, so the lone reachable recurrent class gets
        # weight 1 without solving the (possibly ill-conditioned) transient block
        weights[int(rec_classes[0])] = 1.0
    else:
        trans = np.where(~recurrent[labels])[0]
        q = pr[np.ix_(trans, trans)]
        lhs = np.eye(len(trans)) - q
        start = int(np.where(trans == e0_local)[0][0])
        for c in rec_classes:
            rhs = pr[np.ix_(trans, np.where(labels == c)[0])].sum(axis=1)
            weights[c] = float(np.linalg.solve(lhs, rhs)[start])
        total = sum(max(w, 0.0) for w in weights.values())
        if not math.isfinite(total) or total <= 0.0:
            raise NumericError("absorption-weight solve failed on an "
                               "ill-conditioned transient block")
        weights = {c: max(w, 0.0) / total for c, w in weights.items()}

    pi = np.zeros(n)
    for c, w in weights.items():
        pi[idx[labels == c]] += w * class_pi[c]
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    return pi


def evaluate_policy(battery: BatteryModel, arrivals: ArrivalModel, cons: ConsumptionMap,
                    reward: RewardModel, policy: Policy, e0: int = 0) -> ChainAnalysis:
    """Build the chain and compute its limiting occupation and average reward."""
    transition, state_reward = build_chain(battery, arrivals, cons, reward, policy)
    pi = exact_occupation(transition, e0)
    return ChainAnalysis(
        transition=transition,
        state_reward=state_reward,
        stationary=pi,
        long_run_reward=float(pi @ state_reward),
    )


def _fast_gain(transition: np.ndarray, state_reward: np.ndarray, e0: int) -> float:
    """Average reward from e0; tries the unichain direct solve, falls back to the
    general reducible-chain route."""
    n = transition.shape[0]
    a = transition.T - np.eye(n)
    a[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(a, rhs)
        if (pi.min() > -1e-10 and abs(pi.sum() - 1.0) < 1e-8
                and np.abs(pi @ transition - pi).max() < 1e-10):
            return float(np.maximum(pi, 0.0) @ state_reward)
    except np.linalg.LinAlgError:
        pass
    return float(exact_occupation(transition, e0) @ state_reward)


# ---------------------------------------------------------------------------
# Monte Carlo simulation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SimulationReport:
    frames: int
    empirical_reward: float
    std_error: float
    visit_counts: np.ndarray
    seed: int


def simulate(battery: BatteryModel, arrivals: ArrivalModel, cons: ConsumptionMap,
             reward: RewardModel, policy: Policy, frames: int, seed: int,
             e0: int = 0) -> SimulationReport:
    """Run ``frames`` frames of the battery recursion from E_0 = e0 with sampled arrivals.

    The standard error of the mean reward uses batch means (the reward
    series is Markov-correlated, so the i.i.d. formula would be too tight).
    """
    if frames < 1:
        raise DomainError("need at least one frame")
    rng = np.random.default_rng(seed)
    table = next_state_table(battery, arrivals.b_max)
    acts = policy.action_vector(battery.e_max)
    dvec = consumption_vector(policy, cons, battery.e_max)
    jvec = np.array([
        attained_reward(reward, cons, int(a), e) for e, a in enumerate(acts)
    ])

    draws = sample_arrivals(arrivals, rng, frames)
    states = np.empty(frames, dtype=np.int64)
    e = int(e0)
    for k in range(frames):
        states[k] = e
        e = table[max(0, e - dvec[e]), draws[k]]

    rewards = jvec[states]
    mean = float(rewards.mean())

    n_batches = min(200, frames)
    batch = frames // n_batches
    means = rewards[: n_batches * batch].reshape(n_batches, batch).mean(axis=1)
    se = float(means.std(ddof=1) / np.sqrt(n_batches)) if n_batches > 1 else float("nan")

    counts = np.bincount(states, minlength=battery.e_max + 1)
    return SimulationReport(
        frames=frames,
        empirical_reward=mean,
        std_error=se,
        visit_counts=counts,
        seed=seed,
    )
