"""Trajectory replay with planner statistics and lazy reanalyze.

Transitions live in flat ring arrays indexed by insertion order;
``count`` is the global number of pushes and slot(g) = g mod capacity,
so the live window is [count - size, count). H-step slices are windows
of consecutive insertions that stay inside one episode; sampling is
uniform over valid window starts (with replacement).

Lazy reanalyze periodically re-plans from the first state of a few
sampled slices (zero warm start) and overwrites that transition's
stored planner mean/std in both the batch and the buffer, refreshing
stale planning policies.

Persistence uses the shared named-block container (see blockio): magic
"POMPCRB\\0", version 1, int64 blocks for capacity/dims/counters and
float64/int64 blocks for the ring arrays in documented order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import blockio

BUFFER_MAGIC = b"POMPCRB\x00"
BUFFER_VERSION = 1


@dataclass
class TransitionRecord:
    """One environment step plus the planner's first-step statistics."""

    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    plan_mean: np.ndarray
    plan_std: np.ndarray
    episode: int
    step: int
    done: bool


@dataclass
class Batch:
    """n_b H-step slices; ``slots`` are the ring positions for write-back."""

    obs: np.ndarray            # (n, H, obs_dim)
    action: np.ndarray         # (n, H, action_dim)
    reward: np.ndarray         # (n, H)
    next_obs: np.ndarray       # (n, H, obs_dim)
    plan_mean: np.ndarray      # (n, H, action_dim)
    plan_std: np.ndarray       # (n, H, action_dim)
    next_plan_mean: np.ndarray  # (n, H, action_dim), successor stats
    next_plan_std: np.ndarray
    slots: np.ndarray          # (n, H) int64
    episode: np.ndarray        # (n, H) int64

    @property
    def size(self):
        return self.obs.shape[0]

    @property
    def horizon(self):
        return self.obs.shape[1]


@dataclass
class ReanalyzeReport:
    triggered: bool
    refreshed_rows: list = field(default_factory=list)
    failures: int = 0


class ReplayBuffer:
    """FIFO ring buffer of TransitionRecords with episode bookkeeping."""

    def __init__(self, capacity, obs_dim, action_dim, sigma_min, sigma_max):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.action_dim = int(action_dim)
        self.sigma_min = float(sigma_min)
        self.sigma_max = float(sigma_max)
        self.count = 0
        shape = (self.capacity,)
        self.obs = np.zeros(shape + (obs_dim,))
        self.action = np.zeros(shape + (action_dim,))
        self.reward = np.zeros(shape)
        self.next_obs = np.zeros(shape + (obs_dim,))
        self.plan_mean = np.zeros(shape + (action_dim,))
        self.plan_std = np.zeros(shape + (action_dim,))
        self.episode = np.full(shape, -1, dtype=np.int64)
        self.step = np.zeros(shape, dtype=np.int64)
        self.done = np.zeros(shape, dtype=np.int64)

    @property
    def size(self):
        return min(self.count, self.capacity)

    def push(self, rec):
        """Append one record, evicting the oldest when full."""
        std = np.asarray(rec.plan_std, dtype=np.float64)
        if not np.isfinite(std).all() or (std < self.sigma_min).any() \
                or (std > self.sigma_max).any():
            raise ValueError(
                f"plan_std outside [{self.sigma_min}, {self.sigma_max}]")
        slot = self.count % self.capacity
        self.obs[slot] = rec.obs
        self.action[slot] = rec.action
        self.reward[slot] = rec.reward
        self.next_obs[slot] = rec.next_obs
        self.plan_mean[slot] = rec.plan_mean
        self.plan_std[slot] = std
        self.episode[slot] = rec.episode
        self.step[slot] = rec.step
        self.done[slot] = int(rec.done)
        self.count += 1

    def _valid_starts(self, horizon):
        """Global indices g where records g..g+H-1 share one episode."""
        size = self.size
        if size < horizon:
            return np.zeros(0, dtype=np.int64)
        lo = self.count - size
        slots = (lo + np.arange(size)) % self.capacity
        ep = self.episode[slots]
        n_starts = size - horizon + 1
        ok = np.ones(n_starts, dtype=bool)
        for j in range(1, horizon):
            ok &= ep[j:j + n_starts] == ep[:n_starts]
        return lo + np.nonzero(ok)[0]

    def sample_slices(self, n_b, horizon, rng):
        """Draw n_b uniform H-step slices (with replacement)."""
        starts = self._valid_starts(horizon)
        if starts.size == 0:
            raise ValueError("no valid slice of the requested horizon")
        chosen = starts[rng.integers(0, starts.size, size=n_b)]
        gidx = chosen[:, None] + np.arange(horizon)[None, :]
        slots = (gidx % self.capacity).astype(np.int64)

        # Successor stats: within the slice they are the next step's
        # stored stats; the final step falls back on its own stats when
        # the next insertion is absent or belongs to another episode.
        succ_g = chosen + horizon
        succ_slot = (succ_g % self.capacity).astype(np.int64)
        last_slot = slots[:, -1]
        succ_ok = (succ_g < self.count) \
            & (self.episode[succ_slot] == self.episode[last_slot])
        next_mean = np.empty((n_b, horizon, self.action_dim))
        next_std = np.empty_like(next_mean)
        next_mean[:, :-1] = self.plan_mean[slots[:, 1:]]
        next_std[:, :-1] = self.plan_std[slots[:, 1:]]
        next_mean[:, -1] = np.where(succ_ok[:, None],
                                    self.plan_mean[succ_slot],
                                    self.plan_mean[last_slot])
        next_std[:, -1] = np.where(succ_ok[:, None],
                                   self.plan_std[succ_slot],
                                   self.plan_std[last_slot])
        return Batch(
            obs=self.obs[slots].copy(),
            action=self.action[slots].copy(),
            reward=self.reward[slots].copy(),
            next_obs=self.next_obs[slots].copy(),
            plan_mean=self.plan_mean[slots].copy(),
            plan_std=self.plan_std[slots].copy(),
            next_plan_mean=next_mean,
            next_plan_std=next_std,
            slots=slots,
            episode=self.episode[slots].copy())

    def save(self, path):
        """Persist the buffer to one binary file (see module header)."""
        meta = np.array([self.capacity, self.obs_dim, self.action_dim,
                         self.count], dtype=np.int64)
        limits = np.array([self.sigma_min, self.sigma_max])
        blocks = [("meta", meta), ("sigma_limits", limits),
                  ("obs", self.obs), ("action", self.action),
                  ("reward", self.reward), ("next_obs", self.next_obs),
                  ("plan_mean", self.plan_mean), ("plan_std", self.plan_std),
                  ("episode", self.episode), ("step", self.step),
                  ("done", self.done)]
        blockio.write_blocks(path, BUFFER_MAGIC, BUFFER_VERSION, blocks)

    @classmethod
    def load(cls, path):
        blocks = blockio.read_blocks(path, BUFFER_MAGIC, BUFFER_VERSION)
        cap, obs_dim, action_dim, count = (int(v) for v in blocks["meta"])
        smin, smax = blocks["sigma_limits"]
        buf = cls(cap, obs_dim, action_dim, smin, smax)
        buf.count = count
        for name in ("obs", "action", "reward", "next_obs", "plan_mean",
                     "plan_std", "episode", "step", "done"):
            getattr(buf, name)[:] = blocks[name]
        return buf


def lazy_reanalyze(buf, batch, n_b_r, interval, update_counter, plan_fn):
    """Refresh the first-step planner stats of a batch subset.

    Every ``interval``-th update (counter mod interval == 0) the first
    min(n_b_r, n_b) slices of the batch are re-planned from their first
    observation via ``plan_fn(obs) -> PlanResult`` (zero warm start is
    the caller's responsibility) and the resulting (mean[0], std[0])
    overwrite the stored stats in both the batch and the buffer. A
    planner fallback leaves that slice's stats untouched and counts as a
    failure.
    """
    if update_counter % interval != 0:
        return batch, ReanalyzeReport(triggered=False)
    report = ReanalyzeReport(triggered=True)
    n_refresh = min(n_b_r, batch.size)
    for i in range(n_refresh):
        result = plan_fn(batch.obs[i, 0])
        if result.fallback or not (np.isfinite(result.mean[0]).all()
                                   and np.isfinite(result.std[0]).all()):
            report.failures += 1
            continue
        slot = batch.slots[i, 0]
        batch.plan_mean[i, 0] = result.mean[0]
        batch.plan_std[i, 0] = result.std[0]
        buf.plan_mean[slot] = result.mean[0]
        buf.plan_std[slot] = result.std[0]
        report.refreshed_rows.append(i)
    return batch, report
