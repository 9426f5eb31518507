"""Clip-REINFORCE training with makespan normalisation and a greedy self-baseline.

Each update step draws a fresh random instance, freezes the current policy as
the baseline, measures the baseline's greedy makespan, samples episodes with
the current policy, runs ``inner_updates`` ascent steps on the clipped
objective and finally moves the smoothed (evaluation) parameters towards the
trained ones.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import diff as D
from .bench.generate import gen_random_jsp, gen_random_mtsp
from .diff import ParamStore, Tape
from .graph import batch_graphs
from .policy import Policy, PolicyConfig, batch_log_probs

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-8


@dataclass
class TrainConfig:
    problem: str = "mtsp"
    num_tasks: tuple = (20, 25)        # inclusive range: cities (mTSP) or jobs (JSP)
    num_agents: tuple = (2, 5)         # inclusive range: salesmen or machines
    steps: int = 3000
    episodes: int = 8
    inner_updates: int = 4
    gamma: float = 0.9
    polyak: float = 0.1
    clip_eps: float = 0.2
    optimizer: str = "sgd"
    lr_max: float = 1e-3
    lr_min: float = 1e-6
    lr_period: int = 30
    grad_clip: float = 1.0
    seed: int = 0
    checkpoint_every: int = 0
    sparsity_prob: float = 0.0         # chance of training on a random kNN-sparsified graph (mTSP only)
    policy: PolicyConfig = field(default_factory=PolicyConfig)

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0 <= self.polyak < 1:
            raise ValueError("polyak coefficient must lie in [0, 1)")
        if self.clip_eps <= 0:
            raise ValueError("clip epsilon must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not 0 <= self.sparsity_prob <= 1:
            raise ValueError("sparsity_prob must lie in [0, 1]")
        if self.sparsity_prob and self.problem != "mtsp":
            raise ValueError("sparsified training graphs are only defined for mTSP")
        if isinstance(self.policy, dict):
            self.policy = PolicyConfig.from_dict(self.policy)
        self.num_tasks = tuple(self.num_tasks)
        self.num_agents = tuple(self.num_agents)
        if self.policy.problem != self.problem:
            self.policy = PolicyConfig.from_dict({**self.policy.to_dict(), "problem": self.problem})

    def to_dict(self) -> dict:
        d = asdict(self)
        d["policy"] = self.policy.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def normalized_makespan(m_pi: float, m_b: float) -> float:
    if not m_b > 0:
        raise ValueError(f"baseline makespan must be positive, got {m_b}")
    return (m_pi - m_b) / m_b


def normalized_return(m_bar: float, tau, horizon: int, gamma: float):
    """``-gamma**(T - tau) * m_bar``; ``tau`` may be an array of event indices."""
    return -(gamma ** (horizon - np.asarray(tau, dtype=float))) * m_bar


def cr_objective(logp, logp_base, returns, eps: float) -> D.Tensor:
    """Mean clipped surrogate ``min(clip(rho) G, rho G)`` with ``rho = pi / pi_b``.

    ``logp`` is differentiated; ``logp_base`` and ``returns`` are constants.
    """
    logp_base = np.asarray(logp_base, dtype=float)
    if np.any(logp_base < math.log(PROB_FLOOR)):
        raise ValueError("baseline probability below the floor; ratio undefined")
    rho = D.exp(D.sub(logp, logp_base))
    g = np.asarray(returns, dtype=float)
    return D.mean(D.minimum(D.mul(D.clip(rho, 1 - eps, 1 + eps), g), D.mul(rho, g)))


def cr_loss(rho, returns, eps: float) -> float:
    """Objective value from plain ratios, for inspection and tests."""
    rho = np.asarray(rho, dtype=float)
    g = np.asarray(returns, dtype=float)
    return float(np.mean(np.minimum(np.clip(rho, 1 - eps, 1 + eps) * g, rho * g)))


@dataclass
class Batch:
    graphs: list
    choices: np.ndarray
    returns: np.ndarray
    logp_base: np.ndarray
    baseline_makespan: float
    makespans: np.ndarray

    @property
    def mean_normalized(self) -> float:
        return float(np.mean((self.makespans - self.baseline_makespan) / self.baseline_makespan))


def collect_episodes(instance, policy: Policy, episodes: int, gamma: float,
                     rng: np.random.Generator, sparsity: tuple | None = None) -> Batch:
    """Sample ``episodes`` rollouts and score them against the same policy run greedily.

    The policy doing the sampling is the frozen baseline, so the recorded
    sampling probabilities are the baseline probabilities of the ratio.
    ``sparsity`` is an optional ``(N_r, N_t)`` applied to every graph.
    """
    m_b = policy.run([instance], "greedy", sparsity=sparsity)[0].makespan
    eps = policy.run([instance] * episodes, "sample", rng, record=True, sparsity=sparsity)
    graphs, choices, returns, probs = [], [], [], []
    for ep in eps:
        T = ep.length
        m_bar = normalized_makespan(ep.makespan, m_b)
        graphs.extend(ep.graphs)
        choices.extend(ep.choices)
        probs.extend(ep.probs)
        returns.extend(normalized_return(m_bar, np.arange(T), T, gamma))
    logp_base = np.log(np.maximum(np.array(probs), PROB_FLOOR))
    return Batch(graphs, np.array(choices, dtype=int), np.array(returns), logp_base, m_b,
                 np.array([e.makespan for e in eps]))


def objective_and_grad(params: ParamStore, config: PolicyConfig, batch: Batch, eps: float) -> float:
    """Evaluate the clipped objective and accumulate its gradient into ``params.grads``."""
    gb = batch_graphs(batch.graphs)
    leaves = params.tensors()
    with Tape() as tape:
        lp = batch_log_probs(leaves, config, gb)
        chosen = D.take(lp, gb.cand_offset[:-1] + batch.choices)
        obj = cr_objective(chosen, batch.logp_base, batch.returns, eps)
    if not np.isfinite(obj.value):
        raise FloatingPointError(f"non-finite objective {obj.value}")
    tape.backward(obj)
    params.accumulate(leaves)
    return float(obj.value)


def sample_instance(cfg: TrainConfig, rng: np.random.Generator):
    n = int(rng.integers(cfg.num_tasks[0], cfg.num_tasks[1] + 1))
    m = int(rng.integers(cfg.num_agents[0], cfg.num_agents[1] + 1))
    seed = int(rng.integers(2 ** 31))
    if cfg.problem == "mtsp":
        return gen_random_mtsp(n, m, seed)
    return gen_random_jsp(n, m, seed)


class Trainer:
    """Holds the trained parameters, the smoothed copy and optimiser state."""

    METRIC_FIELDS = ("step", "num_tasks", "num_agents", "mean_normalized_makespan", "baseline_makespan",
                     "objective", "lr")

    def __init__(self, cfg: TrainConfig, params: ParamStore | None = None):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.policy = Policy(cfg.policy, params if params is not None else
                             Policy.create(cfg.policy, int(self.rng.integers(2 ** 31))).params)
        self.smoothed = Policy(cfg.policy, self.policy.params.copy())
        self.adam = D.Adam() if cfg.optimizer == "adam" else None
        self.step_count = 0
        self.grad_steps = 0

    def _apply(self, lr: float):
        self.policy.params.clip_grad_norm(self.cfg.grad_clip)
        if self.adam is not None:
            self.adam.step(self.policy.params, lr)
        else:
            D.sgd_step(self.policy.params, lr)

    def train_step(self) -> dict:
        cfg = self.cfg
        instance = sample_instance(cfg, self.rng)
        sparsity = None
        if cfg.sparsity_prob and self.rng.random() < cfg.sparsity_prob:
            sparsity = (int(self.rng.integers(1, instance.num_agents + 1)),
                        int(self.rng.integers(1, instance.num_cities + 1)))
        batch = collect_episodes(instance, self.policy, cfg.episodes, cfg.gamma, self.rng, sparsity)
        obj = float("nan")
        lr = cfg.lr_max
        for _ in range(cfg.inner_updates):
            lr = D.cosine_warm_restarts(self.grad_steps, cfg.lr_max, cfg.lr_min, cfg.lr_period)
            self.policy.params.zero_grad()
            obj = objective_and_grad(self.policy.params, cfg.policy, batch, cfg.clip_eps)
            self._apply(lr)
            self.grad_steps += 1
        self.smoothed.params.polyak_(self.policy.params, cfg.polyak)
        self.step_count += 1
        n_agents = instance.num_agents if cfg.problem == "mtsp" else instance.num_machines
        n_tasks = instance.num_cities if cfg.problem == "mtsp" else instance.num_jobs
        return {
            "step": self.step_count, "num_tasks": n_tasks, "num_agents": n_agents,
            "mean_normalized_makespan": batch.mean_normalized, "baseline_makespan": batch.baseline_makespan,
            "objective": obj, "lr": lr,
        }


def format_metrics_row(row: dict) -> dict:
    return {k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()}


def train(cfg: TrainConfig, metrics_path=None, checkpoint_dir=None, callback=None) -> Trainer:
    """Run ``cfg.steps`` update steps, writing a metrics CSV and periodic checkpoints."""
    trainer = Trainer(cfg)
    if checkpoint_dir:
        os.makedirs(checkpoint_dir, exist_ok=True)
    fh = open(metrics_path, "w", newline="") if metrics_path else io.StringIO()
    try:
        writer = csv.DictWriter(fh, fieldnames=Trainer.METRIC_FIELDS, lineterminator="\n")
        writer.writeheader()
        for _ in range(cfg.steps):
            row = trainer.train_step()
            writer.writerow(format_metrics_row(row))
            if callback is not None:
                callback(trainer, row)
            if checkpoint_dir and cfg.checkpoint_every and trainer.step_count % cfg.checkpoint_every == 0:
                save_checkpoint(trainer, f"{checkpoint_dir}/step{trainer.step_count:06d}.npz")
            if trainer.step_count % 100 == 0:
                log.info("step %d  mean M-bar %.4f", trainer.step_count, row["mean_normalized_makespan"])
        if checkpoint_dir:
            save_checkpoint(trainer, f"{checkpoint_dir}/final.npz")
    finally:
        fh.close()
    return trainer


def save_checkpoint(trainer: Trainer, path):
    """Save the smoothed (evaluation) parameters."""
    trainer.smoothed.save(path, {"step": trainer.step_count, "train": trainer.cfg.to_dict()})
