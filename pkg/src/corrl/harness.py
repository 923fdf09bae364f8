"""Seeded experiment runs: environment + adversary + learner + exact regret."""
from __future__ import annotations

import copy
import itertools
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from . import env as envs
from .adversary import ATTACKS, make_adversary
from .estimators import CorruptionLog, count_corrupted_global, count_corrupted_sub
from .learners import (FixedPolicyLearner, SupervisedBandC, SupervisedC, SupervisedCLinear,
                       SupervisedUnif, UcbBandit, Ucbvi)
from .oracle import evaluate, optimal_values
from .rng import EpisodeStream

log = logging.getLogger("corrl")

CSV_COLUMNS = ("k", "c_k", "benchmark_value", "nominal_value", "inst_regret",
               "cum_regret_nominal", "cum_regret_eq2")

ENV_KINDS = ("combination_lock", "random_tabular", "bandit", "random_linear",
             "canonical_linear", "tabular")
LEARNERS = ("ucb_bandit", "ucb_bandit_known_c", "supervised_band_c", "ucbvi", "supervised_c",
            "supervised_unif", "uniform_elimination", "optimal")


class ConfigError(ValueError):
    pass


class EpisodeError(RuntimeError):
    """A learner or adversary failure, tagged with the episode it happened in."""

    def __init__(self, k: int, cause: BaseException):
        super().__init__(f"episode {k}: {type(cause).__name__}: {cause}")
        self.k = k
        self.cause = cause


@dataclass
class ExperimentConfig:
    """Experiment description; mirrors the JSON schema documented in the README."""

    environment: dict
    learner: dict
    K: int
    delta: float = 0.05
    adversary: dict = field(default_factory=lambda: {"attack": "none", "C": 0})
    replicates: int = 1
    seed: int = 0
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"environment", "learner", "K", "delta", "adversary", "replicates", "seed",
                 "output_dir"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        for key in ("environment", "learner", "K"):
            if key not in d:
                raise ConfigError(f"missing config key {key!r}")
        cfg = cls(**copy.deepcopy(d))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"environment": self.environment, "adversary": self.adversary,
                "learner": self.learner, "K": self.K, "delta": self.delta,
                "replicates": self.replicates, "seed": self.seed,
                "output_dir": self.output_dir}

    def validate(self):
        if not isinstance(self.K, int) or self.K < 0:
            raise ConfigError("K must be a nonnegative integer")
        if not (isinstance(self.delta, (int, float)) and 0 < self.delta < 1):
            raise ConfigError("delta must lie in (0, 1)")
        if not isinstance(self.replicates, int) or self.replicates < 1:
            raise ConfigError("replicates must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        if self.environment.get("kind") not in ENV_KINDS:
            raise ConfigError(f"environment.kind must be one of {ENV_KINDS}")
        if self.learner.get("name") not in LEARNERS:
            raise ConfigError(f"learner.name must be one of {LEARNERS}")
        adv = self.adversary
        if adv.get("attack", "none") not in ATTACKS:
            raise ConfigError(f"adversary.attack must be one of {sorted(ATTACKS)}")
        C = adv.get("C", 0)
        if not isinstance(C, int) or C < 0:
            raise ConfigError("adversary.C must be a nonnegative integer")


# ---------------------------------------------------------------- builders

def build_environment(spec: dict):
    """(TabularMdp used by the oracle, LinearMdp or None)."""
    kind = spec["kind"]
    p = dict(spec.get("params", {}))
    seed = spec.get("seed", 0)
    try:
        if kind == "combination_lock":
            return envs.make_combination_lock(p["num_actions"], p["horizon"],
                                              p.get("reward_kind", "deterministic")), None
        if kind == "random_tabular":
            return envs.make_random_tabular(p["S"], p["A"], p["H"], seed,
                                            p.get("reward_kind", "bernoulli")), None
        if kind == "bandit":
            return envs.make_bandit(p["means"], p.get("reward_kind", "bernoulli")), None
        if kind == "random_linear":
            lin = envs.make_random_linear(p["d"], p["S"], p["A"], p["H"], seed,
                                          reward_kind=p.get("reward_kind", "bernoulli"))
            return lin.tabular, lin
        if kind == "canonical_linear":
            tab = envs.make_random_tabular(p["S"], p["A"], p["H"], seed,
                                           p.get("reward_kind", "bernoulli"))
            return tab, envs.LinearMdp.from_tabular(tab)
        if kind == "tabular":
            return envs.TabularMdp.from_dict(p["mdp"]), None
    except KeyError as exc:
        raise ConfigError(f"environment {kind!r} is missing parameter {exc}") from exc
    raise ConfigError(f"unknown environment kind {kind!r}")


def build_learner(spec: dict, mdp, linear, K: int, delta: float):
    name = spec["name"]
    p = dict(spec.get("params", {}))
    S, A, H = mdp.num_states, mdp.num_actions, mdp.horizon
    T = max(1, K * H)
    if name in ("ucb_bandit", "ucb_bandit_known_c", "supervised_band_c") and (S, H) != (1, 1):
        raise ConfigError(f"{name} needs a bandit environment")
    if name == "ucb_bandit":
        return UcbBandit(A, T, delta)
    if name == "ucb_bandit_known_c":
        return UcbBandit(A, T, delta, c_bar=p.get("c_bar", 0.0))
    if name == "supervised_band_c":
        return SupervisedBandC(A, T, delta, p.get("ell_max"))
    if name == "ucbvi":
        return Ucbvi(S, A, H, K, delta, clip=p.get("clip", False))
    if name == "supervised_c":
        mode = p.pop("mode", "linear" if linear is not None else "tabular")
        if mode == "linear":
            if linear is None:
                raise ConfigError("linear supervised_c needs a linear environment")
            return SupervisedCLinear(linear.features, H, K, delta, **p)
        return SupervisedC(S, A, H, K, delta, p.get("ell_max"))
    if name == "supervised_unif":
        return SupervisedUnif(S, A, H, K, delta, p.get("epsilon", 0.1))
    if name == "uniform_elimination":
        return SupervisedUnif(S, A, H, K, delta, 0.0)
    if name == "optimal":
        return FixedPolicyLearner(optimal_values(mdp).greedy_policy)
    raise ConfigError(f"unknown learner {name!r}")


# ---------------------------------------------------------------- run

@dataclass
class RegretRecord:
    """Per-episode regret columns (one entry per episode)."""

    k: np.ndarray
    c_k: np.ndarray
    benchmark_value: np.ndarray
    nominal_value: np.ndarray
    inst_regret: np.ndarray
    cum_regret_nominal: np.ndarray
    cum_regret_eq2: np.ndarray

    def __len__(self):
        return len(self.k)

    @property
    def total_nominal(self) -> float:
        return float(self.cum_regret_nominal[-1]) if len(self) else 0.0

    @property
    def total_eq2(self) -> float:
        return float(self.cum_regret_eq2[-1]) if len(self) else 0.0


@dataclass
class RunResult:
    records: RegretRecord
    corruption_log: CorruptionLog
    decision_digests: list
    optimal_value: float
    learner: object
    num_learners: int

    def summary(self) -> dict:
        log_ = self.corruption_log
        return {
            "episodes": len(self.records),
            "corrupted_episodes": int(self.records.c_k.sum()),
            "cum_regret_nominal": self.records.total_nominal,
            "cum_regret_eq2": self.records.total_eq2,
            "optimal_value": self.optimal_value,
            "corrupted_stages_global": count_corrupted_global(log_),
            "corrupted_stages_by_learner": [count_corrupted_sub(log_, ell)
                                            for ell in range(1, self.num_learners + 1)],
        }


def run_experiment(config: ExperimentConfig, replicate: int = 0, monitor=None) -> RunResult:
    """Run one replicate.

    Per episode: the learner announces, the adversary decides, the learner
    draws its coins, the trajectory is rolled out on the episode MDP and
    observed, and both regret columns are computed exactly.  ``monitor``
    (if given) is called as monitor(k, learner, announced, decision) right
    after the announcement, before any episode randomness.
    """
    config.validate()
    mdp, linear = build_environment(config.environment)
    K, H = config.K, mdp.horizon
    learner = build_learner(config.learner, mdp, linear, K, config.delta)
    adv_spec = dict(config.adversary)
    attack = adv_spec.pop("attack", "none")
    C = adv_spec.pop("C", 0)
    adversary = make_adversary(attack, C, mdp, **adv_spec.get("params", {}))

    seed = config.seed
    env_stream = EpisodeStream(seed, replicate, "env", 1 + 2 * H)
    coin_stream = EpisodeStream(seed, replicate, "learner", learner.coins_per_episode)

    sol = optimal_values(mdp)
    v_star = sol.value
    bench_cache = {}
    nominal_memo = {}
    c_k = np.zeros(K, dtype=np.int64)
    bench = np.zeros(K)
    nominal_v = np.zeros(K)
    episode_v = np.zeros(K)
    clog = CorruptionLog()
    digests = []
    history = []
    states = np.zeros(H + 1, dtype=np.int64)
    actions = np.zeros(H, dtype=np.int64)
    rewards = np.zeros(H)

    k = 0
    try:
        for i in range(K):
            k = i + 1
            announced = learner.announce()
            decision = adversary.decide(k, history, announced)
            digest = decision.digest() if decision.corrupt else None
            if monitor is not None:
                monitor(k, learner, announced, decision)
            m_k = decision.episode_mdp
            # exact values before any of the episode's randomness
            if isinstance(announced, np.ndarray) and announced.size <= 4096:
                key = (announced.dtype.str, announced.tobytes())
                if key not in nominal_memo:
                    nominal_memo[key] = evaluate(mdp, announced)
                nominal_v[i] = nominal_memo[key]
            else:
                nominal_v[i] = evaluate(mdp, announced)
            if decision.corrupt:
                key = id(m_k)
                if key not in bench_cache:
                    bench_cache[key] = (m_k, optimal_values(m_k).value)
                bench[i] = bench_cache[key][1]
                episode_v[i] = evaluate(m_k, announced)
                c_k[i] = 1
            else:
                bench[i] = v_star
                episode_v[i] = nominal_v[i]
            learner.begin_episode(coin_stream.episode(i))
            u = env_stream.episode(i)
            flags = np.zeros(H, dtype=bool)
            x = envs.sample_initial(m_k, u[0])
            states[0] = x
            for h in range(1, H + 1):
                a = learner.act(h, x)
                ur, ux = u[2 * h - 1], u[2 * h]
                r, y = envs.step_uniform(m_k, x, a, ur, ux, h)
                if decision.corrupt:
                    # the same uniforms on the nominal MDP give the uncorrupted outcome
                    r0, y0 = envs.step_uniform(mdp, x, a, ur, ux, h)
                    flags[h - 1] = (r != r0) or (y != y0)
                actions[h - 1], rewards[h - 1], states[h] = a, r, y
                x = y
            learner.observe(states, actions, rewards)
            clog.append(flags, learner.charged_learner)
            if decision.corrupt:
                if digest != decision.digest():
                    raise RuntimeError("adversary decision changed during the episode")
                digests.append((k, digest))
            history.append((k, int(c_k[i]), states.copy(), actions.copy(), rewards.copy()))
    except (KeyboardInterrupt, SystemExit):
        raise
    except Exception as exc:
        raise EpisodeError(k, exc) from exc

    inst = v_star - nominal_v
    records = RegretRecord(np.arange(1, K + 1), c_k, bench, nominal_v, inst,
                           np.cumsum(inst), np.cumsum(bench - episode_v))
    return RunResult(records, clog, digests, v_star, learner,
                     getattr(learner, "num_learners", 1))


# ---------------------------------------------------------------- artifacts

def emit_csv(records: RegretRecord, path):
    """Write the regret columns; floats use repr so reruns are byte-identical."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in zip(records.k, records.c_k, records.benchmark_value, records.nominal_value,
                       records.inst_regret, records.cum_regret_nominal, records.cum_regret_eq2):
            fh.write(f"{int(row[0])},{int(row[1])}," + ",".join(repr(float(v)) for v in row[2:]) + "\n")


def read_csv(path) -> dict:
    data = np.genfromtxt(path, delimiter=",", names=True, dtype=float)
    data = np.atleast_1d(data)
    return {name: data[name] for name in data.dtype.names}


def write_run(config: ExperimentConfig, out_dir) -> list:
    """Run every replicate and write CSV + summary files; returns the CSV paths."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
    paths = []
    for rep in range(config.replicates):
        res = run_experiment(config, rep)
        csv_path = os.path.join(out_dir, f"regret_rep{rep}.csv")
        emit_csv(res.records, csv_path)
        with open(os.path.join(out_dir, f"summary_rep{rep}.json"), "w") as fh:
            json.dump(res.summary(), fh, indent=2, sort_keys=True)
        with open(os.path.join(out_dir, f"run_rep{rep}.log.jsonl"), "w") as fh:
            for k, digest in res.decision_digests:
                fh.write(json.dumps({"event": "corruption", "k": k, "mdp_sha256": digest}) + "\n")
            fh.write(json.dumps({"event": "summary", **res.summary()}, sort_keys=True) + "\n")
        log.info("replicate %d: cumulative nominal regret %.4f", rep, res.records.total_nominal)
        paths.append(csv_path)
    return paths


def _set_dotted(d: dict, dotted: str, value):
    keys = dotted.split(".")
    node = d
    for key in keys[:-1]:
        node = node.setdefault(key, {})
    node[keys[-1]] = value


def run_sweep(template: ExperimentConfig, grid: dict, out_dir) -> list:
    """Cartesian product over ``grid`` (dotted config keys to value lists)."""
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ConfigError("grid must map dotted config keys to lists of values")
    keys = sorted(grid)
    os.makedirs(out_dir, exist_ok=True)
    index = []
    for n, values in enumerate(itertools.product(*(grid[k] for k in keys))):
        d = copy.deepcopy(template.to_dict())
        for key, value in zip(keys, values):
            _set_dotted(d, key, value)
        cfg = ExperimentConfig.from_dict(d)
        run_dir = os.path.join(out_dir, f"run_{n:03d}")
        write_run(cfg, run_dir)
        index.append({"run": f"run_{n:03d}", "params": dict(zip(keys, values))})
    with open(os.path.join(out_dir, "index.json"), "w") as fh:
        json.dump(index, fh, indent=2)
    return index


def emit_plot(csv_paths, path, column="cum_regret_nominal"):
    """Cumulative-regret curves of the given CSV files as a standalone SVG."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for p in csv_paths:
        data = read_csv(p)
        ax.plot(data["k"], data[column], label=os.path.basename(os.path.dirname(p)) + "/"
                + os.path.basename(p))
    ax.set_xlabel("episode k")
    ax.set_ylabel(column)
    ax.legend(fontsize=7)
    fig.tight_layout()
    matplotlib.rcParams["svg.hashsalt"] = "corrl"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
