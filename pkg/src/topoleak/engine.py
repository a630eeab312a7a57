"""The federation protocol: local training, then neighbor averaging, per round.

Loop convention (fixed, matching the closed form below): starting from
per-node initial params M_0, each round t = 1..T does

    M_t     = M~_{t-1} + delta_t      (local training, optional DP on delta)
    M~_t    = P . M_t                 (neighbor aggregation)

so the attacker-visible post-aggregation snapshot satisfies

    M~_T = P^T M_0 + sum_{t=1..T} P^{T-t+1} delta_t.

All randomness (per-node init, per-round shuffles, DP noise, holdout splits)
derives from one root seed through keyed streams, so a log is reproducible
bit-exactly and independent of execution order.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import Dataset, PartitionPlan, dump_csv, load_csv, split_train_holdout
from .errors import InvalidConfig, InvalidTrace
from .nn import (
    MlpArchitecture,
    ModelParams,
    TrainConfig,
    dump_params,
    init_params,
    load_params,
    train_local,
)
from .seeds import derive_seed, rng_for
from .topology import Topology, adjacency_matrix, aggregation_matrix, dump_topology, load_topology


@dataclass(frozen=True)
class DpConfig:
    """Update perturbation: L2 clip then per-coordinate Gaussian noise."""

    clip_norm: float
    noise_sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.clip_norm <= 0:
            raise InvalidConfig(f"clip_norm must be positive, got {self.clip_norm}")
        if self.noise_sigma < 0:
            raise InvalidConfig(f"noise_sigma must be >= 0, got {self.noise_sigma}")


@dataclass(frozen=True)
class FederationConfig:
    topology: Topology
    train: TrainConfig
    rounds: int | None = None  # default: one round per node
    dp: DpConfig | None = None
    hidden_sizes: tuple[int, ...] = (32, 16)
    activation: str = "relu"

    def __post_init__(self):
        if self.rounds is not None and self.rounds < 1:
            raise InvalidConfig(f"rounds must be >= 1, got {self.rounds}")
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))

    @property
    def n_rounds(self) -> int:
        return self.rounds if self.rounds is not None else self.topology.n_nodes


@dataclass(frozen=True)
class RoundTrace:
    round: int
    params_pre_agg: tuple[ModelParams, ...]
    params_post_agg: tuple[ModelParams, ...]
    deltas: tuple[np.ndarray, ...]
    delta_norms: tuple[float, ...]


@dataclass(frozen=True)
class SimulationLog:
    config: FederationConfig
    root_seed: int
    dataset: Dataset
    plan: PartitionPlan
    initial_params: tuple[ModelParams, ...]
    traces: tuple[RoundTrace, ...]
    adjacency: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.initial_params)

    def node_dataset(self, i: int) -> Dataset:
        """Node i's full local set (what an attacker with data access sees)."""
        return self.dataset.subset(self.plan.assignments[i])

    def node_train_indices(self, i: int) -> tuple[int, ...]:
        train, _ = split_train_holdout(
            self.plan.assignments[i], derive_seed(self.root_seed, "split", i)
        )
        return train


def apply_dp(delta: np.ndarray, clip_norm: float, noise_sigma: float, rng) -> np.ndarray:
    """Scale delta to L2 norm <= clip_norm, add N(0, (sigma*clip)^2) noise."""
    if clip_norm <= 0:
        raise InvalidConfig(f"clip_norm must be positive, got {clip_norm}")
    if noise_sigma < 0:
        raise InvalidConfig(f"noise_sigma must be >= 0, got {noise_sigma}")
    d = np.asarray(delta, dtype=np.float64)
    norm = float(np.linalg.norm(d))
    if norm > clip_norm:
        d = d * (clip_norm / norm)
    if noise_sigma > 0:
        d = d + rng.normal(0.0, noise_sigma * clip_norm, size=d.shape)
    return d


def consensus_gap(params) -> float:
    """Max over node pairs of the L2 distance between parameter vectors."""
    if len(params) < 2:
        raise InvalidConfig("consensus gap needs at least 2 nodes")
    flats = np.stack([p.flat if isinstance(p, ModelParams) else np.asarray(p) for p in params])
    gap = 0.0
    for i in range(len(flats)):
        for j in range(i + 1, len(flats)):
            gap = max(gap, float(np.linalg.norm(flats[i] - flats[j])))
    return gap


def run_simulation(
    cfg: FederationConfig, dataset: Dataset, plan: PartitionPlan, seed: int
) -> SimulationLog:
    """Execute T rounds of train-then-aggregate over the configured topology.

    Each node trains on the 80% train side of its local split; per-call
    training seeds are derived from (seed, node, round), so cfg.train.seed
    is ignored here.
    """
    n = cfg.topology.n_nodes
    if plan.n_nodes != n:
        raise InvalidConfig(f"partition has {plan.n_nodes} nodes, topology has {n}")
    if any(len(a) == 0 for a in plan.assignments):
        raise InvalidConfig("every node needs a nonempty local dataset")

    arch = MlpArchitecture(
        (dataset.n_features, *cfg.hidden_sizes, dataset.n_classes), cfg.activation
    )
    adjacency = adjacency_matrix(cfg.topology)
    p_matrix = aggregation_matrix(adjacency)

    train_sets = []
    for i in range(n):
        idx, _ = split_train_holdout(plan.assignments[i], derive_seed(seed, "split", i))
        train_sets.append((dataset.features[list(idx)], dataset.labels[list(idx)]))

    initial = tuple(init_params(arch, derive_seed(seed, "init", i)) for i in range(n))
    current = np.stack([p.flat for p in initial])

    traces = []
    for t in range(1, cfg.n_rounds + 1):
        deltas = []
        for i in range(n):
            node_cfg = replace(cfg.train, seed=derive_seed(seed, "train", i, t))
            xs, ys = train_sets[i]
            _, delta = train_local(ModelParams(arch, current[i]), xs, ys, node_cfg)
            if cfg.dp is not None:
                delta = apply_dp(
                    delta,
                    cfg.dp.clip_norm,
                    cfg.dp.noise_sigma,
                    rng_for(cfg.dp.seed, "dp", i, t),
                )
            deltas.append(delta)
        pre = current + np.stack(deltas)
        post = p_matrix @ pre
        traces.append(
            RoundTrace(
                round=t,
                params_pre_agg=tuple(ModelParams(arch, row) for row in pre),
                params_post_agg=tuple(ModelParams(arch, row) for row in post),
                deltas=tuple(d.copy() for d in deltas),
                delta_norms=tuple(float(np.linalg.norm(d)) for d in deltas),
            )
        )
        current = post

    return SimulationLog(
        config=cfg,
        root_seed=seed,
        dataset=dataset,
        plan=plan,
        initial_params=initial,
        traces=tuple(traces),
        adjacency=adjacency,
    )


def closed_form_final(p_matrix: np.ndarray, m0: np.ndarray, deltas) -> np.ndarray:
    """Evaluate M~_T = P^T M_0 + sum_t P^(T-t+1) delta_t with matrix powers.

    m0 and each delta are (n_nodes, n_params) matrices, deltas ordered
    t = 1..T.  Independent of the iterative loop by construction.
    """
    m0 = np.asarray(m0, dtype=np.float64)
    deltas = [np.asarray(d, dtype=np.float64) for d in deltas]
    for d in deltas:
        if d.shape != m0.shape:
            raise InvalidTrace(f"delta shape {d.shape} != params shape {m0.shape}")
    t_total = len(deltas)
    out = np.linalg.matrix_power(p_matrix, t_total) @ m0
    for t, delta in enumerate(deltas, start=1):
        out = out + np.linalg.matrix_power(p_matrix, t_total - t + 1) @ delta
    return out


# --- log persistence --------------------------------------------------------

def save_log(log: SimulationLog, out_dir) -> None:
    """Persist a log as a directory of plain-text docs and binary snapshots."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)

    cfg = configparser.ConfigParser()
    fed = {
        "seed": str(log.root_seed),
        "rounds": str(log.config.n_rounds),
        "hidden_sizes": ",".join(str(h) for h in log.config.hidden_sizes),
        "activation": log.config.activation,
    }
    if log.plan.alpha is not None:
        fed["alpha"] = repr(float(log.plan.alpha))
    cfg["federation"] = fed
    cfg["train"] = {
        "local_epochs": str(log.config.train.local_epochs),
        "learning_rate": repr(log.config.train.learning_rate),
        "batch_size": str(log.config.train.batch_size),
        "optimizer": log.config.train.optimizer,
    }
    if log.config.dp is not None:
        cfg["dp"] = {
            "clip_norm": repr(log.config.dp.clip_norm),
            "noise_sigma": repr(log.config.dp.noise_sigma),
            "seed": str(log.config.dp.seed),
        }
    with open(root / "config.ini", "w") as fh:
        cfg.write(fh)

    (root / "topology.edges").write_text(dump_topology(log.config.topology))
    (root / "dataset.csv").write_text(dump_csv(log.dataset))
    (root / "partition.txt").write_text(
        "\n".join(" ".join(str(i) for i in a) for a in log.plan.assignments) + "\n"
    )

    init_dir = root / "init"
    init_dir.mkdir(exist_ok=True)
    for i, p in enumerate(log.initial_params):
        (init_dir / f"node_{i:03d}.bin").write_bytes(dump_params(p))

    for trace in log.traces:
        for phase in ("pre", "post"):
            d = root / "rounds" / f"round_{trace.round:03d}" / phase
            d.mkdir(parents=True, exist_ok=True)
            models = trace.params_pre_agg if phase == "pre" else trace.params_post_agg
            for i, p in enumerate(models):
                (d / f"node_{i:03d}.bin").write_bytes(dump_params(p))

    manifest = [f"nodes {log.n_nodes}", f"rounds {log.config.n_rounds}"]
    manifest += [f"round {t.round}" for t in log.traces]
    (root / "manifest.txt").write_text("\n".join(manifest) + "\n")


def load_log(log_dir) -> SimulationLog:
    root = Path(log_dir)
    if not (root / "manifest.txt").exists():
        raise InvalidTrace(f"no manifest in {root}")

    cfg = configparser.ConfigParser()
    cfg.read(root / "config.ini")
    fed = cfg["federation"]
    seed = int(fed["seed"])
    rounds = int(fed["rounds"])
    hidden = tuple(int(h) for h in fed["hidden_sizes"].split(","))
    alpha = float(fed["alpha"]) if "alpha" in fed else None
    train = TrainConfig(
        local_epochs=int(cfg["train"]["local_epochs"]),
        learning_rate=float(cfg["train"]["learning_rate"]),
        batch_size=int(cfg["train"]["batch_size"]),
        optimizer=cfg["train"]["optimizer"],
    )
    dp = None
    if "dp" in cfg:
        dp = DpConfig(
            clip_norm=float(cfg["dp"]["clip_norm"]),
            noise_sigma=float(cfg["dp"]["noise_sigma"]),
            seed=int(cfg["dp"]["seed"]),
        )

    topology = load_topology((root / "topology.edges").read_text())
    dataset = load_csv((root / "dataset.csv").read_text())
    assignments = tuple(
        tuple(int(i) for i in line.split())
        for line in (root / "partition.txt").read_text().splitlines()
        if line.strip()
    )
    plan = PartitionPlan(assignments, alpha=alpha)
    fc = FederationConfig(
        topology=topology,
        train=train,
        rounds=rounds,
        dp=dp,
        hidden_sizes=hidden,
        activation=fed["activation"],
    )

    n = topology.n_nodes
    initial = tuple(
        load_params((root / "init" / f"node_{i:03d}.bin").read_bytes()) for i in range(n)
    )
    prev_post = np.stack([p.flat for p in initial])
    traces = []
    for t in range(1, rounds + 1):
        rd = root / "rounds" / f"round_{t:03d}"
        pre = tuple(load_params((rd / "pre" / f"node_{i:03d}.bin").read_bytes()) for i in range(n))
        post = tuple(load_params((rd / "post" / f"node_{i:03d}.bin").read_bytes()) for i in range(n))
        pre_flat = np.stack([p.flat for p in pre])
        deltas = pre_flat - prev_post
        traces.append(
            RoundTrace(
                round=t,
                params_pre_agg=pre,
                params_post_agg=post,
                deltas=tuple(deltas[i] for i in range(n)),
                delta_norms=tuple(float(np.linalg.norm(deltas[i])) for i in range(n)),
            )
        )
        prev_post = np.stack([p.flat for p in post])

    if len(traces) != rounds:
        raise InvalidTrace(f"manifest promises {rounds} rounds, found {len(traces)}")

    return SimulationLog(
        config=fc,
        root_seed=seed,
        dataset=dataset,
        plan=plan,
        initial_params=initial,
        traces=tuple(traces),
        adjacency=adjacency_matrix(topology),
    )
