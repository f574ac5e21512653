"""Two-stage constrained trainer.

Stage 1 fits the masked conditional-Gaussian model without the acyclicity
constraint and prunes low-weight adjacency entries. Stage 2 refits from a
fresh initialization with the pruned edges masked out, ramping the
spectral-constraint coefficient gamma linearly, freezing the ramp once the
thresholded adjacency is a DAG, and early-stopping on held-out
reconstruction loss. The final graph is the greedy acyclic trim of the
learned adjacency.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .constraints import h_spectral
from .graphs import DiGraph, dag_trim, is_acyclic, threshold
from .linalg import PowerIterState
from .model import (
    Gradients,
    ModelParams,
    PARAM_FIELDS,
    adjacency,
    gaussian_nll,
    init_params,
    loss_and_gradients,
)
from .oracle import spectral_radius_oracle

__all__ = [
    "AdamState",
    "NonFiniteLossError",
    "RunResult",
    "TrainConfig",
    "TrainLogRecord",
    "adam_step",
    "records_to_jsonl",
    "run_two_stage",
    "train_stage1",
    "train_stage2",
]


@dataclass
class TrainConfig:
    """Hyperparameters; the defaults are the reference desk-scale settings."""

    alpha1: float = 1e-2
    beta1: float = 2e-4
    eta1: float = 2e-3
    tau1: float = 0.2
    alpha2: float = 5e-4
    beta2: float = 5e-3
    eta2: float = 1e-3
    gamma_inc: float = 0.005
    tau2: float = 0.1
    epochs1: int = 2000
    epochs2: int = 2000
    batch_size: int = 256
    val_fraction: float = 0.2
    check_period: int = 20      # epochs between validation / DAG checks
    patience: int = 20          # checks without a new minimum; 0 disables
    power_iters: int = 15
    hidden: int = 10
    seed: int = 0
    warm_start_stage2: bool = False   # reuse stage-1 weights instead of reinit
    log_spectral_oracle: bool = False # also log the exact spectral radius

    @classmethod
    def from_dict(cls, overrides: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(overrides) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**overrides)

    def to_dict(self) -> dict:
        return asdict(self)


class NonFiniteLossError(RuntimeError):
    """Training loss went NaN/inf; carries the per-term breakdown."""

    def __init__(self, stage: int, epoch: int, terms: dict):
        self.stage = stage
        self.epoch = epoch
        self.terms = terms
        bad = [k for k, v in terms.items() if not np.isfinite(v)]
        super().__init__(
            f"non-finite loss in stage {stage}, epoch {epoch}; "
            f"offending terms: {bad or 'unknown'} ({terms})"
        )


@dataclass
class TrainLogRecord:
    stage: int
    epoch: int
    train_loss: float
    gamma: float
    frozen: bool
    val_recon_loss: float | None = None
    h_value: float | None = None
    h_oracle: float | None = None
    is_dag_at_tau2: bool | None = None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: Gradients
    v: Gradients
    step: int = 0

    @classmethod
    def zeros(cls, p: ModelParams) -> "AdamState":
        return cls(Gradients.zeros_like(p), Gradients.zeros_like(p))


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Weight of the uniform component mixed into the persisted power-iteration
# state each epoch. A pure warm start can trap the estimate: the state
# commits to the currently dominant cycle (and its mass elsewhere can even
# underflow to exactly zero, which a reducible nonnegative matrix never
# repopulates), so when dominance shifts to another cycle during training
# the 15-iteration estimate lags it badly. Blending in a uniform restart
# keeps every component reachable while the retained half still amortizes
# convergence; empirically this tracks the exact spectral radius with a few
# percent error where either extreme (no mixing, or full restarts) is worse.
WARM_RESTART_MIX = 0.5


def _remix_state(state: PowerIterState) -> PowerIterState:
    d = state.u.shape[0]
    u = state.u + WARM_RESTART_MIX / np.sqrt(d)
    v = state.v + WARM_RESTART_MIX / np.sqrt(d)
    return PowerIterState(u=u / np.linalg.norm(u), v=v / np.linalg.norm(v))


def adam_step(p: ModelParams, g: Gradients, s: AdamState, lr: float):
    """One Adam update (in place); masked weights stay exactly zero."""
    s.step += 1
    c1 = 1.0 - ADAM_BETA1**s.step
    c2 = 1.0 - ADAM_BETA2**s.step
    for name in PARAM_FIELDS:
        grad = getattr(g, name)
        m, v = getattr(s.m, name), getattr(s.v, name)
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * grad
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * grad**2
        getattr(p, name)[...] -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    p.W[~p.mask] = 0.0
    return p, s


def _split_indices(n: int, val_fraction: float, rng) -> tuple:
    perm = rng.permutation(n)
    n_val = int(round(val_fraction * n))
    return perm[n_val:], perm[:n_val]


def _iter_batches(indices: np.ndarray, batch_size: int, rng):
    order = rng.permutation(indices)
    for start in range(0, len(order), batch_size):
        batch = order[start : start + batch_size]
        if len(batch) >= 2:
            yield batch


class _EarlyStop:
    """Minimum-tracking early stopper over periodic validation checks."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.since_best = 0

    def reset(self):
        self.best = np.inf
        self.since_best = 0

    def check(self, value: float) -> bool:
        if value < self.best:
            self.best = value
            self.since_best = 0
        else:
            self.since_best += 1
        return self.patience > 0 and self.since_best >= self.patience


def _train_loop(
    data,
    cfg: TrainConfig,
    *,
    stage: int,
    mask: np.ndarray,
    alpha: float,
    beta: float,
    init_seed,
    shuffle_seed,
    split_seed,
    constrained: bool,
    params_init: ModelParams | None = None,
) -> tuple:
    if params_init is not None:
        params = params_init.copy()
        params.mask = mask.copy()
        params.W[~mask] = 0.0
    else:
        params = init_params(data.d, cfg.hidden, mask, init_seed)
    state = AdamState.zeros(params)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    train_idx, val_idx = _split_indices(
        data.n, cfg.val_fraction, np.random.default_rng(split_seed)
    )
    stopper = _EarlyStop(cfg.patience)
    epochs = cfg.epochs1 if stage == 1 else cfg.epochs2
    records = []

    gamma = 0.0
    frozen = False
    pi_state = PowerIterState.uniform(data.d)

    for epoch in range(1, epochs + 1):
        h_value = None
        h_oracle = None
        ce = None
        if constrained:
            a = adjacency(params)
            ce, pi_state = h_spectral(a, _remix_state(pi_state), cfg.power_iters)
            h_value = ce.value
            if cfg.log_spectral_oracle:
                h_oracle = spectral_radius_oracle(a)

        losses = []
        for batch in _iter_batches(train_idx, cfg.batch_size, shuffle_rng):
            loss, grads, terms = loss_and_gradients(
                params,
                data.x[batch],
                data.t[batch],
                data.interventions,
                alpha=alpha,
                beta=beta,
                gamma=gamma if constrained else 0.0,
                constraint_value=ce.value if ce is not None else 0.0,
                constraint_grad=ce.grad if ce is not None else None,
            )
            if not np.isfinite(loss):
                raise NonFiniteLossError(stage, epoch, terms)
            adam_step(params, grads, state, cfg.eta1 if stage == 1 else cfg.eta2)
            losses.append(loss)

        record = TrainLogRecord(
            stage=stage,
            epoch=epoch,
            train_loss=float(np.mean(losses)) if losses else float("nan"),
            gamma=gamma,
            frozen=frozen,
            h_value=h_value,
            h_oracle=h_oracle,
        )

        stop = False
        if epoch % cfg.check_period == 0:
            if constrained:
                is_dag = is_acyclic(threshold(adjacency(params), cfg.tau2))
                record.is_dag_at_tau2 = is_dag
                if is_dag:
                    frozen = True
                elif frozen:
                    frozen = False
                    stopper.reset()
                record.frozen = frozen
            if len(val_idx) > 0:
                val = gaussian_nll(
                    params, data.x[val_idx], data.t[val_idx], data.interventions
                )
                record.val_recon_loss = val
                if not constrained or frozen:
                    stop = stopper.check(val)

        if constrained and not frozen:
            gamma += cfg.gamma_inc

        records.append(record)
        if stop:
            break

    return params, records


def train_stage1(data, cfg: TrainConfig):
    """Unconstrained preselection fit; returns (params, removed, records).

    removed is the set of ordered pairs (i, j) whose learned adjacency
    weight fell below tau1.
    """
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    mask = ~np.eye(data.d, dtype=bool)
    params, records = _train_loop(
        data, cfg,
        stage=1, mask=mask,
        alpha=cfg.alpha1, beta=cfg.beta1,
        init_seed=seeds[0], shuffle_seed=seeds[1], split_seed=seeds[2],
        constrained=False,
    )
    a = adjacency(params)
    removed = {
        (i, j)
        for i in range(data.d)
        for j in range(data.d)
        if i != j and a[i, j] < cfg.tau1
    }
    return params, removed, records


def train_stage2(data, removed, cfg: TrainConfig, stage1_params=None):
    """Constrained fit with the removed edges masked; returns (params, records)."""
    for i, j in removed:
        if not (0 <= i < data.d and 0 <= j < data.d):
            raise ValueError(f"removed pair ({i},{j}) out of range")
    seeds = np.random.SeedSequence(cfg.seed).spawn(6)
    mask = ~np.eye(data.d, dtype=bool)
    for i, j in removed:
        mask[j, i] = False  # edge i -> j feeds target j from input i
    warm = stage1_params if (cfg.warm_start_stage2 and stage1_params) else None
    return _train_loop(
        data, cfg,
        stage=2, mask=mask,
        alpha=cfg.alpha2, beta=cfg.beta2,
        init_seed=seeds[3], shuffle_seed=seeds[4], split_seed=seeds[5],
        constrained=True,
        params_init=warm,
    )


@dataclass
class RunResult:
    graph: DiGraph
    adjacency: np.ndarray
    removed: set
    params: ModelParams
    records: list = field(default_factory=list)


def run_two_stage(data, cfg: TrainConfig) -> RunResult:
    """Full pipeline: stage 1, edge removal, stage 2, greedy acyclic trim."""
    params1, removed, records1 = train_stage1(data, cfg)
    params2, records2 = train_stage2(data, removed, cfg, stage1_params=params1)
    a = adjacency(params2)
    graph = dag_trim(a, cfg.tau2)
    return RunResult(
        graph=graph,
        adjacency=a,
        removed=removed,
        params=params2,
        records=records1 + records2,
    )


def records_to_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def load_records_jsonl(path) -> list:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(TrainLogRecord(**json.loads(line)))
    return records
