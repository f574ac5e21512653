"""Synthetic ground-truth generation and sampling.

A random Erdos-Renyi DAG is equipped with per-node MLP mechanisms (one
tanh hidden layer of width 100). Observational samples add Gaussian noise
with sigma 0.5; a hard intervention on a variable replaces its mechanism
with N(0, sigma=0.1). Data can be standardized column-wise over all
regimes pooled.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .graphs import DiGraph, load_graph_csv, save_graph_csv, topological_order

__all__ = [
    "Dataset",
    "Mechanism",
    "Scm",
    "load_dataset",
    "random_dag",
    "random_mechanisms",
    "sample",
    "save_dataset",
    "standardize",
]

NOISE_SIGMA = 0.5
INTERVENTION_SIGMA = 0.1
MECHANISM_HIDDEN = 100


@dataclass
class Mechanism:
    """Mean function of one node: tanh MLP over its parents' values."""

    parents: tuple          # sorted parent indices
    w1: np.ndarray          # (n_parents, hidden)
    w2: np.ndarray          # (hidden,)

    def mean(self, parent_values: np.ndarray) -> np.ndarray:
        if not self.parents:
            return np.zeros(parent_values.shape[0])
        return np.tanh(parent_values @ self.w1) @ self.w2


@dataclass
class Scm:
    graph: DiGraph
    mechanisms: list
    noise_sigma: float = NOISE_SIGMA
    intervention_sigma: float = INTERVENTION_SIGMA


@dataclass
class Dataset:
    """n x d samples with per-row regime labels.

    interventions[k] is the target set of regime k; regime 0 is always
    observational (empty target set).
    """

    x: np.ndarray
    t: np.ndarray
    interventions: list
    standardized: bool = False
    constant_cols: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.intp)
        self.interventions = [frozenset(s) for s in self.interventions]
        if not self.interventions or self.interventions[0]:
            raise ValueError("interventions[0] must be the empty regime")
        if self.t.size and (self.t.min() < 0 or self.t.max() >= len(self.interventions)):
            raise ValueError("regime label outside the interventions list")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


def random_dag(d: int, s: float, seed: int) -> DiGraph:
    """Erdos-Renyi DAG: undirected edge probability s/(d-1), oriented by a
    uniformly random permutation (low rank -> high rank)."""
    if not 0 <= s <= d - 1:
        raise ValueError("s must lie in [0, d-1]")
    rng = np.random.default_rng(seed)
    p = s / (d - 1) if d > 1 else 0.0
    perm = rng.permutation(d)
    rank = np.empty(d, dtype=np.intp)
    rank[perm] = np.arange(d)
    edges = set()
    for i in range(d):
        for j in range(i + 1, d):
            if rng.random() < p:
                if rank[i] < rank[j]:
                    edges.add((i, j))
                else:
                    edges.add((j, i))
    return DiGraph(d, frozenset(edges))


def random_mechanisms(g: DiGraph, seed: int) -> Scm:
    """Draw per-node MLP mechanisms; root nodes get a constant zero mean."""
    rng = np.random.default_rng(seed)
    mechanisms = []
    for j in range(g.d):
        parents = tuple(sorted(g.parents(j)))
        p = len(parents)
        if p == 0:
            mechanisms.append(
                Mechanism(parents, np.zeros((0, MECHANISM_HIDDEN)),
                          np.zeros(MECHANISM_HIDDEN))
            )
            continue
        w1 = rng.normal(size=(p, MECHANISM_HIDDEN)) / np.sqrt(p)
        w2 = rng.normal(size=MECHANISM_HIDDEN) / np.sqrt(MECHANISM_HIDDEN)
        mechanisms.append(Mechanism(parents, w1, w2))
    return Scm(graph=g, mechanisms=mechanisms)


def _sample_regime(scm: Scm, n: int, target, rng) -> np.ndarray:
    d = scm.graph.d
    x = np.empty((n, d))
    for j in topological_order(scm.graph):
        if target is not None and j == target:
            x[:, j] = rng.normal(0.0, scm.intervention_sigma, size=n)
            continue
        mech = scm.mechanisms[j]
        mean = mech.mean(x[:, list(mech.parents)])
        x[:, j] = mean + rng.normal(0.0, scm.noise_sigma, size=n)
    return x


def sample(scm: Scm, n_obs: int, n_per_target: int, intervened, seed: int) -> Dataset:
    """Ancestral sampling: one observational block plus one block per
    intervened variable, each from an independently derived seed stream."""
    intervened = list(intervened)
    if any(not 0 <= v < scm.graph.d for v in intervened):
        raise ValueError("intervened targets out of range")
    streams = np.random.SeedSequence(seed).spawn(len(intervened) + 1)
    blocks = [_sample_regime(scm, n_obs, None, np.random.default_rng(streams[0]))]
    labels = [np.zeros(n_obs, dtype=np.intp)]
    for k, target in enumerate(intervened, start=1):
        blocks.append(
            _sample_regime(scm, n_per_target, target,
                           np.random.default_rng(streams[k]))
        )
        labels.append(np.full(n_per_target, k, dtype=np.intp))
    return Dataset(
        x=np.concatenate(blocks),
        t=np.concatenate(labels),
        interventions=[frozenset()] + [frozenset((v,)) for v in intervened],
    )


def standardize(data: Dataset) -> Dataset:
    """Center and scale each column to unit variance over all rows pooled.

    Constant columns are centered only and reported in constant_cols.
    """
    if data.n < 2:
        raise ValueError("standardize needs at least two rows")
    mean = data.x.mean(axis=0)
    std = data.x.std(axis=0)
    constant = [int(j) for j in np.nonzero(std < 1e-12)[0]]
    scale = std.copy()
    scale[std < 1e-12] = 1.0
    return Dataset(
        x=(data.x - mean) / scale,
        t=data.t.copy(),
        interventions=data.interventions,
        standardized=True,
        constant_cols=constant,
        meta=dict(data.meta),
    )


def save_dataset(data: Dataset, out_dir, truth: DiGraph | None = None) -> dict:
    """Write data.csv, meta.json, and (when given) truth.csv; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    data_path = os.path.join(out_dir, "data.csv")
    with open(data_path, "w") as fh:
        fh.write(",".join(f"x{j}" for j in range(data.d)) + ",regime\n")
        for row, label in zip(data.x, data.t):
            fh.write(",".join(format(v, ".17g") for v in row) + f",{label}\n")
    meta = {
        "d": data.d,
        "n": data.n,
        "interventions": [sorted(s) for s in data.interventions],
        "standardized": data.standardized,
        "constant_cols": data.constant_cols,
        "sim_params": data.meta,
    }
    meta_path = os.path.join(out_dir, "meta.json")
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths = {"data": data_path, "meta": meta_path}
    if truth is not None:
        truth_path = os.path.join(out_dir, "truth.csv")
        save_graph_csv(truth, truth_path)
        paths["truth"] = truth_path
    return paths


def load_dataset(data_path, meta_path) -> Dataset:
    with open(meta_path) as fh:
        meta = json.load(fh)
    rows, labels = [], []
    with open(data_path) as fh:
        header = fh.readline().strip().split(",")
        if header[-1] != "regime":
            raise ValueError("data.csv must end with a 'regime' column")
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            rows.append([float(v) for v in parts[:-1]])
            labels.append(int(parts[-1]))
    x = np.asarray(rows)
    if x.shape[1] != meta["d"]:
        raise ValueError("data.csv column count disagrees with meta.json")
    return Dataset(
        x=x,
        t=np.asarray(labels, dtype=np.intp),
        interventions=[frozenset(s) for s in meta["interventions"]],
        standardized=bool(meta.get("standardized", False)),
        constant_cols=list(meta.get("constant_cols", [])),
        meta=dict(meta.get("sim_params", {})),
    )


def load_truth(path, d: int | None = None) -> DiGraph:
    return load_graph_csv(path, d=d)
