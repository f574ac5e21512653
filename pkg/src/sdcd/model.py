"""Masked conditional-Gaussian network.

Each variable j is predicted from the others through its own hidden state:
a masked linear layer plus sigmoid produces hid[j] (size h), which feeds
two linear heads for the conditional mean and (softplus) variance. The
input-layer weights induce a weighted adjacency A[i, j] = ||W[j, i, :]||_2.

Gradients of the full training loss (negative log-likelihood + L1 on the
adjacency + L2 on all parameters + a linearized constraint term) are
computed by hand-written reverse mode; no autodiff framework is involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Gradients",
    "ModelParams",
    "adjacency",
    "forward",
    "gaussian_nll",
    "init_params",
    "load_params",
    "loss_and_gradients",
    "save_params",
    "softplus",
    "softplus_inv",
]

CHECKPOINT_VERSION = 1

PARAM_FIELDS = ("W", "b1", "Wmu", "cmu", "Wvar", "cvar")


def softplus(x):
    # log(1 + e^x), stable for large |x|.
    return np.logaddexp(0.0, x)


def softplus_inv(y: float) -> float:
    return float(np.log(np.expm1(y)))


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class ModelParams:
    """All learnable weights plus the edge mask.

    W[j, i, m] is the weight from input variable i into hidden unit m of
    target j. mask[j, i] = True means input i may feed target j; masked
    positions of W are kept exactly zero by every operation.
    """

    d: int
    h: int
    W: np.ndarray      # (d, d, h)
    b1: np.ndarray     # (d, h)
    Wmu: np.ndarray    # (d, h)
    cmu: np.ndarray    # (d,)
    Wvar: np.ndarray   # (d, h)
    cvar: np.ndarray   # (d,)
    mask: np.ndarray   # (d, d) bool

    def copy(self) -> "ModelParams":
        return ModelParams(
            self.d, self.h,
            *(getattr(self, f).copy() for f in PARAM_FIELDS),
            self.mask.copy(),
        )

    def l2_norm_sq(self) -> float:
        return float(sum(np.sum(getattr(self, f) ** 2) for f in PARAM_FIELDS))


@dataclass
class Gradients:
    """Per-field gradients mirroring ModelParams; masked coordinates are 0."""

    W: np.ndarray
    b1: np.ndarray
    Wmu: np.ndarray
    cmu: np.ndarray
    Wvar: np.ndarray
    cvar: np.ndarray

    @classmethod
    def zeros_like(cls, p: ModelParams) -> "Gradients":
        return cls(*(np.zeros_like(getattr(p, f)) for f in PARAM_FIELDS))


def init_params(d: int, h: int, mask: np.ndarray, seed: int) -> ModelParams:
    """Gaussian init scaled by 1/sqrt(fan-in); initial predicted variance 1."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (d, d):
        raise ValueError(f"mask shape {mask.shape} != ({d}, {d})")
    if mask.diagonal().any():
        raise ValueError("mask diagonal must be False (no self-loops)")
    rng = np.random.default_rng(seed)
    fan_in = np.maximum(mask.sum(axis=1), 1)  # allowed inputs per target
    W = rng.normal(size=(d, d, h)) / np.sqrt(fan_in)[:, None, None]
    W[~mask] = 0.0
    Wmu = rng.normal(size=(d, h)) / np.sqrt(h)
    Wvar = rng.normal(size=(d, h)) / np.sqrt(h)
    return ModelParams(
        d=d, h=h, W=W,
        b1=np.zeros((d, h)),
        Wmu=Wmu, cmu=np.zeros(d),
        Wvar=Wvar, cvar=np.full(d, softplus_inv(1.0)),
        mask=mask,
    )


def _forward_parts(p: ModelParams, x: np.ndarray):
    # pre[n, j, m] = sum_i x[n, i] W[j, i, m] + b1[j, m]
    pre = np.tensordot(x, p.W, axes=([1], [1])) + p.b1
    hid = _sigmoid(pre)
    mu = np.einsum("njm,jm->nj", hid, p.Wmu) + p.cmu
    svar = np.einsum("njm,jm->nj", hid, p.Wvar) + p.cvar
    var = softplus(svar)
    return hid, svar, mu, var


def forward(p: ModelParams, x):
    """Conditional means and variances for a sample vector or batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if np.isnan(x).any():
        raise ValueError("forward requires NaN-free input")
    _, _, mu, var = _forward_parts(p, x)
    if single:
        return mu[0], var[0]
    return mu, var


_LOG_2PI = float(np.log(2.0 * np.pi))


def _keep_mask(d: int, regimes, interventions) -> np.ndarray:
    """keep[k, j] = 1 unless variable j is intervened in regime k."""
    regimes = np.asarray(regimes, dtype=np.intp)
    keep = np.ones((len(interventions), d))
    for k, targets in enumerate(interventions):
        for j in targets:
            keep[k, j] = 0.0
    if regimes.size and (regimes.min() < 0 or regimes.max() >= len(interventions)):
        raise ValueError("regime label outside the interventions list")
    return keep[regimes]


def gaussian_nll(p: ModelParams, x, regimes, interventions) -> float:
    """Mean negative log-likelihood, skipping intervened variables' terms."""
    x = np.asarray(x, dtype=np.float64)
    _, _, mu, var = _forward_parts(p, x)
    keep = _keep_mask(p.d, regimes, interventions)
    terms = 0.5 * (_LOG_2PI + np.log(var)) + (x - mu) ** 2 / (2.0 * var)
    return float(np.sum(terms * keep) / x.shape[0])


def adjacency(p: ModelParams) -> np.ndarray:
    """Induced weighted adjacency A[i, j] = ||W[j, i, :]||_2, zero diagonal."""
    a = np.sqrt(np.sum(p.W**2, axis=2)).T
    np.fill_diagonal(a, 0.0)
    return a


def loss_and_gradients(
    p: ModelParams,
    x,
    regimes,
    interventions,
    alpha: float = 0.0,
    beta: float = 0.0,
    gamma: float = 0.0,
    constraint_value: float = 0.0,
    constraint_grad: np.ndarray | None = None,
):
    """Training loss and exact reverse-mode gradients.

    loss = nll + alpha * sum_ij A[i, j] + beta * ||theta||_2^2
         + gamma * constraint_value

    The constraint couples into the weights through the group norms:
    d/dW[j, i, :] += (alpha + gamma * constraint_grad[i, j]) * W[j, i, :] / A[i, j]
    with subgradient 0 for exactly-zero groups. Returns
    (loss, Gradients, terms) where terms breaks the loss into components.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if x.shape[1] != p.d:
        raise ValueError(f"batch has {x.shape[1]} columns, expected {p.d}")
    if gamma != 0.0 and constraint_grad is None:
        raise ValueError("constraint_grad is required when gamma != 0")

    hid, svar, mu, var = _forward_parts(p, x)
    keep = _keep_mask(p.d, regimes, interventions)

    resid = x - mu
    nll = float(np.sum(keep * (0.5 * (_LOG_2PI + np.log(var))
                               + resid**2 / (2.0 * var))) / n)

    a = adjacency(p)
    l1 = float(np.sum(a))
    l2 = p.l2_norm_sq()
    terms = {
        "nll": nll,
        "l1": alpha * l1,
        "l2": beta * l2,
        "constraint": gamma * constraint_value,
    }
    loss = nll + terms["l1"] + terms["l2"] + terms["constraint"]

    # Reverse pass through the likelihood.
    dmu = keep * (-resid / var) / n
    dvar = keep * (0.5 / var - resid**2 / (2.0 * var**2)) / n
    dsvar = dvar * _sigmoid(svar)

    dhid = dmu[:, :, None] * p.Wmu[None] + dsvar[:, :, None] * p.Wvar[None]
    dpre = dhid * hid * (1.0 - hid)
    g = Gradients(
        W=np.einsum("njm,ni->jim", dpre, x),
        b1=dpre.sum(axis=0),
        Wmu=np.einsum("nj,njm->jm", dmu, hid),
        cmu=dmu.sum(axis=0),
        Wvar=np.einsum("nj,njm->jm", dsvar, hid),
        cvar=dsvar.sum(axis=0),
    )

    # Group-norm coupling of the L1 and constraint terms.
    coef = np.full((p.d, p.d), alpha)
    if gamma != 0.0:
        coef = coef + gamma * np.asarray(constraint_grad, dtype=np.float64)
    nonzero = a > 0.0
    scale = np.zeros_like(a)
    scale[nonzero] = coef[nonzero] / a[nonzero]
    # scale is indexed [i, j]; W is [target=j, input=i, m].
    g.W += scale.T[:, :, None] * p.W

    # L2 on every parameter.
    if beta != 0.0:
        for f in PARAM_FIELDS:
            arr = getattr(g, f)
            arr += 2.0 * beta * getattr(p, f)

    g.W[~p.mask] = 0.0
    return loss, g, terms


def save_params(p: ModelParams, path) -> None:
    """Checkpoint: one .npz with arrays plus a JSON header string."""
    header = json.dumps(
        {"version": CHECKPOINT_VERSION, "d": p.d, "h": p.h}, sort_keys=True
    )
    np.savez(
        path,
        header=np.array(header),
        mask=p.mask,
        **{f: getattr(p, f) for f in PARAM_FIELDS},
    )


def load_params(path) -> ModelParams:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version: {header}")
        return ModelParams(
            d=int(header["d"]),
            h=int(header["h"]),
            W=data["W"], b1=data["b1"],
            Wmu=data["Wmu"], cmu=data["cmu"],
            Wvar=data["Wvar"], cvar=data["cvar"],
            mask=data["mask"].astype(bool),
        )
