"""HTTP service exposing simulation, training, evaluation, and the
constraint stability benchmark.

Every endpoint is a thin adapter over the core modules: requests carry
file paths and configuration, responses carry summaries. Errors are
reported as a structured JSON body {"error": <kind>, "detail": ...} with
kind in {"validation", "nonfinite", "io"} so clients can map them to
exit codes.
"""

from __future__ import annotations

import math
import os

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .constraints import (
    ConstraintKind,
    CycleFamily,
    UniformFamily,
    probe_rows_to_csv,
    stability_probe,
)
from .graphs import is_acyclic, load_graph_csv, save_graph_csv
from .metrics import evaluate
from .simulate import (
    load_dataset,
    random_dag,
    random_mechanisms,
    sample,
    save_dataset,
    standardize,
)
from .training import (
    NonFiniteLossError,
    TrainConfig,
    records_to_jsonl,
    run_two_stage,
)


class ServiceError(Exception):
    def __init__(self, kind: str, detail: str, status: int = 400):
        self.kind = kind
        self.detail = detail
        self.status = status


app = FastAPI(title="sdcd", version=__version__)


@app.exception_handler(ServiceError)
async def _service_error(request: Request, exc: ServiceError):
    return JSONResponse(
        status_code=exc.status, content={"error": exc.kind, "detail": exc.detail}
    )


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


class SimulateRequest(BaseModel):
    d: int = Field(ge=1)
    s: float = Field(ge=0.0)
    n_obs: int = 10000
    n_per_target: int = 500
    frac_intervened: float = Field(default=0.0, ge=0.0, le=1.0)
    seed: int = 0
    out_dir: str
    standardize: bool = True


class SimulateResponse(BaseModel):
    paths: dict
    n_rows: int
    n_true_edges: int
    intervened: list


@app.post("/simulate", response_model=SimulateResponse)
def simulate_endpoint(req: SimulateRequest) -> SimulateResponse:
    if req.s > req.d - 1:
        raise ServiceError("validation", f"s={req.s} exceeds d-1={req.d - 1}")
    graph = random_dag(req.d, req.s, req.seed)
    scm = random_mechanisms(graph, req.seed + 1)
    n_int = math.ceil(req.frac_intervened * req.d)
    shuffle = np.random.default_rng(req.seed).permutation(req.d)
    intervened = [int(v) for v in shuffle[:n_int]]
    data = sample(scm, req.n_obs, req.n_per_target, intervened, req.seed + 2)
    if req.standardize:
        data = standardize(data)
    data.meta.update(
        {"d": req.d, "s": req.s, "seed": req.seed,
         "n_obs": req.n_obs, "n_per_target": req.n_per_target,
         "er_convention": "undirected edge prob s/(d-1); expected edges s*d/2"}
    )
    try:
        paths = save_dataset(data, req.out_dir, truth=graph)
    except OSError as exc:
        raise ServiceError("io", str(exc), status=500)
    return SimulateResponse(
        paths=paths, n_rows=data.n, n_true_edges=graph.n_edges,
        intervened=intervened,
    )


class TrainRequest(BaseModel):
    data_path: str
    meta_path: str
    graph_out: str
    log_out: str | None = None
    config: dict = Field(default_factory=dict)


class TrainResponse(BaseModel):
    graph_path: str
    log_path: str | None
    n_edges: int
    is_dag: bool
    n_removed_stage1: int
    epochs_run: dict


@app.post("/train", response_model=TrainResponse)
def train_endpoint(req: TrainRequest) -> TrainResponse:
    missing = [p for p in (req.data_path, req.meta_path) if not os.path.exists(p)]
    if missing:
        raise ServiceError("validation", f"input file(s) not found: {missing}")
    try:
        cfg = TrainConfig.from_dict(req.config)
    except (TypeError, ValueError) as exc:
        raise ServiceError("validation", str(exc))
    try:
        data = load_dataset(req.data_path, req.meta_path)
    except (ValueError, KeyError) as exc:
        raise ServiceError("validation", f"malformed dataset: {exc}")
    except OSError as exc:
        raise ServiceError("io", str(exc), status=500)
    try:
        result = run_two_stage(data, cfg)
    except NonFiniteLossError as exc:
        raise ServiceError("nonfinite", str(exc), status=500)
    try:
        save_graph_csv(result.graph, req.graph_out)
        if req.log_out:
            records_to_jsonl(result.records, req.log_out)
    except OSError as exc:
        raise ServiceError("io", str(exc), status=500)
    epochs = {
        "stage1": max((r.epoch for r in result.records if r.stage == 1), default=0),
        "stage2": max((r.epoch for r in result.records if r.stage == 2), default=0),
    }
    return TrainResponse(
        graph_path=req.graph_out,
        log_path=req.log_out,
        n_edges=result.graph.n_edges,
        is_dag=is_acyclic(result.graph),
        n_removed_stage1=len(result.removed),
        epochs_run=epochs,
    )


class EvalRequest(BaseModel):
    pred_path: str
    true_path: str
    d: int | None = None


class EvalResponse(BaseModel):
    shd: int
    shd_cpdag: int
    precision: float
    recall: float
    f1: float
    n_pred_edges: int
    n_true_edges: int


@app.post("/eval", response_model=EvalResponse)
def eval_endpoint(req: EvalRequest) -> EvalResponse:
    try:
        pred = load_graph_csv(req.pred_path, d=req.d)
        truth = load_graph_csv(req.true_path, d=req.d)
    except FileNotFoundError as exc:
        raise ServiceError("io", str(exc), status=404)
    except ValueError as exc:
        raise ServiceError("validation", str(exc))
    if req.d is None:
        # Edge lists do not carry d; align the two graphs on the larger one.
        d = max(pred.d, truth.d)
        pred = type(pred)(d, pred.edges)
        truth = type(truth)(d, truth.edges)
    try:
        report = evaluate(pred, truth)
    except ValueError as exc:
        raise ServiceError("validation", str(exc))
    return EvalResponse(**report.__dict__)


class BenchRequest(BaseModel):
    constraints: list[str]
    family: str = "cycle"
    d_list: list[int]
    scales: list[float] = Field(default_factory=lambda: [0.5])
    seed: int = 0
    csv_out: str | None = None


class BenchResponse(BaseModel):
    rows: list[dict]
    csv_path: str | None


@app.post("/bench-constraints", response_model=BenchResponse)
def bench_endpoint(req: BenchRequest) -> BenchResponse:
    try:
        kinds = [ConstraintKind(name) for name in req.constraints]
    except ValueError as exc:
        raise ServiceError("validation", f"unknown constraint: {exc}")
    if req.family not in ("cycle", "uniform"):
        raise ServiceError("validation", f"unknown family: {req.family!r}")
    rows = []
    for scale in req.scales:
        if req.family == "cycle":
            family = CycleFamily(w=scale)
        else:
            family = UniformFamily(eps=scale, seed=req.seed)
        for kind in kinds:
            rows.extend(stability_probe(kind, family, req.d_list))
    csv_path = None
    if req.csv_out:
        try:
            with open(req.csv_out, "w") as fh:
                fh.write(probe_rows_to_csv(rows))
        except OSError as exc:
            raise ServiceError("io", str(exc), status=500)
        csv_path = req.csv_out
    payload = []
    for r in rows:
        row = dict(r.__dict__)
        if not math.isfinite(row["value"]):
            # JSON has no NaN/inf; keep the magnitude readable as a string.
            row["value"] = repr(row["value"])
        payload.append(row)
    return BenchResponse(rows=payload, csv_path=csv_path)
