"""Command-line entry point.

The CLI is a thin client over the HTTP service: each subcommand builds a
request payload, posts it (in-process by default, or to --server), and
renders the response. Every run that produces files also writes a
manifest; `replay <manifest>` re-issues the recorded request and must
reproduce the output files byte-for-byte.

Exit codes: 0 ok, 2 usage, 3 validation, 4 non-finite training abort,
5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time

import httpx

from . import __version__

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NONFINITE = 4
EXIT_IO = 5

_ERROR_EXIT = {"validation": EXIT_VALIDATION, "nonfinite": EXIT_NONFINITE,
               "io": EXIT_IO}

log = logging.getLogger("sdcd")


def _configure_logging():
    level = os.environ.get("SDCD_LOG_LEVEL", "info").lower()
    numeric = {"error": logging.ERROR, "info": logging.INFO,
               "debug": logging.DEBUG}.get(level, logging.INFO)
    logging.basicConfig(level=numeric, format="%(levelname)s %(message)s")


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # In-process mode: drive the ASGI app through starlette's sync bridge.
    from starlette.testclient import TestClient

    from .service import app  # deferred: fastapi import is not free

    return TestClient(app, raise_server_exceptions=False)


def _post(client: httpx.Client, endpoint: str, payload: dict) -> dict:
    response = client.post(endpoint, json=payload)
    if response.status_code >= 400:
        try:
            body = response.json()
        except ValueError:
            body = {}
        if response.status_code == 422:
            kind, detail = "validation", body.get("detail", response.text)
        else:
            kind = body.get("error", "io")
            detail = body.get("detail", response.text)
        print(f"error ({kind}): {detail}", file=sys.stderr)
        sys.exit(_ERROR_EXIT.get(kind, EXIT_IO))
    return response.json()


def _write_manifest(path: str, command: str, payload: dict, status: str,
                    started: float, outputs=None) -> None:
    manifest = {
        "version": __version__,
        "command": command,
        "request": payload,
        "status": status,
        "started_at": started,
        "duration_s": None if status == "running" else time.time() - started,
        "outputs": outputs or [],
    }
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run_command(client, command: str, payload: dict,
                 manifest_path: str | None) -> dict:
    started = time.time()
    if manifest_path:
        _write_manifest(manifest_path, command, payload, "running", started)
    endpoint = {"simulate": "/simulate", "train": "/train", "eval": "/eval",
                "bench-constraints": "/bench-constraints"}[command]
    body = _post(client, endpoint, payload)
    if manifest_path:
        outputs = _collect_outputs(command, body, payload)
        _write_manifest(manifest_path, command, payload, "done", started, outputs)
    return body


def _collect_outputs(command: str, body: dict, payload: dict) -> list:
    if command == "simulate":
        return sorted(body.get("paths", {}).values())
    if command == "train":
        return [p for p in (body.get("graph_path"), body.get("log_path")) if p]
    if command == "bench-constraints":
        return [body["csv_path"]] if body.get("csv_path") else []
    if command == "eval":
        return [payload["_json_out"]] if payload.get("_json_out") else []
    return []


def cmd_simulate(args, client) -> int:
    payload = {
        "d": args.d, "s": args.s, "n_obs": args.n_obs,
        "n_per_target": args.n_per_target,
        "frac_intervened": args.frac_intervened,
        "seed": args.seed, "out_dir": args.out_dir,
        "standardize": not args.no_standardize,
    }
    manifest = os.path.join(args.out_dir, "manifest.json")
    body = _run_command(client, "simulate", payload, manifest)
    log.info("simulated %d rows, %d true edges -> %s",
             body["n_rows"], body["n_true_edges"], args.out_dir)
    print(json.dumps(body, sort_keys=True))
    return EXIT_OK


def _load_config_arg(raw: str | None) -> dict:
    if not raw:
        return {}
    if raw.lstrip().startswith("{"):
        return json.loads(raw)
    with open(raw) as fh:
        return json.load(fh)


def cmd_train(args, client) -> int:
    try:
        config = _load_config_arg(args.config)
    except FileNotFoundError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error (validation): bad config JSON: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    payload = {
        "data_path": args.data, "meta_path": args.meta,
        "graph_out": args.out, "log_out": args.log, "config": config,
    }
    manifest = args.out + ".manifest.json"
    body = _run_command(client, "train", payload, manifest)
    log.info("trained: %d edges (dag=%s), epochs %s",
             body["n_edges"], body["is_dag"], body["epochs_run"])
    print(json.dumps(body, sort_keys=True))
    return EXIT_OK


METRIC_NAMES = ("shd", "shd_cpdag", "precision", "recall", "f1")


def cmd_eval(args, client) -> int:
    payload = {"pred_path": args.pred, "true_path": args.true, "d": args.d}
    manifest = args.json + ".manifest.json" if args.json else None
    if manifest:
        payload["_json_out"] = args.json
    request = {k: v for k, v in payload.items() if not k.startswith("_")}
    started = time.time()
    if manifest:
        _write_manifest(manifest, "eval", payload, "running", started)
    body = _post(client, "/eval", request)
    wanted = [m.replace("-", "_") for m in (args.metrics or METRIC_NAMES)]
    unknown = [m for m in wanted if m not in body]
    if unknown:
        print(f"error (validation): unknown metrics {unknown}", file=sys.stderr)
        return EXIT_VALIDATION
    print(",".join(wanted))
    print(",".join(format(body[m], ".17g") if isinstance(body[m], float)
                   else str(body[m]) for m in wanted))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(body, fh, sort_keys=True)
            fh.write("\n")
    if manifest:
        _write_manifest(manifest, "eval", payload, "done", started,
                        [args.json] if args.json else [])
    return EXIT_OK


def cmd_bench(args, client) -> int:
    payload = {
        "constraints": args.constraints.split(","),
        "family": args.family,
        "d_list": [int(v) for v in args.d_list.split(",")],
        "scales": [float(v) for v in args.scale_list.split(",")],
        "seed": args.seed,
        "csv_out": args.out,
    }
    manifest = args.out + ".manifest.json" if args.out else None
    body = _run_command(client, "bench-constraints", payload, manifest)
    if not args.out:
        from .constraints import probe_rows_to_csv, ProbeRow

        rows = []
        for r in body["rows"]:
            value = r["value"]
            rows.append(ProbeRow(r["d"], r["constraint"], r["family"],
                                 r["scale"],
                                 float(value) if not isinstance(value, str)
                                 else float(value), r["status"]))
        sys.stdout.write(probe_rows_to_csv(rows))
    return EXIT_OK


def cmd_replay(args, client) -> int:
    try:
        with open(args.manifest) as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        print(f"error (io): {exc}", file=sys.stderr)
        return EXIT_IO
    command = manifest["command"]
    payload = dict(manifest["request"])
    if command == "eval":
        request = {k: v for k, v in payload.items() if not k.startswith("_")}
        body = _post(client, "/eval", request)
        if payload.get("_json_out"):
            with open(payload["_json_out"], "w") as fh:
                json.dump(body, fh, sort_keys=True)
                fh.write("\n")
        print(json.dumps(body, sort_keys=True))
        return EXIT_OK
    body = _run_command(client, command, payload, args.manifest)
    print(json.dumps(body, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sdcd", description="stable causal discovery toolkit"
    )
    parser.add_argument("--server", default=None,
                        help="base URL of a running service; default in-process")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--n-obs", type=int, default=10000)
    p.add_argument("--n-per-target", type=int, default=500)
    p.add_argument("--frac-intervened", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-standardize", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="run the two-stage trainer")
    p.add_argument("--data", required=True)
    p.add_argument("--meta", required=True)
    p.add_argument("--out", required=True, help="predicted graph CSV")
    p.add_argument("--log", default=None, help="JSONL training log")
    p.add_argument("--config", default=None,
                   help="JSON file (or inline JSON) overriding defaults")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="compare predicted vs true graph")
    p.add_argument("--pred", required=True)
    p.add_argument("--true", required=True)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--metrics", nargs="*", default=None,
                   choices=[m.replace("_", "-") for m in METRIC_NAMES]
                   + list(METRIC_NAMES))
    p.add_argument("--json", default=None, help="also write the report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench-constraints",
                       help="constraint stability probe table")
    p.add_argument("--constraints", required=True,
                   help="comma list: exp,log,inv,binom,spectral")
    p.add_argument("--family", choices=["cycle", "uniform"], default="cycle")
    p.add_argument("--d-list", required=True, help="comma list of dimensions")
    p.add_argument("--scale-list", default="0.5", help="comma list of scales")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    with _client(args.server) as client:
        return args.func(args, client)


if __name__ == "__main__":
    sys.exit(main())
