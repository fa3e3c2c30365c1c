"""Command-line pipeline: ingest, train, deploy, infer, and the helpers around them.

Exit codes: 0 success, 1 usage, 2 validation (bad config/spec/data),
3 runtime failure. Errors print one machine-readable JSON object on
stderr. The frame store root comes from --data-dir, then the
ANOML_DATA_DIR environment variable, then ./anoml_data.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from . import artifact as artifact_mod
from . import codegen as codegen_mod
from . import config as config_mod
from . import dataset as dataset_mod
from . import metrics as metrics_mod
from . import scenario as scenario_mod
from . import service as service_mod
from . import simnet, wire
from .detect import DetectorError, ae_fit, if_fit, ocsvm_fit
from .preprocess import DEFAULT_WINDOW_LEN, PreprocessError, TransformChain

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

DEFAULT_DATA_DIR = "anoml_data"


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _data_dir(args) -> Path:
    root = args.data_dir or os.environ.get("ANOML_DATA_DIR") or DEFAULT_DATA_DIR
    return Path(root)


def _frame_path(args, name: str) -> Path:
    return _data_dir(args) / "frames" / f"{name}.csv"


def _load_schema(path: str | None) -> dataset_mod.CsvSchema:
    if path is None:
        return dataset_mod.CsvSchema()
    return dataset_mod.CsvSchema.from_config(config_mod.load_config(path))


def _load_input_frame(args) -> dataset_mod.TimeSeriesFrame:
    if getattr(args, "frame", None):
        return dataset_mod.load_csv(_frame_path(args, args.frame))
    return dataset_mod.load_csv(args.infile, _load_schema(getattr(args, "schema", None)))


def _normal_only(frame: dataset_mod.TimeSeriesFrame) -> dataset_mod.TimeSeriesFrame:
    keep = frame.labels == dataset_mod.LABEL_NORMAL
    if not keep.any():
        raise ValidationFailure("no normal rows to train on")
    return dataset_mod.TimeSeriesFrame(
        timestamps=frame.timestamps[keep],
        features=frame.features[keep],
        feature_names=frame.feature_names,
        labels=frame.labels[keep],
    )


def _frame_from_lines(path: str) -> dataset_mod.TimeSeriesFrame:
    """Turn a newline-delimited wire stream into an (all-normal) frame.

    The distinct sensor ids, in order of first appearance, define the
    columns; consecutive full sweeps become rows stamped 1 s apart.
    """
    readings = []
    with open(path) as handle:
        for line in handle:
            line = line.strip()
            if line:
                readings.append(wire.decode_text(line))
    if not readings:
        raise ValidationFailure("stream contains no wire lines")
    columns: list[tuple[int, str]] = []
    for r in readings:
        key = (r.identity.sensor_id, r.sensor_type.code)
        if key not in columns:
            columns.append(key)
    width = len(columns)
    if len(readings) % width != 0:
        raise ValidationFailure(
            f"stream length {len(readings)} is not a whole number of {width}-sensor sweeps")
    rows = []
    for start in range(0, len(readings), width):
        sweep = readings[start:start + width]
        keys = [(r.identity.sensor_id, r.sensor_type.code) for r in sweep]
        if keys != columns:
            raise ValidationFailure(f"sweep starting at reading {start} is out of order")
        rows.append([float(r.value) for r in sweep])
    n = len(rows)
    return dataset_mod.TimeSeriesFrame(
        timestamps=np.arange(n, dtype=np.int64) * 1000,
        features=np.array(rows),
        feature_names=tuple(f"s{sid:03d}_{code}" for sid, code in columns),
        labels=np.zeros(n, dtype=np.int8),
    )


def cmd_ingest(args) -> int:
    if args.format == "csv":
        frame = dataset_mod.load_csv(args.infile, _load_schema(args.schema))
    else:
        frame = _frame_from_lines(args.infile)
    target = _frame_path(args, args.name)
    target.parent.mkdir(parents=True, exist_ok=True)
    if args.append and target.exists():
        existing = dataset_mod.load_csv(target)
        frame = dataset_mod.concat(existing, frame)
    dataset_mod.write_csv(frame, target)
    print(json.dumps({"frame": args.name, "rows": frame.n_rows,
                      "features": frame.n_features, "path": str(target)}))
    return EXIT_OK


def _fit_detector(args, X: np.ndarray):
    if args.detector == "if":
        model = if_fit(X, n_trees=args.n_trees, subsample_size=args.subsample, seed=args.seed)
        hyper = {"n_trees": args.n_trees, "subsample": args.subsample, "seed": args.seed}
    elif args.detector == "ocsvm":
        lr = args.lr if args.lr is not None else 0.1
        model = ocsvm_fit(X, nu=args.nu, kernel=args.kernel, rff_dim=args.rff_dim,
                          gamma=args.gamma, epochs=args.epochs, lr=lr, seed=args.seed)
        hyper = {"nu": args.nu, "kernel": args.kernel, "rff_dim": args.rff_dim,
                 "gamma": args.gamma, "epochs": args.epochs, "lr": lr, "seed": args.seed}
    elif args.detector == "ae":
        d = X.shape[1]
        hidden = args.hidden if args.hidden else max(2, d // 2)
        bottleneck = args.bottleneck if args.bottleneck else max(1, min(d - 1, d // 4))
        lr = args.lr if args.lr is not None else 0.05
        model = ae_fit(X, hidden_dim=hidden, bottleneck_dim=bottleneck,
                       epochs=args.epochs, lr=lr, seed=args.seed,
                       threshold_quantile=args.quantile)
        hyper = {"hidden": hidden, "bottleneck": bottleneck, "epochs": args.epochs,
                 "lr": lr, "seed": args.seed, "quantile": args.quantile}
    else:
        raise ValidationFailure(f"unknown detector {args.detector!r}")
    return model, hyper


def _train_on_frame(args, frame: dataset_mod.TimeSeriesFrame) -> Path:
    train_frame = _normal_only(frame)
    chain = TransformChain.from_token(args.sr, args.window_len).fit(train_frame)
    tensor = chain.apply(train_frame)
    X = tensor.flat()
    model, hyper = _fit_detector(args, X)
    fingerprint = hashlib.sha256(np.ascontiguousarray(X).tobytes()).hexdigest()[:16]
    metadata = {
        "detector": args.detector,
        "transform": chain.to_dict(),
        "train_fingerprint": fingerprint,
        "train_windows": tensor.n_windows,
        "hyperparams": hyper,
    }
    contamination = getattr(args, "contamination", None)
    if contamination is not None:
        # assumed train anomaly fraction; the decision threshold becomes
        # the matching upper quantile of the training scores
        if args.detector != "if":
            raise ValidationFailure("--contamination only applies to the if detector")
        if not 0.0 < contamination < 1.0:
            raise ValidationFailure("--contamination must be in (0, 1)")
        scores, _ = service_mod.score_batch(model, X)
        metadata["threshold_override"] = float(np.quantile(scores, 1.0 - contamination))
        hyper["contamination"] = contamination
    art = artifact_mod.package_model(model, metadata)
    artifact_mod.save_artifact(art, args.out)
    print(json.dumps({"artifact": str(args.out), "model_id": art.model_id,
                      "train_windows": tensor.n_windows,
                      "input_dim": X.shape[1]}))
    return Path(args.out)


def cmd_train(args) -> int:
    frame = _load_input_frame(args)
    _train_on_frame(args, frame)
    return EXIT_OK


def cmd_retrain(args) -> int:
    old = artifact_mod.read_artifact(args.model)
    meta = old.metadata
    hyper = meta.get("hyperparams", {})
    args.detector = meta["detector"]
    args.sr = meta["transform"]["sr"]
    args.window_len = int(meta["transform"]["window_len"])
    for key, value in hyper.items():
        setattr(args, key, value)
    frame = _load_input_frame(args)
    _train_on_frame(args, frame)
    return EXIT_OK


def cmd_deploy(args) -> int:
    art = artifact_mod.read_artifact(args.model)  # verifies checksum + version
    if args.serve:
        host, _, port = args.serve.partition(":")
        server = service_mod.serve(art, host or "127.0.0.1", int(port or 0))
        print(json.dumps({"serving": server.address, "model_id": art.model_id}))
        try:
            server.wait()
        except KeyboardInterrupt:
            server.stop()
        return EXIT_OK
    if args.to:
        Path(args.to).parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(args.model, args.to)
        print(json.dumps({"deployed": str(args.to), "model_id": art.model_id}))
        return EXIT_OK
    raise UsageError("deploy needs --serve HOST:PORT or --to PATH")


def cmd_infer(args) -> int:
    if bool(args.model) == bool(args.endpoint):
        raise UsageError("infer needs exactly one of --model or --endpoint")
    frame = dataset_mod.load_csv(args.infile, _load_schema(args.schema))
    if args.endpoint:
        import urllib.request
        with urllib.request.urlopen(args.endpoint.rstrip("/") + "/health") as resp:
            meta = json.loads(resp.read().decode())["metadata"]
        chain = TransformChain.from_dict(meta["transform"])
        tensor = chain.apply(frame)
        scores, labels = [], []
        for i in range(tensor.n_windows):
            answer = service_mod.infer(args.endpoint, tensor.data[i])
            scores.append(answer.score)
            labels.append(answer.label)
        scores = np.array(scores)
        predictions = np.array(labels, dtype=np.int8)
        detector = meta.get("detector", "")
        sr = meta["transform"]["sr"]
        size_kb = 0.0
        placement = "endpoint"
    else:
        art = artifact_mod.read_artifact(args.model)
        model, meta = artifact_mod.load_model(art.data)
        chain = TransformChain.from_dict(meta["transform"])
        tensor = chain.apply(frame)
        scores, predictions = service_mod.score_batch(
            model, tensor.flat(), meta.get("threshold_override"))
        detector = meta.get("detector", "")
        sr = meta["transform"]["sr"]
        size_kb = art.size_kb
        placement = "local"

    counts = metrics_mod.confusion(predictions, tensor.labels)
    try:
        auc_value = metrics_mod.auc(scores, tensor.labels)
    except metrics_mod.SingleClass:
        auc_value = 0.0
        print(json.dumps({"warning": "single-class truth; auc reported as 0.0"}),
              file=sys.stderr)
    report = metrics_mod.MetricReport(
        algorithm=detector, sr=sr, placement=placement,
        counts=counts, auc=auc_value, model_size_kb=size_kb,
    )
    if args.invert_positive:
        report = report.inverted()
    if args.out:
        Path(args.out).write_text(metrics_mod.reports_to_csv([report]))
    if args.predictions_out:
        with open(args.predictions_out, "w") as handle:
            handle.write("window,score,label\n")
            for i, (s, p) in enumerate(zip(scores, predictions)):
                handle.write(f"{i},{repr(float(s))},{int(p)}\n")
    print(json.dumps(report.to_json()))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.topology:
        cfg = config_mod.load_config(args.topology)
        topology = simnet.topology_from_config(cfg)
        try:
            workload = simnet.workload_from_config(cfg)
        except ValueError:
            workload = None
    else:
        topology = scenario_mod.default_chain_topology(
            edge_protocol=simnet.Protocol.from_token(args.protocol))
        workload = None
    if workload is None or args.packets is not None:
        count = args.packets if args.packets is not None else 1000
        if workload:  # --packets overrides the count, keeps the route
            src, dst = workload[0].source, workload[0].destination
        else:
            links = list(topology.links)
            if not links:
                raise ValidationFailure("topology has no links to exercise")
            src, dst = links[0]
        workload = simnet.uniform_workload(src, dst, count, interval_ms=args.interval_ms)
    trace = simnet.run(topology, workload, args.seed)
    stats = simnet.measure_latency(trace)
    if args.out:
        simnet.write_trace_csv(trace, args.out)
    print(json.dumps({
        "packets": len(workload),
        "mean_ms": stats.mean, "std_ms": stats.std,
        "min_ms": stats.min, "max_ms": stats.max,
        "delivered": stats.count,
    }))
    return EXIT_OK


def cmd_codegen(args) -> int:
    spec = codegen_mod.nodespec_from_config(config_mod.load_config(args.spec))
    violations = codegen_mod.validate_spec(spec)
    if violations:
        raise ValidationFailure(json.dumps(
            [{"code": v.code.value, "field": v.field, "detail": v.detail}
             for v in violations]))
    bundle = codegen_mod.generate(spec)
    manifest = codegen_mod.write_bundle(bundle, args.out)
    print(json.dumps({"out": str(args.out), "files": sorted(manifest["files"])}))
    return EXIT_OK


def cmd_report(args) -> int:
    frame = dataset_mod.load_csv(args.dataset, _load_schema(args.schema))
    art = artifact_mod.read_artifact(args.model)
    if args.scenario:
        base = scenario_mod.scenario_from_config(config_mod.load_config(args.scenario))
    else:
        base = scenario_mod.ScenarioConfig(
            placement=simnet.Tier.CLOUD,
            topology=scenario_mod.default_chain_topology(),
        )
    placements = [simnet.Tier(p.strip()) for p in args.placements.split(",")]
    reports = []
    for placement in placements:
        config = scenario_mod.ScenarioConfig(
            placement=placement,
            topology=base.topology,
            forward_policy=base.forward_policy,
            edge_node=base.edge_node,
            fog_node=base.fog_node,
            cloud_node=base.cloud_node,
            seed=base.seed,
        )
        result = scenario_mod.run_scenario(
            config, art, frame, seed=args.seed, realistic_edge=args.realistic_edge)
        report = result.report
        if args.invert_positive:
            report = report.inverted()
        reports.append(report)
    csv_text = metrics_mod.reports_to_csv(reports)
    if args.out:
        Path(args.out).write_text(csv_text)
    else:
        sys.stdout.write(csv_text)
    print(json.dumps({"placements": [p.value for p in placements],
                      "rows": frame.n_rows, "out": args.out}))
    return EXIT_OK


def _add_train_options(sub, retrain: bool = False):
    source = sub.add_mutually_exclusive_group(required=True)
    source.add_argument("--in", dest="infile", help="labeled CSV input")
    source.add_argument("--frame", help="named frame from the store")
    sub.add_argument("--schema", help="CSV schema config")
    sub.add_argument("--out", required=True, help="artifact output path")
    sub.add_argument("--data-dir")
    if retrain:
        return
    sub.add_argument("--sr", required=True,
                     help="scaling/reduction: mm ss ns average stdev skew kurtosis mad")
    sub.add_argument("--detector", required=True, choices=["if", "ocsvm", "ae"])
    sub.add_argument("--window-len", type=int, default=DEFAULT_WINDOW_LEN)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--n-trees", type=int, default=100)
    sub.add_argument("--subsample", type=int, default=256)
    sub.add_argument("--nu", type=float, default=0.1)
    sub.add_argument("--kernel", choices=["rff", "linear"], default="rff")
    sub.add_argument("--rff-dim", type=int, default=64)
    sub.add_argument("--gamma", type=float, default=None)
    sub.add_argument("--epochs", type=int, default=200)
    sub.add_argument("--lr", type=float, default=None)
    sub.add_argument("--hidden", type=int, default=0)
    sub.add_argument("--bottleneck", type=int, default=0)
    sub.add_argument("--quantile", type=float, default=0.99)
    sub.add_argument("--contamination", type=float, default=None,
                     help="assumed train anomaly fraction; overrides the "
                          "isolation forest's 0.5 decision threshold")


def build_parser() -> _Parser:
    parser = _Parser(prog="anoml", description=__doc__)
    commands = parser.add_subparsers(dest="command")

    p = commands.add_parser("ingest", help="CSV or wire-line stream into the frame store")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["csv", "lines"], default="csv")
    p.add_argument("--schema")
    p.add_argument("--name", required=True)
    p.add_argument("--append", action="store_true")
    p.add_argument("--data-dir")
    p.set_defaults(func=cmd_ingest)

    p = commands.add_parser("train", help="fit transform chain + detector, package artifact")
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = commands.add_parser("retrain", help="refit an artifact's recipe on fresh normal data")
    p.add_argument("--model", required=True, help="existing artifact to take the recipe from")
    _add_train_options(p, retrain=True)
    p.set_defaults(func=cmd_retrain)

    p = commands.add_parser("deploy", help="verify and place an artifact, or serve it over HTTP")
    p.add_argument("--model", required=True)
    p.add_argument("--serve", help="HOST:PORT to serve on")
    p.add_argument("--to", help="file target to copy the artifact to")
    p.set_defaults(func=cmd_deploy)

    p = commands.add_parser("infer", help="score a labeled CSV and emit a metrics row")
    p.add_argument("--model")
    p.add_argument("--endpoint", help="running service URL instead of a local artifact")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--schema")
    p.add_argument("--out", help="metrics CSV path")
    p.add_argument("--predictions-out", help="per-window score/label CSV")
    p.add_argument("--invert-positive", action="store_true")
    p.set_defaults(func=cmd_infer)

    p = commands.add_parser("simulate", help="run a packet workload over a topology")
    p.add_argument("--topology", help="topology/workload config")
    p.add_argument("--protocol", default="wifi", help="edge protocol for the default chain")
    p.add_argument("--packets", type=int, default=None)
    p.add_argument("--interval-ms", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="trace CSV path")
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser("codegen", help="generate an edge transmitter bundle from a node spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_codegen)

    p = commands.add_parser("report", help="run placement scenarios and emit the results table")
    p.add_argument("--dataset", required=True)
    p.add_argument("--schema")
    p.add_argument("--model", required=True)
    p.add_argument("--scenario", help="scenario config")
    p.add_argument("--placements", default="edge,fog,cloud")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realistic-edge", action="store_true")
    p.add_argument("--invert-positive", action="store_true")
    p.add_argument("--out", help="report CSV path")
    p.set_defaults(func=cmd_report)

    return parser


_VALIDATION_ERRORS = (
    ValidationFailure,
    config_mod.ConfigError,
    dataset_mod.DatasetError,
    codegen_mod.InvalidSpec,
    wire.WireError,
    simnet.InvalidTopology,
    simnet.UnsupportedPair,
    scenario_mod.PlacementUnsupported,
    artifact_mod.ArtifactError,
    PreprocessError,
    DetectorError,
    metrics_mod.MetricsError,
)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required (see --help)")
        return args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": "usage", "detail": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except _VALIDATION_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # runtime bucket: IO, network, arithmetic
        print(json.dumps({"error": type(exc).__name__, "detail": str(exc)}),
              file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
