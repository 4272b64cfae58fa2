"""Batch command-line entry points.

Subcommands: ``synth`` (write a seeded synthetic dataset), ``train``
(fit a model, write a checkpoint and loss table), ``score`` (apply a
checkpoint), ``active`` (run simulated-oracle active-learning
sessions), ``eval`` (compare run reports), ``serve`` (start the HTTP
triage service).

Config values may come from a flat ``key = value`` text file
(``--config``); command-line flags override file values. Every output
file echoes the effective configuration so runs are self-describing.
Exit codes: 0 success, 2 usage or invalid configuration, 3 data error,
4 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields, replace
from datetime import datetime, timezone
from pathlib import Path

from .active import STRATEGIES, SessionConfig, run_session
from .data import (
    DataError,
    SyntheticSpec,
    anomaly_ids,
    generate_synthetic,
    load_dataset_csv,
    load_labels,
    save_dataset_csv,
    save_labels,
    split_dataset,
    summarize,
)
from .model import ModelConfig, load_model, save_model, train_model
from .nnet import TrainingError
from .ranking import (
    RunReport,
    average_ranks,
    parse_report,
    write_report,
    write_series_csv,
)
from .similarity import METRICS

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


def read_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


_SESSION_KEYS = {f.name for f in fields(SessionConfig)}
_MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"input_dim"}
_SYNTH_KEYS = {f.name for f in fields(SyntheticSpec)}


def _apply_file_values(obj, values: dict[str, str], allowed: set[str]):
    """Overlay string config-file values onto a dataclass instance."""
    updates = {}
    type_by_name = {f.name: str(f.type) for f in fields(obj)}
    for key, raw in values.items():
        if key not in allowed or key not in type_by_name:
            continue
        if key == "hidden_layers":
            updates[key] = tuple(int(v) for v in raw.split(",") if v.strip())
            continue
        current = getattr(obj, key)
        if isinstance(current, bool):
            updates[key] = raw.lower() in ("1", "true", "yes")
        elif isinstance(current, int):
            updates[key] = int(raw)
        elif isinstance(current, float):
            updates[key] = float(raw)
        elif isinstance(current, str):
            updates[key] = raw
        else:  # default None: fall back to the annotation
            t = type_by_name[key]
            if "int" in t:
                updates[key] = int(raw)
            elif "float" in t:
                updates[key] = float(raw)
            else:
                updates[key] = raw
    return replace(obj, **updates) if updates else obj


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _echo_config(pairs: dict) -> str:
    return "\n".join(f"{k} = {pairs[k]}" for k in sorted(pairs))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_synth(args) -> int:
    values = read_config_file(args.config) if args.config else {}
    spec = SyntheticSpec()
    spec = _apply_file_values(spec, values, _SYNTH_KEYS)
    overrides = {}
    for name in ("n", "d", "anomaly_fraction", "n_clusters", "seed", "anomaly_mode"):
        v = getattr(args, name.replace("-", "_"), None)
        if v is not None:
            overrides[name] = v
    spec = replace(spec, **overrides)
    spec.validate()
    dataset, labels = generate_synthetic(spec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_dataset_csv(dataset, out / "dataset.csv")
    save_labels(labels, dataset.ids, out / "labels.csv")
    s = summarize(dataset, labels)
    print(f"wrote {out / 'dataset.csv'} and {out / 'labels.csv'}")
    print(
        f"rows={s['rows']} features={s['features']} anomalies={s['anomalies']} "
        f"({s['anomaly_pct']}%)"
    )
    return EXIT_OK


def _model_config_from(args, d: int, file_values: dict[str, str]) -> ModelConfig:
    cfg = ModelConfig(input_dim=d)
    cfg = _apply_file_values(cfg, file_values, _MODEL_KEYS)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if getattr(args, "epochs", None) is not None:
        updates["epochs"] = args.epochs
    if getattr(args, "latent_dim", None) is not None:
        updates["latent_dim"] = args.latent_dim
    if updates:
        cfg = replace(cfg, **updates)
    return cfg.resolve()


def cmd_train(args) -> int:
    dataset = load_dataset_csv(args.dataset)
    file_values = read_config_file(args.config) if args.config else {}
    cfg = _model_config_from(args, dataset.d, file_values)
    rows = dataset.to_array()
    if args.holdout_fraction:
        train_part, holdout_part = split_dataset(
            dataset, 1.0 - args.holdout_fraction, seed=cfg.seed
        )
        rows, eval_rows = train_part.to_array(), holdout_part.to_array()
    else:
        eval_rows = None
    model, history = train_model(rows, cfg, eval_rows=eval_rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.npz")
    with open(out / "losses.csv", "w", encoding="utf-8") as fh:
        fh.write(f"# winnow training losses\n# generated: {_now()}\n")
        fh.write("# " + _echo_config(vars(cfg)).replace("\n", "\n# ") + "\n")
        fh.write("epoch,train_mse,holdout_mse\n")
        for rec in history:
            holdout = f"{rec.holdout_mse:.10f}" if rec.holdout_mse is not None else ""
            fh.write(f"{rec.epoch},{rec.losses.recon_g:.10f},{holdout}\n")
    print(f"wrote {out / 'model.npz'} and {out / 'losses.csv'}")
    return EXIT_OK


def cmd_score(args) -> int:
    dataset = load_dataset_csv(args.dataset)
    model = load_model(args.model)
    scores = model.score_all(dataset.to_array())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("id,score\n")
        for rid, s in zip(dataset.ids, scores):
            fh.write(f"{rid},{s:.10f}\n")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_active(args) -> int:
    dataset = load_dataset_csv(args.dataset)
    labels = load_labels(args.labels, dataset, missing_as_normal=args.missing_as_normal)
    if not anomaly_ids(labels):
        raise DataError("label file contains no anomaly; ranking quality is undefined")
    file_values = read_config_file(args.config) if args.config else {}

    session_cfg = SessionConfig()
    session_cfg = _apply_file_values(session_cfg, file_values, _SESSION_KEYS)
    overrides = {}
    if args.strategy is not None:
        overrides["strategy"] = args.strategy
    if args.budget is not None:
        overrides["budget"] = args.budget
    if args.iterations is not None:
        overrides["iterations"] = args.iterations
    if args.percentile is not None:
        overrides["error_percentile"] = args.percentile
        overrides["sim_percentile"] = args.percentile
    if args.metric is not None:
        overrides["metric"] = args.metric
    if args.ndcg_at is not None:
        overrides["ndcg_cutoff"] = args.ndcg_at
    if args.seed is not None:
        overrides["seed"] = args.seed
    session_cfg = replace(session_cfg, **overrides)
    session_cfg.validate()

    model_cfg = _model_config_from(args, dataset.d, file_values)
    strategies = list(STRATEGIES) if args.all_strategies else [session_cfg.strategy]

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports: dict[str, RunReport] = {}
    for strategy in strategies:
        cfg = replace(session_cfg, strategy=strategy)
        journal = out / f"journal-{strategy}.jsonl"
        session = run_session(dataset, labels, cfg, model_cfg, journal_path=journal)
        report = session.report(dataset_name=str(args.dataset), generated_at=_now())
        write_report(report, out / f"report-{strategy}.txt")
        write_series_csv(report, out / f"series-{strategy}.csv")
        reports[strategy] = report
        stats = report.strategy_stats()[strategy]
        print(
            f"{strategy}: iterations={len(session.records) - 1} "
            f"max={stats['max']:.4f} median={stats['median']:.4f}"
        )
    if args.all_strategies:
        combined = RunReport(
            config=reports[strategies[0]].config,
            series={s: r.series[s] for s, r in reports.items()},
            dataset_fingerprint=dataset.fingerprint(),
            dataset_name=str(args.dataset),
            generated_at=_now(),
        )
        write_report(combined, out / "report-all.txt")
        write_series_csv(combined, out / "series-all.csv")
        core = {k: combined.series[k] for k in ("s1", "s2", "hybrid") if k in combined.series}
        triplet = RunReport(config={}, series=core).summary()
        print(
            f"summary: max_max={triplet['max_max']:.4f} "
            f"max_mean={triplet['max_mean']:.4f} max_median={triplet['max_median']:.4f}"
        )
    return EXIT_OK


def cmd_eval(args) -> int:
    reports = []
    for path in args.reports:
        reports.append((path, parse_report(Path(path).read_text(encoding="utf-8"))))
    by_dataset: dict[str, dict[str, float]] = {}
    fingerprints: dict[str, str] = {}
    for path, report in reports:
        name = report.dataset_name or path
        if report.dataset_fingerprint:
            seen = fingerprints.setdefault(name, report.dataset_fingerprint)
            if seen != report.dataset_fingerprint:
                raise DataError(
                    f"reports disagree on dataset {name!r}: differing content hashes"
                )
        for strategy, stats in report.strategy_stats().items():
            by_dataset.setdefault(name, {})[strategy] = stats["median"]

    print("dataset,strategy,median_ndcg,winner")
    table: dict[str, dict[str, float]] = {}
    for name, per_strategy in sorted(by_dataset.items()):
        winner = max(per_strategy, key=lambda s: per_strategy[s])
        for strategy, median in sorted(per_strategy.items()):
            flag = "*" if strategy == winner else ""
            print(f"{name},{strategy},{median:.6f},{flag}")
            table.setdefault(strategy, {})[name] = median
    methods = sorted(table)
    complete = all(set(table[m]) == set(by_dataset) for m in methods)
    if len(methods) > 1 and complete:
        print("strategy,average_rank")
        for method, rank in sorted(average_ranks(table).items(), key=lambda kv: kv[1]):
            print(f"{method},{rank:.4f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(state_dir=args.out)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="winnow",
        description="Anomaly triage for imbalanced binary tabular data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--anomaly-fraction", dest="anomaly_fraction", type=float)
    p.add_argument("--n-clusters", dest="n_clusters", type=int)
    p.add_argument("--anomaly-mode", dest="anomaly_mode",
                   choices=("cluster-shifted", "uniform-rare"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model on (presumed normal) rows")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--latent-dim", dest="latent_dim", type=int)
    p.add_argument("--holdout-fraction", dest="holdout_fraction", type=float, default=0.2)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score rows with a trained checkpoint")
    p.add_argument("--dataset", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("active", help="run active-learning sessions with a simulated oracle")
    p.add_argument("--dataset", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--strategy", choices=STRATEGIES)
    p.add_argument("--all-strategies", action="store_true")
    p.add_argument("--budget", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--percentile", type=float)
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--ndcg-at", dest="ndcg_at", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--latent-dim", dest="latent_dim", type=int)
    p.add_argument("--missing-as-normal", action="store_true",
                   help="treat dataset ids missing from the label file as normal")
    p.set_defaults(func=cmd_active)

    p = sub.add_parser("eval", help="compare run reports and rank strategies")
    p.add_argument("reports", nargs="+", help="report files from 'active'")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="start the interactive triage service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--out", help="state directory for journals and reports")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        print(f"unexpected failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
