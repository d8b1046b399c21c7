"""Command-line orchestration.

Every subcommand resolves its options from (CLI flags) > (--config
key=value file) > (built-in defaults), writes the resolved configuration
beside its outputs, and takes a single-writer lock on its run directory.
Exit codes: 0 ok, 2 config error, 3 acceptance/threshold failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .armodel import ARConfig, ARModel, default_max_new, encode_chain
from .checks import run_all as run_gradchecks
from .config import (
    FINETUNE_COLUMNS,
    TRAIN_COLUMNS,
    ConfigError,
    RunLock,
    apply_thread_cap,
    parse_kv_file,
    write_resolved_config,
)
from .corpus.io import Dataset, FormatError, build_dataset, dataset_read, dataset_write
from .corpus.rng import NS_RELAY, NS_TEST, NS_TRAIN
from .corpus.samples import Sample, TaskKind, problem_length
from .evalkit import ARAdapter, EvalReport, LoopedAdapter, bit_accuracy, emit_report, final_accuracy, hit_matrix, split_by_length
from .looped import LoopedConfig, LoopedModel
from .nn.checkpoint import CheckpointError
from .pipeline import (
    FULL_MIXING_PLANS,
    FULL_PHASE_SCHEDULE,
    MergeError,
    finetune,
    merge,
    read_mixing_plan,
    read_phase_schedule,
    relay_generate,
    self_generate_baseline,
    write_manifest,
)
from .training import Trainer, TrainingDiverged, load_model, save_model

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ACCEPT = 3
EXIT_IO = 4


class MissingInputError(FileNotFoundError):
    """An input artifact is absent; the message names its producer."""


def _require_file(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingInputError(f"{path} not found; produce it with `relay-lab {producer}`")
    return path


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_counts(text: str) -> dict[int, int]:
    """"16=600,17=540" -> {16: 600, 17: 540}"""
    out: dict[int, int] = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, value = part.split("=", 1)
        out[int(key)] = int(value)
    if not out:
        raise ValueError(f"no counts parsed from {text!r}")
    return out


def _parse_task_map(text: str) -> dict[str, int]:
    """"ARI=8,ED=10" -> {"ARI": 8, "ED": 10}"""
    out: dict[str, int] = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, value = part.split("=", 1)
        out[TaskKind.from_name(key).value] = int(value)
    return out


def _resolve(args: argparse.Namespace, spec: dict[str, tuple], parser_name: str) -> dict:
    """CLI > config file > default; rejects unknown config keys."""
    config: dict[str, str] = {}
    if getattr(args, "config", None):
        config = parse_kv_file(args.config)
        unknown = set(config) - set(spec)
        if unknown:
            raise ConfigError(
                f"unknown config keys for {parser_name}: {', '.join(sorted(unknown))}"
            )
    resolved = {}
    for name, (convert, default) in spec.items():
        cli_value = getattr(args, name, None)
        if cli_value is not None:
            resolved[name] = cli_value
        elif name in config:
            resolved[name] = convert(config[name])
        else:
            resolved[name] = default
    return resolved


def _histogram(count: int, min_len: int, max_len: int, dist: str) -> dict[int, int]:
    lengths = list(range(min_len, max_len + 1))
    if dist == "uniform":
        weights = [1.0] * len(lengths)
    elif dist == "proportional":
        weights = [float(l) for l in lengths]
    else:
        raise ConfigError(f"unknown distribution {dist!r}")
    total_w = sum(weights)
    raw = [count * w / total_w for w in weights]
    histogram = {l: int(r) for l, r in zip(lengths, raw)}
    remainder = count - sum(histogram.values())
    by_frac = sorted(lengths, key=lambda l: (-(raw[lengths.index(l)] % 1.0), l))
    for l in by_frac[:remainder]:
        histogram[l] += 1
    return {l: c for l, c in histogram.items() if c > 0}


def _load_datasets(paths: list[str], strict: bool, producer: str) -> list[Dataset]:
    return [dataset_read(_require_file(Path(p), producer), strict=strict) for p in paths]


def _all_samples(datasets: list[Dataset]) -> list[Sample]:
    return [s for ds in datasets for s in ds.samples]


# --------------------------------------------------------------------------
# subcommands


def cmd_gen_data(args: argparse.Namespace) -> int:
    spec = {
        "task": (str, None),
        "count": (int, None),
        "seed": (int, 0),
        "out": (str, None),
        "min_complexity": (int, 1),
        "max_complexity": (int, None),
        "dist": (str, "proportional"),
        "namespace": (str, "train"),
    }
    opts = _resolve(args, spec, "gen-data")
    for required in ("task", "count", "out", "max_complexity"):
        if opts[required] is None:
            raise ConfigError(f"gen-data: missing required option --{required.replace('_', '-')}")
    task = TaskKind.from_name(opts["task"])
    namespace = {"train": NS_TRAIN, "test": NS_TEST, "relay": NS_RELAY}.get(opts["namespace"])
    if namespace is None:
        raise ConfigError(f"unknown namespace {opts['namespace']!r}")
    histogram = _histogram(opts["count"], opts["min_complexity"], opts["max_complexity"], opts["dist"])
    dataset = build_dataset(task, histogram, opts["seed"], namespace)
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset_write(dataset, out)
    write_resolved_config(opts, out.with_suffix(out.suffix + ".config"))
    print(f"wrote {len(dataset)} samples to {out}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace) -> int:
    spec = {
        "model": (str, None),
        "out": (str, None),
        "scale": (float, 10.0),
        "seed": (int, 0),
        "hidden": (int, 256),
        "layers": (int, 3),
        "heads": (int, 4),
        "dropout": (float, 0.1),
        "epochs": (int, None),
        "batch_size": (int, None),
        "lr": (float, None),
        "amp": (_parse_bool, False),
        "early_stop": (float, None),
        "max_seq_len": (int, 2048),
        "lenient": (_parse_bool, False),
        "micro_token_budget": (int, 250_000),
    }
    opts = _resolve(args, spec, "train")
    for required in ("model", "out"):
        if opts[required] is None:
            raise ConfigError(f"train: missing required option --{required}")
    if opts["model"] not in TRAIN_COLUMNS:
        raise ConfigError(f"unknown model column {opts['model']!r}; choose from {sorted(TRAIN_COLUMNS)}")
    if not args.data:
        raise ConfigError("train: at least one --data file is required")
    column = TRAIN_COLUMNS[opts["model"]]
    hyper = column.hyper(divisor=opts["scale"], seed=opts["seed"])
    if opts["epochs"] is not None:
        hyper.epochs = opts["epochs"]
    if opts["batch_size"] is not None:
        hyper.batch_size = opts["batch_size"]
    if opts["lr"] is not None:
        hyper.lr = opts["lr"]
    hyper.amp = opts["amp"]
    hyper.early_stop_accuracy = opts["early_stop"]
    hyper.micro_token_budget = opts["micro_token_budget"]

    datasets = _load_datasets(args.data, strict=not opts["lenient"], producer="gen-data")
    samples = _all_samples(datasets)
    eval_samples = None
    if args.eval_data:
        eval_samples = _all_samples(_load_datasets(args.eval_data, strict=True, producer="gen-data"))

    if opts["model"] == "ar-cot":
        model: LoopedModel | ARModel = ARModel(ARConfig(
            hidden=opts["hidden"], layers=opts["layers"], heads=opts["heads"],
            dropout=opts["dropout"], max_seq_len=opts["max_seq_len"],
        ))
    else:
        model = LoopedModel(LoopedConfig(
            hidden=opts["hidden"], layers=opts["layers"], heads=opts["heads"],
            dropout=opts["dropout"], alignment_weight=column.alignment_weight,
        ))

    out_dir = Path(opts["out"])
    with RunLock(out_dir):
        write_resolved_config({**opts, "data": ",".join(args.data)}, out_dir / "resolved_config.txt")
        trainer = Trainer(model, samples, hyper, out_dir, eval_samples=eval_samples)
        try:
            summary = trainer.run(resume=True)
        except TrainingDiverged as e:
            print(f"error: {e}", file=sys.stderr)
            return EXIT_ACCEPT
        save_model(out_dir / "model.ckpt", model, extra_meta={"column": opts["model"]})
    print(f"trained {opts['model']} for {summary['epochs_run']} epochs; model at {out_dir / 'model.ckpt'}")
    return EXIT_OK


def cmd_relay_generate(args: argparse.Namespace) -> int:
    spec = {
        "checkpoint": (str, None),
        "task": (str, None),
        "counts": (_parse_counts, None),
        "seed": (int, 0),
        "out": (str, None),
        "drop_malformed": (_parse_bool, False),
    }
    opts = _resolve(args, spec, "relay-generate")
    for required in ("checkpoint", "task", "counts", "out"):
        if opts[required] is None:
            raise ConfigError(f"relay-generate: missing required option --{required.replace('_', '-')}")
    model = load_model(_require_file(Path(opts["checkpoint"]), "train --model looped-aligned"))
    if not isinstance(model, LoopedModel):
        raise ConfigError("relay-generate needs a looped model checkpoint")
    task = TaskKind.from_name(opts["task"])
    counts = opts["counts"] if isinstance(opts["counts"], dict) else _parse_counts(opts["counts"])
    dataset, stats = relay_generate(model, task, counts, opts["seed"], drop_malformed=opts["drop_malformed"])
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset_write(dataset, out)
    write_resolved_config({**opts, "counts": ",".join(f"{k}={v}" for k, v in sorted(counts.items()))},
                          out.with_suffix(out.suffix + ".config"))
    print(f"generated {stats.produced} chains ({stats.malformed} malformed) to {out}")
    return EXIT_OK


def cmd_merge(args: argparse.Namespace) -> int:
    spec = {
        "original": (str, None),
        "generated": (str, None),
        "plan": (str, None),
        "scale": (float, 10.0),
        "seed": (int, 0),
        "out": (str, None),
    }
    opts = _resolve(args, spec, "merge")
    for required in ("original", "generated", "out"):
        if opts[required] is None:
            raise ConfigError(f"merge: missing required option --{required}")
    original = dataset_read(_require_file(Path(opts["original"]), "gen-data"), strict=True)
    generated = dataset_read(_require_file(Path(opts["generated"]), "relay-generate"), strict=False)
    if opts["plan"]:
        plans = read_mixing_plan(_require_file(Path(opts["plan"]), "merge --plan"))
    else:
        plans = {k: v.scaled(int(opts["scale"])) for k, v in FULL_MIXING_PLANS.items()}
    if original.task.value not in plans:
        raise ConfigError(f"mixing plan has no entry for task {original.task.value}")
    merged, manifest = merge(original, generated, plans[original.task.value], opts["seed"])
    out = Path(opts["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    dataset_write(merged, out)
    write_manifest(manifest, out.with_suffix(out.suffix + ".manifest.csv"))
    write_resolved_config(opts, out.with_suffix(out.suffix + ".config"))
    print(f"merged {len(merged)} samples to {out}")
    return EXIT_OK


def cmd_finetune(args: argparse.Namespace) -> int:
    spec = {
        "checkpoint": (str, None),
        "column": (str, "relay"),
        "out": (str, None),
        "scale": (float, 10.0),
        "seed": (int, 0),
        "epochs": (int, None),
        "batch_size": (int, None),
        "amp": (_parse_bool, False),
        "early_stop": (float, None),
        "micro_token_budget": (int, 250_000),
    }
    opts = _resolve(args, spec, "finetune")
    for required in ("checkpoint", "out"):
        if opts[required] is None:
            raise ConfigError(f"finetune: missing required option --{required}")
    if opts["column"] not in FINETUNE_COLUMNS:
        raise ConfigError(f"unknown finetune column {opts['column']!r}")
    if not args.data:
        raise ConfigError("finetune: at least one --data file is required")
    model = load_model(_require_file(Path(opts["checkpoint"]), "train --model ar-cot"))
    if not isinstance(model, ARModel):
        raise ConfigError("finetune needs an auto-regressive model checkpoint")
    samples = _all_samples(_load_datasets(args.data, strict=False, producer="merge"))
    eval_samples = None
    if args.eval_data:
        eval_samples = _all_samples(_load_datasets(args.eval_data, strict=True, producer="gen-data"))
    hyper = FINETUNE_COLUMNS[opts["column"]].hyper(divisor=opts["scale"], seed=opts["seed"])
    if opts["epochs"] is not None:
        hyper.epochs = opts["epochs"]
    if opts["batch_size"] is not None:
        hyper.batch_size = opts["batch_size"]
    hyper.amp = opts["amp"]
    hyper.early_stop_accuracy = opts["early_stop"]
    hyper.micro_token_budget = opts["micro_token_budget"]
    out_dir = Path(opts["out"])
    with RunLock(out_dir):
        write_resolved_config({**opts, "data": ",".join(args.data)}, out_dir / "resolved_config.txt")
        tuned = finetune(model, samples, hyper, out_dir, eval_samples=eval_samples)
        save_model(out_dir / "model.ckpt", tuned, extra_meta={"column": opts["column"]})
    print(f"fine-tuned model at {out_dir / 'model.ckpt'}")
    return EXIT_OK


def cmd_self_gen(args: argparse.Namespace) -> int:
    spec = {
        "checkpoint": (str, None),
        "verifier": (str, "ground_truth"),
        "looped_checkpoint": (str, None),
        "schedule": (str, None),
        "train_max": (_parse_task_map, None),
        "total": (_parse_task_map, None),
        "scale": (float, 10.0),
        "seed": (int, 0),
        "out": (str, None),
        "attempt_factor": (int, 2),
        "max_new": (int, None),
    }
    opts = _resolve(args, spec, "self-gen-baseline")
    for required in ("checkpoint", "out", "train_max", "total"):
        if opts[required] is None:
            raise ConfigError(f"self-gen-baseline: missing required option --{required.replace('_', '-')}")
    if not args.data:
        raise ConfigError("self-gen-baseline: at least one --data file is required")
    model = load_model(_require_file(Path(opts["checkpoint"]), "train --model ar-cot"))
    if not isinstance(model, ARModel):
        raise ConfigError("self-gen-baseline needs an auto-regressive model checkpoint")
    looped = None
    if opts["verifier"] == "looped":
        if not opts["looped_checkpoint"]:
            raise ConfigError("verifier=looped needs --looped-checkpoint")
        looped = load_model(_require_file(Path(opts["looped_checkpoint"]), "train --model vanilla-looped"))
        if not isinstance(looped, LoopedModel):
            raise ConfigError("--looped-checkpoint must be a looped model")
    if opts["schedule"]:
        schedule = read_phase_schedule(_require_file(Path(opts["schedule"]), "self-gen-baseline --schedule"))
    else:
        schedule = FULL_PHASE_SCHEDULE.scaled(int(opts["scale"]))
    base = _all_samples(_load_datasets(args.data, strict=True, producer="gen-data"))
    train_max = opts["train_max"] if isinstance(opts["train_max"], dict) else _parse_task_map(opts["train_max"])
    total = opts["total"] if isinstance(opts["total"], dict) else _parse_task_map(opts["total"])
    out_dir = Path(opts["out"])
    with RunLock(out_dir):
        write_resolved_config({**opts, "data": ",".join(args.data),
                               "train_max": ",".join(f"{k}={v}" for k, v in sorted(train_max.items())),
                               "total": ",".join(f"{k}={v}" for k, v in sorted(total.items()))},
                              out_dir / "resolved_config.txt")
        result = self_generate_baseline(
            model, opts["verifier"], schedule, base, train_max, total,
            opts["seed"], out_dir, looped_model=looped,
            attempt_factor=opts["attempt_factor"], max_new=opts["max_new"],
        )
        save_model(out_dir / "model.ckpt", result.model, extra_meta={"column": "self"})
        for i, phase_samples in enumerate(result.phase_datasets, start=1):
            by_task: dict[TaskKind, list[Sample]] = {}
            for s in phase_samples:
                by_task.setdefault(s.task, []).append(s)
            for task, task_samples in sorted(by_task.items(), key=lambda kv: kv[0].ordinal):
                ds = Dataset(task=task, seed=opts["seed"], samples=task_samples)
                dataset_write(ds, out_dir / f"phase{i}_{task.value}.ds")
        with open(out_dir / "phases.csv", "w") as f:
            f.write("phase,attempted,accepted,acceptance_rate,skipped\n")
            for st in result.phase_stats:
                f.write(f"{st.phase},{st.attempted},{st.accepted},{st.acceptance_rate:.4f},{int(st.skipped)}\n")
    print(f"self-generation baseline complete; model at {out_dir / 'model.ckpt'}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    spec = {
        "out": (str, None),
        "figures": (_parse_bool, True),
        "max_new": (int, None),
        "min_accuracy": (float, None),
        "bit_accuracy": (_parse_bool, False),
        "hit_matrix_length": (int, None),
    }
    opts = _resolve(args, spec, "eval")
    if opts["out"] is None:
        raise ConfigError("eval: missing required option --out")
    if not args.model:
        raise ConfigError("eval: at least one --model label=checkpoint is required")
    if not args.data:
        raise ConfigError("eval: at least one --data testset is required")
    testsets = _load_datasets(args.data, strict=True, producer="gen-data --namespace test")
    report = EvalReport()
    worst = 1.0
    for entry in args.model:
        if "=" not in entry:
            raise ConfigError(f"--model expects label=checkpoint, got {entry!r}")
        label, ckpt = entry.split("=", 1)
        model = load_model(_require_file(Path(ckpt), "train"))
        for ds in testsets:
            samples_by_len = split_by_length(ds.samples)
            if isinstance(model, LoopedModel):
                adapter = LoopedAdapter(model, name=label)
            else:
                max_new = opts["max_new"] or default_max_new(
                    max(len(encode_chain(s).tokens) - len(s.problem) for s in ds.samples)
                )
                adapter = ARAdapter(model, max_new=max_new, name=label)
            accuracy = final_accuracy(adapter, samples_by_len, report)
            worst = min([worst, *(a for a, _ in accuracy.values())])
            if opts["bit_accuracy"] or opts["hit_matrix_length"] is not None:
                for length, bucket in samples_by_len.items():
                    problems = [s.problem for s in bucket]
                    chains = adapter.chains(problems, ds.task)
                    pred_rounds = [c[0] for c in chains]
                    if opts["bit_accuracy"]:
                        value = sum(
                            bit_accuracy(p, s.rounds) for p, s in zip(pred_rounds, bucket)
                        ) / len(bucket)
                        report.add(label, ds.task, length, "bit_accuracy", value, len(bucket))
                    if (
                        opts["hit_matrix_length"] == length
                        and ds.task is TaskKind.LIS
                    ):
                        oracle_rounds = [list(map(list, s.rounds)) for s in bucket]
                        report.hit_matrices[(label, ds.task.value, length)] = hit_matrix(
                            pred_rounds, oracle_rounds, length
                        )
    out_dir = Path(opts["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    write_resolved_config({**opts, "model": ";".join(args.model), "data": ",".join(args.data)},
                          out_dir / "resolved_config.txt")
    emit_report(report, out_dir, figures=opts["figures"])
    print(f"evaluation report at {out_dir}")
    if opts["min_accuracy"] is not None and worst < opts["min_accuracy"]:
        print(f"threshold violated: worst bucket accuracy {worst:.4f} < {opts['min_accuracy']}", file=sys.stderr)
        return EXIT_ACCEPT
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    failed = False
    for name, report in run_gradchecks(seed=getattr(args, "seed", None) or 0):
        print(f"[{name}] {report.summary()}")
        failed = failed or not report.passed
    return EXIT_ACCEPT if failed else EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relay-lab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="key=value config file; CLI flags override it")
        p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("gen-data", help="generate a task dataset")
    add_common(p)
    p.add_argument("--task")
    p.add_argument("--count", type=int)
    p.add_argument("--out")
    p.add_argument("--min-complexity", dest="min_complexity", type=int)
    p.add_argument("--max-complexity", dest="max_complexity", type=int)
    p.add_argument("--dist", choices=["proportional", "uniform"])
    p.add_argument("--namespace", choices=["train", "test", "relay"])
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train a model column from scratch")
    add_common(p)
    p.add_argument("--model", choices=sorted(TRAIN_COLUMNS))
    p.add_argument("--data", nargs="+", default=[])
    p.add_argument("--eval-data", dest="eval_data", nargs="*", default=[])
    p.add_argument("--out")
    p.add_argument("--scale", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--heads", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--amp", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--early-stop", dest="early_stop", type=float)
    p.add_argument("--max-seq-len", dest="max_seq_len", type=int)
    p.add_argument("--lenient", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--micro-token-budget", dest="micro_token_budget", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("relay-generate", help="decode chains for new problems with a looped model")
    add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--task")
    p.add_argument("--counts", type=_parse_counts, help="length=count[,length=count...]")
    p.add_argument("--out")
    p.add_argument("--drop-malformed", dest="drop_malformed", action=argparse.BooleanOptionalAction, default=None)
    p.set_defaults(func=cmd_relay_generate)

    p = sub.add_parser("merge", help="merge original and generated datasets under a mixing plan")
    add_common(p)
    p.add_argument("--original")
    p.add_argument("--generated")
    p.add_argument("--plan")
    p.add_argument("--scale", type=float)
    p.add_argument("--out")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("finetune", help="fine-tune an AR checkpoint on merged data")
    add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data", nargs="+", default=[])
    p.add_argument("--eval-data", dest="eval_data", nargs="*", default=[])
    p.add_argument("--column", choices=sorted(FINETUNE_COLUMNS))
    p.add_argument("--out")
    p.add_argument("--scale", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--amp", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--early-stop", dest="early_stop", type=float)
    p.add_argument("--micro-token-budget", dest="micro_token_budget", type=int)
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("self-gen-baseline", help="phased self-generation fine-tuning baseline")
    add_common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--verifier", choices=["looped", "ground_truth"])
    p.add_argument("--looped-checkpoint", dest="looped_checkpoint")
    p.add_argument("--data", nargs="+", default=[])
    p.add_argument("--schedule")
    p.add_argument("--train-max", dest="train_max", type=_parse_task_map)
    p.add_argument("--total", type=_parse_task_map)
    p.add_argument("--scale", type=float)
    p.add_argument("--out")
    p.add_argument("--attempt-factor", dest="attempt_factor", type=int)
    p.add_argument("--max-new", dest="max_new", type=int)
    p.set_defaults(func=cmd_self_gen)

    p = sub.add_parser("eval", help="evaluate checkpoints on length-stratified testsets")
    add_common(p)
    p.add_argument("--model", action="append", default=[], help="label=checkpoint (repeatable)")
    p.add_argument("--data", nargs="+", default=[])
    p.add_argument("--out")
    p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--max-new", dest="max_new", type=int)
    p.add_argument("--min-accuracy", dest="min_accuracy", type=float)
    p.add_argument("--bit-accuracy", dest="bit_accuracy", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--hit-matrix-length", dest="hit_matrix_length", type=int)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="float64 gradient fidelity suite")
    add_common(p)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv: list[str] | None = None) -> int:
    threads = apply_thread_cap()
    del threads
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError,) as e:
        if isinstance(e, (FormatError, MergeError)):
            print(f"error: {e}", file=sys.stderr)
            return EXIT_IO
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (OSError, CheckpointError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
