"""Command-line interface: gen | eval | stats | train | compare.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

import argparse
import csv
import json
import logging
import os
import subprocess
import sys
import time
from dataclasses import asdict

from . import __version__, curriculum as cur, dataset, interp, lstm, stats, train
from .encode import Vocabulary, format_window, pack, render_target
from .progsynth import GenConfig, generate
from .seeding import RNG_NAME, make_rng
from .taskgen import TASKS, draw_from_split

log = logging.getLogger("progeval")

OUT_ENV = "PROGEVAL_OUT"

DESK = dict(lr=1.0, hidden=64, layers=2, minibatch=32, window=50, eval_interval=100, eval_samples=200,
            test_samples=1000, epoch_size=20_000, max_epochs=20, max_steps=3000)
PAPER = dict(lr=0.5, hidden=400, layers=2, minibatch=100, window=50, eval_interval=1000, eval_samples=1000,
             test_samples=10_000, epoch_size=500_000, max_epochs=20, max_steps=None)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class _Once(argparse.Action):
    """Store a value, refusing a second occurrence of the flag."""

    def __call__(self, parser, namespace, values, option_string=None):
        if getattr(namespace, f"_seen_{self.dest}", False):
            parser.error(f"{option_string} given more than once")
        setattr(namespace, f"_seen_{self.dest}", True)
        setattr(namespace, self.dest, values)


def code_version():
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=os.path.dirname(__file__), capture_output=True, text=True, timeout=5,
        )
        if rev.returncode == 0 and rev.stdout.strip():
            return f"{__version__}+g{rev.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def write_manifest(path, command, config, seed, outputs):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "rng": RNG_NAME,
        "code_version": code_version(),
        "argv": sys.argv[1:],
        "outputs": outputs,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(args, default_name):
    if args.out:
        return args.out
    return os.path.join(os.environ.get(OUT_ENV, "runs"), default_name)


# -- gen / eval / stats -------------------------------------------------------


def cmd_gen(args):
    if args.task != "program" and args.nesting != 1:
        raise UsageError(f"--nesting does not apply to the {args.task} task")
    if args.count < 0:
        raise UsageError("--count must be >= 0")
    try:
        if args.task == "program":
            GenConfig(args.length, args.nesting)
        elif args.length < 1:
            raise ValueError("--length must be >= 1")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = args.out or os.path.join(os.environ.get(OUT_ENV, "."), f"{args.task}-L{args.length}-N{args.nesting}.jsonl")
    parent = os.path.dirname(os.path.abspath(out))
    os.makedirs(parent, exist_ok=True)
    config = {"task": args.task, "length": args.length, "nesting": args.nesting, "count": args.count,
              "reverse": args.reverse, "double": args.double}
    manifest_path = out + ".manifest.json"
    write_manifest(manifest_path, "gen", config, args.seed, {"dataset": out})
    records = dataset.generate_records(args.task, args.length, args.nesting, args.count, args.seed,
                                       args.reverse, args.double)
    n = dataset.write_jsonl(out, records)
    print(f"wrote {n} records to {out}")
    return 0


def _programs_from_file(path):
    if path.endswith(".jsonl"):
        return [rec["code"] for rec in dataset.read_jsonl(path)]
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return [chunk.strip("\n") + "." for chunk in text.split(".") if chunk.strip()]


def cmd_eval(args):
    for code in _programs_from_file(args.file):
        print(render_target(interp.run(code)))
    return 0


def cmd_stats(args):
    rng = make_rng(args.seed)
    try:
        config = GenConfig(args.length, args.nesting)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    samples = [generate(config, rng) for _ in range(args.count)]
    dist = stats.analyze(samples)
    print(stats.format_report(dist))
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["position", "char", "count", "frequency"])
            for position, char, n, freq in stats.to_rows(dist):
                writer.writerow([position, "\\n" if char == "\n" else char, n, f"{freq:.6f}"])
    return 0


# -- train / compare ----------------------------------------------------------


def _scale(args):
    base = PAPER if args.paper_scale else DESK
    picked = {}
    for key, default in base.items():
        value = getattr(args, key)
        picked[key] = default if value is None else value
    if args.no_step_cap:
        picked["max_steps"] = None
    return picked


def _configs(args, strategy, seed):
    try:
        return _build_configs(args, strategy, seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _build_configs(args, strategy, seed):
    s = _scale(args)
    if args.task != "program" and args.max_nesting != 1:
        raise UsageError(f"--max-nesting does not apply to the {args.task} task")
    vocab = Vocabulary.for_task(args.task)
    tc = train.TrainConfig(
        minibatch=s["minibatch"], window=s["window"], lr0=s["lr"], lr_decay=args.lr_decay,
        clip_norm=args.clip_norm, target_accuracy=args.target_accuracy, lr_floor=args.lr_floor,
        max_epochs=s["max_epochs"], epoch_size=s["epoch_size"], eval_interval=s["eval_interval"],
        eval_samples=s["eval_samples"], test_samples=s["test_samples"], max_steps=s["max_steps"], seed=seed,
    )
    lc = lstm.LstmConfig(s["layers"], s["hidden"], vocab.n_in, vocab.n_out, args.init_range,
                         "float32" if args.float32 else "float64")
    cc = cur.CurriculumConfig(args.max_len, args.max_nesting, strategy, args.combined_mix_prob,
                              args.stall_patience, args.stall_min_delta)
    return tc, lc, cc


def _write_log(path, rows, extra=None):
    extra = extra or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(extra) + train.LOG_COLUMNS)
        for row in rows:
            d = train.row_dict(row)
            writer.writerow(list(extra.values()) + [_fmt(d[c]) for c in train.LOG_COLUMNS])


def _fmt(value):
    return repr(value) if isinstance(value, float) else str(value)


def _dump_windows(args, tc):
    vocab = Vocabulary.for_task(args.task)
    rng = make_rng(tc.seed, 99)
    samples = [draw_from_split(args.task, args.max_len, args.max_nesting, "train", rng, args.reverse, args.double)
               for _ in range(tc.minibatch * 4)]
    for k, window in enumerate(pack(samples, vocab, min(tc.minibatch, 4), tc.window)[: args.dump_windows]):
        print(f"-- window {k}")
        print(format_window(window, vocab))


def _train_one(args, strategy, seed, out_dir):
    tc, lc, cc = _configs(args, strategy, seed)
    os.makedirs(out_dir, exist_ok=True)
    outputs = {
        "log": os.path.join(out_dir, "log.csv"),
        "timing": os.path.join(out_dir, "timing.csv"),
        "checkpoints": os.path.join(out_dir, "checkpoints"),
        "summary": os.path.join(out_dir, "summary.json"),
    }
    config = {"task": args.task, "reverse": args.reverse, "double": args.double,
              "train": asdict(tc), "lstm": asdict(lc), "curriculum": asdict(cc)}
    write_manifest(os.path.join(out_dir, "manifest.json"), "train", config, seed, outputs)
    result = train.run(tc, lc, cc, args.task, args.reverse, args.double, checkpoint_dir=outputs["checkpoints"])
    _write_log(outputs["log"], result.log)
    with open(outputs["timing"], "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "wall_time"])
        for row in result.log:
            writer.writerow([row.step, f"{row.wall_time:.3f}"])
    summary = {
        "strategy": strategy, "seed": seed, "steps": result.steps, "samples": result.samples,
        "stop_reason": result.stop_reason, "test_char_accuracy": result.test_char_accuracy,
        "test_seq_accuracy": result.test_seq_accuracy,
        "final_difficulty": list(result.curriculum.difficulty),
    }
    with open(outputs["summary"], "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return result, tc, lc


def cmd_train(args):
    strategy = args.strategy or "combined"
    if args.dump_windows:
        tc, _, _ = _configs(args, strategy, args.seed)
        _dump_windows(args, tc)
    out_dir = _out_dir(args, f"train-{args.task}-{strategy}-s{args.seed}")
    started = time.perf_counter()
    result, _, _ = _train_one(args, strategy, args.seed, out_dir)
    print(f"stopped after {result.steps} steps ({result.stop_reason}), {time.perf_counter() - started:.1f}s")
    print(f"test char accuracy {result.test_char_accuracy:.4f}, sequence accuracy {result.test_seq_accuracy:.4f}")
    print(f"outputs in {out_dir}")
    return 0


def _grid_accuracy(result, lc, args, seed, count):
    vocab = Vocabulary.for_task(args.task)
    model = lstm.LstmModel(lc, result.params)
    out = {}
    for nesting in range(1, args.max_nesting + 1):
        for length in range(1, args.max_len + 1):
            rng = make_rng(seed, 5, length, nesting)
            samples = [draw_from_split(args.task, length, nesting, "test", rng, args.reverse, args.double)
                       for _ in range(count)]
            out[(length, nesting)] = train.teacher_forced_accuracy(model, samples, vocab)[0]
    return out


def cmd_compare(args):
    strategies = []
    for item in args.strategies:
        strategies.extend(s for s in item.split(",") if s)
    for s in strategies:
        if s not in cur.STRATEGIES:
            raise UsageError(f"unknown strategy {s!r}")
    if len(set(strategies)) != len(strategies):
        raise UsageError("each strategy may be listed once")
    out_dir = _out_dir(args, f"compare-{args.task}")
    os.makedirs(out_dir, exist_ok=True)
    write_manifest(os.path.join(out_dir, "manifest.json"), "compare",
                   {"task": args.task, "strategies": strategies, "seeds": args.seeds, "scale": _scale(args),
                    "max_len": args.max_len, "max_nesting": args.max_nesting,
                    "reverse": args.reverse, "double": args.double},
                   args.seeds, {"log": os.path.join(out_dir, "compare.csv"),
                                "summary": os.path.join(out_dir, "compare_summary.csv")})
    grid = {}
    log_rows = []
    for strategy in strategies:
        for seed in args.seeds:
            result, _, lc = _train_one(args, strategy, seed, os.path.join(out_dir, f"{strategy}-s{seed}"))
            grid[strategy, seed] = _grid_accuracy(result, lc, args, seed, args.grid_samples)
            for row in result.log:
                log_rows.append((strategy, seed, row))
            print(f"{strategy:>9} seed {seed}: test char accuracy {result.test_char_accuracy:.4f}")

    with open(os.path.join(out_dir, "compare.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["strategy", "seed"] + train.LOG_COLUMNS)
        for strategy, seed, row in log_rows:
            d = train.row_dict(row)
            writer.writerow([strategy, seed] + [_fmt(d[c]) for c in train.LOG_COLUMNS])

    with open(os.path.join(out_dir, "compare_summary.csv"), "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["strategy", "seed", "length", "nesting", "test_char_accuracy", "relative_to_baseline"])
        for (strategy, seed), accs in grid.items():
            base = grid.get(("baseline", seed))
            for (length, nesting), acc in sorted(accs.items(), key=lambda kv: (kv[0][1], kv[0][0])):
                rel = "" if base is None else _fmt(acc - base[(length, nesting)])
                writer.writerow([strategy, seed, length, nesting, _fmt(acc), rel])
    print(f"outputs in {out_dir}")
    return 0


# -- parser -------------------------------------------------------------------


def _add_training_flags(p):
    p.add_argument("--task", choices=TASKS, default="program")
    p.add_argument("--max-len", type=int, default=4, help="target length a")
    p.add_argument("--max-nesting", type=int, default=1, help="target nesting b")
    p.add_argument("--reverse", action="store_true", help="reverse the input payload")
    p.add_argument("--double", action="store_true", help="present the input payload twice")
    p.add_argument("--paper-scale", action="store_true", help="400 cells, batch 100, lr 0.5, no step cap")
    p.add_argument("--hidden", type=int)
    p.add_argument("--layers", type=int)
    p.add_argument("--minibatch", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--eval-interval", type=int)
    p.add_argument("--eval-samples", type=int)
    p.add_argument("--test-samples", type=int)
    p.add_argument("--epoch-size", type=int)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--no-step-cap", action="store_true")
    p.add_argument("--lr", type=float, help="initial learning rate (desk 1.0, --paper-scale 0.5)")
    p.add_argument("--lr-decay", type=float, default=0.8)
    p.add_argument("--lr-floor", type=float, default=0.001)
    p.add_argument("--clip-norm", type=float, default=5.0)
    p.add_argument("--target-accuracy", type=float, default=0.95)
    p.add_argument("--init-range", type=float, default=0.08)
    p.add_argument("--combined-mix-prob", type=float, default=0.5)
    p.add_argument("--stall-patience", type=int, default=3)
    p.add_argument("--stall-min-delta", type=float, default=0.001)
    p.add_argument("--float32", action="store_true", help="single precision (faster)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<run name>)")


def build_parser():
    parser = _Parser(prog="progeval", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a line-delimited dataset")
    p.add_argument("--task", choices=TASKS, default="program")
    p.add_argument("--length", type=int, default=4)
    p.add_argument("--nesting", type=int, default=1)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reverse", action="store_true")
    p.add_argument("--double", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("eval", help="print the target of each program in a file")
    p.add_argument("file", help="a .jsonl dataset or plain text with '.'-terminated programs")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="output-character statistics of generated programs")
    p.add_argument("--length", type=int, default=4)
    p.add_argument("--nesting", type=int, default=1)
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train one model")
    _add_training_flags(p)
    p.add_argument("--strategy", choices=cur.STRATEGIES, action=_Once)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-windows", type=int, default=0, metavar="N", help="print the first N packed windows")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("compare", help="train several strategies with shared seeds")
    _add_training_flags(p)
    p.add_argument("--strategies", nargs="+", default=["baseline,naive,mix,combined"])
    p.add_argument("--seeds", type=int, nargs="+", default=[0])
    p.add_argument("--grid-samples", type=int, default=200)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"progeval: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError, interp.ParseError) as exc:
        print(f"progeval: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
