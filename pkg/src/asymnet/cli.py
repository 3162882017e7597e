"""Command-line entry point: ``asymnet {compile,asym,statecomp,train,verify,report}``.

Exit codes: 0 success, 1 verification failure (or a rejected input), 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from . import acceptance, compilers, lang, nets, statecomp
from .asym import asym_accept

DEFAULT_SEED = 0


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("NA_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"NA_SEED must be an integer, got {raw!r}") from None


def read_config(path: str) -> dict[str, str]:
    """Parse a ``key = value`` file; '#' starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


class Manifest:
    """One JSON record per run: command, resolved config, seeds, paths, timings."""

    def __init__(self, command: str, config: dict):
        self.data = {"subcommand": command, "version": __version__, "config": config,
                     "seeds": {}, "inputs": [], "outputs": [], "timings": {}}
        self._t0 = time.perf_counter()

    def write(self, path: Path | None) -> None:
        self.data["timings"]["total_s"] = round(time.perf_counter() - self._t0, 3)
        if path is None:
            print("manifest: " + json.dumps(self.data, sort_keys=True, default=str), file=sys.stderr)
        else:
            path.write_text(json.dumps(self.data, indent=2, sort_keys=True, default=str) + "\n")


# ---------------------------------------------------------------------------


def _load_model(path: str) -> nets.NetworkSpec:
    if not Path(path).is_file():
        raise UsageError(f"model file not found: {path}")
    return nets.load_checkpoint(path)


def cmd_compile(args, manifest: Manifest) -> int:
    src = Path(args.inp)
    if not src.is_file():
        raise UsageError(f"input file not found: {src}")
    if args.kind in ("dfa2srn", "dfa2gru"):
        dfa = lang.load_dfa(src)
        comp = (compilers.compile_dfa_to_srn if args.kind == "dfa2srn" else compilers.compile_dfa_to_gru)(dfa)
        oracle = lambda s: lang.dfa_accepts(dfa, s)  # noqa: E731
    else:
        g = lang.load_sl(src)
        comp = compilers.compile_sl_to_cnn(g)
        oracle = lambda s: lang.sl_accepts(g, s)  # noqa: E731
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    nets.save_checkpoint(comp.net, out)
    manifest.data["inputs"].append(str(src))
    manifest.data["outputs"].append(str(out))
    print(f"{args.kind}: {comp.net.arch}, {comp.net.hidden_size} units, margin {comp.margin}")
    status = 0
    if args.verify_len is not None:
        print("length,strings,agree")
        for n in range(args.verify_len + 1):
            strings = list(comp.net.alphabet.strings(n))
            agree = sum(bool(asym_accept(comp.net, s)) == oracle(s) for s in strings)
            print(f"{n},{len(strings)},{agree}")
            if agree != len(strings):
                status = 1
        print("PASS" if status == 0 else "FAIL")
    manifest.write(out.with_name(out.name + ".manifest.json"))
    return status


def cmd_asym(args, manifest: Manifest) -> int:
    net = _load_model(args.model)
    try:
        net.alphabet.check(args.input)
    except lang.LanguageError as exc:
        raise UsageError(str(exc)) from None
    d = asym_accept(net, args.input)
    print(d.outcome if d.witness is None else f"{d.outcome} (zero limit at {d.witness})")
    manifest.data["inputs"].append(args.model)
    manifest.data["result"] = d.outcome
    manifest.write(_manifest_path(args))
    return 0 if d.outcome == "accept" else 1


def _manifest_path(args) -> Path | None:
    if getattr(args, "out", None) is None:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out / "manifest.json"


def cmd_statecomp(args, manifest: Manifest) -> int:
    if args.n_max is None:
        raise UsageError("statecomp needs --n-max")
    net = _load_model(args.model)
    n_range = range(args.n_min, args.n_max + 1)
    curve = statecomp.complexity_curve(net, args.selector, n_range, args.budget)
    text = statecomp.curve_csv(curve)
    sys.stdout.write(text)
    print(f"class,{curve.growth}")
    manifest.data["inputs"].append(args.model)
    manifest.data["growth"] = curve.growth
    path = _manifest_path(args)
    if path is not None:
        (path.parent / "curve.csv").write_text(text)
    manifest.write(path)
    return 0


def cmd_train(args, manifest: Manifest) -> int:
    from .train import experiments as ex

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = ex.desk_config(args.task, args.arch.upper(), args.noise, args.seed, full_scale=args.full_scale)
    for key, value in args.overrides.items():
        if not hasattr(cfg, key):
            raise UsageError(f"unknown config key {key!r}")
        cfg = ex.with_value(cfg, key, value)
    manifest.data["config"]["train"] = cfg.to_dict()
    manifest.data["seeds"]["train"] = cfg.seed
    try:
        if args.task == "counting":
            train, test = ex.counting_corpora(cfg)
            model, metrics = ex.train_lm(cfg.arch, train, cfg, test)
            rows = [("accuracy", metrics.accuracy), ("acc_on_c", metrics.acc_on_c)]
        else:
            model, metrics = ex.train_seq2seq_reversal(args.attention, cfg)
            rows = [("val_exact", metrics.val_exact), ("gen_exact", metrics.gen_exact)]
    except ex.DivergenceError as exc:
        print(f"asymnet: training aborted: {exc}", file=sys.stderr)
        manifest.data["aborted"] = {"epoch": exc.epoch}
        manifest.write(out / "manifest.json")
        return 1
    (out / "metrics.json").write_text(json.dumps(metrics.to_dict(), indent=2) + "\n")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["metric", "value"])
    w.writerows(rows)
    w.writerow([])
    w.writerow(["epoch", "loss", "lr"])
    w.writerows((i, f"{l:.6f}", lr) for i, (l, lr) in enumerate(zip(metrics.losses, metrics.lrs)))
    (out / "metrics.csv").write_text(buf.getvalue())
    ex.save_model(model, out / "model.json")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n")
    manifest.data["outputs"] += [str(out / f) for f in ("metrics.json", "metrics.csv", "model.json", "config.json")]
    for k, v in rows:
        print(f"{k}: {v:.2f}")
    manifest.write(out / "manifest.json")
    return 0


def cmd_verify(args, manifest: Manifest) -> int:
    fixtures = Path(args.fixtures) if args.fixtures else None
    results = acceptance.run_all(skip_training=args.skip_training, fixtures=fixtures, jobs=args.jobs,
                                 report=lambda r: print(r.line(), flush=True))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    manifest.data["results"] = [r.__dict__ for r in results]
    manifest.write(_manifest_path(args))
    return 1 if failed else 0


def cmd_report(args, manifest: Manifest) -> int:
    """Collect ``train`` run directories into best-seed counting and max-over-trials reversal tables."""
    counting, reversal = [], []
    for run in args.runs:
        run = Path(run)
        try:
            cfg = json.loads((run / "config.json").read_text())
            met = json.loads((run / "metrics.json").read_text())
            man = json.loads((run / "manifest.json").read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"{run} is not a train run directory: {exc}") from None
        task = man["config"].get("task")
        if task == "counting":
            counting.append((cfg["arch"], cfg["noise_sd"], cfg["seed"], met["accuracy"], met["acc_on_c"]))
        else:
            reversal.append((man["config"].get("attention"), cfg["seed"], met["val_exact"], met["gen_exact"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    best_c: dict = {}
    for arch, noise, _seed, acc, on_c in counting:
        key = (arch, noise)
        if key not in best_c or (on_c, acc) > best_c[key]:
            best_c[key] = (on_c, acc)
    lines = ["arch,noise_sd,accuracy,acc_on_c"]
    lines += [f"{a},{n},{acc:.1f},{c:.1f}" for (a, n), (c, acc) in sorted(best_c.items())]
    (out / "counting.csv").write_text("\n".join(lines) + "\n")
    best_r: dict = {}
    for att, _seed, val, gen in reversal:
        cur = best_r.get(att, (0.0, 0.0))
        best_r[att] = (max(cur[0], val), max(cur[1], gen))
    lines = ["model,val_exact,gen_exact"]
    lines += [f"{'LSTM-attn' if a else 'LSTM'},{v:.1f},{g:.1f}" for a, (v, g) in sorted(best_r.items())]
    (out / "reversal.csv").write_text("\n".join(lines) + "\n")
    print((out / "counting.csv").read_text() + (out / "reversal.csv").read_text(), end="")
    manifest.data["inputs"] += list(args.runs)
    manifest.write(out / "manifest.json")
    return 0


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="asymnet", description="Asymptotic analysis of neural sequence acceptors.")
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key = value file with defaults for this command")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default 1, deterministic)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("compile", parents=[common], help="compile a DFA or SL grammar into a network")
    c.add_argument("kind", choices=["dfa2srn", "dfa2gru", "sl2cnn"])
    c.add_argument("--in", dest="inp", required=True, help="DFA (.dfa) or grammar (.sl) file")
    c.add_argument("--out", required=True, help="checkpoint to write")
    c.add_argument("--verify-len", type=int, help="check all strings up to this length against the source")

    a = sub.add_parser("asym", parents=[common], help="asymptotic acceptance of one string")
    a.add_argument("action", choices=["accept"])
    a.add_argument("--model", required=True)
    a.add_argument("--input", required=True)
    a.add_argument("--out", help="directory for the run manifest")

    s = sub.add_parser("statecomp", parents=[common], help="state-complexity curve by enumeration")
    s.add_argument("--model", required=True)
    s.add_argument("--selector", choices=["h", "c", "V", "summary", "pooled"], default="h")
    s.add_argument("--n-min", type=int, default=1)
    s.add_argument("--n-max", type=int, help="longest input length (required here or in --config)")
    s.add_argument("--budget", type=int, default=statecomp.DEFAULT_BUDGET)
    s.add_argument("--out", help="directory for curve.csv and the manifest")

    t = sub.add_parser("train", parents=[common], help="desk-scale training experiments")
    t.add_argument("task", choices=["counting", "reversal"])
    t.add_argument("--arch", choices=["srn", "gru", "lstm"], default="lstm")
    t.add_argument("--noise", type=float, default=0.0, help="state noise sd (0 disables)")
    t.add_argument("--attention", action="store_true", help="reversal: attend over encoder states")
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True)
    t.add_argument("--full-scale", action="store_true", help="use the original, much longer length ranges")

    v = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    v.add_argument("--skip-training", action="store_true")
    v.add_argument("--fixtures", help="directory overriding the bundled fixtures")
    v.add_argument("--out", help="directory for the run manifest")

    r = sub.add_parser("report", parents=[common], help="tabulate train run directories")
    r.add_argument("runs", nargs="+")
    r.add_argument("--out", required=True)
    return p


_TYPES = {"jobs": int, "n_min": int, "n_max": int, "budget": int, "verify_len": int, "seed": int,
          "noise": float}


def _apply_config(args, parser) -> dict:
    """Config-file values fill in flags left at their defaults; the rest go to ``overrides``."""
    overrides = {}
    if args.config:
        for key, value in read_config(args.config).items():
            if hasattr(args, key) and key not in ("command", "config"):
                if getattr(args, key) == parser.get_default(key) or getattr(args, key) is None:
                    setattr(args, key, _TYPES.get(key, str)(value))
            else:
                overrides[key] = value
    return overrides


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = _apply_config(args, parser)
        if args.command != "train" and overrides:
            raise UsageError(f"unknown config keys: {', '.join(sorted(overrides))}")
        args.overrides = overrides
        if getattr(args, "seed", None) is None and args.command == "train":
            args.seed = default_seed()
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        config = {k: v for k, v in vars(args).items() if k != "overrides"}
        if args.command == "train":
            config["task"] = args.task
        manifest = Manifest(args.command, config)
        handler = {"compile": cmd_compile, "asym": cmd_asym, "statecomp": cmd_statecomp,
                   "train": cmd_train, "verify": cmd_verify, "report": cmd_report}[args.command]
        return handler(args, manifest)
    except UsageError as exc:
        print(f"asymnet: error: {exc}", file=sys.stderr)
        return 2
    except (lang.LanguageError, nets.ShapeError, nets.CheckpointError, compilers.CompileError) as exc:
        print(f"asymnet: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
