"""Command-line entry point: ``wordmirror <subcommand> ...``.

Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure. With ``--json``
stdout carries exactly one JSON document; everything human-readable goes
to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import ANALOGY_KINDS, MlpTransferModel, fit_analogy
from .checkpoint import CheckpointError, load_checkpoint, pairs_hash, save_checkpoint
from .config import ConfigError, RunConfig, dump_json, load_data
from .embeddings import atomic_write_text, load_embeddings
from .errors import (DegenerateMirrorError, EmbeddingFormatError, NonFiniteError,
                     UnknownTokenError, WordMirrorError)
from .evaluation import (evaluate, export_distances, export_mirror_params, pair_word_list,
                         transfer_words)
from .nn import grad_check
from .reflection import AttributeVector, RefModel
from .synth import SyntheticSpec, synth_generate, write_synthetic
from .training import TrainingDiverged, loss_arrays, train

logger = logging.getLogger("wordmirror")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        sys.stdout.write(dump_json(payload))
    else:
        print(human)


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config)
    if getattr(args, "model", None):
        cfg.model = args.model
        cfg.__post_init__()
    if getattr(args, "out", None):
        cfg.output_dir = str(Path(args.out).resolve())
    overrides = {k: getattr(args, k) for k in ("alpha", "max_epochs", "patience", "batch_size")
                 if getattr(args, k, None) is not None}
    cfg.train = {**cfg.train, **overrides}
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
        cfg.train.pop("seed", None)
    return cfg


# -- subcommands -----------------------------------------------------------------

def cmd_train(args) -> int:
    cfg = _load_config(args)
    data = load_data(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / "resolved_config.json", dump_json(cfg.resolved()))
    provenance = {"train_pairs_sha256": pairs_hash(data.dataset.pairs("train")),
                  "vocab_size": len(data.table)}

    if cfg.model in ANALOGY_KINDS:
        model = fit_analogy(cfg.model, data.dataset.pairs("train"), data.dataset.pairs("val"),
                            data.table)
        save_checkpoint(model, out / "checkpoint.json", seed=cfg.seed, provenance=provenance,
                        config=cfg.resolved())
        history: list = []
        summary = {"model_kind": cfg.model, "checkpoint": str(out / "checkpoint.json"),
                   "source_pair": list(model.diff.source_pair) if model.diff.source_pair else None}
    else:
        tcfg = cfg.train_config()
        try:
            result = train(data.dataset, data.nonattr, data.table, tcfg)
        except TrainingDiverged as exc:
            res = exc.result
            save_checkpoint(res.model, out / "checkpoint.json", seed=tcfg.seed, step=res.best_step,
                            provenance=provenance, config=cfg.resolved(), diverged=True)
            atomic_write_text(out / "history.json", dump_json(res.history))
            print(f"training diverged: {exc}; last good checkpoint kept", file=sys.stderr)
            return EXIT_NUMERIC
        save_checkpoint(result.model, out / "checkpoint.json", seed=tcfg.seed,
                        step=result.best_step, provenance=provenance, config=cfg.resolved())
        history = result.history
        summary = {"model_kind": cfg.model, "checkpoint": str(out / "checkpoint.json"),
                   "epochs": len(history), "best_epoch": result.best_epoch,
                   "best_val_accuracy": result.best_val_accuracy,
                   "final_val_accuracy": history[-1]["val_accuracy"] if history else None}
    atomic_write_text(out / "history.json", dump_json(history))
    _emit(args, summary, "\n".join(f"{k}: {v}" for k, v in summary.items()))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    data = load_data(cfg)
    model, doc = load_checkpoint(args.checkpoint)
    report = evaluate(model, data.dataset.triplets(args.split), data.nonattr.test, data.table,
                      attribute=cfg.attribute, config_snapshot=cfg.resolved(),
                      seeds={"run": cfg.seed, "checkpoint": doc.get("seed")})
    out = Path(cfg.output_dir)
    text = report.to_json()
    atomic_write_text(out / "report.json", text)
    sys.stdout.write(text)
    print(f"accuracy={report.accuracy} stability={report.stability} |V|={report.vocab_size}",
          file=sys.stderr)
    return EXIT_OK


def _transfer_table(args):
    if args.config:
        cfg = RunConfig.load(args.config)
        if cfg.synthetic is not None:
            return load_data(cfg).table
        path, limit = cfg.embeddings["path"], cfg.embeddings.get("limit")
    else:
        path, limit = args.embeddings, args.limit
    if not Path(path).exists():
        raise FileNotFoundError(f"embedding file not found: {path}")
    return load_embeddings(path, limit)


def cmd_transfer(args) -> int:
    if not args.config and not args.embeddings:
        raise UsageError("transfer needs --config or --embeddings")
    if not args.words and args.text is None:
        raise UsageError("give --words or --text")
    table = _transfer_table(args)
    models = [load_checkpoint(c)[0] for c in args.checkpoint]
    tokens = args.words if args.words else args.text.split()
    stages = []
    current = list(tokens)
    for model in models:
        rows = transfer_words(model, table, current)
        stages.append(rows)
        current = [r.output for r in rows]
    payload = {
        "input": tokens, "output": current,
        "stages": [[{"input": r.input, "output": r.output, "oov": r.oov,
                     "cosine": r.similarity, "mirror_distance": r.mirror_distance} for r in rows]
                   for rows in stages],
    }
    lines = []
    for k, rows in enumerate(stages):
        lines.append(f"# checkpoint {k}: {args.checkpoint[k]}")
        lines.append("input\toutput\tcosine\tmirror_distance")
        for r in rows:
            if r.oov:
                lines.append(f"{r.input}\t{r.output}\tOOV\t")
            else:
                dist = "" if r.mirror_distance is None else f"{r.mirror_distance:.6g}"
                lines.append(f"{r.input}\t{r.output}\t{r.similarity:.6f}\t{dist}")
    lines.append(" ".join(current))
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_synth(args) -> int:
    path = Path(args.spec)
    if not path.exists():
        raise FileNotFoundError(f"spec file not found: {path}")
    spec = SyntheticSpec.from_dict(json.loads(path.read_text(encoding="utf-8")))
    data = synth_generate(spec)
    manifest = write_synthetic(data, spec, args.out)
    summary = {"out": str(Path(args.out).resolve()), "vocab_size": len(data.table),
               "splits": data.dataset.sizes(), "manifest": manifest}
    _emit(args, summary, f"wrote {len(data.table)} vectors and {spec.n_pairs} pairs to {args.out}")
    return EXIT_OK


def _export_setup(args):
    cfg = _load_config(args)
    data = load_data(cfg)
    model, _ = load_checkpoint(args.checkpoint)
    if not isinstance(model, RefModel):
        raise UsageError("exports need a reflection (ref/refpm) checkpoint")
    return cfg, data, model


def _write_export(args, cfg, name: str, text: str) -> int:
    path = Path(args.output) if args.output else Path(cfg.output_dir) / name
    atomic_write_text(path, text)
    rows = text.count("\n") - 1
    _emit(args, {"path": str(path), "rows": rows}, f"wrote {rows} rows to {path}")
    return EXIT_OK


def cmd_export_distances(args) -> int:
    cfg, data, model = _export_setup(args)
    text = export_distances(model, data.dataset, data.nonattr, data.table, split=args.split)
    return _write_export(args, cfg, "distances.tsv", text)


def cmd_export_mirrors(args) -> int:
    cfg, data, model = _export_setup(args)
    if args.words:
        words, ids = list(args.words), [""] * len(args.words)
    else:
        words, ids = pair_word_list(data.dataset, args.split)
    words_ids = [(w, i) for w, i in zip(words, ids) if w in data.table]
    text = export_mirror_params(model, [w for w, _ in words_ids], data.table,
                                [i for _, i in words_ids])
    return _write_export(args, cfg, "mirrors.tsv", text)


def gradcheck_instance(kind: str, seed: int = 0, dim: int = 5, hidden=(7,), n_pairs: int = 4,
                       n_words: int = 3):
    """Random model plus data for checking the full transfer loss of one model kind."""
    rng = np.random.default_rng(seed)
    attr = AttributeVector("gc", rng.standard_normal(dim), trainable=True)
    if kind == "mlp":
        model = MlpTransferModel.create(attr, seed, tuple(hidden) * 2)
    else:
        model = RefModel.create(attr, kind == "refpm", seed, tuple(hidden))
    src = rng.standard_normal((n_pairs, dim))
    tgt = rng.standard_normal((n_pairs, dim))
    non = rng.standard_normal((n_words, dim))

    def loss_and_grad(params):
        return loss_arrays(model.with_parameters(params), src, tgt, non)

    return model, loss_and_grad


def cmd_gradcheck(args) -> int:
    kinds = args.kinds.split(",")
    results = {}
    for kind in kinds:
        if kind not in ("ref", "refpm", "mlp"):
            raise UsageError(f"gradcheck supports ref, refpm, mlp; got {kind!r}")
        model, fn = gradcheck_instance(kind, args.seed, args.dim)
        if args.corrupt:
            fn = _corrupted(fn)
        results[kind] = grad_check(fn, model.parameters(), h=args.h)
    worst = max(results.values())
    ok = worst < args.threshold
    payload = {"max_relative_error": results, "threshold": args.threshold, "passed": ok}
    _emit(args, payload, "\n".join(f"{k}: {v:.3e}" for k, v in results.items())
          + f"\n{'PASS' if ok else 'FAIL'} (threshold {args.threshold:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


def _corrupted(fn):
    """Double the largest-magnitude analytic gradient coordinate."""
    def wrapped(params):
        value, grads = fn(params)
        grads = [g.copy() for g in grads]
        k = int(np.argmax([np.max(np.abs(g)) for g in grads]))
        flat = grads[k].reshape(-1)
        flat[np.argmax(np.abs(flat))] *= 2.0
        return value, grads
    return wrapped


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wordmirror", description="Word attribute transfer by reflection.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, config=True):
        sp.add_argument("--json", action="store_true", help="one JSON document on stdout")
        if config:
            sp.add_argument("--config", required=True, help="run config (JSON)")
            sp.add_argument("--out", help="override output_dir")
            sp.add_argument("--seed", type=int)

    sp = sub.add_parser("train", help="fit a model and write checkpoint + history")
    common(sp)
    sp.add_argument("--model", choices=sorted(set(("ref", "refpm", "mlp", *ANALOGY_KINDS))))
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--max-epochs", dest="max_epochs", type=int)
    sp.add_argument("--patience", type=int)
    sp.add_argument("--batch-size", dest="batch_size", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="accuracy/stability report for a checkpoint")
    common(sp)
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--split", default="test", choices=("train", "val", "test"))
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("transfer", help="transfer words or a sentence")
    common(sp, config=False)
    sp.add_argument("--checkpoint", action="append", required=True,
                    help="repeat to chain transfers in order")
    sp.add_argument("--config")
    sp.add_argument("--embeddings")
    sp.add_argument("--limit", type=int)
    sp.add_argument("--words", nargs="+")
    sp.add_argument("--text")
    sp.set_defaults(func=cmd_transfer)

    sp = sub.add_parser("synth", help="generate planted-mirror data")
    common(sp, config=False)
    sp.add_argument("--spec", required=True, help="synthetic spec (JSON)")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_synth)

    for name, func, help_ in (("export-distances", cmd_export_distances, "word-to-mirror distances"),
                              ("export-mirrors", cmd_export_mirrors, "mirror normals per word")):
        sp = sub.add_parser(name, help=help_)
        common(sp)
        sp.add_argument("--checkpoint", required=True)
        sp.add_argument("--split", default="test", choices=("train", "val", "test"))
        sp.add_argument("--output", help="TSV path (default: <output_dir>/<name>.tsv)")
        if name == "export-mirrors":
            sp.add_argument("--words", nargs="+")
        sp.set_defaults(func=func)

    sp = sub.add_parser("gradcheck", help="finite-difference check of the transfer loss")
    common(sp, config=False)
    sp.add_argument("--kinds", default="ref,refpm,mlp")
    sp.add_argument("--threshold", type=float, default=1e-4)
    sp.add_argument("--h", type=float, default=1e-5)
    sp.add_argument("--dim", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--corrupt", action="store_true", help="double one analytic gradient")
    sp.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"wordmirror: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, EmbeddingFormatError, UnknownTokenError, CheckpointError) as exc:
        print(f"wordmirror: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteError, DegenerateMirrorError) as exc:
        print(f"wordmirror: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (WordMirrorError, OSError) as exc:
        print(f"wordmirror: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:  # invalid settings that slipped past argparse
        print(f"wordmirror: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
