"""Command-line surface.

Subcommands: gen-synth, ingest-maestro, ingest-text, train, transfer,
pipeline, probe, stats, export-metrics. Every run writes a self-describing
directory (config snapshot, metrics, checkpoints) sufficient to resume;
completed work is detected and skipped. Exit code 0 on success, 1 with a
one-line ``error: ...`` on stderr otherwise.

Environment: PRELUDE_RUN_ROOT overrides the default registry root;
PRELUDE_NUM_THREADS pins the BLAS/OpenMP thread count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _thread_pin() -> None:
    n = os.environ.get("PRELUDE_NUM_THREADS")
    if n:
        os.environ["OPENBLAS_NUM_THREADS"] = n
        os.environ["OMP_NUM_THREADS"] = n


class CliError(RuntimeError):
    pass


class RunLock:
    """One process per run directory."""

    def __init__(self, run_dir: Path):
        self.path = Path(run_dir) / ".lock"

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise CliError(f"run directory locked by another process "
                           f"(remove {self.path} if stale)") from None
        os.write(fd, f"{os.getpid()}\n".encode())
        os.close(fd)
        return self

    def __exit__(self, *exc):
        try:
            self.path.unlink()
        except FileNotFoundError:
            pass


def _run_root() -> Path:
    return Path(os.environ.get("PRELUDE_RUN_ROOT", "prelude-runs"))


# ------------------------------------------------------------- subcommands

def cmd_gen_synth(args) -> int:
    from .rng import Rng
    from . import synth, corpus
    cfg = synth.GenConfig()
    if args.config:
        cfg = synth.GenConfig(**json.loads(Path(args.config).read_text()))
    cs = synth.gen_corpus(Rng(args.seed, "synth"), cfg, args.chunks)
    corpus.save_chunks(args.out, cs)
    print(f"wrote {len(cs)} chunks ({cs.vocab_id}) to {args.out}")
    return 0


def cmd_ingest_maestro(args) -> int:
    from . import corpus, miditok
    from .rng import Rng
    grid = miditok.GridSpec(bpm=args.bpm)
    volume = None if args.volume == "all" else int(args.volume.rstrip("k")) * 1000
    cs = corpus.maestro_chunks(args.table, grid, volume,
                               Rng(args.seed, "maestro/subsample"))
    corpus.save_chunks(args.out, cs)
    print(f"wrote {len(cs)} chunks from {cs.provenance.get('pieces')} pieces "
          f"to {args.out}")
    return 0


def _subsample_documents(text: str, fraction: float, seed: int) -> str:
    from .rng import Rng
    docs = [d for d in text.split("\n\n") if d.strip()]
    keep = max(1, int(round(len(docs) * fraction)))
    idx = sorted(Rng(seed, "docs/subsample").choice(len(docs), size=keep,
                                                    replace=False).tolist())
    return "\n\n".join(docs[i] for i in idx)


def _load_codec(spec: str):
    from . import textcodec
    kind, _, rest = spec.partition(":")
    if kind == "word":
        return textcodec.WordCodec.load(rest)
    if kind == "bpe":
        vocab_path, _, merges_path = rest.partition(",")
        if not merges_path:
            raise CliError("bpe codec spec is bpe:<vocab.json>,<merges.txt>")
        return textcodec.ByteBPECodec.from_files(vocab_path, merges_path)
    raise CliError(f"unknown codec spec {spec!r} (word:<path> or "
                   f"bpe:<vocab>,<merges>)")


def cmd_ingest_text(args) -> int:
    from . import corpus, textcodec
    text = Path(args.source).read_text(encoding="utf-8")
    if args.subsample_fraction is not None:
        if not 0 < args.subsample_fraction <= 1:
            raise CliError("subsample fraction must be in (0, 1]")
        text = _subsample_documents(text, args.subsample_fraction, args.seed)
    if args.build_word_codec:
        codec = textcodec.WordCodec.build(text, max_vocab=args.max_vocab)
        codec.save(args.build_word_codec)
        print(f"built word codec ({codec.vocab_size} entries) at "
              f"{args.build_word_codec}")
    else:
        codec = _load_codec(args.codec)
    ids = codec.encode(text)
    cs = corpus.chunk(ids, codec.vocab_id, codec.vocab_size,
                      {"source": str(args.source)})
    corpus.save_chunks(args.out, cs)
    print(f"wrote {len(cs)} chunks ({cs.vocab_id}, vocab {codec.vocab_size}) "
          f"to {args.out}")
    return 0


def cmd_train(args) -> int:
    from . import corpus, train as T, model as M, checkpoint as C
    from .rng import Rng
    cfg_doc = json.loads(Path(args.config).read_text())
    data = corpus.load_chunks(args.data)
    tr, va = corpus.split_train_val(data, cfg_doc.get("val_fraction", 0.1),
                                    Rng(42, f"split/{Path(args.data).stem}"))
    tcfg = T.TrainConfig(**cfg_doc.get("train", {}))
    phase = cfg_doc.get("phase", "phase")
    out = Path(args.out)
    with RunLock(out):
        done = out / "DONE"
        if done.exists():
            print(f"{out} already complete; nothing to do")
            return 0
        if cfg_doc.get("ckpt"):
            model = C.load_checkpoint(cfg_doc["ckpt"]).model()
        else:
            mc = dict(cfg_doc["model"])
            mc.setdefault("vocab_size", data.vocab_size)
            mc.setdefault("seq_len", 256)
            model = M.init(M.ModelConfig.from_dict(mc), Rng(tcfg.seed, "init"))
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.snapshot.json").write_text(json.dumps(
            {"config": cfg_doc, "data": str(args.data), "stop": args.stop},
            indent=2, sort_keys=True))
        res = T.train_phase(model, tr, va, tcfg, stop=args.stop, phase=phase,
                            progress=lambda r: print(
                                f"E{r.epoch}: val_loss={r.val_loss:.4f} "
                                f"val_ppl={r.val_ppl:.1f}"))
        T.write_metrics_jsonl(out / "metrics.jsonl", res.log)
        meta = dict(vocab_id=data.vocab_id, seed=tcfg.seed, phase=phase,
                    best_val_loss=res.best_val_loss, lineage=[])
        C.save_checkpoint(out / "ckpt-best.ckpt", res.model,
                          epoch=res.best_epoch, **meta)
        C.save_checkpoint(out / "ckpt-final.ckpt", res.final_model,
                          epoch=res.log[-1].epoch, **meta)
        done.write_text("ok\n")
    print(f"{phase}: stopped by {res.stop_reason} after {len(res.log)} epochs; "
          f"best val loss {res.best_val_loss:.4f} (epoch {res.best_epoch})")
    return 0


def cmd_transfer(args) -> int:
    from . import checkpoint as C, transfer as X, model as M
    from .rng import Rng
    src = C.load_checkpoint(args.src_ckpt)
    dst_cfg = M.ModelConfig.from_dict({**src.config.to_dict(),
                                       "vocab_size": args.dst_vocab})
    model, lineage = X.selective_transfer(
        src, dst_cfg, X.TransferSpec(), rng=Rng(args.seed),
        src_hash=C.checkpoint_hash(args.src_ckpt))
    C.save_checkpoint(args.out, model, vocab_id=args.dst_vocab_id,
                      seed=args.seed, phase="transfer", epoch=-1,
                      best_val_loss=None, lineage=lineage)
    print(f"transferred {args.src_ckpt} -> {args.out} "
          f"(vocab {src.config.vocab_size} -> {args.dst_vocab})")
    return 0


def cmd_pipeline(args) -> int:
    from . import manifest as MF, runner as R
    if args.manifest in MF.MANIFEST_KINDS:
        conds = MF.build_manifest(args.manifest)
    else:
        conds = MF.conditions_from_json(Path(args.manifest).read_text())
    by_name = {c.name: c for c in conds}
    if args.condition not in by_name:
        raise CliError(f"unknown condition {args.condition!r}; manifest has "
                       f"{sorted(by_name)}")
    cond = by_name[args.condition]
    if args.seed is not None:
        if args.seed not in cond.seeds:
            raise CliError(f"seed {args.seed} not in condition seeds "
                           f"{list(cond.seeds)}")
        cond = MF.Condition(cond.name, cond.d_model, cond.n_heads,
                            cond.phases, (args.seed,), cond.group)
    overrides = {}
    for kv in args.override or []:
        k, _, v = kv.partition("=")
        overrides[k] = json.loads(v)
    reg = R.Registry(args.registry or _run_root())
    with RunLock(reg.root / "runs" / cond.name):
        rows = R.run_condition(cond, reg, train_overrides=overrides or None,
                               progress=print)
    print(f"{cond.name}: {len(rows)} result rows in {reg.root}")
    return 0


def cmd_probe(args) -> int:
    from . import checkpoint as C, corpus, probes
    model = C.load_checkpoint(args.ckpt).model()
    if args.kind == "grammar":
        if not args.data:
            raise CliError("grammar probe needs --data (music chunks)")
        out = probes.probe_grammar(model, corpus.load_chunks(args.data))
        for k, v in out.items():
            print(f"{k}: {v:.4f}")
    elif args.kind == "motif":
        r = probes.probe_motif(model)
        print(f"P(BAR | motif x3) = {r.p_bar:.4f}")
        print(f"P(POS_0 | motif x3, BAR) = {r.p_correct_pos:.4f}")
    elif args.kind == "attention":
        if not args.data:
            raise CliError("attention probe needs --data")
        frac = probes.probe_attention_distance(model, corpus.load_chunks(args.data),
                                               max_rows=args.max_rows)
        for layer in range(frac.shape[0]):
            cells = "  ".join(f"h{h}={frac[layer, h]:.4f}"
                              for h in range(frac.shape[1]))
            print(f"layer {layer}: {cells}")
    return 0


def cmd_stats(args) -> int:
    from . import runner as R, tables as TB
    src = Path(args.results)
    if src.is_dir():
        rows = R.collect_results(R.Registry(src))
    else:
        rows = R.read_results(src)
    if not rows:
        raise CliError(f"no result rows under {src}")
    table = TB.build_table(args.table, rows)
    print(table.render())
    if args.out:
        Path(args.out).write_text(table.to_tsv())
        print(f"wrote {args.out}")
    return 0


def cmd_export_metrics(args) -> int:
    from . import train as T
    run_dir = Path(args.run_dir)
    snap_path = run_dir / "config.snapshot.json"
    if not snap_path.exists():
        raise CliError(f"{run_dir} has no config.snapshot.json")
    snap = json.loads(snap_path.read_text())
    cond = snap.get("condition", {}).get("name", run_dir.parent.name)
    seed = snap.get("seed", 0)
    d_model = snap.get("condition", {}).get("d_model",
                                            snap.get("config", {})
                                            .get("model", {}).get("d_model", 0))
    out_rows = []
    for phase_dir in sorted(run_dir.glob("phase*-*")):
        idx, _, phase = phase_dir.name.partition("-")
        metrics = phase_dir / "metrics.jsonl"
        if not metrics.exists() and (phase_dir / "CACHED").exists():
            cached_ckpt = Path((phase_dir / "CACHED").read_text().strip())
            metrics = cached_ckpt.with_suffix("").with_name(
                cached_ckpt.stem + ".metrics.jsonl")
        if not metrics.exists():
            continue
        for rec in T.read_metrics_jsonl(metrics):
            row = {"condition": cond, "seed": seed, "d_model": d_model,
                   "phase_index": int(idx.replace("phase", ""))}
            row.update(rec.__dict__)
            out_rows.append(row)
    if not out_rows:
        raise CliError(f"no metrics found under {run_dir}")
    with open(args.out, "w", encoding="utf-8") as f:
        for row in out_rows:
            f.write(json.dumps(row, sort_keys=True) + "\n")
    print(f"exported {len(out_rows)} epoch records to {args.out}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="prelude",
        description="staged pre-training workbench (music -> verse -> prose)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-synth", help="generate a synthetic music ChunkSet")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--chunks", type=int, required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", help="JSON file of generator settings")
    s.set_defaults(fn=cmd_gen_synth)

    s = sub.add_parser("ingest-maestro", help="tokenize a per-note table")
    s.add_argument("--table", required=True)
    s.add_argument("--bpm", type=float, default=120.0)
    s.add_argument("--volume", choices=["3k", "12k", "36k", "all"], default="all")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_ingest_maestro)

    s = sub.add_parser("ingest-text", help="encode a text corpus into chunks")
    s.add_argument("--source", required=True)
    s.add_argument("--codec", help="word:<path> or bpe:<vocab.json>,<merges.txt>")
    s.add_argument("--build-word-codec", metavar="PATH",
                   help="build a word codec from the source and save it here")
    s.add_argument("--max-vocab", type=int, default=8192)
    s.add_argument("--subsample-fraction", type=float)
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_ingest_text)

    s = sub.add_parser("train", help="train one phase from a config document")
    s.add_argument("--config", required=True, help="JSON: model/train/phase/ckpt")
    s.add_argument("--data", required=True)
    s.add_argument("--stop", choices=["fixed", "early_stop", "plateau"],
                   default="fixed")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("transfer", help="selective weight transfer to a new vocab")
    s.add_argument("--src-ckpt", required=True)
    s.add_argument("--dst-vocab", type=int, required=True)
    s.add_argument("--dst-vocab-id", default="subword50257")
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_transfer)

    s = sub.add_parser("pipeline", help="run a manifest condition")
    s.add_argument("--manifest", required=True,
                   help="phase1|phase2|phase3|convergence|compute-matched "
                        "or a manifest JSONL file")
    s.add_argument("--condition", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--registry", help="registry root (default $PRELUDE_RUN_ROOT)")
    s.add_argument("--override", action="append", metavar="KEY=JSON",
                   help="train config override, e.g. --override max_epochs=3")
    s.set_defaults(fn=cmd_pipeline)

    s = sub.add_parser("probe", help="behavioral probes on a checkpoint")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--kind", choices=["grammar", "motif", "attention"],
                   required=True)
    s.add_argument("--data", help="ChunkSet for grammar/attention probes")
    s.add_argument("--max-rows", type=int, default=64)
    s.set_defaults(fn=cmd_probe)

    s = sub.add_parser("stats", help="print a result table from raw rows")
    s.add_argument("--results", required=True,
                   help="registry root or a results.jsonl file")
    s.add_argument("--table", choices=["5", "6", "7", "8", "9"], required=True)
    s.add_argument("--out", help="also write the table as TSV")
    s.set_defaults(fn=cmd_stats)

    s = sub.add_parser("export-metrics", help="flatten a run dir to one JSONL")
    s.add_argument("--run-dir", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_export_metrics)
    return p


def main(argv=None) -> int:
    _thread_pin()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # domain errors from the library
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
