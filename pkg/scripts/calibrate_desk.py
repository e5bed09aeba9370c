"""One-off calibration of the desk-scale trend experiment.

Builds the desk corpora, trains the shared music model to early-stop, then
runs random / pretrained / pipeline conditions on 2 seeds and prints every
epoch PPL with timings. Meant for development, not CI.
"""

import json
import sys
import time
from pathlib import Path

from prelude import corpus, manifest, runner, synth, textcodec, textgen
from prelude.rng import Rng

ROOT = Path(sys.argv[1] if len(sys.argv) > 1 else "/tmp/desk-cal")
N_TOKENS = 1_000_000
SEEDS = (42, 123)


def build_registry() -> runner.Registry:
    reg = runner.Registry(ROOT)
    t0 = time.time()
    if not reg.data_path("synth-3k").exists():
        cs = synth.gen_corpus(Rng(42, "synth"), synth.GenConfig(), 3000)
        reg.add_data("synth-3k", cs)
        print(f"synth-3k: {len(cs)} chunks in {time.time()-t0:.0f}s", flush=True)
    t0 = time.time()
    if not reg.data_path("wikitext-10pct").exists():
        prose = textgen.gen_text(Rng(42, "desk/prose"), N_TOKENS, "prose")
        verse = textgen.gen_text(Rng(42, "desk/verse"), N_TOKENS, "verse")
        codec = textcodec.WordCodec.build(prose + "\n" + verse, max_vocab=4096)
        (ROOT / "codec.json").parent.mkdir(parents=True, exist_ok=True)
        codec.save(ROOT / "codec.json")
        reg.add_data("wikitext-10pct",
                     corpus.chunk(codec.encode(prose), codec.vocab_id,
                                  codec.vocab_size, {"style": "prose"}))
        reg.add_data("poetry-36k",
                     corpus.chunk(codec.encode(verse), codec.vocab_id,
                                  codec.vocab_size, {"style": "verse"}))
        print(f"text: vocab={codec.vocab_size}, "
              f"prose={len(reg.load_data('wikitext-10pct'))} chunks, "
              f"verse={len(reg.load_data('poetry-36k'))} chunks "
              f"in {time.time()-t0:.0f}s", flush=True)
    return reg


def conditions():
    music = manifest.PhaseSpec("music", "synth-3k", "early_stop", 200)
    prose3 = manifest.PhaseSpec("prose", "wikitext-10pct", "fixed", 3)
    verse3 = manifest.PhaseSpec("poetry", "poetry-36k", "fixed", 3)
    mk = lambda name, phases: manifest.Condition(name, 16, 1, tuple(phases), SEEDS)
    return [mk("desk-random", [prose3]),
            mk("desk-pretrained", [music, prose3]),
            mk("desk-pipeline", [music, verse3, prose3])]


def main():
    reg = build_registry()
    t_start = time.time()
    for cond in conditions():
        t0 = time.time()
        rows = runner.run_condition(cond, reg, progress=lambda m: print(
            f"  {time.time()-t0:7.0f}s {m}", flush=True))
        print(f"== {cond.name} done in {(time.time()-t0)/60:.1f} min", flush=True)
    print(f"TOTAL {(time.time()-t_start)/60:.1f} min")
    rows = runner.collect_results(reg)
    for cond in ("desk-random", "desk-pretrained", "desk-pipeline"):
        for seed in SEEDS:
            series = sorted([(r.epoch, r.val_ppl) for r in rows
                             if r.condition == cond and r.seed == seed
                             and r.phase == "prose"])
            print(cond, seed, [f"{p:.1f}" for _, p in series])


if __name__ == "__main__":
    main()
