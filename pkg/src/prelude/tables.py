"""Result tables built from raw result rows.

Numbering follows the study's published layout: table 5 is the multi-seed
language-transfer comparison, 6 the compute-matched control, 7 the
single-seed data-volume grid, 8 the scale x data-size interaction, 9 the
per-seed convergence test. Every value is recomputed from the raw per-epoch
rows; nothing is cached.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import stats
from .runner import ResultRow

TABLE_KEYS = ("5", "6", "7", "8", "9")


@dataclass
class Table:
    key: str
    title: str
    headers: list[str]
    rows: list[list[str]]
    raw: dict = field(default_factory=dict)

    def render(self) -> str:
        widths = [max(len(self.headers[i]), *(len(r[i]) for r in self.rows))
                  if self.rows else len(self.headers[i])
                  for i in range(len(self.headers))]
        def line(cells):
            return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
        out = [f"Table {self.key}: {self.title}", line(self.headers),
               line(["-" * w for w in widths])]
        out += [line(r) for r in self.rows]
        return "\n".join(out)

    def to_tsv(self) -> str:
        lines = ["\t".join(self.headers)]
        lines += ["\t".join(r) for r in self.rows]
        return "\n".join(lines) + "\n"


class TableError(ValueError):
    pass


def _prose_ppl(rows, condition, seed, epoch) -> float:
    for r in rows:
        if (r.condition == condition and r.seed == seed
                and r.phase == "prose" and r.epoch == epoch):
            return r.val_ppl
    raise TableError(f"no prose epoch {epoch} row for {condition} s{seed}")


def _prose_final(rows, condition, seed):
    """(epochs run, final val ppl) of the prose phase."""
    mine = [r for r in rows if r.condition == condition and r.seed == seed
            and r.phase == "prose"]
    if not mine:
        raise TableError(f"no prose rows for {condition} s{seed}")
    last = max(mine, key=lambda r: r.epoch)
    return last.epoch + 1, last.val_ppl


def _seeds(rows, condition) -> list[int]:
    return sorted({r.seed for r in rows if r.condition == condition})


def _fmt(x: float, nd=1) -> str:
    return f"{x:.{nd}f}"


def _fmt_pm(s: stats.Summary) -> str:
    return f"{s.mean:.1f} +/- {s.std:.1f}" if s.std is not None else f"{s.mean:.1f}"


def _fmt_p(p: float) -> str:
    return "< 0.001" if p < 0.001 else f"{p:.3f}"


def table5(rows: list[ResultRow], conditions=None, baseline="A-random",
           epochs=(0, 1, 2)) -> Table:
    """Multi-seed prose perplexity per epoch, delta and paired-t vs baseline."""
    conditions = conditions or ["A-random", "B-maestro-12k", "D-synth-36k",
                                "C-pipeline"]
    raw: dict = {"conditions": {}, "baseline": baseline}
    base_seeds = _seeds(rows, baseline)
    base_final = [_prose_ppl(rows, baseline, s, epochs[-1]) for s in base_seeds]
    out_rows = []
    for cond in conditions:
        seeds = _seeds(rows, cond)
        per_epoch = {e: [_prose_ppl(rows, cond, s, e) for s in seeds]
                     for e in epochs}
        summaries = {e: stats.summarize(v) for e, v in per_epoch.items()}
        entry = {"seeds": seeds,
                 "per_epoch": per_epoch,
                 "mean": {e: summaries[e].mean for e in epochs}}
        cells = [cond] + [_fmt_pm(summaries[e]) for e in epochs]
        if cond == baseline:
            cells += ["-", "-"]
        else:
            delta = stats.percent_delta(summaries[epochs[-1]].mean,
                                        stats.summarize(base_final).mean)
            t = stats.paired_t_test(base_final, per_epoch[epochs[-1]])
            entry["delta_vs_baseline"] = delta
            entry["t"] = t.t
            entry["p"] = t.p
            cells += [f"{delta:+.1f}%", _fmt_p(t.p)]
        raw["conditions"][cond] = entry
        out_rows.append(cells)
    return Table("5", "multi-seed language transfer (validation PPL)",
                 ["condition"] + [f"E{e}" for e in epochs] + ["delta", "p"],
                 out_rows, raw)


def _language_batches(rows, condition, seed) -> int:
    """Total micro-batches over the non-music phases of one run."""
    total = 0
    for pi in sorted({r.phase_index for r in rows
                      if r.condition == condition and r.seed == seed
                      and r.phase != "music"}):
        phase_rows = [r for r in rows if r.condition == condition
                      and r.seed == seed and r.phase_index == pi]
        total += max(r.micro_batches for r in phase_rows)
    return total


def table6(rows: list[ResultRow], baseline="A-random",
           matched="compute-matched", pipeline="C-pipeline") -> Table:
    """Compute-matched control: batch budgets, final PPL, p vs pipeline."""
    raw: dict = {}
    out_rows = []
    pipe_seeds = _seeds(rows, pipeline)
    pipe_final = [_prose_final(rows, pipeline, s)[1] for s in pipe_seeds]
    for cond in (baseline, matched, pipeline):
        seeds = _seeds(rows, cond)
        finals = [_prose_final(rows, cond, s)[1] for s in seeds]
        batches = [_language_batches(rows, cond, s) for s in seeds]
        summ = stats.summarize(finals)
        entry = {"seeds": seeds, "final_ppl": finals,
                 "batches": batches, "mean": summ.mean}
        if cond == pipeline:
            p_cell = "-"
        else:
            t = stats.paired_t_test(finals, pipe_final)
            entry["p_vs_pipeline"] = t.p
            entry["t_vs_pipeline"] = t.t
            p_cell = _fmt_p(t.p)
        raw[cond] = entry
        out_rows.append([cond, f"~{round(sum(batches) / len(batches)):,}",
                         _fmt_pm(summ), p_cell])
    return Table("6", "compute-matched control (final prose PPL)",
                 ["condition", "batches", "final PPL", "p vs pipeline"],
                 out_rows, raw)


def table7(rows: list[ResultRow], baseline="random", epochs=(0, 1, 2),
           conditions=None) -> Table:
    """Single-seed data-volume grid: prose PPL per epoch, delta at the end."""
    conditions = conditions or ["random", "synth-3k", "synth-12k", "synth-36k",
                                "maestro-3k", "maestro-12k", "maestro-36k"]
    raw: dict = {}
    seed = _seeds(rows, baseline)[0]
    base = _prose_ppl(rows, baseline, seed, epochs[-1])
    out_rows = []
    for cond in conditions:
        vals = {e: _prose_ppl(rows, cond, seed, e) for e in epochs}
        raw[cond] = vals
        cells = [cond] + [_fmt(vals[e]) for e in epochs]
        if cond == baseline:
            cells.append("-")
        else:
            delta = stats.percent_delta(vals[epochs[-1]], base)
            raw[cond]["delta"] = delta
            cells.append(f"{delta:+.1f}%")
        out_rows.append(cells)
    return Table("7", "data volume grid, single seed (validation PPL)",
                 ["condition"] + [f"E{e}" for e in epochs] + ["delta"],
                 out_rows, raw)


def table8(rows: list[ResultRow], scales=(16, 32, 64), epoch=2) -> Table:
    """Scale x data-size interaction at the final prose epoch.

    delta_12_36 = (PPL_12k - PPL_36k) / PPL_12k, positive when the larger
    dataset wins.
    """
    raw: dict = {"scales": list(scales), "epoch": epoch}
    out_rows = []
    for d in scales:
        seed = _seeds(rows, f"random-d{d}")[0]
        rnd = _prose_ppl(rows, f"random-d{d}", seed, epoch)
        m12 = _prose_ppl(rows, f"maestro-12k-d{d}", seed, epoch)
        m36 = _prose_ppl(rows, f"maestro-36k-d{d}", seed, epoch)
        d12 = stats.percent_delta(m12, rnd)
        d36 = stats.percent_delta(m36, rnd)
        d1236 = (m12 - m36) / m12 * 100.0
        raw[d] = {"random": rnd, "m12k": m12, "m36k": m36,
                  "delta_r_12k": d12, "delta_r_36k": d36, "delta_12_36": d1236}
        out_rows.append([f"d={d}", _fmt(rnd), f"{_fmt(m12)} ({d12:+.1f}%)",
                         f"{_fmt(m36)} ({d36:+.1f}%)", f"{d1236:+.1f}%"])
    return Table("8", "scale x data-size interaction (prose PPL)",
                 ["scale", "random", "maestro-12k (dR)", "maestro-36k (dR)",
                  "delta_12/36"], out_rows, raw)


def table9(rows: list[ResultRow], random_cond="conv-random-d64",
           pipeline_cond="conv-pipeline-d64") -> Table:
    """Per-seed convergence test: plateau PPL and epochs, gap, paired t."""
    seeds = _seeds(rows, random_cond)
    if seeds != _seeds(rows, pipeline_cond):
        raise TableError("convergence conditions ran different seed sets")
    raw: dict = {"seeds": seeds, "random": [], "pipeline": [], "gap": [],
                 "random_epochs": [], "pipeline_epochs": []}
    out_rows = []
    for s in seeds:
        re_, rppl = _prose_final(rows, random_cond, s)
        pe_, pppl = _prose_final(rows, pipeline_cond, s)
        gap = stats.percent_delta(pppl, rppl)
        raw["random"].append(rppl)
        raw["pipeline"].append(pppl)
        raw["random_epochs"].append(re_)
        raw["pipeline_epochs"].append(pe_)
        raw["gap"].append(gap)
        out_rows.append([str(s), f"{_fmt(rppl)} ({re_})", f"{_fmt(pppl)} ({pe_})",
                         f"{gap:+.1f}%"])
    rs = stats.summarize(raw["random"])
    ps = stats.summarize(raw["pipeline"])
    mean_gap = sum(raw["gap"]) / len(raw["gap"])
    t = stats.paired_t_test(raw["random"], raw["pipeline"])
    raw["random_summary"] = (rs.mean, rs.std)
    raw["pipeline_summary"] = (ps.mean, ps.std)
    raw["mean_gap"] = mean_gap
    raw["t"] = t.t
    raw["p"] = t.p
    out_rows.append(["mean +/- std", _fmt_pm(rs), _fmt_pm(ps), f"{mean_gap:+.1f}%"])
    out_rows.append(["paired t", f"t = {t.t:.2f}", f"p = {t.p:.3f}", ""])
    return Table("9", "convergence to plateau, per seed",
                 ["seed", "random PPL (ep)", "pipeline PPL (ep)", "gap"],
                 out_rows, raw)


BUILDERS = {"5": table5, "6": table6, "7": table7, "8": table8, "9": table9}


def build_table(key: str, rows: list[ResultRow], **kw) -> Table:
    if key not in BUILDERS:
        raise TableError(f"unknown table {key!r}; expected one of {TABLE_KEYS}")
    return BUILDERS[key](rows, **kw)
