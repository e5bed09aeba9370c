/**
 * Parsers for the two training-export formats this package consumes:
 * per-epoch metrics JSONL (from `prelude export-metrics`) and the
 * scale-interaction table TSV (from `prelude stats --table 8 --out`).
 */

export interface MetricsRow {
  condition: string;
  seed: number;
  d_model: number;
  phase_index: number;
  phase: string;
  epoch: number;
  train_loss: number;
  val_loss: number;
  val_ppl: number;
  steps: number;
  micro_batches: number;
  lr: number;
}

export interface ScaleRow {
  scale: number;      // d_model
  randomPpl: number;
  m12kPpl: number;
  m36kPpl: number;
}

export function parseMetricsJsonl(text: string): MetricsRow[] {
  const rows: MetricsRow[] = [];
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    const obj = JSON.parse(line) as Record<string, unknown>;
    for (const key of ["condition", "phase", "epoch", "val_ppl"]) {
      if (!(key in obj)) {
        throw new Error(`metrics row missing field '${key}': ${line.slice(0, 80)}`);
      }
    }
    rows.push({
      condition: String(obj.condition),
      seed: Number(obj.seed ?? 0),
      d_model: Number(obj.d_model ?? 0),
      phase_index: Number(obj.phase_index ?? 0),
      phase: String(obj.phase),
      epoch: Number(obj.epoch),
      train_loss: Number(obj.train_loss ?? NaN),
      val_loss: Number(obj.val_loss ?? NaN),
      val_ppl: Number(obj.val_ppl),
      steps: Number(obj.steps ?? 0),
      micro_batches: Number(obj.micro_batches ?? 0),
      lr: Number(obj.lr ?? NaN),
    });
  }
  return rows;
}

/** Leading float of a cell like "364.3 (-13.0%)". */
function leadingNumber(cell: string): number {
  const m = cell.trim().match(/^[-+]?\d+(\.\d+)?/);
  if (!m) throw new Error(`cannot parse numeric cell: '${cell}'`);
  return Number(m[0]);
}

export function parseScaleTsv(text: string): ScaleRow[] {
  const lines = text.split("\n").filter((l) => l.trim());
  if (lines.length < 2) throw new Error("scale table is empty");
  const header = lines[0].split("\t").map((h) => h.trim().toLowerCase());
  const col = (name: string): number => {
    const i = header.findIndex((h) => h.startsWith(name));
    if (i < 0) throw new Error(`scale table lacks a '${name}' column`);
    return i;
  };
  const iScale = col("scale");
  const iRandom = col("random");
  const i12 = col("maestro-12k");
  const i36 = col("maestro-36k");
  const rows: ScaleRow[] = [];
  for (const line of lines.slice(1)) {
    const cells = line.split("\t");
    const scaleCell = cells[iScale].trim();
    const m = scaleCell.match(/(\d+)/);
    if (!m) throw new Error(`cannot parse scale cell: '${scaleCell}'`);
    rows.push({
      scale: Number(m[1]),
      randomPpl: leadingNumber(cells[iRandom]),
      m12kPpl: leadingNumber(cells[i12]),
      m36kPpl: leadingNumber(cells[i36]),
    });
  }
  return rows;
}

/** (PPL_12k - PPL_36k) / PPL_12k in percent; positive = 36k is better. */
export function delta1236(row: ScaleRow): number {
  return ((row.m12kPpl - row.m36kPpl) / row.m12kPpl) * 100;
}
