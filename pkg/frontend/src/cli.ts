/**
 * Render figures from training exports.
 *
 * Usage:
 *   prelude-figures curves <metrics.jsonl...> --out curves.svg [--phase prose]
 *   prelude-figures interaction <table8.tsv> --out interaction.svg
 */

import { readFileSync, writeFileSync } from "fs";
import { parseMetricsJsonl, parseScaleTsv } from "./data.js";
import { plotLearningCurves } from "./learningCurves.js";
import { plotScaleInteraction } from "./scaleInteraction.js";

function parseArgs(argv: string[]) {
  const positional: string[] = [];
  const flags = new Map<string, string>();
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a.startsWith("--")) {
      flags.set(a.slice(2), argv[++i] ?? "");
    } else {
      positional.push(a);
    }
  }
  return { positional, flags };
}

export function main(argv: string[]): number {
  const { positional, flags } = parseArgs(argv);
  const [command, ...inputs] = positional;
  const out = flags.get("out");
  try {
    if (command === "curves") {
      if (inputs.length === 0 || !out) {
        throw new Error("usage: curves <metrics.jsonl...> --out fig.svg");
      }
      const rows = inputs.flatMap((p) => parseMetricsJsonl(readFileSync(p, "utf-8")));
      const svg = plotLearningCurves(rows, { phase: flags.get("phase") ?? "prose" });
      writeFileSync(out, svg);
      console.log(`wrote ${out} (${rows.length} epoch rows)`);
      return 0;
    }
    if (command === "interaction") {
      if (inputs.length !== 1 || !out) {
        throw new Error("usage: interaction <table8.tsv> --out fig.svg");
      }
      const result = plotScaleInteraction(parseScaleTsv(readFileSync(inputs[0], "utf-8")));
      writeFileSync(out, result.svg);
      console.log(`wrote ${out} (delta_12/36: ${result.deltaLabels.join(" -> ")})`);
      return 0;
    }
    throw new Error(`unknown command '${command ?? ""}' (curves | interaction)`);
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

if (process.argv[1] && /cli\.(ts|js)$/.test(process.argv[1])) {
  process.exit(main(process.argv.slice(2)));
}
