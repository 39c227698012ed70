/** Bench CSV schema contract (mirrors scorelab.bench RATE_COLUMNS v1). */

import { readFileSync } from "fs";
import Papa from "papaparse";

export const RATE_COLUMNS = [
  "schema_version",
  "code_version",
  "config_hash",
  "density_hash",
  "seed",
  "d",
  "dstar",
  "beta",
  "n",
  "width",
  "depth",
  "trunc_B",
  "t_lo",
  "t_hi",
  "sampler_steps",
  "chains",
  "piecewise",
  "oracle_score",
  "tv_hist",
  "tv_hist_clipped",
  "tv_method",
  "marginal_tv",
  "w1_value",
  "w1_stderr",
  "w1_method",
  "score_l2_lo",
  "score_l2_mid",
  "score_l2_hi",
  "train_loss_final",
  "val_loss_best",
  "outside_frac",
  "wall_train_ms",
  "wall_sample_ms",
] as const;

export const DECOMP_COLUMNS = [
  "spec",
  "check",
  "subset_size",
  "t",
  "sigma",
  "x0",
  "x1",
  "value",
  "extra",
] as const;

export type CsvRow = Record<string, string>;

export class SchemaError extends Error {}

/** Parse a CSV file and require the given columns to be present. */
export function readCsv(path: string, required: readonly string[]): CsvRow[] {
  const text = readFileSync(path, "utf8");
  const parsed = Papa.parse<CsvRow>(text.trim(), {
    header: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new SchemaError(`CSV parse error in ${path}: ${parsed.errors[0].message}`);
  }
  const fields = parsed.meta.fields ?? [];
  for (const col of required) {
    if (!fields.includes(col)) {
      throw new SchemaError(`missing column '${col}' in ${path}`);
    }
  }
  if (parsed.data.length === 0) {
    throw new SchemaError(`no data rows in ${path}`);
  }
  return parsed.data;
}

export function numeric(rows: CsvRow[], column: string): number[] {
  return rows.map((row) => {
    const value = Number(row[column]);
    if (!Number.isFinite(value)) {
      throw new SchemaError(`non-numeric value '${row[column]}' in column '${column}'`);
    }
    return value;
  });
}
