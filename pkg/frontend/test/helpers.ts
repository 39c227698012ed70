import { writeFileSync } from "fs";
import { RATE_COLUMNS } from "../src/schema.js";

/** Build a full-schema rate CSV with given (n, seed, metric value) rows. */
export function writeRateCsv(
  path: string,
  rows: Array<{ n: number; seed: number; tv: number }>,
): void {
  const lines = [RATE_COLUMNS.join(",")];
  for (const { n, seed, tv } of rows) {
    const record: Record<string, string> = {
      schema_version: "1",
      code_version: "scorelab-0.1.0",
      config_hash: "fixture",
      density_hash: "fixture",
      seed: String(seed),
      d: "1",
      dstar: "1",
      beta: "1.0",
      n: String(n),
      width: "8",
      depth: "1",
      trunc_B: "10.0",
      t_lo: "1e-4",
      t_hi: "3.0",
      sampler_steps: "500",
      chains: String(n),
      piecewise: "False",
      oracle_score: "False",
      tv_hist: String(tv * 1.2),
      tv_hist_clipped: String(tv),
      tv_method: "histogram",
      marginal_tv: String(tv),
      w1_value: String(tv / 4),
      w1_stderr: "0.001",
      w1_method: "exact-1d",
      score_l2_lo: "nan",
      score_l2_mid: "nan",
      score_l2_hi: "nan",
      train_loss_final: "1.0",
      val_loss_best: "1.0",
      outside_frac: "0.0",
      wall_train_ms: "0",
      wall_sample_ms: "0",
    };
    lines.push(RATE_COLUMNS.map((c) => record[c]).join(","));
  }
  writeFileSync(path, lines.join("\n") + "\n");
}
