/** Log-log rate plot: per-group medians of a metric vs n, a fitted power
 * law, and a dashed reference-rate line. The slope annotation is this
 * package's own least-squares refit (4 decimals), cross-validating the
 * benchmark harness. */

import { writeFileSync } from "fs";
import { fitLogLogSlope, median } from "./fit.js";
import { CsvRow, RATE_COLUMNS, SchemaError, numeric, readCsv } from "./schema.js";
import { LogLogPanel, svgDocument } from "./svg.js";

export interface RatePlotSpec {
  inputs: string[];
  metric: string;
  groupBy?: string;          // default "n"
  referenceSlope?: number;   // e.g. -1/3
  output: string;
}

export interface RatePlotResult {
  slope: number;
  stderr: number;
  ns: number[];
  medians: number[];
  svg: string;
}

export function buildRatePlot(spec: RatePlotSpec): RatePlotResult {
  const groupBy = spec.groupBy ?? "n";
  const rows: CsvRow[] = spec.inputs.flatMap((path) =>
    readCsv(path, [...RATE_COLUMNS]),
  );
  if (!RATE_COLUMNS.includes(spec.metric as (typeof RATE_COLUMNS)[number])) {
    throw new SchemaError(`metric '${spec.metric}' is not a rate CSV column`);
  }
  const keys = numeric(rows, groupBy);
  const vals = numeric(rows, spec.metric);
  const groups = new Map<number, number[]>();
  keys.forEach((key, i) => {
    const bucket = groups.get(key) ?? [];
    bucket.push(vals[i]);
    groups.set(key, bucket);
  });
  const ns = [...groups.keys()].sort((a, b) => a - b);
  if (ns.length < 3) {
    throw new SchemaError(`need >= 3 distinct ${groupBy} values, got ${ns.length}`);
  }
  const medians = ns.map((n) => median(groups.get(n)!));
  const fit = fitLogLogSlope(ns, medians);

  const pad = 1.6;
  const panel = new LogLogPanel(
    {
      xMin: Math.min(...ns) / pad,
      xMax: Math.max(...ns) * pad,
      yMin: Math.min(...vals.filter((v) => v > 0)) / pad,
      yMax: Math.max(...vals) * pad,
    },
    70,
    40,
    480,
    330,
  );
  panel.frame(`${spec.metric} vs ${groupBy}`, groupBy, spec.metric);
  panel.ticks(ns, medians);
  panel.scatter(keys, vals, "#9ecae1", 2.5);
  panel.scatter(ns, medians, "#1f77b4", 4);
  panel.powerLine(fit.slope, fit.intercept, "#d62728");
  panel.annotate(`slope = ${fit.slope.toFixed(4)} ± ${fit.stderr.toFixed(4)}`, 0, "#d62728");
  if (spec.referenceSlope !== undefined) {
    // anchor the reference line at the first median
    const intercept = Math.log(medians[0]) - spec.referenceSlope * Math.log(ns[0]);
    panel.powerLine(spec.referenceSlope, intercept, "#555", true);
    panel.annotate(`reference slope = ${spec.referenceSlope.toFixed(4)}`, 1, "#555");
  }
  const svg = svgDocument(620, 420, panel.parts);
  return { slope: fit.slope, stderr: fit.stderr, ns, medians, svg };
}

export function plotRate(spec: RatePlotSpec): RatePlotResult {
  const result = buildRatePlot(spec);
  writeFileSync(spec.output, result.svg);
  return result;
}
