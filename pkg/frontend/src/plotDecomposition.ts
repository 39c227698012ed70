/** Decomposition report panels: identity residuals over the (x, sigma) probe
 * grid and the smallness ratio |Delta_A| / sigma^|A| with its refitted
 * slope per subset size. */

import { writeFileSync } from "fs";
import { fitLogLogSlope } from "./fit.js";
import { DECOMP_COLUMNS, SchemaError, readCsv } from "./schema.js";
import { LogLogPanel, svgDocument } from "./svg.js";

export interface DecompositionPlotSpec {
  input: string;
  spec?: string; // filter to one verification spec name
  output: string;
}

export interface DecompositionPlotResult {
  maxResidual: number;
  slopes: Map<number, number>;
  svg: string;
}

export function buildDecompositionPlot(
  spec: DecompositionPlotSpec,
): DecompositionPlotResult {
  const rows = readCsv(spec.input, [...DECOMP_COLUMNS]);
  const wanted = spec.spec
    ? rows.filter((r) => r.spec === spec.spec)
    : rows;
  const identity = wanted.filter((r) => r.check === "identity");
  const smallness = wanted.filter((r) => r.check === "smallness");
  if (identity.length === 0 && smallness.length === 0) {
    throw new SchemaError(`no identity/smallness rows in ${spec.input}`);
  }

  const parts: string[] = [];
  let maxResidual = 0;

  if (identity.length > 0) {
    const sigmas = identity.map((r) => Number(r.sigma));
    const residuals = identity.map((r) => Math.max(Number(r.value), 1e-18));
    const xs = identity.map((r) => Number(r.x0));
    maxResidual = Math.max(...identity.map((r) => Number(r.value)));
    const panel = new LogLogPanel(
      {
        xMin: Math.min(...sigmas) / 1.5,
        xMax: Math.max(...sigmas) * 1.5,
        yMin: Math.min(...residuals) / 3,
        yMax: Math.max(...residuals) * 3,
      },
      70,
      40,
      380,
      300,
    );
    panel.frame("identity residual over probe grid", "sigma_t", "rel residual");
    panel.ticks([...new Set(sigmas)].sort((a, b) => a - b), []);
    // color probes by |x0| so the spatial structure is visible
    const shades = ["#08519c", "#3182bd", "#6baed6", "#bdd7e7"];
    identity.forEach((_, i) => {
      const shade = shades[Math.min(Math.floor(Math.abs(xs[i]) * 4), 3)];
      panel.scatter([sigmas[i]], [residuals[i]], shade, 2.5);
    });
    panel.annotate(`max rel residual = ${maxResidual.toExponential(2)}`);
    parts.push(...panel.parts);
  }

  const slopes = new Map<number, number>();
  if (smallness.length > 0) {
    const bySubset = new Map<number, { sigma: number[]; maxAbs: number[]; ratio: number[] }>();
    for (const row of smallness) {
      const k = Number(row.subset_size);
      const entry = bySubset.get(k) ?? { sigma: [], maxAbs: [], ratio: [] };
      entry.sigma.push(Number(row.sigma));
      entry.maxAbs.push(Number(row.value));
      entry.ratio.push(Number(row.extra));
      bySubset.set(k, entry);
    }
    const allSigma = smallness.map((r) => Number(r.sigma));
    const allRatio = smallness.map((r) => Math.max(Number(r.extra), 1e-18));
    const panel = new LogLogPanel(
      {
        xMin: Math.min(...allSigma) / 1.5,
        xMax: Math.max(...allSigma) * 1.5,
        yMin: Math.min(...allRatio) / 3,
        yMax: Math.max(...allRatio) * 3,
      },
      530,
      40,
      380,
      300,
    );
    panel.frame("smallness ratio |Delta_A| / sigma^|A|", "sigma_t", "ratio");
    panel.ticks([...new Set(allSigma)].sort((a, b) => a - b), []);
    const colors = new Map([[1, "#1f77b4"], [2, "#d62728"], [3, "#2ca02c"]]);
    let line = 0;
    for (const [k, entry] of [...bySubset.entries()].sort((a, b) => a[0] - b[0])) {
      const color = colors.get(k) ?? "#555";
      panel.scatter(entry.sigma, entry.ratio, color, 3);
      const fit = fitLogLogSlope(entry.sigma, entry.maxAbs);
      slopes.set(k, fit.slope);
      panel.annotate(`|A|=${k}: slope ${fit.slope.toFixed(4)}`, line++, color);
    }
    parts.push(...panel.parts);
  }

  return { maxResidual, slopes, svg: svgDocument(980, 400, parts) };
}

export function plotDecomposition(
  spec: DecompositionPlotSpec,
): DecompositionPlotResult {
  const result = buildDecompositionPlot(spec);
  writeFileSync(spec.output, result.svg);
  return result;
}
