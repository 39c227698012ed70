import { existsSync, mkdtempSync, readFileSync, writeFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";
import { fitLogLogSlope } from "../src/fit.js";
import { buildDecompositionPlot, plotDecomposition } from "../src/plotDecomposition.js";
import { DECOMP_COLUMNS, SchemaError } from "../src/schema.js";

const FIXTURE = join(__dirname, "..", "fixtures", "decomp_kink.csv");

describe("plotDecomposition", () => {
  it("renders the shipped verifier fixture with refit slope annotations", () => {
    const dir = mkdtempSync(join(tmpdir(), "scorelab-plots-"));
    const out = join(dir, "decomp.svg");
    const result = plotDecomposition({ input: FIXTURE, output: out });
    // the kink-pair spec scales like sigma^|A|
    expect(result.slopes.get(1)!).toBeCloseTo(1.0, 1);
    expect(result.slopes.get(2)!).toBeCloseTo(2.0, 1);
    expect(result.maxResidual).toBeLessThan(1e-3);
    const svg = readFileSync(out, "utf8");
    expect(svg).toContain("smallness ratio");
    expect(svg).toContain(`|A|=1: slope ${result.slopes.get(1)!.toFixed(4)}`);
  });

  it("slope annotation equals an independent refit of the same CSV", () => {
    const text = readFileSync(FIXTURE, "utf8").trim().split("\n");
    const header = text[0].split(",");
    const rows = text.slice(1).map((line) => {
      const cells = line.split(",");
      return Object.fromEntries(header.map((h, i) => [h, cells[i]]));
    });
    const small = rows.filter(
      (r) => r.check === "smallness" && r.subset_size === "1",
    );
    const refit = fitLogLogSlope(
      small.map((r) => Number(r.sigma)),
      small.map((r) => Number(r.value)),
    );
    const dir = mkdtempSync(join(tmpdir(), "scorelab-plots-"));
    const result = buildDecompositionPlot({
      input: FIXTURE,
      output: join(dir, "x.svg"),
    });
    expect(result.slopes.get(1)!).toBeCloseTo(refit.slope, 12);
  });

  it("constructed exact-power-law input is annotated exactly", () => {
    const dir = mkdtempSync(join(tmpdir(), "scorelab-plots-"));
    const csv = join(dir, "decomp.csv");
    const lines = [DECOMP_COLUMNS.join(",")];
    for (const sigma of [0.001, 0.01, 0.1]) {
      const value = 0.4 * sigma; // exact slope 1
      lines.push(
        `demo,smallness,1,,${sigma},,,${value},${value / sigma}`,
      );
    }
    writeFileSync(csv, lines.join("\n") + "\n");
    const result = buildDecompositionPlot({ input: csv, output: join(dir, "y.svg") });
    expect(result.slopes.get(1)!.toFixed(4)).toBe("1.0000");
  });

  it("raises a schema error on empty input and writes nothing", () => {
    const dir = mkdtempSync(join(tmpdir(), "scorelab-plots-"));
    const csv = join(dir, "empty.csv");
    writeFileSync(csv, DECOMP_COLUMNS.join(",") + "\n");
    const out = join(dir, "never.svg");
    expect(() => plotDecomposition({ input: csv, output: out })).toThrow(SchemaError);
    expect(existsSync(out)).toBe(false);
  });
});
