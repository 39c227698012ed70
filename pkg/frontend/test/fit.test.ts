import { describe, expect, it } from "vitest";
import { fitLogLogSlope, median } from "../src/fit.js";

describe("fitLogLogSlope", () => {
  it("recovers an exact power law", () => {
    const xs = [4096, 16384, 65536, 262144];
    const ys = xs.map((x) => 2.5 * Math.pow(x, -1 / 3));
    const fit = fitLogLogSlope(xs, ys);
    expect(fit.slope).toBeCloseTo(-1 / 3, 10);
    expect(fit.stderr).toBeCloseTo(0, 8);
  });

  it("matches an independent normal-equations solve", () => {
    const xs = [1000, 2000, 4000, 8000];
    const ys = [0.5, 0.37, 0.26, 0.19];
    const fit = fitLogLogSlope(xs, ys);
    // reference: closed-form simple regression on logs
    const lx = xs.map(Math.log);
    const ly = ys.map(Math.log);
    const n = lx.length;
    const sx = lx.reduce((a, b) => a + b, 0);
    const sy = ly.reduce((a, b) => a + b, 0);
    const sxx = lx.reduce((a, b) => a + b * b, 0);
    const sxy = lx.reduce((a, b, i) => a + b * ly[i], 0);
    const slopeRef = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    expect(fit.slope).toBeCloseTo(slopeRef, 12);
  });

  it("rejects degenerate input", () => {
    expect(() => fitLogLogSlope([1], [2])).toThrow();
  });
});

describe("median", () => {
  it("handles odd and even lengths", () => {
    expect(median([3, 1, 2])).toBe(2);
    expect(median([4, 1, 3, 2])).toBe(2.5);
  });
});
