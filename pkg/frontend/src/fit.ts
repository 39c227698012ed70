/** Least-squares slope fitting on logs — an independent reimplementation so
 * the plot annotation cross-validates the benchmark harness's fit. */

export interface SlopeFit {
  slope: number;
  intercept: number;
  stderr: number;
}

export function fitLogLogSlope(xs: number[], ys: number[]): SlopeFit {
  const keep = xs
    .map((x, i) => [x, ys[i]] as const)
    .filter(([x, y]) => x > 0 && y > 0);
  if (keep.length < 2) {
    throw new Error("need at least two positive points for a log-log fit");
  }
  const lx = keep.map(([x]) => Math.log(x));
  const ly = keep.map(([, y]) => Math.log(y));
  const n = lx.length;
  const mx = lx.reduce((a, b) => a + b, 0) / n;
  const my = ly.reduce((a, b) => a + b, 0) / n;
  let sxx = 0;
  let sxy = 0;
  for (let i = 0; i < n; i++) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  const slope = sxy / sxx;
  const intercept = my - slope * mx;
  let rss = 0;
  for (let i = 0; i < n; i++) {
    const resid = ly[i] - (intercept + slope * lx[i]);
    rss += resid * resid;
  }
  const stderr = n > 2 ? Math.sqrt(rss / (n - 2) / sxx) : 0;
  return { slope, intercept, stderr };
}

export function median(values: number[]): number {
  const sorted = [...values].sort((a, b) => a - b);
  const mid = Math.floor(sorted.length / 2);
  return sorted.length % 2 === 1 ? sorted[mid] : (sorted[mid - 1] + sorted[mid]) / 2;
}
