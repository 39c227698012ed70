/** Command line: plot-rate <spec.json> | plot-decomposition <spec.json>.
 * The spec JSON mirrors the PlotSpec interfaces (inputs, metric, groupBy,
 * referenceSlope, output). */

import { readFileSync } from "fs";
import { plotDecomposition } from "./plotDecomposition.js";
import { plotRate } from "./plotRate.js";

export function main(argv: string[]): number {
  const [command, specPath] = argv;
  if (!command || !specPath) {
    console.error("usage: cli.js plot-rate|plot-decomposition <spec.json>");
    return 2;
  }
  const spec = JSON.parse(readFileSync(specPath, "utf8"));
  if (command === "plot-rate") {
    const result = plotRate(spec);
    console.log(
      `wrote ${spec.output}: slope ${result.slope.toFixed(4)} ` +
        `± ${result.stderr.toFixed(4)} over n = ${result.ns.join(", ")}`,
    );
    return 0;
  }
  if (command === "plot-decomposition") {
    const result = plotDecomposition(spec);
    const slopes = [...result.slopes.entries()]
      .map(([k, s]) => `|A|=${k}: ${s.toFixed(4)}`)
      .join("; ");
    console.log(`wrote ${spec.output}: max residual ${result.maxResidual.toExponential(2)}; ${slopes}`);
    return 0;
  }
  console.error(`unknown command ${command}`);
  return 2;
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
