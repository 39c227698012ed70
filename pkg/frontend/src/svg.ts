/** Minimal SVG builder: scatter, lines, and text on log-log axes. No DOM. */

export interface Bounds {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

export class LogLogPanel {
  readonly parts: string[] = [];
  constructor(
    readonly bounds: Bounds,
    readonly x0: number,
    readonly y0: number,
    readonly width: number,
    readonly height: number,
  ) {}

  px(x: number): number {
    const { xMin, xMax } = this.bounds;
    return this.x0 + ((Math.log(x) - Math.log(xMin)) / (Math.log(xMax) - Math.log(xMin))) * this.width;
  }

  py(y: number): number {
    const { yMin, yMax } = this.bounds;
    return this.y0 + this.height - ((Math.log(y) - Math.log(yMin)) / (Math.log(yMax) - Math.log(yMin))) * this.height;
  }

  frame(title: string, xLabel: string, yLabel: string): void {
    this.parts.push(
      `<rect x="${this.x0}" y="${this.y0}" width="${this.width}" height="${this.height}" fill="none" stroke="#333"/>`,
      `<text x="${this.x0 + this.width / 2}" y="${this.y0 - 8}" text-anchor="middle" font-size="13">${title}</text>`,
      `<text x="${this.x0 + this.width / 2}" y="${this.y0 + this.height + 28}" text-anchor="middle" font-size="11">${xLabel}</text>`,
      `<text x="${this.x0 - 42}" y="${this.y0 + this.height / 2}" text-anchor="middle" font-size="11" transform="rotate(-90 ${this.x0 - 42} ${this.y0 + this.height / 2})">${yLabel}</text>`,
    );
  }

  ticks(xs: number[], ys: number[], fmt: (v: number) => string = (v) => v.toPrecision(2)): void {
    for (const x of xs) {
      const px = this.px(x);
      this.parts.push(
        `<line x1="${px}" y1="${this.y0 + this.height}" x2="${px}" y2="${this.y0 + this.height + 4}" stroke="#333"/>`,
        `<text x="${px}" y="${this.y0 + this.height + 15}" text-anchor="middle" font-size="9">${fmt(x)}</text>`,
      );
    }
    for (const y of ys) {
      const py = this.py(y);
      this.parts.push(
        `<line x1="${this.x0 - 4}" y1="${py}" x2="${this.x0}" y2="${py}" stroke="#333"/>`,
        `<text x="${this.x0 - 6}" y="${py + 3}" text-anchor="end" font-size="9">${fmt(y)}</text>`,
      );
    }
  }

  scatter(xs: number[], ys: number[], color = "#1f77b4", r = 3): void {
    for (let i = 0; i < xs.length; i++) {
      this.parts.push(
        `<circle cx="${this.px(xs[i])}" cy="${this.py(ys[i])}" r="${r}" fill="${color}" fill-opacity="0.8"/>`,
      );
    }
  }

  /** Straight line in log-log space: log y = intercept + slope * log x. */
  powerLine(slope: number, intercept: number, color: string, dashed = false): void {
    const { xMin, xMax } = this.bounds;
    const y = (x: number) => Math.exp(intercept + slope * Math.log(x));
    const dash = dashed ? ' stroke-dasharray="6 4"' : "";
    this.parts.push(
      `<line x1="${this.px(xMin)}" y1="${this.py(y(xMin))}" x2="${this.px(xMax)}" y2="${this.py(y(xMax))}" stroke="${color}" stroke-width="1.5"${dash}/>`,
    );
  }

  annotate(text: string, line = 0, color = "#333"): void {
    this.parts.push(
      `<text x="${this.x0 + 10}" y="${this.y0 + 16 + 14 * line}" font-size="11" fill="${color}">${text}</text>`,
    );
  }
}

export function svgDocument(width: number, height: number, body: string[]): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    ...body,
    "</svg>",
  ].join("\n");
}
