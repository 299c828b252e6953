/** Deterministic hand-rolled SVG: same data in, identical bytes out. */

export const WIDTH = 720;
export const HEIGHT = 440;
export const MARGIN = { left: 70, right: 170, top: 36, bottom: 56 };

export const PALETTE = [
  "#1f77b4",
  "#d62728",
  "#2ca02c",
  "#9467bd",
  "#ff7f0e",
  "#8c564b",
];

export interface Series {
  label: string;
  points: Array<{ x: number; y: number }>;
}

export interface BarGroup {
  label: string;
  bars: Array<{ label: string; value: number }>;
}

/** Fixed-precision formatting so output never depends on float noise. */
export function fmt(value: number): string {
  return value.toFixed(3).replace(/\.?0+$/, "") || "0";
}

function plotArea() {
  return {
    x0: MARGIN.left,
    y0: MARGIN.top,
    w: WIDTH - MARGIN.left - MARGIN.right,
    h: HEIGHT - MARGIN.top - MARGIN.bottom,
  };
}

function yTicks(max: number): number[] {
  const raw = max / 4;
  const mag = Math.pow(10, Math.floor(Math.log10(raw || 1)));
  const step = [1, 2, 2.5, 5, 10].map((m) => m * mag).find((s) => max / s <= 5)!;
  const ticks: number[] = [];
  for (let v = 0; v <= max + 1e-9; v += step) {
    ticks.push(v);
  }
  return ticks;
}

function header(title: string): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" ` +
    `height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" ` +
    `font-family="sans-serif" font-size="12">\n` +
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>\n` +
    `<text x="${WIDTH / 2}" y="20" text-anchor="middle" ` +
    `font-size="15">${esc(title)}</text>\n`
  );
}

function axes(maxY: number, yLabel: string): { svg: string; scaleY: (v: number) => number } {
  const { x0, y0, w, h } = plotArea();
  const top = maxY <= 0 ? 1 : maxY * 1.05;
  const scaleY = (v: number) => y0 + h - (v / top) * h;
  let svg = `<g stroke="#222" fill="none">`;
  svg += `<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y0 + h}"/>`;
  svg += `<line x1="${x0}" y1="${y0 + h}" x2="${x0 + w}" y2="${y0 + h}"/>`;
  svg += `</g>\n`;
  for (const tick of yTicks(top)) {
    const y = scaleY(tick);
    svg +=
      `<line x1="${x0 - 4}" y1="${fmt(y)}" x2="${x0 + w}" y2="${fmt(y)}" ` +
      `stroke="#ddd"/>` +
      `<text x="${x0 - 8}" y="${fmt(y + 4)}" text-anchor="end">` +
      `${fmt(tick)}</text>\n`;
  }
  svg +=
    `<text x="16" y="${y0 + h / 2}" transform="rotate(-90 16 ${y0 + h / 2})" ` +
    `text-anchor="middle">${esc(yLabel)}</text>\n`;
  return { svg, scaleY };
}

function legend(labels: string[]): string {
  const { x0, y0, w } = plotArea();
  let svg = "";
  labels.forEach((label, i) => {
    const y = y0 + 12 + i * 18;
    svg +=
      `<rect x="${x0 + w + 14}" y="${y - 9}" width="12" height="12" ` +
      `fill="${PALETTE[i % PALETTE.length]}"/>` +
      `<text x="${x0 + w + 30}" y="${y + 1}">${esc(label)}</text>\n`;
  });
  return svg;
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Line chart: shared numeric x positions, one polyline per series. */
export function lineChart(
  title: string,
  xLabel: string,
  yLabel: string,
  xValues: number[],
  series: Series[],
): string {
  const { x0, y0, w, h } = plotArea();
  const maxY = Math.max(...series.flatMap((s) => s.points.map((p) => p.y)));
  const { svg: axesSvg, scaleY } = axes(maxY, yLabel);
  const scaleX = (i: number) =>
    x0 + (xValues.length === 1 ? w / 2 : (i / (xValues.length - 1)) * w);

  let svg = header(title) + axesSvg;
  xValues.forEach((x, i) => {
    svg +=
      `<text x="${fmt(scaleX(i))}" y="${y0 + h + 18}" text-anchor="middle">` +
      `${x}</text>\n`;
  });
  svg += `<text x="${x0 + w / 2}" y="${HEIGHT - 12}" text-anchor="middle">${esc(
    xLabel,
  )}</text>\n`;
  series.forEach((s, si) => {
    const color = PALETTE[si % PALETTE.length];
    const pts = s.points
      .map((p) => `${fmt(scaleX(xValues.indexOf(p.x)))},${fmt(scaleY(p.y))}`)
      .join(" ");
    svg += `<polyline fill="none" stroke="${color}" stroke-width="2" points="${pts}"/>\n`;
    for (const p of s.points) {
      svg +=
        `<circle cx="${fmt(scaleX(xValues.indexOf(p.x)))}" ` +
        `cy="${fmt(scaleY(p.y))}" r="3" fill="${color}"/>\n`;
    }
  });
  svg += legend(series.map((s) => s.label));
  return svg + "</svg>\n";
}

/** Grouped bar chart: clusters on the x axis, one color per bar label. */
export function barChart(
  title: string,
  xLabel: string,
  yLabel: string,
  groups: BarGroup[],
  referenceLine?: number,
): string {
  const { x0, y0, w, h } = plotArea();
  const labels = uniqueLabels(groups);
  const maxY = Math.max(...groups.flatMap((g) => g.bars.map((b) => b.value)));
  const { svg: axesSvg, scaleY } = axes(maxY, yLabel);
  const groupWidth = w / groups.length;
  const barWidth = (groupWidth * 0.7) / Math.max(labels.length, 1);

  let svg = header(title) + axesSvg;
  groups.forEach((group, gi) => {
    const gx = x0 + gi * groupWidth;
    svg +=
      `<text x="${fmt(gx + groupWidth / 2)}" y="${y0 + h + 18}" ` +
      `text-anchor="middle">${esc(group.label)}</text>\n`;
    group.bars.forEach((bar) => {
      const li = labels.indexOf(bar.label);
      const bx = gx + groupWidth * 0.15 + li * barWidth;
      const by = scaleY(bar.value);
      svg +=
        `<rect x="${fmt(bx)}" y="${fmt(by)}" width="${fmt(barWidth * 0.9)}" ` +
        `height="${fmt(y0 + h - by)}" fill="${PALETTE[li % PALETTE.length]}"/>\n`;
    });
  });
  if (referenceLine !== undefined && referenceLine * 1.05 <= maxY * 1.05) {
    const ry = scaleY(referenceLine);
    svg +=
      `<line x1="${x0}" y1="${fmt(ry)}" x2="${x0 + w}" y2="${fmt(ry)}" ` +
      `stroke="#555" stroke-dasharray="4 3"/>\n`;
  }
  svg += `<text x="${x0 + w / 2}" y="${HEIGHT - 12}" text-anchor="middle">${esc(
    xLabel,
  )}</text>\n`;
  svg += legend(labels);
  return svg + "</svg>\n";
}

function uniqueLabels(groups: BarGroup[]): string[] {
  const seen: string[] = [];
  for (const group of groups) {
    for (const bar of group.bars) {
      if (!seen.includes(bar.label)) {
        seen.push(bar.label);
      }
    }
  }
  return seen;
}
