/** The three chart kinds over benchmark rows.
 *
 * Every function is a pure function of the parsed rows: identical CSV input
 * yields byte-identical SVG output. Each returned chart also carries its
 * plotted data series so tests can pin them without touching markup.
 */

import { Row, meanBy, uniqueSorted } from "./csv.js";
import { BarGroup, Series, barChart, lineChart } from "./svg.js";

export interface Chart {
  name: string;
  svg: string;
  /** the numbers that were plotted, for golden tests */
  data: unknown;
}

function slug(...parts: Array<string | number>): string {
  return parts.join("-").replace(/[^A-Za-z0-9._-]+/g, "_");
}

/** Throughput vs. thread count, one chart per (ds, mix), series = variant. */
export function plotScaling(rows: Row[]): Chart[] {
  const charts: Chart[] = [];
  const groups = uniqueSorted(rows.map((r) => `${r.ds}|${r.mix}`));
  for (const group of groups) {
    const [ds, mix] = group.split("|");
    const subset = rows.filter((r) => r.ds === ds && r.mix === mix);
    const threads = uniqueSorted(subset.map((r) => r.threads));
    if (threads.length < 2) {
      continue; // a single point is not a scaling curve
    }
    const means = meanBy(subset, (r) => `${r.variant}|${r.threads}`);
    const variants = uniqueSorted(subset.map((r) => r.variant));
    const series: Series[] = variants.map((variant) => ({
      label: variant,
      points: threads.flatMap((t) => {
        const mean = means.get(`${variant}|${t}`);
        return mean === undefined ? [] : [{ x: t, y: mean }];
      }),
    }));
    charts.push({
      name: `scaling-${slug(ds, mix)}.svg`,
      svg: lineChart(
        `${ds} ${mix}: throughput vs threads`,
        "threads",
        "ops/s",
        threads,
        series,
      ),
      data: { ds, mix, series },
    });
  }
  if (charts.length === 0) {
    throw new Error(
      "no (ds, mix) group has at least two thread counts to plot",
    );
  }
  return charts;
}

/** Bundle/unsafe throughput ratio, grouped by range-query size; bars within
 * a group ordered by thread count. One chart per (ds, mix). */
export function plotRelative(rows: Row[]): Chart[] {
  const charts: Chart[] = [];
  const groups = uniqueSorted(
    rows.filter((r) => r.variant === "bundle").map((r) => `${r.ds}|${r.mix}`),
  );
  for (const group of groups) {
    const [ds, mix] = group.split("|");
    const subset = rows.filter((r) => r.ds === ds && r.mix === mix);
    if (!subset.some((r) => r.variant === "unsafe")) {
      continue; // not a comparative experiment (e.g. a relaxation sweep)
    }
    const means = meanBy(subset, (r) => `${r.variant}|${r.rqsize}|${r.threads}`);
    const rqsizes = uniqueSorted(subset.map((r) => r.rqsize));
    const threads = uniqueSorted(subset.map((r) => r.threads));
    const barGroups: BarGroup[] = [];
    for (const rqsize of rqsizes) {
      const bars: BarGroup["bars"] = [];
      for (const t of threads) {
        const bundle = means.get(`bundle|${rqsize}|${t}`);
        if (bundle === undefined) {
          continue;
        }
        const unsafe = means.get(`unsafe|${rqsize}|${t}`);
        if (unsafe === undefined) {
          throw new Error(
            `no matching unsafe run for ${ds} mix=${mix} ` +
              `rqsize=${rqsize} threads=${t}`,
          );
        }
        bars.push({ label: `${t} threads`, value: bundle / unsafe });
      }
      if (bars.length > 0) {
        barGroups.push({ label: `rq ${rqsize}`, bars });
      }
    }
    if (barGroups.length === 0) {
      continue;
    }
    charts.push({
      name: `relative-${slug(ds, mix)}.svg`,
      svg: barChart(
        `${ds} ${mix}: throughput relative to unsafe`,
        "range query size",
        "x unsafe",
        barGroups,
        1.0,
      ),
      data: { ds, mix, groups: barGroups },
    });
  }
  if (charts.length === 0) {
    throw new Error("no bundle rows to compare against unsafe");
  }
  return charts;
}

/** Throughput at clock-bump threshold T relative to T=1, per (ds, mix). */
export function plotRelaxation(rows: Row[]): Chart[] {
  const charts: Chart[] = [];
  const bundle = rows.filter((r) => r.variant === "bundle");
  const groups = uniqueSorted(bundle.map((r) => `${r.ds}|${r.mix}`));
  for (const group of groups) {
    const [ds, mix] = group.split("|");
    const subset = bundle.filter((r) => r.ds === ds && r.mix === mix);
    const relaxes = uniqueSorted(subset.map((r) => r.relax)).sort(
      (a, b) => relaxOrder(a) - relaxOrder(b),
    );
    if (relaxes.length < 2) {
      continue; // nothing beyond the baseline
    }
    const means = meanBy(subset, (r) => `${r.relax}|${r.threads}`);
    const threads = uniqueSorted(subset.map((r) => r.threads));
    const barGroups: BarGroup[] = [];
    for (const relax of relaxes) {
      if (relax === "1") {
        continue;
      }
      const bars: BarGroup["bars"] = [];
      for (const t of threads) {
        const relaxed = means.get(`${relax}|${t}`);
        if (relaxed === undefined) {
          continue;
        }
        const baseline = means.get(`1|${t}`);
        if (baseline === undefined) {
          throw new Error(
            `no T=1 baseline for ${ds} mix=${mix} threads=${t}`,
          );
        }
        bars.push({ label: `${t} threads`, value: relaxed / baseline });
      }
      if (bars.length > 0) {
        barGroups.push({ label: `T=${relax}`, bars });
      }
    }
    if (barGroups.length === 0) {
      continue;
    }
    charts.push({
      name: `relaxation-${slug(ds, mix)}.svg`,
      svg: barChart(
        `${ds} ${mix}: throughput relative to T=1`,
        "clock-bump threshold",
        "x T=1",
        barGroups,
        1.0,
      ),
      data: { ds, mix, groups: barGroups },
    });
  }
  if (charts.length === 0) {
    throw new Error("no relaxed (T > 1) bundle rows found");
  }
  return charts;
}

function relaxOrder(relax: string): number {
  return relax === "inf" ? Number.MAX_SAFE_INTEGER : Number(relax);
}

export const KINDS = {
  scaling: plotScaling,
  relative: plotRelative,
  relaxation: plotRelaxation,
} as const;

export type Kind = keyof typeof KINDS;
