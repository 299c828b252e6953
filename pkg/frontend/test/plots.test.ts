import { mkdtempSync, readFileSync, readdirSync } from "fs";
import { tmpdir } from "os";
import { dirname, join } from "path";
import { fileURLToPath } from "url";
import { describe, expect, it } from "vitest";

import { parseCsv, meanBy } from "../src/csv.js";
import { plotRelative, plotRelaxation, plotScaling } from "../src/plots.js";
import { parseArgs, run } from "../src/cli.js";

const HERE = dirname(fileURLToPath(import.meta.url));
const GOLDEN = join(HERE, "golden.csv");
const goldenText = readFileSync(GOLDEN, "utf-8");
const rows = parseCsv(goldenText);

function mkRow(over: Partial<(typeof rows)[0]>) {
  return {
    ds: "list",
    variant: "bundle",
    mix: "50-0-50",
    rqsize: 50,
    threads: 2,
    relax: "1",
    throughput: 1000,
    ...over,
  };
}

describe("csv parsing", () => {
  it("reads every data row with the plot columns", () => {
    expect(rows.length).toBe(18);
    expect(rows[0].ds).toBe("skiplist");
    expect(rows[0].throughput).toBeGreaterThan(0);
  });

  it("rejects an empty file", () => {
    expect(() => parseCsv("")).toThrow(/empty CSV/);
  });

  it("rejects a header-only file", () => {
    expect(() => parseCsv(goldenText.split("\n")[0])).toThrow(/no data rows/);
  });

  it("names a missing column", () => {
    expect(() => parseCsv("ds,variant\nlist,bundle")).toThrow(
      /missing required column 'mix'/,
    );
  });

  it("averages repeats", () => {
    const means = meanBy(
      [mkRow({ throughput: 10 }), mkRow({ throughput: 30 })],
      (r) => r.variant,
    );
    expect(means.get("bundle")).toBe(20);
  });
});

describe("scaling charts", () => {
  it("draws one chart with two series and one point per thread count", () => {
    const charts = plotScaling(rows.filter((r) => r.mix === "10-80-10"));
    expect(charts.length).toBe(1);
    const data = charts[0].data as {
      series: Array<{ label: string; points: unknown[] }>;
    };
    expect(data.series.map((s) => s.label)).toEqual(["bundle", "unsafe"]);
    for (const series of data.series) {
      expect(series.points.length).toBe(3);
    }
    expect(charts[0].svg).toContain("<polyline");
  });

  it("repeats collapse to a single averaged point", () => {
    const subset = rows.filter(
      (r) => r.mix === "10-80-10" && r.variant === "bundle" && r.threads === 2,
    );
    expect(subset.length).toBe(2); // seed 1 and seed 2
    const charts = plotScaling(rows.filter((r) => r.mix === "10-80-10"));
    const data = charts[0].data as {
      series: Array<{ label: string; points: Array<{ x: number; y: number }> }>;
    };
    const point = data.series[0].points.find((p) => p.x === 2)!;
    const mean = (subset[0].throughput + subset[1].throughput) / 2;
    expect(point.y).toBeCloseTo(mean, 6);
  });

  it("errors when no group has two thread counts", () => {
    expect(() => plotScaling([mkRow({})])).toThrow(/thread counts/);
  });
});

describe("relative charts", () => {
  it("equal throughput gives ratio 1, half gives 0.5", () => {
    const charts = plotRelative([
      mkRow({ variant: "bundle", throughput: 500 }),
      mkRow({ variant: "unsafe", throughput: 500 }),
      mkRow({ variant: "bundle", rqsize: 100, throughput: 400 }),
      mkRow({ variant: "unsafe", rqsize: 100, throughput: 800 }),
    ]);
    const data = charts[0].data as {
      groups: Array<{ label: string; bars: Array<{ value: number }> }>;
    };
    expect(data.groups[0].bars[0].value).toBeCloseTo(1.0, 9);
    expect(data.groups[1].bars[0].value).toBeCloseTo(0.5, 9);
  });

  it("groups by rq size with bars ordered by thread count", () => {
    const charts = plotRelative(rows.filter((r) => r.mix === "50-0-50"));
    const data = charts[0].data as {
      groups: Array<{ label: string; bars: Array<{ label: string }> }>;
    };
    expect(data.groups.map((g) => g.label)).toEqual(["rq 10", "rq 100"]);
    expect(data.groups[0].bars.map((b) => b.label)).toEqual([
      "1 threads",
      "2 threads",
    ]);
  });

  it("errors on a bundle row without its unsafe counterpart", () => {
    expect(() =>
      plotRelative([
        mkRow({ rqsize: 50 }),
        mkRow({ variant: "unsafe", rqsize: 100, throughput: 900 }),
      ]),
    ).toThrow(/no matching unsafe run/);
  });

  it("skips groups that are not comparative experiments at all", () => {
    expect(() => plotRelative([mkRow({})])).toThrow(/no bundle rows/);
  });
});

describe("relaxation charts", () => {
  it("plots ratios against the T=1 baseline", () => {
    const charts = plotRelaxation([
      mkRow({ relax: "1", throughput: 1000 }),
      mkRow({ relax: "5", throughput: 1500 }),
      mkRow({ relax: "50", throughput: 2000 }),
    ]);
    const data = charts[0].data as {
      groups: Array<{ label: string; bars: Array<{ value: number }> }>;
    };
    expect(data.groups.map((g) => g.label)).toEqual(["T=5", "T=50"]);
    expect(data.groups[0].bars[0].value).toBeCloseTo(1.5, 9);
    expect(data.groups[1].bars[0].value).toBeCloseTo(2.0, 9);
  });

  it("errors without a T=1 baseline", () => {
    expect(() =>
      plotRelaxation([mkRow({ relax: "5" }), mkRow({ relax: "50" })]),
    ).toThrow(/no T=1 baseline/);
  });

  it("works on the golden csv", () => {
    const charts = plotRelaxation(rows);
    expect(charts.length).toBe(1);
    expect(charts[0].name).toBe("relaxation-skiplist-90-0-10.svg");
  });
});

describe("byte stability", () => {
  it("regenerating all three kinds from the golden CSV is byte-identical", () => {
    const started = Date.now();
    const once = [
      ...plotScaling(rows),
      ...plotRelative(rows),
      ...plotRelaxation(rows),
    ];
    const twice = [
      ...plotScaling(parseCsv(goldenText)),
      ...plotRelative(parseCsv(goldenText)),
      ...plotRelaxation(parseCsv(goldenText)),
    ];
    expect(once.length).toBe(twice.length);
    for (let i = 0; i < once.length; i++) {
      expect(once[i].name).toBe(twice[i].name);
      expect(once[i].svg).toBe(twice[i].svg);
    }
    expect(JSON.stringify(once.map((c) => c.data))).toBe(
      JSON.stringify(twice.map((c) => c.data)),
    );
    expect(Date.now() - started).toBeLessThan(10_000);
  });

  it("pins the golden data series", () => {
    const golden = JSON.parse(
      readFileSync(join(HERE, "golden-series.json"), "utf-8"),
    );
    const now = [
      ...plotScaling(rows),
      ...plotRelative(rows),
      ...plotRelaxation(rows),
    ].map((c) => ({ name: c.name, data: c.data }));
    expect(JSON.parse(JSON.stringify(now))).toEqual(golden);
  });
});

describe("cli", () => {
  it("parses flags and restricts kinds", () => {
    const args = parseArgs([
      "--in",
      "x.csv",
      "--out",
      "dir",
      "--kind",
      "scaling",
    ]);
    expect(args.kinds).toEqual(["scaling"]);
    expect(() => parseArgs(["--in", "x.csv"])).toThrow(/usage/);
    expect(() => parseArgs(["--kind", "pie", "--in", "a", "--out", "b"])).toThrow(
      /unknown kind/,
    );
  });

  it("writes one svg per chart", () => {
    const out = mkdtempSync(join(tmpdir(), "plots-"));
    const charts = run({ input: GOLDEN, out, kinds: ["scaling", "relative"] });
    const files = readdirSync(out).sort();
    expect(files).toEqual(charts.map((c) => c.name).sort());
    for (const file of files) {
      const svg = readFileSync(join(out, file), "utf-8");
      expect(svg.startsWith("<svg")).toBe(true);
      expect(svg.trimEnd().endsWith("</svg>")).toBe(true);
    }
  });
});
