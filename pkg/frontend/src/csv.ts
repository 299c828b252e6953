/** Parsing and aggregation of bundleset-bench result CSV. */

export interface Row {
  ds: string;
  variant: string;
  mix: string;
  rqsize: number;
  threads: number;
  relax: string;
  throughput: number;
}

const REQUIRED = [
  "ds",
  "variant",
  "mix",
  "rqsize",
  "threads",
  "relax",
  "throughput_ops_s",
] as const;

/**
 * Parse the benchmark CSV. The format is the harness's own: a header line
 * and unquoted comma-separated fields (no field ever contains a comma).
 */
export function parseCsv(text: string): Row[] {
  const lines = text.split(/\r?\n/).filter((line) => line.trim() !== "");
  if (lines.length === 0) {
    throw new Error("empty CSV: no header line");
  }
  const header = lines[0].split(",");
  const index = new Map(header.map((name, i) => [name, i]));
  for (const name of REQUIRED) {
    if (!index.has(name)) {
      throw new Error(`CSV is missing required column '${name}'`);
    }
  }
  if (lines.length === 1) {
    throw new Error("empty CSV: header but no data rows");
  }
  const rows: Row[] = [];
  for (const line of lines.slice(1)) {
    const parts = line.split(",");
    const get = (name: string) => parts[index.get(name)!];
    rows.push({
      ds: get("ds"),
      variant: get("variant"),
      mix: get("mix"),
      rqsize: Number(get("rqsize")),
      threads: Number(get("threads")),
      relax: get("relax"),
      throughput: Number(get("throughput_ops_s")),
    });
  }
  return rows;
}

/** Mean throughput over all rows sharing a grouping key, keyed by it. */
export function meanBy(
  rows: Row[],
  key: (row: Row) => string,
): Map<string, number> {
  const sums = new Map<string, { total: number; count: number }>();
  for (const row of rows) {
    const k = key(row);
    const slot = sums.get(k) ?? { total: 0, count: 0 };
    slot.total += row.throughput;
    slot.count += 1;
    sums.set(k, slot);
  }
  const means = new Map<string, number>();
  for (const [k, { total, count }] of sums) {
    means.set(k, total / count);
  }
  return means;
}

export function uniqueSorted<T>(values: T[]): T[] {
  return [...new Set(values)].sort((a, b) =>
    typeof a === "number" && typeof b === "number"
      ? a - b
      : String(a).localeCompare(String(b)),
  );
}
