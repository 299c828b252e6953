/** plots --in FILE.csv --out DIR [--kind scaling|relative|relaxation] */

import { mkdirSync, readFileSync, writeFileSync } from "fs";
import { join } from "path";

import { parseCsv } from "./csv.js";
import { Chart, KINDS, Kind } from "./plots.js";

interface Args {
  input: string;
  out: string;
  kinds: Kind[];
}

export function parseArgs(argv: string[]): Args {
  let input = "";
  let out = "";
  let kinds: Kind[] = Object.keys(KINDS) as Kind[];
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const value = () => {
      if (i + 1 >= argv.length) {
        throw new Error(`missing value for ${flag}`);
      }
      return argv[++i];
    };
    if (flag === "--in") {
      input = value();
    } else if (flag === "--out") {
      out = value();
    } else if (flag === "--kind") {
      const kind = value() as Kind;
      if (!(kind in KINDS)) {
        throw new Error(
          `unknown kind '${kind}' (expected scaling|relative|relaxation)`,
        );
      }
      kinds = [kind];
    } else {
      throw new Error(`unknown flag '${flag}'`);
    }
  }
  if (!input || !out) {
    throw new Error("usage: plots --in FILE.csv --out DIR [--kind KIND]");
  }
  return { input, out, kinds };
}

export function run(args: Args): Chart[] {
  const rows = parseCsv(readFileSync(args.input, "utf-8"));
  mkdirSync(args.out, { recursive: true });
  const charts: Chart[] = [];
  for (const kind of args.kinds) {
    charts.push(...KINDS[kind](rows));
  }
  for (const chart of charts) {
    writeFileSync(join(args.out, chart.name), chart.svg);
  }
  return charts;
}

export function main(argv: string[]): number {
  try {
    const args = parseArgs(argv);
    const charts = run(args);
    for (const chart of charts) {
      console.log(`wrote ${join(args.out, chart.name)}`);
    }
    return 0;
  } catch (err) {
    console.error(`plots: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

if (process.argv[1] && process.argv[1].endsWith("cli.js")) {
  process.exit(main(process.argv.slice(2)));
}
