#!/usr/bin/env node
import * as fs from "fs";
import fg from "fast-glob";
import yargs from "yargs";

import { MissingColumnError, readCsv, requireColumns } from "./csv";
import { buildCurves } from "./curves";
import { renderSvg } from "./svg";

export interface CliIo {
  log: (s: string) => void;
  error: (s: string) => void;
}

/** Runs the plot tool; returns the process exit code. */
export async function run(
  argv: string[],
  io: CliIo = { log: console.log, error: console.error },
): Promise<number> {
  const args = await yargs(argv)
    .option("glob", { type: "string", demandOption: true, describe: "metrics CSV glob" })
    .option("metric", { type: "string", default: "task_metric_value", describe: "y column" })
    .option("x", { type: "string", default: "env_steps", describe: "x column" })
    .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
    .option("window", { type: "number", default: 5, describe: "trailing moving average (1 disables)" })
    .option("title", { type: "string", describe: "plot title" })
    .strict()
    .exitProcess(false)
    .fail((msg, err) => {
      throw err ?? new Error(msg);
    })
    .parse();

  try {
    const files = fg.sync(args.glob, { onlyFiles: true }).sort();
    if (files.length === 0) {
      io.error(`no files match ${args.glob}`);
      return 1;
    }
    const tables = files.map(readCsv);
    for (const t of tables) {
      requireColumns(t, [args.x, args.metric, "algo", "seed"]);
    }
    const curves = buildCurves(tables, args.x, args.metric, args.window);
    const svg = renderSvg(curves, {
      xLabel: args.x,
      yLabel: args.metric,
      title: args.title,
    });
    fs.writeFileSync(args.out, svg);
    io.log(`wrote ${args.out} (${curves.length} curves from ${files.length} files)`);
    return 0;
  } catch (e) {
    if (e instanceof MissingColumnError) {
      io.error(e.message);
      return 1;
    }
    io.error(e instanceof Error ? e.message : String(e));
    return 1;
  }
}

if (require.main === module) {
  run(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
