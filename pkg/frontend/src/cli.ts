#!/usr/bin/env node
/**
 * Command line entry for the encoding exporter.
 *
 * Exit codes: 0 success, 1 usage problems (unknown model, bad flags),
 * 2 unreadable or malformed dataset.
 */

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { UnknownModelError, MODEL_REGISTRY } from "./encoder";
import { DataError, PoolingMode, runExport } from "./exporter";

export async function main(argv: string[]): Promise<number> {
  let code = 0;
  const parser = yargs(argv)
    .scriptName("seekqa-export")
    .usage("$0 export --dataset <path> --model <name> --out <path>")
    .command(
      "export",
      "encode question-candidate pairs into the exchange format",
      (y) =>
        y
          .option("dataset", { type: "string", demandOption: true, describe: "five-way multiple-choice JSONL" })
          .option("model", { type: "string", demandOption: true, describe: `one of: ${Object.keys(MODEL_REGISTRY).sort().join(", ")}` })
          .option("out", { type: "string", demandOption: true, describe: "encodings JSONL to write" })
          .option("pooling", { choices: ["mean", "first"] as const, default: "mean" as PoolingMode, describe: "subword-to-word pooling" })
          .option("batch-size", { type: "number", default: 8, describe: "pairs encoded per batch" })
          .option("sidecar", { type: "string", describe: "skip report path (default: <out>.skipped.json)" }),
      (args) => {
        if (code !== 0) return; // a usage failure already fired
        if (!Number.isInteger(args.batchSize) || args.batchSize < 1) {
          process.stderr.write("error: --batch-size must be a positive integer\n");
          code = 1;
          return;
        }
        try {
          const report = runExport(
            {
              dataset: args.dataset,
              model: args.model,
              out: args.out,
              pooling: args.pooling,
              batchSize: args.batchSize,
              sidecar: args.sidecar ?? null,
            },
            (msg) => process.stderr.write(msg + "\n")
          );
          process.stdout.write(`pairs\t${report.written}\n`);
          process.stdout.write(`skipped\t${report.skipped.length}\n`);
          process.stdout.write(`d_h\t${report.dH}\n`);
        } catch (err) {
          if (err instanceof UnknownModelError) {
            process.stderr.write(`error: ${err.message}\n`);
            code = 1;
          } else if (err instanceof DataError) {
            process.stderr.write(`error: ${err.message}\n`);
            code = 2;
          } else {
            throw err;
          }
        }
      }
    )
    .demandCommand(1, "a command is required")
    .strict()
    .fail((msg, err) => {
      if (err) throw err;
      process.stderr.write(`error: ${msg}\n`);
      code = 1;
    })
    .exitProcess(false)
    .help();
  await parser.parseAsync();
  return code;
}

if (require.main === module) {
  main(hideBin(process.argv)).then((code) => {
    process.exitCode = code;
  });
}
