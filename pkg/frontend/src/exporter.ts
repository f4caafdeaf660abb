/**
 * Batch export of word-level contextual encodings.
 *
 * Reads a five-way multiple-choice dataset, runs every question-candidate
 * pair through a registry encoder, pools subword rows back to words, and
 * writes the exchange file the consumer package loads. Pairs whose piece
 * sequence cannot be aligned are skipped with a warning and listed in a
 * sidecar report instead of poisoning the output.
 */

import * as fs from "node:fs";
import { z } from "zod";

import { AlignmentError, SeededAttentionEncoder, loadEncoder } from "./encoder";
import { alignPair } from "./tokenizer";

export class DataError extends Error {}

export type PoolingMode = "mean" | "first";

export interface ExportJob {
  dataset: string;
  model: string;
  out: string;
  pooling: PoolingMode;
  batchSize: number;
  sidecar: string | null; // default: out + ".skipped.json"
}

export interface SkipEntry {
  id: string;
  reason: string;
}

export interface ExportReport {
  written: number;
  skipped: SkipEntry[];
  dH: number;
}

const choiceSchema = z.object({ label: z.string(), text: z.string() });
const recordSchema = z.object({
  id: z.union([z.string(), z.number().transform(String)]),
  question: z.object({
    stem: z.string(),
    choices: z.array(choiceSchema).length(5),
  }),
  answerKey: z.unknown().optional(),
});

export interface DatasetPair {
  pairId: string;
  question: string;
  answer: string;
}

/** Flatten the dataset into (question, candidate) pairs, ids `${id}|${k}`. */
export function readDatasetPairs(path: string): DatasetPair[] {
  let raw: string;
  try {
    raw = fs.readFileSync(path, "utf-8");
  } catch (err) {
    throw new DataError(`cannot read dataset ${path}: ${(err as Error).message}`);
  }
  const pairs: DatasetPair[] = [];
  const lines = raw.split("\n");
  for (let i = 0; i < lines.length; i++) {
    if (!lines[i].trim()) continue;
    let parsed: unknown;
    try {
      parsed = JSON.parse(lines[i]);
    } catch (err) {
      throw new DataError(`dataset line ${i + 1}: invalid JSON: ${(err as Error).message}`);
    }
    const res = recordSchema.safeParse(parsed);
    if (!res.success) {
      const issue = res.error.issues[0];
      const where = issue.path.join(".") || "record";
      throw new DataError(`dataset line ${i + 1}: ${where}: ${issue.message}`);
    }
    res.data.question.choices.forEach((choice, k) => {
      pairs.push({
        pairId: `${res.data.id}|${k}`,
        question: res.data.question.stem,
        answer: choice.text,
      });
    });
  }
  return pairs;
}

function poolSpan(
  rows: Float64Array[],
  span: [number, number],
  mode: PoolingMode
): number[] {
  const [start, end] = span;
  if (mode === "first") return Array.from(rows[start]);
  const dH = rows[start].length;
  const out = new Array<number>(dH).fill(0);
  for (let i = start; i < end; i++) {
    for (let j = 0; j < dH; j++) out[j] += rows[i][j];
  }
  const count = end - start;
  for (let j = 0; j < dH; j++) out[j] /= count;
  return out;
}

/** Encode one pair into an exchange record, or throw AlignmentError. */
export function encodePair(
  encoder: SeededAttentionEncoder,
  pair: DatasetPair,
  pooling: PoolingMode
): string {
  const { pieces, words, spans } = alignPair(pair.question, pair.answer);
  const rows = encoder.encodePieces(pieces);
  const record = {
    id: pair.pairId,
    d_h: encoder.shape.dH,
    tokens: words,
    H: spans.map((span) => poolSpan(rows, span, pooling)),
    h0: Array.from(rows[0]),
  };
  return JSON.stringify(record);
}

export function runExport(job: ExportJob, warn: (msg: string) => void = () => {}): ExportReport {
  const encoder = loadEncoder(job.model);
  const pairs = readDatasetPairs(job.dataset);
  const skipped: SkipEntry[] = [];
  const lines: string[] = [];
  for (let start = 0; start < pairs.length; start += job.batchSize) {
    for (const pair of pairs.slice(start, start + job.batchSize)) {
      try {
        lines.push(encodePair(encoder, pair, job.pooling));
      } catch (err) {
        if (!(err instanceof AlignmentError)) throw err;
        skipped.push({ id: pair.pairId, reason: err.message });
        warn(`warning: skipped ${pair.pairId}: ${err.message}`);
      }
    }
  }
  fs.writeFileSync(job.out, lines.map((l) => l + "\n").join(""), "utf-8");
  const sidecarPath = job.sidecar ?? job.out + ".skipped.json";
  fs.writeFileSync(
    sidecarPath,
    JSON.stringify({ written: lines.length, skipped }, null, 2) + "\n",
    "utf-8"
  );
  return { written: lines.length, skipped, dH: encoder.shape.dH };
}
