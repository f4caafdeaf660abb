/**
 * Seeded self-attention encoders standing in for downloadable weights.
 *
 * Every model in the registry is a small post-norm transformer whose
 * parameters are generated from a named random stream, so a model name
 * always denotes the same function. Inference is plain float64 math with
 * no dropout, which makes repeat runs byte-identical.
 */

import { GaussianStream } from "./rng";

export class AlignmentError extends Error {}
export class UnknownModelError extends Error {}

export interface ModelShape {
  dH: number;
  layers: number;
  heads: number;
  ffDim: number;
  maxPositions: number;
}

export const MODEL_REGISTRY: Record<string, ModelShape> = {
  "sa-tiny": { dH: 32, layers: 2, heads: 2, ffDim: 64, maxPositions: 64 },
  "sa-small": { dH: 48, layers: 2, heads: 4, ffDim: 96, maxPositions: 96 },
  "sa-base": { dH: 64, layers: 3, heads: 4, ffDim: 128, maxPositions: 128 },
};

interface LayerWeights {
  wq: Float64Array[];
  wk: Float64Array[];
  wv: Float64Array[];
  wo: Float64Array[];
  ff1: Float64Array[];
  ffB1: Float64Array;
  ff2: Float64Array[];
  ffB2: Float64Array;
  ln1Gain: Float64Array;
  ln1Bias: Float64Array;
  ln2Gain: Float64Array;
  ln2Bias: Float64Array;
}

function matvec(w: Float64Array[], x: Float64Array): Float64Array {
  const out = new Float64Array(w.length);
  for (let i = 0; i < w.length; i++) {
    const row = w[i];
    let acc = 0;
    for (let j = 0; j < row.length; j++) acc += row[j] * x[j];
    out[i] = acc;
  }
  return out;
}

function layerNorm(x: Float64Array, gain: Float64Array, bias: Float64Array): Float64Array {
  const n = x.length;
  let mean = 0;
  for (let j = 0; j < n; j++) mean += x[j];
  mean /= n;
  let variance = 0;
  for (let j = 0; j < n; j++) variance += (x[j] - mean) ** 2;
  variance /= n;
  const inv = 1.0 / Math.sqrt(variance + 1e-5);
  const out = new Float64Array(n);
  for (let j = 0; j < n; j++) out[j] = gain[j] * (x[j] - mean) * inv + bias[j];
  return out;
}

function softmaxInPlace(scores: Float64Array): void {
  let max = -Infinity;
  for (const s of scores) if (s > max) max = s;
  let total = 0;
  for (let i = 0; i < scores.length; i++) {
    scores[i] = Math.exp(scores[i] - max);
    total += scores[i];
  }
  for (let i = 0; i < scores.length; i++) scores[i] /= total;
}

export class SeededAttentionEncoder {
  readonly name: string;
  readonly shape: ModelShape;
  private layers: LayerWeights[] = [];
  private embedCache = new Map<string, Float64Array>();

  constructor(name: string, shape: ModelShape) {
    if (shape.dH % shape.heads !== 0) {
      throw new Error(`hidden size ${shape.dH} not divisible by ${shape.heads} heads`);
    }
    this.name = name;
    this.shape = shape;
    const stream = new GaussianStream(`${name}|weights`);
    const scale = 1.0 / Math.sqrt(shape.dH);
    for (let l = 0; l < shape.layers; l++) {
      const gainNear1 = (n: number) => {
        const g = stream.vector(n, 0.05);
        for (let j = 0; j < n; j++) g[j] += 1.0;
        return g;
      };
      this.layers.push({
        wq: stream.matrix(shape.dH, shape.dH, scale),
        wk: stream.matrix(shape.dH, shape.dH, scale),
        wv: stream.matrix(shape.dH, shape.dH, scale),
        wo: stream.matrix(shape.dH, shape.dH, scale),
        ff1: stream.matrix(shape.ffDim, shape.dH, scale),
        ffB1: stream.vector(shape.ffDim, 0.02),
        ff2: stream.matrix(shape.dH, shape.ffDim, 1.0 / Math.sqrt(shape.ffDim)),
        ffB2: stream.vector(shape.dH, 0.02),
        ln1Gain: gainNear1(shape.dH),
        ln1Bias: stream.vector(shape.dH, 0.02),
        ln2Gain: gainNear1(shape.dH),
        ln2Bias: stream.vector(shape.dH, 0.02),
      });
    }
  }

  /** Unit-norm embedding depending only on (model name, piece string). */
  private embed(piece: string): Float64Array {
    const hit = this.embedCache.get(piece);
    if (hit) return hit;
    const v = new GaussianStream(`${this.name}|emb|${piece}`).vector(this.shape.dH, 1.0);
    let norm = 0;
    for (const x of v) norm += x * x;
    norm = Math.sqrt(norm);
    for (let j = 0; j < v.length; j++) v[j] /= norm;
    this.embedCache.set(piece, v);
    return v;
  }

  private positional(pos: number): Float64Array {
    const { dH } = this.shape;
    const out = new Float64Array(dH);
    for (let j = 0; j < dH; j += 2) {
      const rate = pos / Math.pow(10000, j / dH);
      out[j] = Math.sin(rate);
      if (j + 1 < dH) out[j + 1] = Math.cos(rate);
    }
    return out;
  }

  /** One hidden-state row per subword piece. */
  encodePieces(pieces: string[]): Float64Array[] {
    const { dH, heads, maxPositions } = this.shape;
    if (pieces.length > maxPositions) {
      throw new AlignmentError(
        `sequence of ${pieces.length} pieces exceeds the ${maxPositions}-position limit`
      );
    }
    const n = pieces.length;
    let rows: Float64Array[] = pieces.map((p, i) => {
      const e = this.embed(p);
      const pos = this.positional(i);
      const row = new Float64Array(dH);
      for (let j = 0; j < dH; j++) row[j] = e[j] + pos[j];
      return row;
    });

    const headDim = dH / heads;
    for (const lw of this.layers) {
      const q = rows.map((r) => matvec(lw.wq, r));
      const k = rows.map((r) => matvec(lw.wk, r));
      const v = rows.map((r) => matvec(lw.wv, r));
      const mixed: Float64Array[] = [];
      for (let i = 0; i < n; i++) {
        const merged = new Float64Array(dH);
        for (let h = 0; h < heads; h++) {
          const off = h * headDim;
          const scores = new Float64Array(n);
          for (let t = 0; t < n; t++) {
            let acc = 0;
            for (let j = 0; j < headDim; j++) acc += q[i][off + j] * k[t][off + j];
            scores[t] = acc / Math.sqrt(headDim);
          }
          softmaxInPlace(scores);
          for (let t = 0; t < n; t++) {
            for (let j = 0; j < headDim; j++) merged[off + j] += scores[t] * v[t][off + j];
          }
        }
        mixed.push(matvec(lw.wo, merged));
      }
      rows = rows.map((r, i) => {
        const sum = new Float64Array(dH);
        for (let j = 0; j < dH; j++) sum[j] = r[j] + mixed[i][j];
        return layerNorm(sum, lw.ln1Gain, lw.ln1Bias);
      });
      rows = rows.map((r) => {
        const hidden = matvec(lw.ff1, r);
        for (let j = 0; j < hidden.length; j++) hidden[j] = Math.tanh(hidden[j] + lw.ffB1[j]);
        const back = matvec(lw.ff2, hidden);
        const sum = new Float64Array(dH);
        for (let j = 0; j < dH; j++) sum[j] = r[j] + back[j] + lw.ffB2[j];
        return layerNorm(sum, lw.ln2Gain, lw.ln2Bias);
      });
    }
    return rows;
  }
}

const loaded = new Map<string, SeededAttentionEncoder>();

export function loadEncoder(name: string): SeededAttentionEncoder {
  const hit = loaded.get(name);
  if (hit) return hit;
  const shape = MODEL_REGISTRY[name];
  if (!shape) {
    const known = Object.keys(MODEL_REGISTRY).sort().join(", ");
    throw new UnknownModelError(`unknown model ${JSON.stringify(name)}; available: ${known}`);
  }
  const enc = new SeededAttentionEncoder(name, shape);
  loaded.set(name, enc);
  return enc;
}
