/**
 * Deterministic random streams for weight generation.
 *
 * seedrandom supplies the uniform generator; the gaussian layer on top is
 * a plain Box-Muller transform. Streams are keyed by strings so the same
 * model name always rebuilds the same weights.
 */

import seedrandom from "seedrandom";

export class GaussianStream {
  private uniform: seedrandom.PRNG;
  private spare: number | null = null;

  constructor(key: string) {
    this.uniform = seedrandom(key);
  }

  next(): number {
    if (this.spare !== null) {
      const v = this.spare;
      this.spare = null;
      return v;
    }
    let u = 0;
    // Box-Muller needs u in (0, 1]
    while (u === 0) u = this.uniform.quick();
    const v = this.uniform.quick();
    const mag = Math.sqrt(-2.0 * Math.log(u));
    this.spare = mag * Math.sin(2.0 * Math.PI * v);
    return mag * Math.cos(2.0 * Math.PI * v);
  }

  /** rows x cols matrix with entries scaled by `scale`. */
  matrix(rows: number, cols: number, scale: number): Float64Array[] {
    const out: Float64Array[] = [];
    for (let i = 0; i < rows; i++) {
      const row = new Float64Array(cols);
      for (let j = 0; j < cols; j++) row[j] = this.next() * scale;
      out.push(row);
    }
    return out;
  }

  vector(n: number, scale: number): Float64Array {
    const row = new Float64Array(n);
    for (let j = 0; j < n; j++) row[j] = this.next() * scale;
    return row;
  }
}
