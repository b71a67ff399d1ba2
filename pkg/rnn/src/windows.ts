/**
 * Context windows around timeline slots.
 *
 * Each example pairs a left context (the W slots of history, left padded)
 * with a right context (the W future slots, right padded) around a target
 * slot. Contexts only ever contain training-assigned values; everything
 * else is the reserved PAD id. Cell ids are remapped to a dense
 * vocabulary with PAD = 0.
 */

import { EMPTY } from './csv.js';

export const PAD = 0;
export const OTHER = 1;

export interface Vocab {
  /** grid cell -> dense id (2-based; 0 is PAD, 1 the rare-cell bucket) */
  toId: Map<number, number>;
  /** dense id -> grid cell (NaN for PAD and OTHER) */
  toCell: number[];
  size: number;
}

/**
 * Frequency-capped vocabulary.
 *
 * Cells beyond the cap (rarest first, ties to the larger index) share the
 * OTHER bucket: isolated noise visits are unlearnable and a large
 * vocabulary makes the embedding gradient the training bottleneck. OTHER
 * participates as context and target but is never emitted as a
 * prediction.
 */
export function buildVocab(trainCells: Iterable<Int32Array>, maxVocab = 128): Vocab {
  const counts = new Map<number, number>();
  for (const row of trainCells) {
    for (const cell of row) {
      if (cell !== EMPTY) counts.set(cell, (counts.get(cell) ?? 0) + 1);
    }
  }
  const kept = [...counts.entries()]
    .sort((a, b) => b[1] - a[1] || a[0] - b[0])
    .slice(0, Math.max(1, maxVocab - 2))
    .map(([cell]) => cell)
    .sort((a, b) => a - b);
  const toId = new Map<number, number>();
  const toCell: number[] = [Number.NaN, Number.NaN];
  kept.forEach((cell, i) => {
    toId.set(cell, i + 2);
    toCell.push(cell);
  });
  return { toId, toCell, size: kept.length + 2 };
}

export interface WindowExample {
  left: Int32Array;   // [W] oldest..newest, PAD-filled where unknown
  right: Int32Array;  // [W] nearest..farthest future
  target: number;     // vocab id
}

export function contextsAt(row: Int32Array, q: number, window: number, vocab: Vocab):
    { left: Int32Array; right: Int32Array } {
  const left = new Int32Array(window).fill(PAD);
  const right = new Int32Array(window).fill(PAD);
  for (let i = 0; i < window; i++) {
    const ql = q - window + i;  // oldest first
    if (ql >= 0 && row[ql] !== EMPTY) left[i] = vocab.toId.get(row[ql]) ?? OTHER;
    const qr = q + 1 + i;
    if (qr < row.length && row[qr] !== EMPTY) right[i] = vocab.toId.get(row[qr]) ?? OTHER;
  }
  return { left, right };
}

export interface BuildOptions {
  window: number;
  /** cap examples per user, 0 = no cap (cap sampling is seeded) */
  maxPerUser?: number;
  /** restrict targets to these slot indices (e.g. daytime), if given */
  eligible?: (q: number) => boolean;
  seed?: number;
}

/** Deterministic small PRNG (mulberry32) for subsampling and shuffling. */
export function rng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0; a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function buildWindows(
  train: Map<string, Int32Array>,
  vocab: Vocab,
  opts: BuildOptions,
): WindowExample[] {
  const out: WindowExample[] = [];
  const rand = rng(opts.seed ?? 0);
  for (const user of [...train.keys()].sort()) {
    const row = train.get(user)!;
    let targets: number[] = [];
    for (let q = 0; q < row.length; q++) {
      if (row[q] !== EMPTY && (!opts.eligible || opts.eligible(q))) targets.push(q);
    }
    if (opts.maxPerUser && targets.length > opts.maxPerUser) {
      // seeded partial shuffle, take the first maxPerUser
      for (let i = targets.length - 1; i > 0; i--) {
        const j = Math.floor(rand() * (i + 1));
        [targets[i], targets[j]] = [targets[j], targets[i]];
      }
      targets = targets.slice(0, opts.maxPerUser).sort((a, b) => a - b);
    }
    for (const q of targets) {
      // Contexts span [q-W, q-1] and [q+1, q+W]; the target never leaks
      // into its own windows.
      const { left, right } = contextsAt(row, q, opts.window, vocab);
      out.push({ left, right, target: vocab.toId.get(row[q]) ?? OTHER });
    }
  }
  return out;
}

export function shuffled<T>(items: T[], seed: number): T[] {
  const rand = rng(seed);
  const copy = [...items];
  for (let i = copy.length - 1; i > 0; i--) {
    const j = Math.floor(rand() * (i + 1));
    [copy[i], copy[j]] = [copy[j], copy[i]];
  }
  return copy;
}
