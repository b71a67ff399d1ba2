/**
 * Per-slot predictions for everything the training view leaves missing.
 *
 * Every slot without a training-assigned value gets a ranked top-K list
 * (100% coverage): the contexts may be all-PAD, in which case the model's
 * prior does the talking.
 */

import * as tf from '@tensorflow/tfjs';

import { EMPTY, PredictionRow } from './csv.js';
import { ModelSpec } from './model.js';
import { oneHotContexts } from './train.js';
import { OTHER, Vocab, contextsAt } from './windows.js';

export interface PredictTarget {
  user: string;
  q: number;
}

export function missingSlots(train: Map<string, Int32Array>): PredictTarget[] {
  const targets: PredictTarget[] = [];
  for (const user of [...train.keys()].sort()) {
    const row = train.get(user)!;
    for (let q = 0; q < row.length; q++) {
      if (row[q] === EMPTY) targets.push({ user, q });
    }
  }
  return targets;
}

export async function predict(
  model: tf.LayersModel,
  spec: ModelSpec,
  vocab: Vocab,
  train: Map<string, Int32Array>,
  targets: PredictTarget[],
  topK = 3,
  batchSize = 4096,
): Promise<PredictionRow[]> {
  const rows: PredictionRow[] = [];
  for (let start = 0; start < targets.length; start += batchSize) {
    const batch = targets.slice(start, start + batchSize);
    const lefts: Int32Array[] = [];
    const rights: Int32Array[] = [];
    for (const t of batch) {
      const ctx = contextsAt(train.get(t.user)!, t.q, spec.window, vocab);
      lefts.push(ctx.left);
      rights.push(ctx.right);
    }
    const inputs = [
      oneHotContexts(lefts, spec.window, spec.vocabSize),
      oneHotContexts(rights, spec.window, spec.vocabSize),
    ];
    const probs = model.predict(inputs) as tf.Tensor2D;
    const data = await probs.data();
    inputs.forEach(t => t.dispose());
    probs.dispose();

    for (let i = 0; i < batch.length; i++) {
      const scores: Array<[number, number]> = [];
      // PAD and the rare-cell bucket are not real cells
      for (let id = OTHER + 1; id < vocab.size; id++) {
        scores.push([id, data[i * vocab.size + id]]);
      }
      scores.sort((a, b) => b[1] - a[1] || a[0] - b[0]);
      rows.push({
        user: batch[i].user,
        q: batch[i].q,
        ranked: scores.slice(0, topK).map(([id, s]) => [vocab.toCell[id], s]),
      });
    }
  }
  return rows;
}
