/**
 * Training with validation-based early stopping.
 *
 * One tenth of the examples is set aside for validation (after a seeded
 * shuffle); training stops once validation accuracy has not improved for
 * `patience` consecutive epochs.
 */

import * as tf from '@tensorflow/tfjs';

import { buildModel, DEFAULT_SPEC, ModelSpec } from './model.js';
import { Vocab, WindowExample, shuffled } from './windows.js';

export interface TrainOptions {
  window: number;
  embedDim?: number;
  lstmUnits?: number;
  hiddenDim?: number;
  batchSize?: number;
  learningRate?: number;
  maxEpochs?: number;
  patience?: number;
  valFraction?: number;
  seed?: number;
  quiet?: boolean;
}

export interface TrainResult {
  model: tf.LayersModel;
  spec: ModelSpec;
  epochs: number;
  bestValAccuracy: number;
}

export function oneHotContexts(
  rows: Int32Array[], window: number, vocabSize: number,
): tf.Tensor3D {
  const n = rows.length;
  const data = new Float32Array(n * window * vocabSize);
  rows.forEach((ctx, i) => {
    for (let t = 0; t < window; t++) {
      data[(i * window + t) * vocabSize + ctx[t]] = 1;
    }
  });
  return tf.tensor3d(data, [n, window, vocabSize]);
}

function toTensors(examples: WindowExample[], window: number, vocabSize: number) {
  const n = examples.length;
  const labels = new Float32Array(n * vocabSize);
  examples.forEach((ex, i) => {
    labels[i * vocabSize + ex.target] = 1;
  });
  return {
    inputs: [
      oneHotContexts(examples.map(e => e.left), window, vocabSize),
      oneHotContexts(examples.map(e => e.right), window, vocabSize),
    ],
    labels: tf.tensor2d(labels, [n, vocabSize]),
  };
}

export async function train(
  examples: WindowExample[],
  vocab: Vocab,
  opts: TrainOptions,
): Promise<TrainResult> {
  if (examples.length === 0) {
    throw new Error('no training examples; was the timeline empty?');
  }
  const spec: ModelSpec = {
    window: opts.window,
    vocabSize: vocab.size,
    embedDim: opts.embedDim ?? DEFAULT_SPEC.embedDim,
    lstmUnits: opts.lstmUnits ?? DEFAULT_SPEC.lstmUnits,
    hiddenDim: opts.hiddenDim ?? DEFAULT_SPEC.hiddenDim,
    learningRate: opts.learningRate,
  };
  const model = buildModel(spec);

  const ordered = shuffled(examples, opts.seed ?? 0);
  const nVal = Math.max(1, Math.floor(ordered.length * (opts.valFraction ?? 0.1)));
  const val = toTensors(ordered.slice(0, nVal), spec.window, spec.vocabSize);
  const trainSet = toTensors(ordered.slice(nVal), spec.window, spec.vocabSize);

  const patience = opts.patience ?? 3;
  const maxEpochs = opts.maxEpochs ?? 40;
  let best = -Infinity;
  let sinceBest = 0;
  let epochs = 0;

  for (let epoch = 0; epoch < maxEpochs; epoch++) {
    const history = await model.fit(trainSet.inputs, trainSet.labels, {
      epochs: 1,
      batchSize: opts.batchSize ?? 256,
      validationData: [val.inputs, val.labels],
      shuffle: true,
      verbose: 0,
    });
    epochs = epoch + 1;
    const logs = history.history;
    const valAcc = Number((logs['val_acc'] ?? logs['val_accuracy'])?.[0] ?? NaN);
    if (!opts.quiet) {
      const loss = Number(logs['loss']?.[0] ?? NaN);
      console.error(`epoch ${epochs}: loss=${loss.toFixed(4)} val_acc=${valAcc.toFixed(4)}`);
    }
    if (valAcc > best + 1e-6) {
      best = valAcc;
      sinceBest = 0;
    } else {
      sinceBest += 1;
      if (sinceBest >= patience) break;
    }
  }

  trainSet.inputs.forEach(t => t.dispose());
  trainSet.labels.dispose();
  val.inputs.forEach(t => t.dispose());
  val.labels.dispose();
  return { model, spec, epochs, bestValAccuracy: best };
}
