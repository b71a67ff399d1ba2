/**
 * Dual-branch recurrent architecture.
 *
 * Each context (history and future) runs through its own embedding and
 * LSTM, then a ReLU dense layer; the two branch outputs are concatenated
 * and interpreted by a final ReLU dense layer before the softmax over the
 * cell vocabulary. Categorical cross entropy, Adam.
 */

import * as tf from '@tensorflow/tfjs';

export interface ModelSpec {
  window: number;
  vocabSize: number;
  embedDim: number;
  lstmUnits: number;
  hiddenDim: number;
  learningRate?: number;
}

export const DEFAULT_SPEC = {
  embedDim: 64,
  lstmUnits: 128,
  hiddenDim: 128,
};

function branch(name: string, spec: ModelSpec): { input: tf.SymbolicTensor; output: tf.SymbolicTensor } {
  // Contexts arrive one-hot; the embedding is a per-timestep linear map
  // (identical to an id-indexed lookup, but its gradient is a dense
  // matmul, which the pure-JS backend handles far better than the
  // scatter used by tf.layers.embedding).
  const input = tf.input({ shape: [spec.window, spec.vocabSize], name: `${name}_context` });
  const embedded = tf.layers.timeDistributed({
    layer: tf.layers.dense({ units: spec.embedDim, useBias: false }),
    name: `${name}_embedding`,
  }).apply(input) as tf.SymbolicTensor;
  const recurrent = tf.layers.lstm({
    units: spec.lstmUnits,
    name: `${name}_lstm`,
  }).apply(embedded) as tf.SymbolicTensor;
  const output = tf.layers.dense({
    units: spec.hiddenDim,
    activation: 'relu',
    name: `${name}_dense`,
  }).apply(recurrent) as tf.SymbolicTensor;
  return { input, output };
}

export function buildModel(spec: ModelSpec): tf.LayersModel {
  const left = branch('left', spec);
  const right = branch('right', spec);
  const merged = tf.layers.concatenate({ name: 'merge' })
    .apply([left.output, right.output]) as tf.SymbolicTensor;
  const hidden = tf.layers.dense({
    units: spec.hiddenDim,
    activation: 'relu',
    name: 'interpret',
  }).apply(merged) as tf.SymbolicTensor;
  const softmax = tf.layers.dense({
    units: spec.vocabSize,
    activation: 'softmax',
    name: 'cell_distribution',
  }).apply(hidden) as tf.SymbolicTensor;

  const model = tf.model({ inputs: [left.input, right.input], outputs: softmax });
  model.compile({
    optimizer: tf.train.adam(spec.learningRate ?? 0.001),
    loss: 'categoricalCrossentropy',
    metrics: ['accuracy'],
  });
  return model;
}
