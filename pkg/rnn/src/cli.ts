/**
 * Train on a preprocessed timeline file and fill every missing slot.
 *
 * Usage:
 *   node dist/cli.js --timelines pre/timelines.csv --split run/split_mask.csv \
 *       --out run/predictions_rnn.csv [--window 12] [--embed-dim 64]
 *       [--lstm-units 128] [--hidden 128] [--batch 256] [--max-epochs 40]
 *       [--patience 3] [--max-per-user 0] [--seed 0] [--quiet]
 *
 * Reads the primary pipeline's timeline CSV (+ JSON header sidecar) and
 * split mask, trains on the training view, and writes predictions in the
 * shared CSV schema for every slot the training view leaves empty.
 */

import { applySplit, readSplitMask, readTimelines, writePredictions } from './csv.js';
import { missingSlots, predict } from './predict.js';
import { train } from './train.js';
import { buildVocab, buildWindows } from './windows.js';

interface Args {
  timelines: string;
  split?: string;
  out: string;
  window: number;
  embedDim: number;
  lstmUnits: number;
  hidden: number;
  batch: number;
  learningRate: number;
  maxEpochs: number;
  patience: number;
  maxPerUser: number;
  maxVocab: number;
  targets: 'all' | 'daytime';
  seed: number;
  quiet: boolean;
}

function parseArgs(argv: string[]): Args {
  const args: Args = {
    timelines: '', split: undefined, out: '',
    window: 12, embedDim: 64, lstmUnits: 128, hidden: 128,
    batch: 256, learningRate: 0.001, maxEpochs: 40, patience: 3, maxPerUser: 0,
    maxVocab: 128, targets: 'all', seed: 0, quiet: false,
  };
  for (let i = 0; i < argv.length; i++) {
    const flag = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`missing value for ${flag}`);
      return argv[i];
    };
    switch (flag) {
      case '--timelines': args.timelines = next(); break;
      case '--split': args.split = next(); break;
      case '--out': args.out = next(); break;
      case '--window': args.window = Number(next()); break;
      case '--embed-dim': args.embedDim = Number(next()); break;
      case '--lstm-units': args.lstmUnits = Number(next()); break;
      case '--hidden': args.hidden = Number(next()); break;
      case '--batch': args.batch = Number(next()); break;
      case '--learning-rate': args.learningRate = Number(next()); break;
      case '--max-epochs': args.maxEpochs = Number(next()); break;
      case '--patience': args.patience = Number(next()); break;
      case '--max-per-user': args.maxPerUser = Number(next()); break;
      case '--max-vocab': args.maxVocab = Number(next()); break;
      case '--targets': {
        const value = next();
        if (value !== 'all' && value !== 'daytime') {
          throw new Error(`--targets must be all or daytime, got ${value}`);
        }
        args.targets = value;
        break;
      }
      case '--seed': args.seed = Number(next()); break;
      case '--quiet': args.quiet = true; break;
      default: throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!args.timelines || !args.out) {
    throw new Error('--timelines and --out are required');
  }
  return args;
}

export async function main(argv: string[]): Promise<void> {
  const args = parseArgs(argv);
  const cohort = readTimelines(args.timelines);
  const mask = args.split ? readSplitMask(args.split) : new Map<string, Set<number>>();
  const trainView = applySplit(cohort, mask);

  const vocab = buildVocab(trainView.values(), args.maxVocab);
  // Evaluation concerns the daytime window (sampled hours 08..22); the
  // daytime mode focuses the example budget there instead of spending it
  // on home-interpolated nights.
  const slotsPerDay = 24 / cohort.header.resolution_hours;
  const isDaytime = (q: number) => {
    const hour = (q % slotsPerDay) * cohort.header.resolution_hours;
    return hour >= 8 && hour <= 22;
  };
  const examples = buildWindows(trainView, vocab, {
    window: args.window,
    maxPerUser: args.maxPerUser,
    eligible: args.targets === 'daytime' ? isDaytime : undefined,
    seed: args.seed,
  });
  if (!args.quiet) {
    console.error(
      `users=${cohort.users.length} vocab=${vocab.size - 1} examples=${examples.length}`);
  }
  const result = await train(examples, vocab, {
    window: args.window,
    embedDim: args.embedDim,
    lstmUnits: args.lstmUnits,
    hiddenDim: args.hidden,
    batchSize: args.batch,
    learningRate: args.learningRate,
    maxEpochs: args.maxEpochs,
    patience: args.patience,
    seed: args.seed,
    quiet: args.quiet,
  });
  if (!args.quiet) {
    console.error(
      `trained ${result.epochs} epochs, best val accuracy ${result.bestValAccuracy.toFixed(4)}`);
  }
  const targets = missingSlots(trainView);
  const rows = await predict(result.model, result.spec, vocab, trainView, targets);
  writePredictions(args.out, rows);
  console.log(`wrote ${rows.length} predictions to ${args.out}`);
}

const isDirectRun = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split('/').pop() ?? '');
if (isDirectRun) {
  main(process.argv.slice(2)).catch((err) => {
    console.error(String(err?.message ?? err));
    process.exit(1);
  });
}
