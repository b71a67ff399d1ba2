/**
 * File interfaces shared with the Python pipeline.
 *
 * Timelines arrive as `user_id,q,cell,provenance` rows with a JSON header
 * sidecar carrying the grid geometry; the split mask lists held-out
 * `user_id,q` pairs; predictions leave in the common schema
 * `user_id,q,predicted_cell,rank1..3,score1..3,source,model`.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';

export const EMPTY = -1;

export interface TimelineHeader {
  resolution_hours: number;
  weeks: number;
  study_start: string;
  grid_hash: string;
}

export interface Cohort {
  header: TimelineHeader;
  nSlots: number;
  users: string[];
  /** full assigned timeline per user, EMPTY where unassigned */
  cells: Map<string, Int32Array>;
}

export function readTimelines(timelinesPath: string): Cohort {
  const headerPath = timelinesPath.replace(/\.csv$/, '.header.json');
  const header = JSON.parse(fs.readFileSync(headerPath, 'utf8')) as TimelineHeader;
  const nSlots = header.weeks * (7 * 24 / header.resolution_hours);

  const cells = new Map<string, Int32Array>();
  const lines = fs.readFileSync(timelinesPath, 'utf8').split('\n');
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    const [user, q, cell] = line.split(',');
    let row = cells.get(user);
    if (!row) {
      row = new Int32Array(nSlots).fill(EMPTY);
      cells.set(user, row);
    }
    row[Number(q)] = Number(cell);
  }
  return { header, nSlots, users: [...cells.keys()].sort(), cells };
}

/** user -> set of held-out slot indices */
export function readSplitMask(splitPath: string): Map<string, Set<number>> {
  const mask = new Map<string, Set<number>>();
  const lines = fs.readFileSync(splitPath, 'utf8').split('\n');
  for (let i = 1; i < lines.length; i++) {
    const line = lines[i].trim();
    if (!line) continue;
    const [user, q] = line.split(',');
    if (!mask.has(user)) mask.set(user, new Set());
    mask.get(user)!.add(Number(q));
  }
  return mask;
}

/** Training view: the assigned timeline with held-out slots blanked. */
export function applySplit(
  cohort: Cohort,
  mask: Map<string, Set<number>>,
): Map<string, Int32Array> {
  const train = new Map<string, Int32Array>();
  for (const [user, row] of cohort.cells) {
    const copy = row.slice();
    for (const q of mask.get(user) ?? []) copy[q] = EMPTY;
    train.set(user, copy);
  }
  return train;
}

export interface PredictionRow {
  user: string;
  q: number;
  ranked: Array<[cell: number, score: number]>;
}

export function writePredictions(outPath: string, rows: PredictionRow[], model = 'rnn'): void {
  const header = [
    'user_id', 'q', 'predicted_cell',
    'rank1', 'rank2', 'rank3', 'score1', 'score2', 'score3',
    'source', 'model',
  ].join(',');
  const body: string[] = [header];
  const sorted = [...rows].sort((a, b) =>
    a.user === b.user ? a.q - b.q : a.user < b.user ? -1 : 1);
  for (const row of sorted) {
    const top = row.ranked.slice(0, 3);
    const cells = top.map(([c]) => String(c));
    const scores = top.map(([, s]) => s.toPrecision(6));
    while (cells.length < 3) { cells.push(''); scores.push(''); }
    body.push([
      row.user, row.q, top[0][0],
      ...cells, ...scores,
      'Predicted', model,
    ].join(','));
  }
  const tmp = path.join(
    path.dirname(outPath), `.${path.basename(outPath)}.tmp`);
  fs.writeFileSync(tmp, body.join('\n') + '\n');
  fs.renameSync(tmp, outPath);
}
