import { describe, expect, it } from 'vitest';

import { EMPTY, applySplit } from '../src/csv.js';
import { OTHER, PAD, buildVocab, buildWindows, contextsAt, shuffled } from '../src/windows.js';

function row(nSlots: number, assigned: Record<number, number>): Int32Array {
  const out = new Int32Array(nSlots).fill(EMPTY);
  for (const [q, cell] of Object.entries(assigned)) out[Number(q)] = cell;
  return out;
}

describe('vocabulary', () => {
  it('maps cells to dense ids with PAD and OTHER reserved', () => {
    const vocab = buildVocab([row(10, { 1: 700, 2: 5, 3: 700 })]);
    expect(vocab.size).toBe(4); // PAD + OTHER + two cells
    expect(vocab.toId.get(5)).toBe(2);
    expect(vocab.toId.get(700)).toBe(3);
    expect(vocab.toCell[2]).toBe(5);
    expect(Number.isNaN(vocab.toCell[PAD])).toBe(true);
    expect(Number.isNaN(vocab.toCell[OTHER])).toBe(true);
  });

  it('rare cells beyond the cap collapse into OTHER', () => {
    // cell 9 dominates; cells 5 and 7 appear once each
    const vocab = buildVocab(
      [row(12, { 0: 9, 1: 9, 2: 9, 3: 9, 4: 5, 5: 7 })], 3);
    expect(vocab.size).toBe(3);
    expect(vocab.toId.get(9)).toBe(2);
    expect(vocab.toId.has(5)).toBe(false);
    const { left } = contextsAt(row(12, { 0: 9, 1: 5 }), 2, 2, vocab);
    expect([...left]).toEqual([vocab.toId.get(9)!, OTHER]);
  });
});

describe('contexts', () => {
  const vocab = buildVocab([row(20, { 5: 100, 6: 100, 7: 200, 10: 300 })]);
  const data = row(20, { 5: 100, 6: 100, 7: 200, 10: 300 });

  it('isolated observation yields all-PAD contexts', () => {
    const lone = row(20, { 10: 300 });
    const v = buildVocab([lone]);
    const { left, right } = contextsAt(lone, 10, 4, v);
    expect([...left]).toEqual([PAD, PAD, PAD, PAD]);
    expect([...right]).toEqual([PAD, PAD, PAD, PAD]);
  });

  it('timeline start leaves the left context padded', () => {
    const first = row(20, { 0: 100, 1: 200 });
    const v = buildVocab([first]);
    const { left, right } = contextsAt(first, 0, 3, v);
    expect([...left]).toEqual([PAD, PAD, PAD]);
    expect(right[0]).toBe(v.toId.get(200));
  });

  it('dense run fills both contexts oldest-first / nearest-first', () => {
    const { left, right } = contextsAt(data, 6, 2, vocab);
    expect([...left]).toEqual([PAD, vocab.toId.get(100)!]); // q-2 empty? q=6: [4,5] -> 4 empty, 5=100
    expect([...right]).toEqual([vocab.toId.get(200)!, PAD]); // q+1=7, q+2=8 empty
  });

  it('never reads the target slot itself', () => {
    const { left, right } = contextsAt(data, 10, 2, vocab);
    expect([...left]).toEqual([PAD, PAD]);  // 8, 9 empty
    expect([...right]).toEqual([PAD, PAD]); // 11, 12 empty
  });
});

describe('window examples', () => {
  it('one example per training-assigned slot', () => {
    const train = new Map([['u', row(30, { 3: 9, 4: 9, 20: 11 })]]);
    const vocab = buildVocab(train.values());
    const examples = buildWindows(train, vocab, { window: 3 });
    expect(examples.length).toBe(3);
    const targets = examples.map(e => e.target).sort();
    expect(targets).toEqual([2, 2, 3]);
  });

  it('held-out slots vanish from targets and contexts', () => {
    const cohort = {
      header: { resolution_hours: 1, weeks: 1, study_start: '', grid_hash: '' },
      nSlots: 30,
      users: ['u'],
      cells: new Map([['u', row(30, { 3: 9, 4: 13, 5: 9 })]]),
    };
    const mask = new Map([['u', new Set([4])]]);
    const train = applySplit(cohort, mask);
    const vocab = buildVocab(train.values());
    const examples = buildWindows(train, vocab, { window: 2 });
    expect(examples.length).toBe(2);
    for (const ex of examples) {
      // cell 13 was only at the held-out slot: nowhere to be seen
      expect(ex.target).toBe(vocab.toId.get(9));
      expect([...ex.left]).not.toContain(vocab.toId.get(13) ?? -99);
    }
    expect(vocab.toId.has(13)).toBe(false);
  });

  it('per-user cap subsamples deterministically', () => {
    const assigned: Record<number, number> = {};
    for (let q = 0; q < 25; q++) assigned[q] = 7;
    const train = new Map([['u', row(30, assigned)]]);
    const vocab = buildVocab(train.values());
    const a = buildWindows(train, vocab, { window: 2, maxPerUser: 10, seed: 4 });
    const b = buildWindows(train, vocab, { window: 2, maxPerUser: 10, seed: 4 });
    expect(a.length).toBe(10);
    expect(a.map(e => [...e.left].join())).toEqual(b.map(e => [...e.left].join()));
  });
});

describe('shuffle', () => {
  it('is a seeded permutation', () => {
    const items = [...Array(50).keys()];
    const a = shuffled(items, 9);
    const b = shuffled(items, 9);
    const c = shuffled(items, 10);
    expect(a).toEqual(b);
    expect(a).not.toEqual(c);
    expect([...a].sort((x, y) => x - y)).toEqual(items);
  });
});
