"""File formats shared between pipeline stages and companion tools.

Prediction rows use one schema for every model so downstream evaluation
never cares which predictor produced them:

    user_id,q,predicted_cell,rank1,rank2,rank3,score1,score2,score3,source[,model]
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

RANKS = 3


def atomic_write(path: str | Path, write_body: Callable) -> None:
    """Write into a sibling temp file, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            write_body(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str | Path, payload: dict) -> None:
    atomic_write(path, lambda fh: json.dump(payload, fh, indent=2, sort_keys=True))


def write_predictions_csv(
    path: str | Path,
    predictions: Dict[str, Dict[int, List[Tuple[int, float]]]],
    sources: Optional[Dict[str, Dict[int, str]]] = None,
    model: Optional[str] = None,
) -> None:
    header = ["user_id", "q", "predicted_cell"]
    header += [f"rank{i}" for i in range(1, RANKS + 1)]
    header += [f"score{i}" for i in range(1, RANKS + 1)]
    header.append("source")
    if model is not None:
        header.append("model")

    def body(fh):
        writer = csv.writer(fh)
        writer.writerow(header)
        for uid in sorted(predictions):
            for q in sorted(predictions[uid]):
                ranked = predictions[uid][q]
                if not ranked:
                    continue
                cells = [str(c) for c, _ in ranked[:RANKS]]
                scores = [f"{s:.6g}" for _, s in ranked[:RANKS]]
                cells += [""] * (RANKS - len(cells))
                scores += [""] * (RANKS - len(scores))
                source = "Predicted"
                if sources and uid in sources:
                    source = sources[uid].get(q, source)
                row = [uid, q, ranked[0][0], *cells, *scores, source]
                if model is not None:
                    row.append(model)
                writer.writerow(row)

    atomic_write(path, body)


def read_predictions_csv(path: str | Path) -> Dict[str, Dict[int, List[Tuple[int, float]]]]:
    out: Dict[str, Dict[int, List[Tuple[int, float]]]] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            ranked = []
            for i in range(1, RANKS + 1):
                cell = row.get(f"rank{i}", "")
                if cell == "" or cell is None:
                    break
                score = row.get(f"score{i}") or "0"
                ranked.append((int(cell), float(score)))
            if not ranked:
                continue
            out.setdefault(row["user_id"], {})[int(row["q"])] = ranked
    return out


def write_split_csv(path: str | Path, split: Dict[str, np.ndarray]) -> None:
    def body(fh):
        writer = csv.writer(fh)
        writer.writerow(["user_id", "q"])
        for uid in sorted(split):
            for q in np.nonzero(split[uid])[0].tolist():
                writer.writerow([uid, q])

    atomic_write(path, body)


def read_split_csv(path: str | Path, n_slots: int) -> Dict[str, np.ndarray]:
    split: Dict[str, np.ndarray] = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            mask = split.setdefault(row["user_id"], np.zeros(n_slots, dtype=bool))
            mask[int(row["q"])] = True
    return split


def write_table_csv(path: str | Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    def body(fh):
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))

    atomic_write(path, body)
