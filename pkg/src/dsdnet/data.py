"""Benchmark datasets: generation, encoding, padding, splits and persistence."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .baseline import basis_count, baseline_fit_labels
from .dmp import DmpParams, Trajectory
from .errors import CapacityError, PaddingError
from .fitting import DegenerateDimensionWarning, FitConfig
from .metrics import EvalRow, dtw, rmse
from .segmentation import encode_demo, pad_records
from .tasks import cutting, pickplace

DEFAULT_N = 10
SPLIT_FRACTIONS = (0.7, 0.2, 0.1)


@dataclass(frozen=True)
class TaskDef:
    name: str
    M: int
    d: int

    def generate(self, seed):
        if self.name == "cut":
            return cutting.gen_polygon(seed)
        return pickplace.gen_pickplace(seed, self.name.split("-")[1])

    def scene_from_dict(self, d):
        if self.name == "cut":
            return cutting.PolygonScene.from_dict(d)
        return pickplace.PickPlaceScene.from_dict(d)

    def plan(self, scene) -> Trajectory:
        return cutting.plan_cutting(scene) if self.name == "cut" else pickplace.plan_pickplace(scene)

    def score(self, motion, scene):
        """(successes, attempts, overall or None)."""
        if self.name == "cut":
            s, a = cutting.eval_cut_success(motion, scene)
            return s, a, None
        flags, overall = pickplace.eval_pickplace(motion, scene)
        return sum(flags.values()), len(flags), overall


TASKS = {
    "cut": TaskDef("cut", cutting.M_SEGMENTS, 2),
    "pickplace-fixed": TaskDef("pickplace-fixed", pickplace.M_SEGMENTS, 4),
    "pickplace-random": TaskDef("pickplace-random", pickplace.M_SEGMENTS, 4),
}


def quantize(image) -> np.ndarray:
    """Round to the 8-bit grid so in-memory images equal their PGM copies."""
    return np.rint(np.clip(np.asarray(image, dtype=float), 0.0, 1.0) * 255) / 255


def record_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def split_ids(ids, seed: int, fractions=SPLIT_FRACTIONS) -> dict:
    ids = list(ids)
    order = np.random.default_rng(seed).permutation(len(ids))
    n_train = int(round(fractions[0] * len(ids)))
    n_val = int(round(fractions[1] * len(ids)))
    pick = lambda sel: sorted(ids[i] for i in sel)  # noqa: E731
    return {
        "train": pick(order[:n_train]),
        "val": pick(order[n_train:n_train + n_val]),
        "test": pick(order[n_train + n_val:]),
    }


@dataclass
class Dataset:
    task: str
    M: int
    N: int
    d: int
    seed: int
    ids: list
    scenes: dict
    demos: dict
    records: dict  # id -> SegmentedRecord
    baseline: dict  # variant -> id -> DmpParams
    splits: dict
    meta: dict = field(default_factory=dict)

    def subset(self, split):
        return [self.records[i] for i in self.splits[split]]

    def images(self, split):
        return np.stack([self.records[i].image for i in self.splits[split]])

    def baseline_labels(self, variant, split):
        return [self.baseline[variant][i] for i in self.splits[split]]


def make_dataset(task: str, count: int, seed: int = 0, N: int = DEFAULT_N, M: int | None = None,
                 baselines=("eq", "plus")) -> Dataset:
    """Generate scenes and expert demos, encode, split 70/20/10 and pad with train-split means."""
    tdef = TASKS[task]
    M = tdef.M if M is None else M
    config = FitConfig.with_basis(N)
    ids = [f"{k:05d}" for k in range(count)]
    scenes, demos, encoded = {}, {}, {}
    with warnings.catch_warnings():
        # constant dimensions within a segment are expected in both tasks
        warnings.simplefilter("ignore", DegenerateDimensionWarning)
        for rid, s in zip(ids, record_seeds(seed, count)):
            scene = tdef.generate(s)
            demo = tdef.plan(scene)
            scenes[rid], demos[rid] = scene, demo
            try:
                encoded[rid] = encode_demo(demo, quantize(scene.image), M, config,
                                           provenance={"id": rid, "seed": s})
            except CapacityError as exc:
                raise CapacityError(exc.count, exc.capacity, rid) from None
        baseline = {
            v: {rid: baseline_fit_labels(demos[rid], basis_count(v, M, N)) for rid in ids}
            for v in baselines
        }
    splits = split_ids(ids, seed)
    donors = [encoded[i] for i in splits["train"]]
    try:
        padded = pad_records([encoded[i] for i in ids], M, donors=donors)
    except PaddingError as exc:
        raise PaddingError(f"{exc} (train split of {len(donors)} records)") from None
    records = dict(zip(ids, padded))
    meta = {"task": task, "M": M, "N": N, "d": tdef.d, "count": count, "seed": seed,
            "dt": demos[ids[0]].dt if ids else None,
            "baseline_basis": {v: basis_count(v, M, N) for v in baselines}}
    return Dataset(task, M, N, tdef.d, seed, ids, scenes, demos, records, baseline, splits, meta)


def write_dataset(ds: Dataset, out) -> Path:
    out = Path(out)
    for sub in ("images", "demos", "splits"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    (out / "dataset.json").write_text(json.dumps(ds.meta, sort_keys=True, indent=1) + "\n")
    rows = []
    for rid in ds.ids:
        rec = ds.records[rid]
        io.write_pgm(out / "images" / f"{rid}.pgm", rec.image)
        io.write_trajectory(out / "demos" / f"{rid}.traj", ds.demos[rid])
        rows.append(io.record_to_dict(rec, f"images/{rid}.pgm"))
    io.write_jsonl(out / "records.jsonl", rows)
    io.write_jsonl(out / "scenes.jsonl", [dict(ds.scenes[r].to_dict(), id=r) for r in ds.ids])
    for v, labels in ds.baseline.items():
        io.write_jsonl(out / f"baseline_{v}.jsonl",
                       [{"id": r, "params": labels[r].to_dict()} for r in ds.ids])
    for name, members in ds.splits.items():
        (out / "splits" / f"{name}.txt").write_text("".join(m + "\n" for m in members))
    return out


def load_dataset(path) -> Dataset:
    path = Path(path)
    meta_file = path / "dataset.json"
    if not meta_file.exists():
        raise FileNotFoundError(f"{meta_file} not found; run gen-data first")
    meta = json.loads(meta_file.read_text())
    tdef = TASKS[meta["task"]]
    records, ids = {}, []
    for row in io.read_jsonl(path / "records.jsonl"):
        rec = io.record_from_dict(row, path)
        records[row["id"]] = rec
        ids.append(row["id"])
    scenes = {row["id"]: tdef.scene_from_dict(row) for row in io.read_jsonl(path / "scenes.jsonl")}
    demos = {rid: io.read_trajectory(path / "demos" / f"{rid}.traj") for rid in ids}
    baseline = {}
    for v in meta.get("baseline_basis", {}):
        baseline[v] = {row["id"]: DmpParams.from_dict(row["params"])
                       for row in io.read_jsonl(path / f"baseline_{v}.jsonl")}
    splits = {name: (path / "splits" / f"{name}.txt").read_text().split()
              for name in ("train", "val", "test")}
    return Dataset(meta["task"], meta["M"], meta["N"], meta["d"], meta["seed"], ids, scenes, demos,
                   records, baseline, splits, meta)


def evaluate_motions(ds: Dataset, motions: dict) -> list[EvalRow]:
    """Score predicted motions (id -> Trajectory) against expert demos and task rules."""
    tdef = TASKS[ds.task]
    rows = []
    for rid, motion in motions.items():
        ref = ds.demos[rid]
        succ, att, overall = tdef.score(motion, ds.scenes[rid])
        rows.append(EvalRow(rid, rmse(motion, ref), dtw(motion, ref), succ, att, overall))
    return rows
