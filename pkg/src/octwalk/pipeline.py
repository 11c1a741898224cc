"""The classification cascade and its on-disk database.

A database is a directory.  Every stage reads the outputs of earlier stages,
writes its own files through a temporary name and an atomic rename, and then
marks itself done in ``meta.json``; rerunning a finished stage is a no-op, and
an interrupted stage resumes from its last completed shard.  Nothing written
depends on wall-clock time, so a resumed run produces the same bytes.
"""

from __future__ import annotations

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .countkernel import ModSeries, Target, count_layers
from .exactify import PRIME_TABLE, ExactSeries, crt_reconstruct, select_primes
from .reduce import HadamardKind, classify, hadamard_decompose, projectible
from .stepset import (
    NBITS,
    STATUS_CODES,
    STATUS_FROM_CODE,
    FilterStatus,
    canonical_masks_of_size,
    decode,
)
from .walkgroup import (
    EvaluationError,
    MapUndefined,
    SignUndefined,
    explore_group,
    identify_group,
    orbit_sum_zero,
    screen_many,
)

log = logging.getLogger("octwalk")

STAGES = ("enumerate", "filter", "group", "count", "reconstruct", "asympt", "guess")
GROUP_NAMES = ("Z2xZ2xZ2", "D12", "Z2xD8", "S4", "Z2xS4")
SHARD = 100_000


# -- configuration -------------------------------------------------------------------


@dataclass
class PipelineConfig:
    db: str = "octwalk-db"
    min_size: int = 1
    max_size: int = NBITS
    seed: int = 0
    threads: int = 1
    cap: int = 400
    points: int = 3
    # groups are also computed for models removed by filters 2 and 3
    group_eliminated: bool = True
    targets: tuple[str, ...] = ("all", "excursions")
    count_n: int = 100
    count_models: tuple[str, ...] = ()  # default: five-filter survivors
    primes: int = 0  # 0: from the prime-count bound
    asympt_order: int = 6
    asympt_shift: int = 10
    guess_r: int = 20
    guess_d: int = 30
    guess_prime: int = 16381

    @classmethod
    def from_mapping(cls, data: dict) -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        data = dict(data)
        for key in ("targets", "count_models"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    @classmethod
    def from_toml(cls, path) -> "PipelineConfig":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        return cls.from_mapping(data.get("pipeline", data))

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("db")
        d.pop("threads")
        return d


# -- database ------------------------------------------------------------------------


def _atomic_write(path: Path, data: "str | bytes") -> None:
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode) as fh:
        fh.write(data)
    os.replace(tmp, path)


def _atomic_save_npy(path: Path, arr: np.ndarray) -> None:
    tmp = path.with_name(path.name + ".tmp.npy")
    np.save(tmp, arr)
    os.replace(tmp, path)


class ClassificationDB:
    def __init__(self, root, config: PipelineConfig | None = None):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        meta = self.root / "meta.json"
        if meta.exists():
            self.meta = json.loads(meta.read_text())
            if config is not None and self.meta["config"] != json.loads(json.dumps(config.to_json())):
                raise ValueError(f"{self.root} was created with a different configuration")
        else:
            if config is None:
                raise FileNotFoundError(f"no database at {self.root}")
            self.meta = {"version": __version__, "config": config.to_json(), "stages": {}}
            self._save_meta()
        self.config = PipelineConfig.from_mapping({**self.meta["config"], "db": str(self.root)})

    # meta
    def _save_meta(self) -> None:
        _atomic_write(self.root / "meta.json", json.dumps(self.meta, indent=1, sort_keys=True) + "\n")

    def done(self, stage: str) -> bool:
        return self.meta["stages"].get(stage, {}).get("done", False)

    def mark_done(self, stage: str, **info) -> None:
        self.meta["stages"][stage] = {"done": True, **info}
        self._save_meta()

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    # models
    def masks(self) -> np.ndarray:
        return np.load(self.root / "masks.npy")

    def status(self) -> np.ndarray:
        return np.load(self.root / "status.npy")

    def save_models(self, masks: np.ndarray, status: np.ndarray) -> None:
        _atomic_save_npy(self.root / "masks.npy", masks.astype(np.int64))
        _atomic_save_npy(self.root / "status.npy", status.astype(np.uint8))
        codes = np.array([STATUS_CODES[FilterStatus(s)] for s in range(len(FilterStatus))])
        sizes = _popcount_vec(masks.astype(np.int64))
        lines = [f"{m:07x},{k},{c}" for m, k, c in zip(masks.tolist(), sizes.tolist(), codes[status].tolist())]
        _atomic_write(self.root / "models.txt", "\n".join(lines) + ("\n" if lines else ""))

    def load_models_txt(self) -> tuple[np.ndarray, np.ndarray]:
        masks, status = [], []
        for line in (self.root / "models.txt").read_text().splitlines():
            h, _, c = line.split(",")
            masks.append(int(h, 16))
            status.append(int(STATUS_FROM_CODE[c]))
        return np.array(masks, np.int64), np.array(status, np.uint8)

    # polynomials
    def polynomials(self) -> dict:
        p = self.root / "polynomials.json"
        return json.loads(p.read_text()) if p.exists() else {}

    def set_polynomial(self, name: str, coeffs: Sequence[int]) -> None:
        polys = self.polynomials()
        polys[name] = [int(c) for c in coeffs]
        _atomic_write(self.root / "polynomials.json", json.dumps(polys, indent=1, sort_keys=True) + "\n")

    def groups(self) -> list[dict]:
        p = self.root / "groups.jsonl"
        if not p.exists():
            return []
        return [json.loads(line) for line in p.read_text().splitlines() if line]

    def survivors(self) -> list[int]:
        st = self.status()
        return [int(m) for m in self.masks()[st == FilterStatus.FINITE_GROUP_ZERO_OS]]


def _popcount_vec(m: np.ndarray) -> np.ndarray:
    out = np.zeros(len(m), np.int64)
    for b in range(NBITS):
        out += (m >> b) & 1
    return out


def size_polynomial(masks: np.ndarray) -> list[int]:
    return np.bincount(_popcount_vec(np.asarray(masks, np.int64)), minlength=NBITS + 1)[: NBITS + 1].tolist()


def format_polynomial(coeffs: Sequence[int]) -> str:
    terms = [f"{c}u^{k}" if c != 1 else f"u^{k}" for k, c in enumerate(coeffs) if c]
    return " + ".join(terms) if terms else "0"


# -- stages --------------------------------------------------------------------------


def stage_enumerate(db: ClassificationDB) -> None:
    cfg = db.config
    parts = [canonical_masks_of_size(k) for k in range(max(1, cfg.min_size), min(NBITS, cfg.max_size) + 1)]
    masks = np.sort(np.concatenate(parts).astype(np.int64)) if parts else np.empty(0, np.int64)
    status = np.zeros(len(masks), np.uint8)
    db.save_models(masks, status)
    db.set_polynomial("filter1", size_polynomial(masks))
    db.mark_done("enumerate", models=int(len(masks)))


def _hadamard_json(h) -> dict:
    def pairs(s):
        return sorted(list(x) for x in s) if s and isinstance(next(iter(s)), tuple) else sorted(s)

    return {
        "kind": "OnePlusTwo" if h.kind is HadamardKind.ONE_PLUS_TWO else "TwoPlusOne",
        "coordinate": "xyz"[h.distinguished_coordinate],
        "U": pairs(h.U),
        "V": pairs(h.V),
        "W": pairs(h.W),
    }


def stage_filter(db: ClassificationDB) -> None:
    masks = db.masks()
    status = db.status()
    cls = classify(masks)
    status = status.copy()
    status[cls == 1] = FilterStatus.PROJECTIBLE
    status[cls == 2] = FilterStatus.HADAMARD
    lines = []
    for m, c in zip(masks[cls > 0].tolist(), cls[cls > 0].tolist()):
        if c == 1:
            cert = json.loads(projectible(m).to_json())
            lines.append(json.dumps({"mask": f"{m:07x}", "projection": cert}))
        else:
            lines.append(json.dumps({"mask": f"{m:07x}", "hadamard": _hadamard_json(hadamard_decompose(m))}))
    _atomic_write(db.path("certificates.jsonl"), "\n".join(lines) + ("\n" if lines else ""))
    db.save_models(masks, status)
    db.set_polynomial("filter2", size_polynomial(masks[cls != 1]))
    db.set_polynomial("filter3", size_polynomial(masks[cls == 0]))
    db.mark_done("filter")


def analyse_group(mask: int, cap: int, points: int, seed: int, screened: int | None = None) -> dict:
    """Group record for one model (JSON-ready)."""
    rec = {"mask": f"{mask:07x}", "seed": seed}
    try:
        if screened is None:
            screened = int(screen_many(np.array([mask]), cap, seed)[0])
        if screened == -2:
            raise MapUndefined("some generator is undefined")
        if screened > cap:
            rec.update(status="PresumedInfinite", order=None)
            return rec
        g = explore_group(mask, cap=cap, points=points, seed=seed)
        if not g.finite:
            rec.update(status="PresumedInfinite", order=None)
            return rec
        verdict = orbit_sum_zero(mask, g, seed=seed + 1)
        rec.update(
            status="Finite",
            order=g.order,
            name=identify_group(g),
            relators=[list(r) for r in g.relators if len(r) <= 8],
            orbit_sum_zero=verdict.is_zero,
        )
    except (MapUndefined, EvaluationError, SignUndefined) as exc:
        rec.update(status="Error", error=f"{type(exc).__name__}: {exc}")
    return rec


def _group_shard(args) -> list[dict]:
    masks, cap, points, seed = args
    screened = screen_many(masks, cap, seed)
    out = []
    for m, s in zip(masks.tolist(), screened.tolist()):
        if s <= cap:
            out.append(analyse_group(m, cap, points, seed, s))
        else:
            out.append({"mask": f"{m:07x}", "seed": seed, "status": "PresumedInfinite", "order": None})
    return out


def stage_group(db: ClassificationDB) -> None:
    cfg = db.config
    masks = db.masks()
    status = db.status()
    # statuses from an earlier (possibly interrupted) group run are recomputed
    status[status >= FilterStatus.GROUP_LARGE] = FilterStatus.UNPROCESSED
    survivor = status == FilterStatus.UNPROCESSED
    chosen = survivor | (cfg.group_eliminated & (status != FilterStatus.UNPROCESSED))
    todo = masks[chosen]
    shard_dir = db.path("group_shards", "x").parent
    jobs = []
    for k, lo in enumerate(range(0, len(todo), SHARD)):
        out = shard_dir / f"shard_{k:05d}.jsonl"
        if not out.exists():
            jobs.append((out, (todo[lo : lo + SHARD], cfg.cap, cfg.points, cfg.seed)))
    log.info("group stage: %d models, %d shards to run", len(todo), len(jobs))

    def save(out, recs):
        # large groups are summarised in the status column only
        keep = [r for r in recs if r["status"] != "PresumedInfinite"]
        _atomic_write(out, "".join(json.dumps(r, sort_keys=True) + "\n" for r in keep) + f"#done {len(recs)}\n")

    if db.config.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(db.config.threads) as pool:
            for (out, _), recs in zip(jobs, pool.map(_group_shard, [j for _, j in jobs])):
                save(out, recs)
    else:
        for out, job in jobs:
            save(out, _group_shard(job))
            log.info("finished %s", out.name)

    records = {}
    for out in sorted(shard_dir.glob("shard_*.jsonl")):
        for line in out.read_text().splitlines():
            if line and not line.startswith("#"):
                r = json.loads(line)
                records[int(r["mask"], 16)] = r
    status = status.copy()
    index = {int(m): i for i, m in enumerate(masks.tolist())}
    lines = []
    for m in sorted(records):
        r = records[m]
        i = index[m]
        r["eliminated"] = bool(status[i] != FilterStatus.UNPROCESSED)
        lines.append(json.dumps(r, sort_keys=True))
    for i in np.nonzero(survivor)[0]:
        r = records.get(int(masks[i]))
        if r is None:
            status[i] = FilterStatus.GROUP_LARGE
        elif r["status"] == "Error":
            status[i] = FilterStatus.ERROR
        elif r["status"] != "Finite":
            status[i] = FilterStatus.GROUP_LARGE
        elif r["orbit_sum_zero"]:
            status[i] = FilterStatus.FINITE_GROUP_ZERO_OS
        else:
            status[i] = FilterStatus.FINITE_GROUP_NONZERO_OS
    _atomic_write(db.path("groups.jsonl"), "\n".join(lines) + ("\n" if lines else ""))
    db.save_models(masks, status)
    finite = (status == FilterStatus.FINITE_GROUP_ZERO_OS) | (status == FilterStatus.FINITE_GROUP_NONZERO_OS)
    db.set_polynomial("filter4", size_polynomial(masks[finite]))
    db.set_polynomial("filter5", size_polynomial(masks[status == FilterStatus.FINITE_GROUP_ZERO_OS]))
    elim = [m for m, r in records.items() if r.get("status") == "Finite" and r.get("eliminated")]
    db.set_polynomial("eliminated_small_group", size_polynomial(np.array(elim, np.int64)))
    _atomic_write(db.path("group_table.json"), json.dumps(group_table(db.groups()), indent=1) + "\n")
    errors = int((status == FilterStatus.ERROR).sum())
    db.mark_done("group", errors=errors)


def group_table(records: Iterable[dict]) -> dict:
    """name -> [eliminated (Hadamard/projectible), non-eliminated nonzero OS, non-eliminated zero OS]."""
    table: dict[str, list[int]] = {name: [0, 0, 0] for name in GROUP_NAMES}
    for r in records:
        if r.get("status") != "Finite":
            continue
        row = table.setdefault(r["name"], [0, 0, 0])
        if r.get("eliminated"):
            row[0] += 1
        elif r["orbit_sum_zero"]:
            row[2] += 1
        else:
            row[1] += 1
    return table


def _count_models(db: ClassificationDB) -> list[int]:
    if db.config.count_models:
        return [int(h, 16) for h in db.config.count_models]
    return db.survivors()


def _prime_list(mask: int, cfg: PipelineConfig) -> tuple[int, ...]:
    if cfg.primes:
        return PRIME_TABLE[: cfg.primes]
    return select_primes(len(decode(mask)), cfg.count_n).primes


def series_path(db: ClassificationDB, mask: int, target: str, p: int) -> Path:
    return db.path("series", f"{mask:07x}_{Target.parse(target).name.lower()}_{p}.ow3s")


def exact_path(db: ClassificationDB, mask: int, target: str) -> Path:
    return db.path("exact", f"{mask:07x}_{Target.parse(target).name.lower()}.txt")


def stage_count(db: ClassificationDB) -> None:
    cfg = db.config
    for m in _count_models(db):
        for t in cfg.targets:
            for p in _prime_list(m, cfg):
                out = series_path(db, m, t, p)
                if out.exists():
                    continue
                s = count_layers(m, cfg.count_n, p, t, shards=max(1, cfg.threads))
                _atomic_write(out, s.to_bytes())
    db.mark_done("count")


def stage_reconstruct(db: ClassificationDB) -> None:
    cfg = db.config
    for m in _count_models(db):
        for t in cfg.targets:
            out = exact_path(db, m, t)
            if out.exists():
                continue
            images = [ModSeries.load(series_path(db, m, t, p)) for p in _prime_list(m, cfg)]
            _atomic_write(out, crt_reconstruct(images).to_text())
    db.mark_done("reconstruct")


def stage_asympt(db: ClassificationDB) -> None:
    from .asymptotics import NoPowerLawFit, estimate_growth, estimate_row, estimates_csv, recognize_constant
    from mpmath import mpf

    cfg = db.config
    rows = []
    for m in _count_models(db):
        for t in cfg.targets:
            ex = ExactSeries.load(exact_path(db, m, t))
            try:
                est = estimate_growth(ex.terms, order=cfg.asympt_order, shift=cfg.asympt_shift)
            except (NoPowerLawFit, ValueError, ArithmeticError) as exc:
                rows.append({"model": f"{m:07x}", "target": t, "flags": f"error:{type(exc).__name__}"})
                continue
            tol = max(est.accuracy * 10, mpf(10) ** -12)
            mp_ = recognize_constant(est.phi, digits=30, d_max=4, H=1000, tolerance=tol)
            rows.append(estimate_row(f"{m:07x}", t, est, mp_))
    _atomic_write(db.path("estimates.csv"), _csv(rows))
    db.mark_done("asympt")


def _csv(rows):
    from .asymptotics import CSV_FIELDS, estimates_csv

    return estimates_csv([{k: r.get(k, "") for k in CSV_FIELDS} for r in rows])


def stage_guess(db: ClassificationDB) -> None:
    from .guess import SeriesTooShort, effective_budget, guess_ode, guess_recurrence, guess_report

    cfg = db.config
    p = cfg.guess_prime
    lines = []
    for m in _count_models(db):
        for t in cfg.targets:
            ex = ExactSeries.load(exact_path(db, m, t))
            a = [x % p for x in ex.terms]
            for kind, fn in (("recurrence", guess_recurrence), ("ode", guess_ode)):
                try:
                    cand = fn(a, cfg.guess_r, cfg.guess_d, p, strict=False)
                except SeriesTooShort as exc:
                    lines.append(json.dumps({"model": f"{m:07x}", "kind": kind, "error": str(exc)}))
                    continue
                rep = json.loads(guess_report(f"{m:07x}", kind, ex.N, cfg.guess_r, cfg.guess_d, cand))
                rep["target"] = t
                rep["scanned"] = [list(x) for x in effective_budget(len(a), cfg.guess_r, cfg.guess_d)]
                lines.append(json.dumps(rep, sort_keys=True))
    _atomic_write(db.path("guess.jsonl"), "\n".join(lines) + ("\n" if lines else ""))
    db.mark_done("guess")


STAGE_FUNCS = {
    "enumerate": stage_enumerate,
    "filter": stage_filter,
    "group": stage_group,
    "count": stage_count,
    "reconstruct": stage_reconstruct,
    "asympt": stage_asympt,
    "guess": stage_guess,
}


def _requirements(db: ClassificationDB, stage: str) -> tuple[str, ...]:
    if stage == "count" and db.config.count_models:
        return ()
    return {
        "enumerate": (),
        "filter": ("enumerate",),
        "group": ("filter",),
        "count": ("group",),
        "reconstruct": ("count",),
        "asympt": ("reconstruct",),
        "guess": ("reconstruct",),
    }[stage]


def run_stage(db: ClassificationDB, stage: str, force: bool = False) -> bool:
    """Run one stage if needed; returns False when it was already done."""
    for prev in _requirements(db, stage):
        if not db.done(prev):
            raise RuntimeError(f"stage {stage!r} needs {prev!r} to be completed first")
    if db.done(stage) and not force:
        return False
    STAGE_FUNCS[stage](db)
    return True


def run_pipeline(config: PipelineConfig, stages: Sequence[str] = STAGES) -> ClassificationDB:
    db = ClassificationDB(config.db, config)
    for s in stages:
        run_stage(db, s)
    return db


# -- report --------------------------------------------------------------------------

POLY_LABELS = (
    ("filter1", "essentially different models"),
    ("filter2", "not projectible"),
    ("filter3", "no Hadamard decomposition"),
    ("filter4", "group with <= cap elements"),
    ("filter5", "finite group and zero orbit sum"),
    ("eliminated_small_group", "models removed by filters 2-3 with small group"),
)


def report(db: ClassificationDB) -> str:
    polys = db.polynomials()
    out = ["Size polynomials", "================"]
    for key, label in POLY_LABELS:
        if key in polys:
            out.append(f"{label} ({sum(polys[key])}):")
            out.append("  " + format_polynomial(polys[key]))
    table_path = db.root / "group_table.json"
    if table_path.exists():
        table = json.loads(table_path.read_text())
        out += ["", "Models with finite group", "========================"]
        out.append(f"{'group':<10} {'Hadamard':>9} {'nonzero OS':>11} {'zero OS':>8}")
        for name, row in table.items():
            out.append(f"{name:<10} {row[0]:>9} {row[1]:>11} {row[2]:>8}")
        out.append(f"{'total':<10} {sum(r[0] for r in table.values()):>9} "
                   f"{sum(r[1] for r in table.values()):>11} {sum(r[2] for r in table.values()):>8}")
    est = db.root / "estimates.csv"
    if est.exists():
        out += ["", "Asymptotic estimates", "====================", est.read_text().rstrip()]
    return "\n".join(out) + "\n"
