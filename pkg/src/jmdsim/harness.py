"""Monte-Carlo trials and sweeps with deterministic per-trial seeding.

Each trial owns independent random streams derived from
``(seed, cell_index, trial_index, component)`` through
:class:`numpy.random.SeedSequence` spawn keys.  The cell index is the
position of the SNR point in the sweep, so every detector and jammer model
evaluated at one SNR point sees the same channels, data and noise.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .detectors import DETECTORS, detect
from .errors import ConfigError, JmdError, SweepError
from .jammers import gen_jammer
from .metrics import TrialMetrics, ber, rate_fraction
from .numerics import orthonormalize, principal_angles
from .scenario import (Frame, JammerModel, ScenarioConfig, assemble_frame,
                       gen_channel, gen_data, gen_pilots, load_structured)

log = logging.getLogger(__name__)

_STREAMS = {"channel": 0, "data": 1, "jammer": 2, "noise": 3, "detector": 4}

CSV_COLUMNS = ("snr_db", "detector", "jammer_model", "rho_db", "L", "r", "ber",
               "mer", "trials", "principal_angle_median", "wall_time_s")


def trial_rng(seed: int, cell_index: int, trial_index: int,
              stream: str) -> np.random.Generator:
    ss = np.random.SeedSequence(seed, spawn_key=(cell_index, trial_index,
                                                 _STREAMS[stream]))
    return np.random.Generator(np.random.PCG64(ss))


def make_frame(cfg: ScenarioConfig, trial_index: int = 0,
               cell_index: int = 0) -> Frame:
    """Generate channel, data, jammer and noise for one trial of ``cfg``."""
    def rng(stream):
        return trial_rng(cfg.seed, cell_index, trial_index, stream)

    H, J = gen_channel(cfg, rng("channel"))
    S_T = gen_pilots(cfg.U)
    S_D = gen_data(cfg.U, cfg.D, rng("data"))
    jam = gen_jammer(cfg.jammer_model, cfg, J, H, rng("jammer"))
    return assemble_frame(cfg, H, J, S_T, S_D, jam.W, rng("noise"), jammer=jam)


@dataclass(frozen=True)
class DetectorSpec:
    """Detector name plus optional overrides of the scenario knobs.

    ``L`` defaults to the scenario's ``L`` for ``pos_box`` and to 0 (no
    estimation phase) for every other detector.
    """

    name: str
    t_max: int | None = None
    alpha: float | None = None
    L: int | None = None

    def __post_init__(self):
        if self.name not in DETECTORS:
            raise ConfigError(f"unknown detector {self.name!r}; "
                              f"choose from {', '.join(DETECTORS)}")

    def scenario(self, base: ScenarioConfig) -> ScenarioConfig:
        if self.L is not None:
            L = self.L
        else:
            L = base.L if self.name == "pos_box" else 0
        return base.replace(L=L)

    @classmethod
    def parse(cls, item) -> "DetectorSpec":
        if isinstance(item, DetectorSpec):
            return item
        if isinstance(item, str):
            return cls(item)
        if isinstance(item, dict):
            unknown = set(item) - {f.name for f in fields(cls)}
            if unknown:
                raise ConfigError(f"unknown detector keys: {sorted(unknown)}")
            return cls(**item)
        raise ConfigError(f"cannot parse detector spec {item!r}")


def run_trial(cfg: ScenarioConfig, detector: DetectorSpec | str, trial_index: int,
              cell_index: int = 0, emit_subspace_metrics: bool = True) -> TrialMetrics:
    """Simulate one frame and score one detector on it.

    ``cfg`` must already carry the detector's ``L`` (see
    :meth:`DetectorSpec.scenario`).
    """
    detector = DetectorSpec.parse(detector)
    try:
        frame = make_frame(cfg, trial_index, cell_index)
        t0 = time.perf_counter()
        result = detect(detector.name, frame, cfg.I,
                        t_max=detector.t_max or cfg.t_max,
                        alpha=cfg.alpha if detector.alpha is None else detector.alpha,
                        rng=trial_rng(cfg.seed, cell_index, trial_index, "detector"))
        elapsed = time.perf_counter() - t0
    except JmdError as exc:
        raise type(exc)(f"trial {trial_index} (cell {cell_index}, "
                        f"{detector.name}): {exc}") from exc
    errors, total = ber(result.S_hard, frame.S_D)
    angle = None
    if (emit_subspace_metrics and result.J_est is not None and frame.J.shape[1] > 0
            and result.J_est.shape == frame.J.shape):
        angle = float(np.max(principal_angles(result.J_est, orthonormalize(frame.J))))
    return TrialMetrics(bit_errors=errors, bits_total=total,
                        mer_num=float(np.linalg.norm(result.S_soft - frame.S_D)),
                        mer_den=float(np.linalg.norm(frame.S_D)),
                        principal_angle_max=angle, detector_seconds=elapsed)


@dataclass
class SweepRecord:
    snr_db: float
    detector: str
    jammer_model: str
    rho_db: float
    L: int
    r: float
    ber: float
    mer: float
    trials: int
    principal_angle_median: float | None = None
    wall_time_s: float = 0.0


@dataclass
class SweepSpec:
    base: ScenarioConfig
    snr_db_list: list[float]
    detectors: list[DetectorSpec]
    trials_per_point: int = 100
    output_path: str | None = None
    emit_subspace_metrics: bool = False
    jammer_models: list[str] | None = None
    rho_db_list: list[float] | None = None
    record_timing: bool = True
    format: str = "csv"

    def __post_init__(self):
        self.detectors = [DetectorSpec.parse(d) for d in self.detectors]
        if self.trials_per_point < 1:
            raise ConfigError("trials_per_point must be >= 1")
        if not self.snr_db_list:
            raise ConfigError("snr_db_list must not be empty")
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"unknown output format {self.format!r}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "SweepSpec":
        data = dict(data)
        base = ScenarioConfig.from_dict(data.pop("scenario", {}))
        known = {f.name for f in fields(cls)} - {"base"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown sweep keys: {sorted(unknown)}")
        if "detectors" not in data or "snr_db_list" not in data:
            raise ConfigError("sweep config needs 'snr_db_list' and 'detectors'")
        return cls(base=base, **data)

    @classmethod
    def from_file(cls, path) -> "SweepSpec":
        return cls.from_dict(load_structured(path))

    def cells(self):
        """Yield ``(cell_index, cfg, detector)`` for every sweep cell."""
        models = self.jammer_models or [self.base.jammer_model]
        rhos = self.rho_db_list or [self.base.rho_db]
        for model in models:
            for rho in rhos:
                for snr_index, snr in enumerate(self.snr_db_list):
                    cfg = self.base.replace(jammer_model=JammerModel(model),
                                            rho_db=float(rho), snr_db=float(snr))
                    for det in self.detectors:
                        yield snr_index, det.scenario(cfg), det


def _run_chunk(args):
    cfg, det, cell_index, trial_indices, emit = args
    out = []
    for i in trial_indices:
        t0 = time.perf_counter()
        try:
            m = run_trial(cfg, det, i, cell_index, emit)
        except Exception as exc:  # noqa: BLE001 - counted against the failure budget
            out.append((i, None, f"{type(exc).__name__}: {exc}", 0.0))
            continue
        out.append((i, m, None, time.perf_counter() - t0))
    return out


def _aggregate(cfg: ScenarioConfig, det: DetectorSpec, results, record_timing: bool,
               trials_requested: int) -> SweepRecord:
    results = sorted(results, key=lambda item: item[0])
    failures = [(i, err) for i, m, err, _ in results if m is None]
    if len(failures) > 0.01 * trials_requested:
        i, err = failures[0]
        raise SweepError(
            f"{len(failures)}/{trials_requested} trials failed for {det.name} at "
            f"SNR {cfg.snr_db} dB ({cfg.jammer_model.value}); first: trial {i}: {err}")
    ok = [m for _, m, _, _ in results if m is not None]
    bit_errors = sum(m.bit_errors for m in ok)
    bits = sum(m.bits_total for m in ok)
    angles = [m.principal_angle_max for m in ok if m.principal_angle_max is not None]
    den = math.fsum(m.mer_den for m in ok)
    return SweepRecord(
        snr_db=cfg.snr_db, detector=det.name, jammer_model=cfg.jammer_model.value,
        rho_db=cfg.rho_db, L=cfg.L, r=float(rate_fraction(cfg.K, cfg.U, cfg.L)),
        ber=bit_errors / bits if bits else math.nan,
        mer=math.fsum(m.mer_num for m in ok) / den if den else math.nan,
        trials=len(ok),
        principal_angle_median=float(np.median(angles)) if angles else None,
        wall_time_s=math.fsum(t for *_, t in results) if record_timing else 0.0)


def run_sweep(spec: SweepSpec, workers: int = 1, chunk_size: int = 50) -> list[SweepRecord]:
    """Run every sweep cell for ``spec.trials_per_point`` trials.

    Results do not depend on ``workers``: every trial has its own seed and
    aggregation sorts by trial index before summing.
    """
    cells = list(spec.cells())
    tasks = []
    for c, (cell_index, cfg, det) in enumerate(cells):
        for start in range(0, spec.trials_per_point, chunk_size):
            idx = range(start, min(start + chunk_size, spec.trials_per_point))
            tasks.append((c, (cfg, det, cell_index, list(idx),
                              spec.emit_subspace_metrics)))
    per_cell: dict[int, list] = {c: [] for c in range(len(cells))}
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (c, _), out in zip(tasks, pool.map(_run_chunk, [t for _, t in tasks])):
                per_cell[c].extend(out)
    else:
        for c, args in tasks:
            per_cell[c].extend(_run_chunk(args))
    records = []
    for c, (_, cfg, det) in enumerate(cells):
        rec = _aggregate(cfg, det, per_cell[c], spec.record_timing, spec.trials_per_point)
        log.info("%s %s snr=%.1f dB: ber=%.3e mer=%.4f", rec.jammer_model, rec.detector,
                 rec.snr_db, rec.ber, rec.mer)
        records.append(rec)
    return records


# ------------------------------------------------------------------- output

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, "#.10g")
    return str(value)


def dump_results(records: Iterable[SweepRecord], fmt: str, fh) -> None:
    """Write records to an open text stream."""
    if fmt == "csv":
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            d = asdict(rec)
            writer.writerow([_fmt(d[k]) for k in CSV_COLUMNS])
    elif fmt == "jsonl":
        for rec in records:
            d = asdict(rec)
            fh.write(json.dumps({k: d[k] for k in CSV_COLUMNS}) + "\n")
    else:
        raise ConfigError(f"unknown output format {fmt!r}")


def write_results(records: Iterable[SweepRecord], fmt: str, path) -> None:
    """Write records as CSV or JSON lines to ``path``."""
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"unknown output format {fmt!r}")
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            dump_results(records, fmt, fh)
    except OSError as exc:
        raise SweepError(f"cannot write results to {path}: {exc}") from None


def _parse_field(name: str, text: str):
    if text == "":
        return None
    if name in ("detector", "jammer_model"):
        return text
    if name in ("L", "trials"):
        return int(text)
    return float(text)


def read_results(path, fmt: str | None = None) -> list[SweepRecord]:
    path = Path(path)
    fmt = fmt or ("jsonl" if path.suffix == ".jsonl" else "csv")
    if fmt == "jsonl":
        with path.open() as fh:
            return [SweepRecord(**json.loads(line)) for line in fh if line.strip()]
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [SweepRecord(**{k: _parse_field(k, v) for k, v in row.items()})
                for row in reader]
