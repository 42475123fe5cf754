"""Jammer threat models and rho-scaling of the jammer transmit matrix.

Every model produces ``w_k = A_k w~_k`` per slot with ``w~_k ~ CN(0, I)``.
The received jammer term ``J w_k`` therefore never leaves col(J), whatever
``A_k`` is.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ScalingError
from .numerics import crandn
from .scenario import JammerModel, ScenarioConfig


@dataclass
class JammerRealization:
    Jch: np.ndarray
    W: np.ndarray
    activity_mask: np.ndarray
    model: JammerModel
    rho_db_target: float
    A_schedule: list = field(default_factory=list)


def phase_slices(cfg: ScenarioConfig) -> dict[str, slice]:
    L, U = cfg.L, cfg.U
    return {"estimation": slice(0, L), "pilot": slice(L, L + U),
            "data": slice(L + U, cfg.K)}


def _check_dims(model: JammerModel, cfg: ScenarioConfig, Jch: np.ndarray):
    I, J = cfg.I, cfg.num_jammers
    if model in (JammerModel.BARRAGE, JammerModel.DATA_ONLY, JammerModel.PILOT_ONLY):
        ok = I == 1 and J == 1
    elif model is JammerModel.DISTRIBUTED_BARRAGE:
        ok = I == J >= 1
    elif model is JammerModel.JUMP_BEAMFORMING:
        ok = I == 4 and J == 1
    elif model is JammerModel.CONTINUOUS_BEAMFORMING:
        ok = I >= 2 and J == 1
    else:
        ok = True
    if not ok:
        raise ConfigError(f"jammer model {model.value} incompatible with "
                          f"I={I}, num_jammers={J}")
    if Jch.shape != (cfg.B, I):
        raise ConfigError(f"jammer channel shape {Jch.shape} != ({cfg.B}, {I})")


def _jump_schedule(cfg: ScenarioConfig, rng: np.random.Generator):
    """Segment start slots and per-segment beamformers for the jump model."""
    I, K, M = cfg.I, cfg.K, cfg.M
    # 1-based instants {2..K} -> 0-based {1..K-1}
    switches = np.sort(rng.choice(np.arange(1, K), size=M, replace=False))
    starts = np.concatenate([[0], switches])
    mats = []
    for _ in starts:
        n_rows = int(rng.integers(1, 4))
        rows = rng.choice(I, size=n_rows, replace=False)
        A = np.zeros((I, I), dtype=complex)
        A[rows, :] = crandn(rng, n_rows, I)
        mats.append(A)
    return starts, mats


def _continuous_schedule(cfg: ScenarioConfig, rng: np.random.Generator):
    """Per-slot first beamformer column, linearly interpolated between anchors."""
    I, K, M = cfg.I, cfg.K, cfg.M
    instants = np.sort(rng.choice(K, size=M, replace=False))
    anchors = crandn(rng, M, I)
    k = np.arange(K)
    cols = np.empty((K, I), dtype=complex)
    for i in range(I):
        # np.interp holds the end values outside [k_1, k_M]
        cols[:, i] = (np.interp(k, instants, anchors[:, i].real)
                      + 1j * np.interp(k, instants, anchors[:, i].imag))
    return instants, anchors, cols


def gen_jammer(model, cfg: ScenarioConfig, Jch: np.ndarray, H: np.ndarray,
               rng: np.random.Generator) -> JammerRealization:
    """Generate the jammer transmit matrix for ``model`` scaled to ``cfg.rho_db``."""
    model = JammerModel(model)
    _check_dims(model, cfg, Jch)
    I, K = cfg.I, cfg.K
    ph = phase_slices(cfg)
    mask = np.ones(K, dtype=bool)
    schedule: list = []

    if model is JammerModel.NONE:
        return JammerRealization(Jch=Jch, W=np.zeros((I, K), dtype=complex),
                                 activity_mask=np.zeros(K, dtype=bool), model=model,
                                 rho_db_target=-np.inf)

    W_tilde = crandn(rng, I, K)
    if model in (JammerModel.BARRAGE, JammerModel.DISTRIBUTED_BARRAGE):
        W = W_tilde
    elif model is JammerModel.DATA_ONLY:
        mask[ph["estimation"]] = False
        mask[ph["pilot"]] = False
        W = W_tilde
    elif model is JammerModel.PILOT_ONLY:
        mask[:] = False
        mask[ph["pilot"]] = True
        W = W_tilde
    elif model is JammerModel.JUMP_BEAMFORMING:
        starts, mats = _jump_schedule(cfg, rng)
        W = np.empty((I, K), dtype=complex)
        bounds = list(starts[1:]) + [K]
        for s, e, A in zip(starts, bounds, mats):
            W[:, s:e] = A @ W_tilde[:, s:e]
        schedule = [(int(s), A) for s, A in zip(starts, mats)]
    else:  # continuous beamforming: only the first column of A_k is nonzero
        instants, anchors, cols = _continuous_schedule(cfg, rng)
        W = cols.T * W_tilde[0][None, :]
        for k, a in zip(instants, anchors):
            A = np.zeros((I, I), dtype=complex)
            A[:, 0] = a
            schedule.append((int(k), A))
    W = np.where(mask[None, :], W, 0.0)
    W = scale_to_rho(Jch, W, H, cfg.rho_linear, active=mask)
    return JammerRealization(Jch=Jch, W=W, activity_mask=mask, model=model,
                             rho_db_target=cfg.rho_db, A_schedule=schedule)


def per_slot_ue_power(H: np.ndarray) -> float:
    """Receive power of the average UE per channel use, ``||H||_F^2 / U``."""
    return float(np.linalg.norm(H) ** 2) / H.shape[1]


def scale_to_rho(Jch: np.ndarray, W: np.ndarray, H: np.ndarray, rho_linear: float,
                 active: np.ndarray | None = None) -> np.ndarray:
    """Scale ``W`` so the per-active-slot jammer receive power is
    ``rho_linear`` times the per-slot receive power of the average UE."""
    if active is None:
        active = np.any(W != 0, axis=0)
    if rho_linear == 0:
        return np.zeros_like(W)
    n_active = int(np.count_nonzero(active))
    energy = float(np.linalg.norm(Jch @ W[:, active]) ** 2) if n_active else 0.0
    if energy == 0.0:
        raise ScalingError("jammer transmit matrix has no received energy")
    target = rho_linear * per_slot_ue_power(H)
    return W * np.sqrt(target * n_active / energy)


def realized_rho(Jch: np.ndarray, W: np.ndarray, H: np.ndarray,
                 active: np.ndarray | None = None) -> float:
    """Per-active-slot jammer receive power over per-slot average-UE power."""
    if active is None:
        active = np.any(W != 0, axis=0)
    n_active = int(np.count_nonzero(active))
    if n_active == 0:
        return 0.0
    energy = float(np.linalg.norm(Jch @ W[:, active]) ** 2)
    return energy / n_active / per_slot_ue_power(H)
