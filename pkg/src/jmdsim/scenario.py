"""Scenario generation: channels, pilots, QPSK data, noise and receive frames.

A coherence interval of ``K`` channel uses is laid out as
``[jammer-estimation (L) | pilots (U) | data (D)]`` with ``D = K - U - L``.
During the estimation slots the UEs are silent.
"""

from __future__ import annotations

import enum
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import ConfigError, DimensionError, PlacementError
from .numerics import crandn

SQRT_HALF = np.sqrt(0.5)


class JammerModel(str, enum.Enum):
    BARRAGE = "barrage"
    DATA_ONLY = "data_only"
    PILOT_ONLY = "pilot_only"
    DISTRIBUTED_BARRAGE = "distributed_barrage"
    JUMP_BEAMFORMING = "jump_beamforming"
    CONTINUOUS_BEAMFORMING = "continuous_beamforming"
    NONE = "none"


class ChannelModel(str, enum.Enum):
    RAYLEIGH = "rayleigh"
    GEOMETRIC_ULA = "geometric_ula"


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ScenarioConfig:
    """All dimensions, powers and model choices of one simulated scenario."""

    B: int = 32
    U: int = 16
    K: int = 100
    L: int = 0
    I: int = 1
    num_jammers: int = 1
    jammer_model: JammerModel = JammerModel.BARRAGE
    rho_db: float = 30.0
    snr_db: float = 10.0
    channel_model: ChannelModel = ChannelModel.RAYLEIGH
    power_control_db: float = 3.0
    t_max: int = 30
    alpha: float = 2.5
    M: int = 5
    seed: int = 0

    def __post_init__(self):
        try:
            object.__setattr__(self, "jammer_model", JammerModel(self.jammer_model))
            object.__setattr__(self, "channel_model", ChannelModel(self.channel_model))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("B", "U", "K", "L", "I", "num_jammers", "t_max", "M", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.B < 1:
            raise ConfigError("B must be positive")
        if not _is_pow2(self.U):
            raise ConfigError(f"U={self.U} must be a power of two (Hadamard pilots)")
        if self.L < 0:
            raise ConfigError("L must be non-negative")
        if self.D < 1:
            raise ConfigError(f"K={self.K} leaves no data slots for U={self.U}, L={self.L}")
        if self.jammer_model is JammerModel.NONE:
            if self.I < 0:
                raise ConfigError("I must be non-negative")
        elif not (self.I >= self.num_jammers >= 1):
            raise ConfigError(
                f"need I >= num_jammers >= 1, got I={self.I}, num_jammers={self.num_jammers}")
        if self.I > self.B:
            raise ConfigError(f"I={self.I} exceeds B={self.B}")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")
        if self.alpha < 0 or self.power_control_db < 0:
            raise ConfigError("alpha and power_control_db must be non-negative")
        if self.M < 1:
            raise ConfigError("M must be >= 1")

    @property
    def D(self) -> int:
        return self.K - self.U - self.L

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def rho_linear(self) -> float:
        return 10.0 ** (self.rho_db / 10.0)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["jammer_model"] = self.jammer_model.value
        d["channel_model"] = self.channel_model.value
        return d

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "ScenarioConfig":
        """Load from a YAML or JSON file, optionally nested under ``scenario:``."""
        data = load_structured(path)
        if "scenario" in data:
            data = data["scenario"]
        return cls.from_dict(data)

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


def load_structured(path) -> dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a mapping")
    return data


# ---------------------------------------------------------------- channels

def steering_vector(B: int, angle_rad: float) -> np.ndarray:
    """Half-wavelength ULA response, unit-magnitude entries."""
    return np.exp(-1j * np.pi * np.arange(B) * np.sin(angle_rad))


def place_angles(n: int, rng: np.random.Generator, sector_deg: float = 120.0,
                 min_sep_deg: float = 1.0, max_attempts: int = 10_000) -> np.ndarray:
    """Draw ``n`` angles (degrees) uniformly in a sector centred on broadside,
    pairwise separated by at least ``min_sep_deg``, by rejection sampling."""
    half = sector_deg / 2.0
    angles: list[float] = []
    attempts = 0
    while len(angles) < n:
        if attempts >= max_attempts:
            raise PlacementError(
                f"placed only {len(angles)} of {n} entities with {min_sep_deg} deg "
                f"separation after {max_attempts} attempts")
        attempts += 1
        a = rng.uniform(-half, half)
        if all(abs(a - b) >= min_sep_deg for b in angles):
            angles.append(a)
    return np.array(angles)


def gen_channel(cfg: ScenarioConfig, rng: np.random.Generator):
    """Return the UE channel ``H`` (B x U) and jammer channel ``J`` (B x I).

    UE columns carry a per-UE power-control gain drawn uniformly in dB from
    ``[-power_control_db, +power_control_db]``; jammer columns do not, since
    the jammer power is fixed afterwards by rho-scaling.
    """
    B, U, I = cfg.B, cfg.U, cfg.I
    if cfg.channel_model is ChannelModel.RAYLEIGH:
        H = crandn(rng, B, U)
        J = crandn(rng, B, I)
    else:
        # every jammer antenna gets its own direction so col(J) has rank I
        angles = np.deg2rad(place_angles(U + I, rng))
        G = np.stack([steering_vector(B, a) for a in angles], axis=1) if U + I else \
            np.zeros((B, 0), dtype=complex)
        H, J = G[:, :U], G[:, U:]
    gains_db = rng.uniform(-cfg.power_control_db, cfg.power_control_db, size=U)
    H = H * 10.0 ** (gains_db / 20.0)
    return H, J


def gen_pilots(U: int) -> np.ndarray:
    """Sylvester-Hadamard pilot matrix with +-1 entries, ``S S^H = U I``."""
    if not _is_pow2(U):
        raise ConfigError(f"U={U} is not a power of two")
    S = np.ones((1, 1))
    while S.shape[0] < U:
        S = np.block([[S, S], [S, -S]])
    return S.astype(complex)


def gen_data(U: int, D: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform QPSK symbols from ``{+-sqrt(1/2) +- i sqrt(1/2)}``."""
    bits = rng.integers(0, 2, size=(2, U, D))
    return ((1 - 2 * bits[0]) + 1j * (1 - 2 * bits[1])) * SQRT_HALF


def noise_variance_for_snr(H: np.ndarray, snr_linear: float) -> float:
    """Per-entry noise variance so that ``E||HS||^2 / E||N||^2 = snr_linear``."""
    if not snr_linear > 0:
        raise ValueError(f"snr_linear must be positive, got {snr_linear}")
    energy = float(np.linalg.norm(H) ** 2)
    if energy == 0.0:
        raise ZeroDivisionError("channel has zero energy")
    return energy / (H.shape[0] * snr_linear)


# ------------------------------------------------------------------- frames

@dataclass
class Frame:
    """One coherence interval: transmit/receive matrices plus ground truth."""

    H: np.ndarray
    J: np.ndarray
    S_T: np.ndarray
    S_D: np.ndarray
    Y_J: np.ndarray
    Y_T: np.ndarray
    Y_D: np.ndarray
    N0: float
    W: np.ndarray
    N: np.ndarray
    jammer: Any = field(default=None, repr=False)

    @property
    def L(self) -> int:
        return self.Y_J.shape[1]

    @property
    def U(self) -> int:
        return self.S_T.shape[0]

    def transmit(self) -> np.ndarray:
        """UE transmit matrix over all K slots (zeros in estimation slots)."""
        U = self.U
        return np.concatenate(
            [np.zeros((U, self.L), dtype=complex), self.S_T, self.S_D], axis=1)

    def reconstruction_error(self) -> float:
        """``max |Y - H S - J W - N|`` over the whole interval."""
        Y = np.concatenate([self.Y_J, self.Y_T, self.Y_D], axis=1)
        R = Y - self.H @ self.transmit() - self.J @ self.W - self.N
        return float(np.max(np.abs(R))) if R.size else 0.0


def assemble_frame(cfg: ScenarioConfig, H: np.ndarray, J: np.ndarray,
                   S_T: np.ndarray, S_D: np.ndarray, W_scaled: np.ndarray,
                   rng: np.random.Generator, N0: float | None = None,
                   jammer=None) -> Frame:
    """Build the receive matrices ``Y = H S + J W + N`` for all phases.

    ``N0`` defaults to the value implied by ``cfg.snr_db`` for this ``H``.
    """
    B, U, L, D, K = cfg.B, cfg.U, cfg.L, cfg.D, cfg.K
    if H.shape != (B, U) or S_T.shape != (U, U) or S_D.shape != (U, D):
        raise DimensionError(
            f"H {H.shape}, S_T {S_T.shape}, S_D {S_D.shape} inconsistent with "
            f"B={B}, U={U}, D={D}")
    if J.shape[0] != B or W_scaled.shape != (J.shape[1], K):
        raise DimensionError(f"J {J.shape} / W {W_scaled.shape} inconsistent with K={K}")
    if N0 is None:
        N0 = noise_variance_for_snr(H, cfg.snr_linear)
    N = np.sqrt(N0) * crandn(rng, B, K)
    Y = J @ W_scaled + N
    Y[:, L:L + U] += H @ S_T
    Y[:, L + U:] += H @ S_D
    return Frame(H=H, J=J, S_T=S_T, S_D=S_D,
                 Y_J=Y[:, :L].copy(), Y_T=Y[:, L:L + U].copy(), Y_D=Y[:, L + U:].copy(),
                 N0=float(N0), W=W_scaled, N=N, jammer=jammer)
