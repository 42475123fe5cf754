"""SANDMAN and the baseline receivers.

All iterative detectors share the forward-backward splitting (FBS) loop:
a gradient step on ``f(S) = ||P (Y_D - H_est S)||_F^2`` followed by the
entrywise box-prior prox, with Barzilai-Borwein stepsizes.  SANDMAN
re-estimates the jammer subspace ``col(J~)`` from the full residual in every
iteration; the ``*_box`` baselines keep ``P`` fixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError, ProtocolError
from .metrics import SQRT_HALF, hard_slice
from ._kernels import bb1_step, fbs_loop
from .numerics import (complement_projector, crandn, exact_dominant_left_singvecs,
                       orthonormalize, projector_from_channel)

DETECTORS = ("sandman", "lmmse", "pos_box", "g_pos_box")
WARM_START = True


@dataclass
class DetectionResult:
    S_soft: np.ndarray
    S_hard: np.ndarray
    J_est: np.ndarray | None = None
    objective: list[float] = field(default_factory=list)
    stepsizes: list[float] = field(default_factory=list)


@dataclass
class FbsState:
    S: np.ndarray
    grad: np.ndarray
    S_prev: np.ndarray | None = None
    grad_prev: np.ndarray | None = None
    tau: float = 1.0
    tau0: float = 1.0
    t: int = 0


def ls_channel_estimate(Y_T: np.ndarray, S_T: np.ndarray) -> np.ndarray:
    """Despread the pilot phase: ``H_est = Y_T S_T^H / U`` for +-1 Hadamard pilots."""
    U = S_T.shape[0]
    if Y_T.shape[1] != S_T.shape[1]:
        raise DimensionError(f"Y_T {Y_T.shape} incompatible with S_T {S_T.shape}")
    return (Y_T @ S_T.conj().T) / U


def prox_box(s, tau: float, alpha: float):
    """Prox of the box prior (QPSK hull plus concave ``-alpha |x|^2`` term).

    For ``alpha*tau < 1`` the scaled input ``s/(1 - tau*alpha)`` is clipped
    to ``[-sqrt(1/2), sqrt(1/2)]`` in real and imaginary part; otherwise the
    nearest QPSK point is returned.
    """
    s = np.asarray(s)
    if alpha * tau < 1.0:
        z = s / (1.0 - tau * alpha)
        return (np.clip(z.real, -SQRT_HALF, SQRT_HALF)
                + 1j * np.clip(z.imag, -SQRT_HALF, SQRT_HALF))
    return hard_slice(s)


def gradient_f(H_est: np.ndarray, P: np.ndarray, Y_D: np.ndarray,
               S: np.ndarray) -> np.ndarray:
    """``-2 H^H P (Y_D - H S)`` for a ``(B, B)`` projector ``P``."""
    if H_est.shape[1] != S.shape[0] or Y_D.shape[1] != S.shape[1]:
        raise DimensionError("H_est, Y_D and S have inconsistent shapes")
    return -2.0 * H_est.conj().T @ (P @ (Y_D - H_est @ S))


def objective(H_est, P, Y_D, S, alpha) -> float:
    """Smooth part minus regularizer: ``||P(Y_D - H S)||^2 - alpha ||S||^2``."""
    R = P @ (Y_D - H_est @ S)
    return float(np.vdot(R, R).real - alpha * np.vdot(S, S).real)


def bb_stepsize(state: FbsState) -> float:
    """Barzilai-Borwein (BB1) stepsize ``||dS||^2 / Re<dS, dG>`` with safeguards.

    Falls back to the previous stepsize on non-positive curvature or a
    non-finite result and clamps to ``[1e-3, 1e3] * tau0``.
    """
    if state.S_prev is None or state.grad_prev is None:
        return state.tau
    return float(bb1_step(*(np.ascontiguousarray(x, dtype=complex) for x in
                            (state.S, state.S_prev, state.grad, state.grad_prev)),
                          float(state.tau), float(state.tau0)))


def initial_stepsize(H_est: np.ndarray, skip: int = 0) -> float:
    """``1 / (2 sigma_{skip+1}(H_est)^2)``.

    With ``skip = 0`` this is the inverse Lipschitz constant of the gradient.
    Jammer contamination of the LS estimate has rank at most ``I``, so
    skipping the ``I`` strongest singular values keeps a contaminated
    estimate from collapsing the first step.
    """
    s = np.linalg.svd(H_est, compute_uv=False)
    if s.size == 0:
        return 1.0
    lip = s[min(skip, s.size - 1)] ** 2
    return 1.0 / (2.0 * lip) if lip > 0 else 1.0


def _fbs(H_est, Y_D, t_max, alpha, R_T=None, basis=None, starts=None, rng=None,
         power_iterations=1, warm_start=WARM_START, skip=0):
    """Run the FBS loop, optionally re-estimating the jammer subspace.

    With ``R_T`` given the projector basis is recomputed in every iteration
    from the residual ``[R_T, Y_D - H_est S]``; otherwise ``basis`` (default:
    empty, i.e. ``P = I``) stays fixed.
    """
    B = H_est.shape[0]
    H_est = np.ascontiguousarray(H_est, dtype=complex)
    Y_D = np.ascontiguousarray(Y_D, dtype=complex)
    adapt = R_T is not None
    I = basis.shape[1] if basis is not None else 0
    if basis is None:
        basis = np.zeros((B, I), dtype=complex)
    if R_T is None:
        R_T = np.zeros((B, 0), dtype=complex)
    n_starts = 1 if warm_start else t_max
    if adapt and I > 0:
        starts = crandn(rng, n_starts, B, I)
        fallback = crandn(rng, B, I)
    else:
        starts = np.zeros((n_starts, B, I), dtype=complex)
        fallback = np.zeros((B, I), dtype=complex)
    S, basis, obj, steps = fbs_loop(
        H_est, Y_D, np.ascontiguousarray(R_T, dtype=complex),
        np.ascontiguousarray(basis, dtype=complex), starts, fallback, adapt,
        warm_start, int(power_iterations), int(t_max), float(alpha),
        initial_stepsize(H_est, skip))
    return S, basis, obj.tolist(), steps.tolist()


def sandman(Y_T: np.ndarray, Y_D: np.ndarray, S_T: np.ndarray, I: int,
            t_max: int = 30, alpha: float = 2.5,
            rng: np.random.Generator | None = None,
            power_iterations: int = 1, warm_start: bool = WARM_START) -> DetectionResult:
    """Joint jammer mitigation and data detection by alternating FBS steps
    with approximate-SVD updates of the jammer subspace.

    Parameters
    ----------
    Y_T, Y_D : receive matrices of the pilot (B x U) and data (B x D) phases
    S_T : (U x U) +-1 Hadamard pilot matrix
    I : dimension of the jammer subspace to null
    t_max : number of iterations
    alpha : weight of the concave regularizer
    rng : source of the power-method start vectors
    power_iterations : power steps per subspace dimension and iteration
    warm_start : seed the power method with the previous subspace estimate
        instead of fresh random vectors (random in the first iteration)
    """
    B = Y_T.shape[0]
    if not 0 <= I <= B:
        raise ConfigError(f"I={I} must lie in [0, B={B}]")
    if t_max < 1:
        raise ConfigError("t_max must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    H_est = ls_channel_estimate(Y_T, S_T)
    # pilot columns of the residual do not depend on the iterate
    R_T = Y_T - H_est @ S_T
    S, basis, obj, steps = _fbs(H_est, Y_D, t_max, alpha, R_T=R_T,
                                basis=np.zeros((B, I), dtype=complex), rng=rng,
                                power_iterations=power_iterations,
                                warm_start=warm_start, skip=I)
    return DetectionResult(S_soft=S, S_hard=hard_slice(S), J_est=basis,
                           objective=obj, stepsizes=steps)


def fbs_detect_fixed_projector(P: np.ndarray, Y_T: np.ndarray, Y_D: np.ndarray,
                               S_T: np.ndarray, t_max: int = 30, alpha: float = 2.5,
                               J_est: np.ndarray | None = None) -> DetectionResult:
    """Box-prior FBS detection entirely in the space projected by a fixed ``P``.

    The channel estimate is ``P Y_T S_T^H / U``; since ``P`` is idempotent,
    ``P(Y_D - H_P S) = P Y_D - H_P S`` and the loop runs on ``P Y_D``.
    """
    if P.shape != (Y_T.shape[0],) * 2:
        raise DimensionError(f"projector shape {P.shape} does not match B={Y_T.shape[0]}")
    if t_max < 1:
        raise ConfigError("t_max must be >= 1")
    H_P = ls_channel_estimate(P @ Y_T, S_T)
    Y_P = P @ Y_D
    S, _, obj, steps = _fbs(H_P, Y_P, t_max, alpha)
    return DetectionResult(S_soft=S, S_hard=hard_slice(S), J_est=J_est,
                           objective=obj, stepsizes=steps)


def g_pos_box(J_true: np.ndarray, Y_T, Y_D, S_T, t_max=30, alpha=2.5) -> DetectionResult:
    """Genie baseline: null the true jammer subspace ``col(J_true)``."""
    P = projector_from_channel(J_true)
    return fbs_detect_fixed_projector(P, Y_T, Y_D, S_T, t_max, alpha,
                                      J_est=orthonormalize(J_true))


def pos_box(Y_J: np.ndarray, Y_T, Y_D, S_T, I: int, t_max: int = 30,
            alpha: float = 2.5) -> DetectionResult:
    """Training-based baseline: estimate the jammer subspace from ``L`` slots
    in which the UEs are silent, then detect in its orthogonal complement."""
    if Y_J.shape[1] == 0:
        raise ProtocolError("POS-BOX needs a jammer-estimation phase (L >= 1)")
    J_est = exact_dominant_left_singvecs(Y_J, min(I, *Y_J.shape))
    P = complement_projector(J_est)
    return fbs_detect_fixed_projector(P, Y_T, Y_D, S_T, t_max, alpha, J_est=J_est)


def lmmse_detect(Y_T: np.ndarray, Y_D: np.ndarray, S_T: np.ndarray,
                 N0: float) -> DetectionResult:
    """Jammer-oblivious LMMSE equalization with the LS channel estimate."""
    if not N0 > 0:
        raise ValueError("LMMSE needs N0 > 0")
    H_est = ls_channel_estimate(Y_T, S_T)
    U = H_est.shape[1]
    H_h = H_est.conj().T
    S = np.linalg.solve(H_h @ H_est + N0 * np.eye(U), H_h @ Y_D)
    return DetectionResult(S_soft=S, S_hard=hard_slice(S))


def detect(name: str, frame, I: int, t_max: int = 30, alpha: float = 2.5,
           rng: np.random.Generator | None = None) -> DetectionResult:
    """Run detector ``name`` on a :class:`~jmdsim.scenario.Frame`."""
    if name == "sandman":
        return sandman(frame.Y_T, frame.Y_D, frame.S_T, I, t_max, alpha, rng)
    if name == "lmmse":
        return lmmse_detect(frame.Y_T, frame.Y_D, frame.S_T, frame.N0)
    if name == "pos_box":
        return pos_box(frame.Y_J, frame.Y_T, frame.Y_D, frame.S_T, I, t_max, alpha)
    if name == "g_pos_box":
        if frame.J.shape[1] == 0:
            P = np.eye(frame.H.shape[0], dtype=complex)
            return fbs_detect_fixed_projector(P, frame.Y_T, frame.Y_D, frame.S_T,
                                              t_max, alpha)
        return g_pos_box(frame.J, frame.Y_T, frame.Y_D, frame.S_T, t_max, alpha)
    raise ConfigError(f"unknown detector {name!r}; choose from {', '.join(DETECTORS)}")
