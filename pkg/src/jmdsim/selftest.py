"""Quick oracle checks runnable without pytest (``jmdsim selftest``)."""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .detectors import gradient_f, objective, prox_box, sandman
from .harness import run_trial
from .numerics import (approx_dominant_left_singvecs, complement_projector, crandn,
                       exact_dominant_left_singvecs, orthonormalize, principal_angles)
from .scenario import ScenarioConfig, gen_pilots


def check_projector(rng):
    U = orthonormalize(crandn(rng, 6, 2))
    P = complement_projector(U)
    assert np.linalg.norm(P @ U) <= 1e-10
    assert np.linalg.norm(P @ P - P) <= 1e-9
    assert np.linalg.norm(P - P.conj().T) <= 1e-10


def check_subspace(rng):
    M = crandn(rng, 8, 20)
    exact = exact_dominant_left_singvecs(M, 3)
    s = np.linalg.svd(M, compute_uv=False)
    P = complement_projector(exact)
    # projector half of the alternating-minimization optimality
    assert np.isclose(np.linalg.norm(P @ M) ** 2, np.sum(s[3:] ** 2), rtol=1e-9)
    u = crandn(rng, 8, 1)
    u /= np.linalg.norm(u)
    approx = approx_dominant_left_singvecs(100 * u @ crandn(rng, 1, 20), 1, rng)
    assert principal_angles(approx, u)[0] < 1e-6


def check_prox(rng):
    grid = np.linspace(-np.sqrt(0.5), np.sqrt(0.5), 201)
    h = grid[1] - grid[0]
    for _ in range(50):
        s = complex(*rng.uniform(-1.5, 1.5, 2))
        tau, alpha = rng.uniform(0.01, 0.39), 2.5
        x = prox_box(s, tau, alpha)
        # separable per component: tau*(-alpha/2)x^2 + (s-x)^2/2
        for part, val in ((s.real, x.real), (s.imag, x.imag)):
            cost = -tau * alpha / 2 * grid ** 2 + 0.5 * (part - grid) ** 2
            assert abs(grid[np.argmin(cost)] - val) <= h


def check_gradient(rng):
    B, U, D = 8, 4, 6
    H, Y, S = crandn(rng, B, U), crandn(rng, B, D), crandn(rng, U, D)
    P = complement_projector(orthonormalize(crandn(rng, B, 1)))
    G = gradient_f(H, P, Y, S)
    eps = 1e-5
    for _ in range(5):
        dS = crandn(rng, U, D)
        fd = (objective(H, P, Y, S + eps * dS, 0.0)
              - objective(H, P, Y, S - eps * dS, 0.0)) / (2 * eps)
        assert np.isclose(fd, np.vdot(G, dS).real, rtol=1e-6)


def check_noiseless_detection(rng):
    B, U, D = 32, 16, 40
    H = crandn(rng, B, U)
    S_T = gen_pilots(U)
    S_D = (rng.choice([-1, 1], (U, D)) + 1j * rng.choice([-1, 1], (U, D))) * np.sqrt(0.5)
    res = sandman(H @ S_T, H @ S_D, S_T, 0, t_max=100, rng=rng)
    assert np.array_equal(res.S_hard, S_D)


def check_determinism(rng):
    cfg = ScenarioConfig(snr_db=10.0, seed=7)
    a, b = (replace(run_trial(cfg, "sandman", 3), detector_seconds=0.0) for _ in range(2))
    assert a == b


CHECKS = {
    "projector algebra": check_projector,
    "dominant subspace": check_subspace,
    "prox vs grid search": check_prox,
    "gradient vs finite differences": check_gradient,
    "noiseless detection": check_noiseless_detection,
    "trial determinism": check_determinism,
}


def run(seed: int = 0, echo=print) -> bool:
    """Run every check, print one line each and return overall success."""
    ok = True
    for name, fn in CHECKS.items():
        try:
            fn(np.random.default_rng(seed))
        except AssertionError as exc:
            ok = False
            echo(f"FAIL {name}{': ' + str(exc) if str(exc) else ''}")
        else:
            echo(f"ok   {name}")
    return ok
