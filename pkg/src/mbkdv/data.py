"""Builtin initial data for simulations and convergence studies."""

from __future__ import annotations

import numpy as np

from .fields import FieldPair
from .measure import MeasureConfig, gibbs_initial_pair

# two-mode datum used by the integrator-order check; frozen unit phases
_ORDER_PHASES_U = (-0.4493302 - 0.89336576j, 0.2222913 + 0.9749803j)
_ORDER_PHASES_V = (0.99965217 - 0.02637313j, 0.62655684 + 0.77937573j)

BUILTIN_NAMES = ("cosine", "smooth-decay", "order-check", "gibbs")


def builtin_datum(
    name: str,
    trunc_n: int,
    alpha: float = 2.0,
    amplitude: float = 1.0,
    seed: int = 7,
    B: float = 2.0,
) -> FieldPair:
    """Named initial data.

    cosine        u = cos(2x), v = cos(x); the hand-integrable pair.
    smooth-decay  |coeff(n)| = amplitude / n^4, deterministic seeded phases.
    order-check   two low modes at amplitude 0.8; the frozen datum for the
                  fourth-order convergence check.
    gibbs         first accepted draw from the cutoff Gibbs proposal at
                  (trunc_n, alpha, B, seed).
    """
    if name == "cosine":
        u = np.zeros(trunc_n + 1, complex)
        v = np.zeros(trunc_n + 1, complex)
        if trunc_n < 2:
            raise ValueError("cosine datum needs trunc_N >= 2")
        u[2] = 0.5 * amplitude
        v[1] = 0.5 * amplitude
        return FieldPair.from_arrays(u, v, copy=False)
    if name == "smooth-decay":
        rng = np.random.default_rng(seed)
        n = np.arange(1, trunc_n + 1)
        u = np.zeros(trunc_n + 1, complex)
        v = np.zeros(trunc_n + 1, complex)
        u[1:] = amplitude * np.exp(1j * rng.uniform(0, 2 * np.pi, trunc_n)) / n**4
        v[1:] = amplitude * np.exp(1j * rng.uniform(0, 2 * np.pi, trunc_n)) / n**4
        return FieldPair.from_arrays(u, v, copy=False)
    if name == "order-check":
        if trunc_n < 2:
            raise ValueError("order-check datum needs trunc_N >= 2")
        u = np.zeros(trunc_n + 1, complex)
        v = np.zeros(trunc_n + 1, complex)
        u[1:3] = 0.8 * np.asarray(_ORDER_PHASES_U)
        v[1:3] = 0.8 * np.asarray(_ORDER_PHASES_V)
        return FieldPair.from_arrays(u, v, copy=False)
    if name == "gibbs":
        cfg = MeasureConfig(trunc_N=trunc_n, alpha=alpha, B=B, seed=seed, M=1)
        return gibbs_initial_pair(cfg)
    raise ValueError(f"unknown builtin datum {name!r}; choose from {BUILTIN_NAMES}")
