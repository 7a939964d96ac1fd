"""The truncated Majda-Biello flow as a finite ODE in Fourier coefficients.

In the half-spectrum coordinates of :mod:`mbkdv.fields` the system reads,
for 0 <= n <= N,

    d uhat(n)/dt = i n^3 uhat(n) - (i n / 2) (vhat * vhat)(n)
    d vhat(n)/dt = i alpha n^3 vhat(n) - i n (uhat * vhat)(n),

with the convolutions truncated back to |n| <= N (the Galerkin projection).
The n = 0 equations are identically zero, so both means are frozen by the
flow; in particular a mean-zero u stays mean-zero exactly.

The default integrator removes the stiff linear rotation with exact
integrating factors and applies classical RK4 to the transformed
nonlinearity; an implicit-midpoint method is provided as a structurally
different cross-check.  All steppers operate on stacked coefficient arrays,
so a whole ensemble advances in one call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .fields import TWO_PI, FieldPair, convolve_trunc, integral_uvv_arr

# Conservative ceiling for dt * N^3 * max(1, alpha).  The integrating-factor
# scheme treats the stiff linear part exactly and implicit midpoint is
# A-stable, so this product is only a coarse guard against configs whose
# nonlinear terms rotate much faster than dt can resolve.
STABILITY_PRODUCT_LIMIT = 5000.0

_METHODS = ("if-rk4", "implicit-midpoint")


class IntegrationError(RuntimeError):
    """Raised when the state leaves the finite range; carries the time."""

    def __init__(self, t: float, message: str | None = None):
        self.t = float(t)
        super().__init__(message or f"integration failed at t={t!r} (non-finite state)")


@dataclass
class SimConfig:
    trunc_N: int
    alpha: float
    dt: float
    T: float
    method: str = "if-rk4"
    record_every: int = 1

    def __post_init__(self):
        if self.trunc_N < 1:
            raise ValueError("trunc_N must be a positive integer")
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        alpha = float(self.alpha)
        if not (0 < alpha <= 4):
            raise ValueError("alpha must lie in (0, 4]")
        if self.T != 0 and self.dt >= abs(self.T):
            raise ValueError("need dt < |T| (or T = 0 for a trivial run)")
        product = self.dt * self.trunc_N**3 * max(1.0, alpha)
        if product > STABILITY_PRODUCT_LIMIT:
            warnings.warn(
                f"dt * N^3 * max(1, alpha) = {product:.3g} exceeds the "
                f"documented guard {STABILITY_PRODUCT_LIMIT:g}; the linear part "
                "is integrated exactly but the nonlinear terms may be "
                "under-resolved",
                RuntimeWarning,
                stacklevel=2,
            )


@dataclass
class ConservedSnapshot:
    """Conserved quantities of the truncated flow at one instant."""

    t: float
    E1: float   # integral of u
    E2: float   # integral of v
    Nval: float  # (1/2) integral of u^2 + v^2
    H_N: float  # (1/2) integral of u_x^2 + alpha v_x^2 - u v^2 (truncated)

    def as_row(self):
        return [self.t, self.E1, self.E2, self.Nval, self.H_N]


def nonlinear_arrays(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Projected nonlinear terms (-P_N(v v_x), -P_N((u v)_x)) in coefficients."""
    n_max = u.shape[-1] - 1
    n = np.arange(n_max + 1, dtype=float)
    nu = -0.5j * n * convolve_trunc(v, v, n_max)
    nv = -1.0j * n * convolve_trunc(u, v, n_max)
    return nu, nv


def rhs_arrays(u: np.ndarray, v: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Full right-hand side in coefficient space, batched."""
    n_max = u.shape[-1] - 1
    n = np.arange(n_max + 1, dtype=float)
    nu, nv = nonlinear_arrays(u, v)
    return 1j * n**3 * u + nu, 1j * float(alpha) * n**3 * v + nv


def rhs(p: FieldPair, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Time derivative of a pair; returns the coefficient derivative arrays."""
    return rhs_arrays(p.u.coef, p.v.coef, alpha)


# -- general (non-Hermitian-mean) evaluator --------------------------------
#
# The measure-theoretic phase space treats the n = 0 modes as complex
# coordinates even though a real-valued field forces them to be real.  The
# helpers below evaluate the vector field on that released space; they are
# used by the Liouville checks, not by the simulation path.


def _full_line(c: np.ndarray) -> np.ndarray:
    n_max = c.size - 1
    out = np.empty(2 * n_max + 1, dtype=np.complex128)
    out[n_max:] = c
    out[:n_max] = np.conj(c[1:][::-1])
    return out


def rhs_general(u: np.ndarray, v: np.ndarray, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand side for a single state whose mean modes may be complex.

    Negative modes are still defined as conjugates of the stored n >= 1
    modes; the means enter the convolutions as given.  Direct O(N^2)
    convolution, intended for derivative checks at small N.
    """
    n_max = u.size - 1
    fu = _full_line(u)
    fv = _full_line(v)
    vv = np.convolve(fv, fv)[2 * n_max : 3 * n_max + 1]
    uv = np.convolve(fu, fv)[2 * n_max : 3 * n_max + 1]
    n = np.arange(n_max + 1, dtype=float)
    du = 1j * n**3 * u - 0.5j * n * vv
    dv = 1j * float(alpha) * n**3 * v - 1j * n * uv
    return du, dv


def divergence_trace(u: np.ndarray, v: np.ndarray, alpha: float) -> float:
    """Analytic trace of the Jacobian of the vector field.

    In the real coordinates {Re, Im of every stored mode} the linear
    rotation is traceless and the only nonlinear diagonal entries are the
    -i n uhat(0) terms of the v equations, so

        trace = sum_{n=1..N} 2 Re(-i n uhat(0)) = N (N + 1) Im uhat(0),

    which vanishes on the mean-zero constraint set.  Neither alpha nor the
    v coefficients enter; both stay in the signature to match the other
    vector-field evaluators.
    """
    n_max = u.size - 1
    return float(n_max * (n_max + 1) * np.imag(u[0]))


def divergence_trace_fd(
    u: np.ndarray,
    v: np.ndarray,
    alpha: float,
    include_u_mean: bool = False,
    eps: float = 1e-4,
) -> float:
    """Jacobian trace by central differences of :func:`rhs_general`.

    The vector field is quadratic, so the central difference of each
    diagonal entry is exact up to rounding.  With ``include_u_mean`` the
    two real coordinates of uhat(0) join the coordinate list (the released
    phase space); otherwise uhat(0) is held fixed.
    """
    state = (np.array(u, dtype=np.complex128), np.array(v, dtype=np.complex128))
    total = 0.0
    for ci in (0, 1):
        for k in range(state[ci].size):
            if ci == 0 and k == 0 and not include_u_mean:
                continue
            for unit in (1.0, 1j):
                plus = (state[0].copy(), state[1].copy())
                plus[ci][k] += eps * unit
                minus = (state[0].copy(), state[1].copy())
                minus[ci][k] -= eps * unit
                fp = rhs_general(plus[0], plus[1], alpha)[ci][k]
                fm = rhs_general(minus[0], minus[1], alpha)[ci][k]
                d = (fp - fm) / (2.0 * eps)
                total += d.real if unit == 1.0 else d.imag
    return float(total)


def vector_field_divergence(p: FieldPair, alpha: float) -> float:
    """Analytic divergence for a valid pair (always zero when mean-zero)."""
    return divergence_trace(p.u.coef, p.v.coef, alpha)


# -- time stepping ----------------------------------------------------------


class Stepper:
    """One-step propagator; precomputes the phase factors for a fixed dt.

    ``include_nonlinear=False`` gives the pure linear flow (each mode an
    exact phase rotation), used by the linear-control invariance test.
    """

    def __init__(
        self,
        trunc_n: int,
        alpha: float,
        dt: float,
        method: str = "if-rk4",
        include_nonlinear: bool = True,
    ):
        if method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}")
        self.trunc_n = trunc_n
        self.alpha = float(alpha)
        self.dt = float(dt)
        self.method = method
        self.include_nonlinear = include_nonlinear
        n3 = np.arange(trunc_n + 1, dtype=float) ** 3
        h = self.dt
        if method == "if-rk4":
            self._eu = np.exp(0.5j * h * n3)
            self._ev = np.exp(0.5j * h * self.alpha * n3)
            self._eu2 = self._eu**2
            self._ev2 = self._ev**2
        else:
            # (1 - (h/2) L)^{-1} for the diagonal linear part
            self._ru = 1.0 / (1.0 - 0.5j * h * n3)
            self._rv = 1.0 / (1.0 - 0.5j * h * self.alpha * n3)

    def step(self, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if self.method == "if-rk4":
            return self._step_ifrk4(u, v)
        return self._step_midpoint(u, v)

    def _step_ifrk4(self, u, v):
        eu, ev, eu2, ev2 = self._eu, self._ev, self._eu2, self._ev2
        if not self.include_nonlinear:
            return eu2 * u, ev2 * v
        h = self.dt
        k1u, k1v = nonlinear_arrays(u, v)
        au = eu * (u + 0.5 * h * k1u)
        av = ev * (v + 0.5 * h * k1v)
        k2u, k2v = nonlinear_arrays(au, av)
        bu = eu * u + 0.5 * h * k2u
        bv = ev * v + 0.5 * h * k2v
        k3u, k3v = nonlinear_arrays(bu, bv)
        cu = eu2 * u + h * eu * k3u
        cv = ev2 * v + h * ev * k3v
        k4u, k4v = nonlinear_arrays(cu, cv)
        u1 = eu2 * u + (h / 6.0) * (eu2 * k1u + 2.0 * eu * (k2u + k3u) + k4u)
        v1 = ev2 * v + (h / 6.0) * (ev2 * k1v + 2.0 * ev * (k2v + k3v) + k4v)
        return u1, v1

    def _step_midpoint(self, u, v, tol: float = 1e-13, max_iter: int = 100):
        h = self.dt
        ru, rv = self._ru, self._rv
        if not self.include_nonlinear:
            zu = ru * u
            zv = rv * v
            return 2.0 * zu - u, 2.0 * zv - v
        nu, nv = nonlinear_arrays(u, v)
        zu = ru * (u + 0.5 * h * nu)
        zv = rv * (v + 0.5 * h * nv)
        scale = max(1.0, float(np.max(np.abs(u))), float(np.max(np.abs(v))))
        for _ in range(max_iter):
            nu, nv = nonlinear_arrays(zu, zv)
            zu_next = ru * (u + 0.5 * h * nu)
            zv_next = rv * (v + 0.5 * h * nv)
            delta = max(
                float(np.max(np.abs(zu_next - zu))), float(np.max(np.abs(zv_next - zv)))
            )
            zu, zv = zu_next, zv_next
            if delta <= tol * scale:
                break
        else:
            raise RuntimeError("implicit-midpoint iteration did not converge")
        return 2.0 * zu - u, 2.0 * zv - v

    def advance(
        self, u: np.ndarray, v: np.ndarray, n_steps: int, t0: float = 0.0
    ) -> tuple[np.ndarray, np.ndarray]:
        """Advance n_steps, raising IntegrationError on the first non-finite
        state (the error carries the time of failure)."""
        for k in range(n_steps):
            u, v = self.step(u, v)
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
                raise IntegrationError(t0 + (k + 1) * self.dt)
        return u, v


def step(p: FieldPair, cfg: SimConfig) -> FieldPair:
    """Advance one time step of cfg.dt; bit-for-bit deterministic."""
    stepper = Stepper(cfg.trunc_N, float(cfg.alpha), cfg.dt, cfg.method)
    u, v = stepper.step(p.u.coef.copy(), p.v.coef.copy())
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
        raise IntegrationError(cfg.dt)
    return FieldPair.from_arrays(u, v, mean_zero=p.mean_zero)


def conserved_arrays(u: np.ndarray, v: np.ndarray, alpha: float):
    """E1, E2, Nval, H_N for stacked states; returns four arrays."""
    n2 = np.arange(u.shape[-1], dtype=float) ** 2
    m2u = np.abs(u) ** 2
    m2v = np.abs(v) ** 2
    e1 = TWO_PI * u[..., 0].real
    e2 = TWO_PI * v[..., 0].real
    nval = np.pi * (
        m2u[..., 0] + m2v[..., 0] + 2.0 * np.sum(m2u[..., 1:] + m2v[..., 1:], axis=-1)
    )
    quad = np.pi * (
        2.0 * np.sum(n2[1:] * (m2u[..., 1:] + float(alpha) * m2v[..., 1:]), axis=-1)
    )
    h = quad - 0.5 * integral_uvv_arr(u, v)
    return e1, e2, nval, h


def conserved(p: FieldPair, alpha: float, t: float = 0.0) -> ConservedSnapshot:
    e1, e2, nval, h = conserved_arrays(p.u.coef, p.v.coef, alpha)
    return ConservedSnapshot(t=float(t), E1=float(e1), E2=float(e2), Nval=float(nval), H_N=float(h))


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)      # FieldPair at recorded times
    snapshots: list = field(default_factory=list)   # ConservedSnapshot at recorded times

    def record(self, t: float, pair: FieldPair, alpha: float):
        self.times.append(float(t))
        self.states.append(pair)
        self.snapshots.append(conserved(pair, alpha, t))

    @property
    def final(self) -> FieldPair:
        return self.states[-1]


def integrate(p0: FieldPair, cfg: SimConfig, record_states: bool = True) -> Trajectory:
    """Evolve p0 to time cfg.T (negative T runs the reversed flow).

    Records the initial state, every ``record_every``-th step and the final
    step.  The number of steps is round(|T| / dt) and the step actually
    used is T / n_steps, so the horizon is hit exactly.
    """
    alpha = float(cfg.alpha)
    traj = Trajectory()
    traj.record(0.0, p0, alpha)
    if cfg.T == 0:
        return traj
    n_steps = max(1, round(abs(cfg.T) / cfg.dt))
    dt_signed = cfg.T / n_steps
    stepper = Stepper(cfg.trunc_N, alpha, dt_signed, cfg.method)
    u, v = p0.u.coef.copy(), p0.v.coef.copy()
    for k in range(1, n_steps + 1):
        u, v = stepper.step(u, v)
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise IntegrationError(k * dt_signed)
        if k % cfg.record_every == 0 or k == n_steps:
            pair = FieldPair.from_arrays(u, v, mean_zero=p0.mean_zero)
            traj.record(k * dt_signed, pair, alpha)
    if not record_states:
        traj.states = [traj.states[0], traj.states[-1]]
    return traj
