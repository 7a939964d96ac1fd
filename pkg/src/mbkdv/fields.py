"""Spectral representation of real periodic fields on the 2*pi torus.

Conventions, fixed once here and used everywhere in the package:

* A field is f(x) = sum_{|n| <= N} fhat(n) exp(i n x) with Hermitian
  symmetry fhat(-n) = conj(fhat(n)).  Only the modes n = 0..N are stored,
  which makes the symmetry unbreakable by construction (the stored mean
  mode must be real).
* Coefficient sums carry no 1/(2*pi) factor; physical-space integrals over
  [0, 2*pi) carry an explicit 2*pi.
* The frequency weight is <n> = 1 + |n|.

Array-level helpers accept stacked coefficient arrays of shape (..., N+1)
so whole ensembles can be processed in one vectorized call.  The
SpectralField / FieldPair classes wrap single fields and are immutable.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


def fft_grid_size(trunc_n: int) -> int:
    """Smallest power of two holding at least 4N+2 points.

    Quadratic products of degree-N trig polynomials have degree 2N; a grid
    of >= 4N+1 points represents them exactly, so transform-based
    convolutions on this grid are alias-free up to output mode 2N.
    """
    need = 4 * trunc_n + 2
    return 1 << (need - 1).bit_length()


def to_grid(coef: np.ndarray, npoints: int | None = None) -> np.ndarray:
    """Physical samples of the field on a uniform grid of [0, 2*pi)."""
    coef = np.asarray(coef)
    n_max = coef.shape[-1] - 1
    if npoints is None:
        npoints = fft_grid_size(n_max)
    if npoints < 2 * n_max + 1:
        raise ValueError(f"grid of {npoints} points cannot hold modes up to {n_max}")
    return np.fft.irfft(coef, n=npoints) * npoints


def convolve_trunc(a: np.ndarray, b: np.ndarray, out_trunc: int) -> np.ndarray:
    """Exact convolution (a * b)(n) = sum_{n1+n2=n} a(n1) b(n2), 0 <= n <= out_trunc.

    Inputs are half-spectrum arrays (..., N+1) of Hermitian fields sharing
    the same truncation.  The zero-padded transform length of
    fft_grid_size(N) >= 4N+2 keeps every retained output mode alias-free,
    so the result agrees with the direct O(N^2) sum to roundoff.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("convolution operands must share trunc_N")
    n_max = a.shape[-1] - 1
    if out_trunc > 2 * n_max:
        raise ValueError("requested output modes beyond 2N are identically zero")
    m = fft_grid_size(n_max)
    fa = np.fft.irfft(a, n=m)
    fb = np.fft.irfft(b, n=m)
    return np.fft.rfft(fa * fb)[..., : out_trunc + 1] * m


def sobolev_weights(n_modes: int, s: float) -> np.ndarray:
    return (1.0 + np.arange(n_modes, dtype=float)) ** (2.0 * s)


def sobolev_norm_arr(coef: np.ndarray, s: float) -> np.ndarray:
    """H^s norm ( sum_{|n|<=N} <n>^{2s} |fhat(n)|^2 )^{1/2}, batched."""
    coef = np.asarray(coef)
    w = sobolev_weights(coef.shape[-1], s)
    m2 = np.abs(coef) ** 2
    total = w[0] * m2[..., 0] + 2.0 * np.sum(w[1:] * m2[..., 1:], axis=-1)
    return np.sqrt(total)


def sup_weighted_norm_arr(coef: np.ndarray, s2: float) -> np.ndarray:
    """sup_n <n>^{s2} |fhat(n)|, batched."""
    coef = np.asarray(coef)
    w = (1.0 + np.arange(coef.shape[-1], dtype=float)) ** s2
    return np.max(w * np.abs(coef), axis=-1)


def l2_pair_arr(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Coefficient-sum l2 norm of a pair, ( sum |uhat|^2 + |vhat|^2 )^{1/2}."""
    u = np.asarray(u)
    v = np.asarray(v)
    m2u = np.abs(u) ** 2
    m2v = np.abs(v) ** 2
    total = (
        m2u[..., 0]
        + m2v[..., 0]
        + 2.0 * np.sum(m2u[..., 1:], axis=-1)
        + 2.0 * np.sum(m2v[..., 1:], axis=-1)
    )
    return np.sqrt(total)


def mixed_norm_arr(u: np.ndarray, v: np.ndarray, s1: float, s2: float) -> np.ndarray:
    """H^{s1,s2} norm of the pair: each component contributes its H^{s1}
    norm plus the sup-weighted single-mode norm at regularity s2."""
    return (
        sobolev_norm_arr(u, s1)
        + sup_weighted_norm_arr(u, s2)
        + sobolev_norm_arr(v, s1)
        + sup_weighted_norm_arr(v, s2)
    )


def integral_uvv_arr(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """The cubic interaction integral(u v^2 dx) over [0, 2*pi), batched.

    Evaluated as 2*pi * sum_n uhat(-n) (vhat*vhat)(n).  Written through the
    Hermitian symmetry the sum is real by construction.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    n_max = u.shape[-1] - 1
    w = convolve_trunc(v, v, n_max)
    s = u[..., 0].real * w[..., 0].real + 2.0 * np.sum(
        (np.conj(u[..., 1:]) * w[..., 1:]).real, axis=-1
    )
    return TWO_PI * s


@dataclass(frozen=True)
class SobolevParams:
    """Regularity pair (s1, s2) for the mixed norm.

    The admissible window is 1/4 < s1 < 1/2 < s2 < 1 with 2*s1 >= s2
    (boundary included: the norm is well defined there and the standard
    parameter choices sit exactly on it).
    """

    s1: float
    s2: float

    def __post_init__(self):
        if not (0.25 < self.s1 < 0.5):
            raise ValueError(f"s1 must lie in (1/4, 1/2), got {self.s1}")
        if not (0.5 < self.s2 < 1.0):
            raise ValueError(f"s2 must lie in (1/2, 1), got {self.s2}")
        if 2.0 * self.s1 < self.s2:
            raise ValueError(f"need 2*s1 >= s2, got s1={self.s1}, s2={self.s2}")


class SpectralField:
    """Immutable real 2*pi-periodic function held as Fourier modes 0..N."""

    __slots__ = ("coef",)

    def __init__(self, coef, copy: bool = True):
        arr = np.array(coef, dtype=np.complex128, copy=copy)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("coefficients must be a nonempty 1-d array")
        if arr[0].imag != 0.0:
            raise ValueError("mean mode must be real (Hermitian symmetry at n = 0)")
        arr.setflags(write=False)
        self.coef = arr

    @classmethod
    def zero(cls, trunc_n: int) -> "SpectralField":
        return cls(np.zeros(trunc_n + 1, dtype=np.complex128), copy=False)

    @classmethod
    def from_modes(cls, trunc_n: int, modes: dict) -> "SpectralField":
        """Build a field from {n: coefficient} for n >= 0; negative modes
        follow by symmetry."""
        coef = np.zeros(trunc_n + 1, dtype=np.complex128)
        for n, c in modes.items():
            if n < 0 or n > trunc_n:
                raise ValueError(f"mode {n} outside 0..{trunc_n}")
            coef[n] = c
        return cls(coef, copy=False)

    @property
    def trunc_N(self) -> int:
        return self.coef.size - 1

    def coeff(self, n: int) -> complex:
        """Coefficient at any integer mode, zero beyond the truncation."""
        if abs(n) > self.trunc_N:
            return 0j
        return complex(self.coef[n]) if n >= 0 else complex(np.conj(self.coef[-n]))

    def project(self, m: int) -> "SpectralField":
        if m >= self.trunc_N:
            return self
        out = self.coef.copy()
        out[m + 1 :] = 0.0
        return SpectralField(out, copy=False)

    def sobolev_norm(self, s: float) -> float:
        return float(sobolev_norm_arr(self.coef, s))

    def sup_weighted_norm(self, s2: float) -> float:
        return float(sup_weighted_norm_arr(self.coef, s2))

    def to_grid(self, npoints: int | None = None) -> np.ndarray:
        return to_grid(self.coef, npoints)

    def __add__(self, other: "SpectralField") -> "SpectralField":
        if self.trunc_N != other.trunc_N:
            raise ValueError("fields must share trunc_N")
        return SpectralField(self.coef + other.coef, copy=False)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        if self.trunc_N != other.trunc_N:
            raise ValueError("fields must share trunc_N")
        return SpectralField(self.coef - other.coef, copy=False)

    def __mul__(self, c) -> "SpectralField":
        c = float(c)  # real scalars only, complex would break realness
        return SpectralField(c * self.coef, copy=False)

    __rmul__ = __mul__

    def allclose(self, other: "SpectralField", tol: float = 1e-12) -> bool:
        n = max(self.trunc_N, other.trunc_N)
        a = np.zeros(n + 1, dtype=np.complex128)
        b = np.zeros(n + 1, dtype=np.complex128)
        a[: self.coef.size] = self.coef
        b[: other.coef.size] = other.coef
        return bool(np.allclose(a, b, rtol=tol, atol=tol))


class FieldPair:
    """The state (u, v) of the coupled system; immutable value object."""

    __slots__ = ("u", "v", "mean_zero")

    def __init__(self, u: SpectralField, v: SpectralField, mean_zero: bool = True):
        if u.trunc_N != v.trunc_N:
            raise ValueError("components must share trunc_N")
        if mean_zero and u.coef[0] != 0:
            raise ValueError("mean-zero pair requires uhat(0) = 0")
        self.u = u
        self.v = v
        self.mean_zero = mean_zero

    @classmethod
    def zero(cls, trunc_n: int, mean_zero: bool = True) -> "FieldPair":
        return cls(SpectralField.zero(trunc_n), SpectralField.zero(trunc_n), mean_zero)

    @classmethod
    def from_arrays(cls, u, v, mean_zero: bool = True, copy: bool = True) -> "FieldPair":
        return cls(SpectralField(u, copy=copy), SpectralField(v, copy=copy), mean_zero)

    @property
    def trunc_N(self) -> int:
        return self.u.trunc_N

    def project(self, m: int) -> "FieldPair":
        return FieldPair(self.u.project(m), self.v.project(m), self.mean_zero)

    def l2_norm(self) -> float:
        return float(l2_pair_arr(self.u.coef, self.v.coef))

    def mixed_norm(self, sp: SobolevParams) -> float:
        return float(mixed_norm_arr(self.u.coef, self.v.coef, sp.s1, sp.s2))

    def integral_uvv(self) -> float:
        return float(integral_uvv_arr(self.u.coef, self.v.coef))

    def allclose(self, other: "FieldPair", tol: float = 1e-12) -> bool:
        return self.u.allclose(other.u, tol) and self.v.allclose(other.v, tol)

    # -- serialization ----------------------------------------------------

    def to_json_dict(self) -> dict:
        """Documented schema: {"N": int, "u": [[re, im], ...], "v": [...]},
        coefficients listed for n = 0..N."""
        return {
            "N": self.trunc_N,
            "u": [[float(c.real), float(c.imag)] for c in self.u.coef],
            "v": [[float(c.real), float(c.imag)] for c in self.v.coef],
            "mean_zero": self.mean_zero,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "FieldPair":
        n = int(d["N"])
        u = np.array([complex(re, im) for re, im in d["u"]])
        v = np.array([complex(re, im) for re, im in d["v"]])
        if u.size != n + 1 or v.size != n + 1:
            raise ValueError("coefficient list length does not match N")
        return cls.from_arrays(u, v, mean_zero=bool(d.get("mean_zero", True)), copy=False)

    def dump_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load_json(cls, path) -> "FieldPair":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def dump_csv(self, path) -> None:
        """Flat CSV with one row per mode: n, u_re, u_im, v_re, v_im."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "u_re", "u_im", "v_re", "v_im"])
            for n in range(self.trunc_N + 1):
                cu, cv = complex(self.u.coef[n]), complex(self.v.coef[n])
                w.writerow([n, repr(cu.real), repr(cu.imag), repr(cv.real), repr(cv.imag)])

    @classmethod
    def load_csv(cls, path, mean_zero: bool = True) -> "FieldPair":
        rows = []
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header[:1] != ["n"]:
                raise ValueError("unexpected CSV header")
            rows = [row for row in r]
        u = np.zeros(len(rows), dtype=np.complex128)
        v = np.zeros(len(rows), dtype=np.complex128)
        for row in rows:
            n = int(row[0])
            u[n] = complex(float(row[1]), float(row[2]))
            v[n] = complex(float(row[3]), float(row[4]))
        return cls.from_arrays(u, v, mean_zero=mean_zero, copy=False)


# -- spec-level operation names -------------------------------------------


def project(p: FieldPair, m: int) -> FieldPair:
    """Zero every coefficient with |n| > m; idempotent and linear."""
    return p.project(m)


def sobolev_norm(f: SpectralField, s: float) -> float:
    return f.sobolev_norm(s)


def sup_weighted_norm(f: SpectralField, s2: float) -> float:
    return f.sup_weighted_norm(s2)


def mixed_norm(p: FieldPair, sp: SobolevParams) -> float:
    return p.mixed_norm(sp)


def l2_norm_pair(p: FieldPair) -> float:
    return p.l2_norm()


def exact_convolution(f: SpectralField, g: SpectralField) -> SpectralField:
    """Convolution of two fields, returned at truncation 2N (no aliasing)."""
    if f.trunc_N != g.trunc_N:
        raise ValueError("convolution operands must share trunc_N")
    out = convolve_trunc(f.coef, g.coef, 2 * f.trunc_N)
    # the mean mode of a convolution of Hermitian fields is real; scrub the
    # roundoff-level imaginary residue so the constructor invariant holds
    out[0] = out[0].real
    return SpectralField(out, copy=False)


def integral_uvv(p: FieldPair) -> float:
    return p.integral_uvv()
