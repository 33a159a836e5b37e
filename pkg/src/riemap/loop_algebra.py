"""Function spaces on the circle and the closed disc.

FourierLoop      truncated Fourier series of a map S^1 -> C^N (any leading
                 shape: vectors, matrices of loops share one class).
DiscFunction     finite bidegree expansion sum d[a,b] zeta^a zbar^b on the
                 closed disc, per component.
cauchy_solve     exact dbar-antiderivative by the monomial rule.
riesz_split      frequency splitting k >= 0 / k < 0.
winding_number   phase-increment winding of a nonvanishing scalar loop.

All products are exact coefficient convolutions; truncation is always an
explicit, reported step.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from . import defaults, jsonio
from .errors import NearVanishingLoopError, TruncationOverflowError

__all__ = [
    "FourierLoop",
    "DiscFunction",
    "cauchy_solve",
    "riesz_split",
    "winding_number",
    "loop_matmul",
    "loop_det",
    "disc_matvec",
    "disc_matmul",
]


# --------------------------------------------------------------------------- #
# FourierLoop
# --------------------------------------------------------------------------- #

class FourierLoop:
    """Trigonometric polynomial sum_{k=-K..K} c_k zeta^k on |zeta| = 1.

    coeffs has shape (..., 2K+1) in frequency order -K..K; leading axes hold
    components (vector loops) or matrix indices (matrix loops).
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape[-1] % 2 != 1:
            raise ValueError("frequency axis must have odd length 2K+1")
        self.coeffs = coeffs

    # -- structure ---------------------------------------------------------- #
    @property
    def modes(self) -> int:
        return (self.coeffs.shape[-1] - 1) // 2

    @property
    def shape(self):
        return self.coeffs.shape[:-1]

    def coeff(self, k: int):
        """Coefficient of zeta^k (zero outside the stored band)."""
        K = self.modes
        if abs(k) > K:
            return np.zeros(self.shape, dtype=complex)
        return self.coeffs[..., k + K]

    def pad(self, modes: int) -> "FourierLoop":
        K = self.modes
        if modes < K:
            raise TruncationOverflowError(f"cannot pad loop of {K} modes down to {modes}")
        out = np.zeros(self.shape + (2 * modes + 1,), dtype=complex)
        out[..., modes - K: modes + K + 1] = self.coeffs
        return FourierLoop(out)

    def trimmed(self, tol: float = 0.0) -> "FourierLoop":
        """Drop outer frequencies with |c| <= tol on every component."""
        K = self.modes
        mags = np.abs(self.coeffs).reshape(-1, 2 * K + 1).max(axis=0)
        keep = np.nonzero(mags > tol)[0]
        if keep.size == 0:
            return FourierLoop(np.zeros(self.shape + (1,), dtype=complex))
        reach = max(abs(int(k) - K) for k in (keep[0], keep[-1]))
        return FourierLoop(self.coeffs[..., K - reach: K + reach + 1])

    # -- sampling / evaluation ---------------------------------------------- #
    @classmethod
    def from_samples(cls, values, modes: int) -> "FourierLoop":
        """FFT projection from P equispaced samples; requires P >= 2*modes+1."""
        values = np.asarray(values, dtype=complex)
        P = values.shape[-1]
        if P < 2 * modes + 1:
            raise TruncationOverflowError(f"{P} samples cannot resolve {modes} modes")
        spec = np.fft.fft(values, axis=-1) / P
        idx = np.arange(-modes, modes + 1) % P
        return cls(spec[..., idx])

    def samples(self, P: int | None = None):
        """Values at P equispaced points zeta_p = exp(2 pi i p / P)."""
        K = self.modes
        if P is None:
            P = defaults.grid_size(max(K, 1), 0)
        if P < 2 * K + 1:
            raise TruncationOverflowError(f"grid of {P} points aliases {K} modes")
        spec = np.zeros(self.shape + (P,), dtype=complex)
        idx = np.arange(-K, K + 1) % P
        spec[..., idx] = self.coeffs
        return np.fft.ifft(spec, axis=-1) * P

    def eval(self, zeta):
        """Evaluate at arbitrary points on (or off) the circle."""
        zeta = np.asarray(zeta, dtype=complex)
        K = self.modes
        pows = zeta[..., None] ** np.arange(-K, K + 1)
        return np.einsum("...k,pk->...p", self.coeffs.reshape(self.shape + (2 * K + 1,)),
                         pows.reshape(-1, 2 * K + 1)).reshape(self.shape + zeta.shape)

    # -- algebra ------------------------------------------------------------ #
    def __add__(self, other):
        a, b = _common_band(self, _as_loop(other, self))
        return FourierLoop(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = _common_band(self, _as_loop(other, self))
        return FourierLoop(a - b)

    def __neg__(self):
        return FourierLoop(-self.coeffs)

    def __mul__(self, other):
        if np.isscalar(other):
            return FourierLoop(self.coeffs * other)
        other = _as_loop(other, self)
        return FourierLoop(fftconvolve(self.coeffs, other.coeffs, axes=(-1,)))

    __rmul__ = __mul__

    def conj(self) -> "FourierLoop":
        """Complex conjugate loop: c_k -> conj(c_{-k})."""
        return FourierLoop(np.conj(self.coeffs[..., ::-1]))

    def real_part(self) -> "FourierLoop":
        return FourierLoop(0.5 * (self.coeffs + np.conj(self.coeffs[..., ::-1])))

    def is_real_valued(self, tol: float = 1e-12) -> bool:
        return float(np.abs(self.coeffs - np.conj(self.coeffs[..., ::-1])).max()) <= tol

    def sup_norm(self, P: int | None = None) -> float:
        vals = self.samples(P)
        return float(np.abs(vals).max())

    # -- serialization (external interface) --------------------------------- #
    def to_json(self) -> dict:
        if len(self.shape) != 1:
            raise ValueError("only vector loops serialize to the loop schema")
        return {
            "n_components": int(self.shape[0]),
            "modes": int(self.modes),
            "coeffs": [[[float(c.real), float(c.imag)] for c in comp] for comp in self.coeffs],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FourierLoop":
        arr = np.asarray(obj["coeffs"], dtype=float)
        if arr.shape[0] != obj["n_components"] or arr.shape[1] != 2 * obj["modes"] + 1:
            raise ValueError("inconsistent loop schema")
        return cls(arr[..., 0] + 1j * arr[..., 1])


def _as_loop(x, like: FourierLoop) -> FourierLoop:
    if isinstance(x, FourierLoop):
        return x
    arr = np.asarray(x, dtype=complex)[..., None]  # constant loop
    return FourierLoop(arr)


def _common_band(a: FourierLoop, b: FourierLoop):
    K = max(a.modes, b.modes)
    return a.pad(K).coeffs, b.pad(K).coeffs


def loop_matmul(A: FourierLoop, B: FourierLoop) -> FourierLoop:
    """Pointwise matrix product of loops: (N,M) @ (M,...)."""
    a, b = A.coeffs, B.coeffs
    if b.ndim == 2:  # matrix @ vector
        out = fftconvolve(a, b[None, :, :], axes=(-1,)).sum(axis=1)
    else:
        out = fftconvolve(a[:, :, None, :], b[None, :, :, :], axes=(-1,)).sum(axis=1)
    return FourierLoop(out)


def loop_det(A: FourierLoop, modes: int | None = None) -> FourierLoop:
    """Determinant loop of a square matrix loop, by sampling + FFT projection."""
    N = A.shape[0]
    if modes is None:
        modes = N * A.modes
    P = max(2 * modes + 2, 16)
    vals = A.samples(P)                       # (N, N, P)
    dets = np.linalg.det(np.moveaxis(vals, -1, 0))
    return FourierLoop.from_samples(dets, modes)


# --------------------------------------------------------------------------- #
# DiscFunction
# --------------------------------------------------------------------------- #

class DiscFunction:
    """Bidegree polynomial sum_{a<=A, b<=B} d[a,b] zeta^a zbar^b on |zeta|<=1.

    coeffs has shape (..., A+1, B+1); leading axes hold components.
    `analytic` means the zbar-degree is zero (all b>0 coefficients vanish).
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=complex)

    # -- constructors -------------------------------------------------------- #
    @classmethod
    def from_analytic(cls, poly) -> "DiscFunction":
        """From zeta-polynomial coefficients (..., A+1)."""
        return cls(np.asarray(poly, dtype=complex)[..., None])

    @classmethod
    def zero(cls, shape=(), zdeg: int = 0, zbardeg: int = 0) -> "DiscFunction":
        return cls(np.zeros(tuple(shape) + (zdeg + 1, zbardeg + 1), dtype=complex))

    @classmethod
    def constant(cls, value) -> "DiscFunction":
        return cls(np.asarray(value, dtype=complex)[..., None, None])

    # -- structure ------------------------------------------------------------ #
    @property
    def zdeg(self) -> int:
        return self.coeffs.shape[-2] - 1

    @property
    def zbardeg(self) -> int:
        return self.coeffs.shape[-1] - 1

    @property
    def shape(self):
        return self.coeffs.shape[:-2]

    def is_analytic(self, tol: float = 0.0) -> bool:
        if self.zbardeg == 0:
            return True
        return float(np.abs(self.coeffs[..., 1:]).max()) <= tol

    def analytic_part(self) -> np.ndarray:
        """Coefficients of the b = 0 row (..., A+1)."""
        return self.coeffs[..., 0].copy()

    def pad(self, zdeg: int, zbardeg: int) -> "DiscFunction":
        A, B = self.zdeg, self.zbardeg
        if zdeg < A or zbardeg < B:
            raise TruncationOverflowError("pad cannot shrink; use truncated()")
        out = np.zeros(self.shape + (zdeg + 1, zbardeg + 1), dtype=complex)
        out[..., : A + 1, : B + 1] = self.coeffs
        return DiscFunction(out)

    def truncated(self, zdeg: int, zbardeg: int):
        """Truncate to caps; returns (function, dropped coefficient mass)."""
        A, B = min(self.zdeg, zdeg), min(self.zbardeg, zbardeg)
        kept = self.coeffs[..., : A + 1, : B + 1]
        total = float(np.abs(self.coeffs).sum())
        dropped = total - float(np.abs(kept).sum())
        return DiscFunction(kept), dropped

    def truncate(self, zdeg: int, zbardeg: int) -> "DiscFunction":
        """Truncate to caps without the dropped-mass report (hot path)."""
        if self.zdeg <= zdeg and self.zbardeg <= zbardeg:
            return self
        return DiscFunction(self.coeffs[..., : zdeg + 1, : zbardeg + 1])

    def trimmed(self, tol: float = 0.0) -> "DiscFunction":
        """Drop trailing zero rows/columns."""
        c = self.coeffs
        mags_a = np.abs(c).reshape(-1, c.shape[-2], c.shape[-1]).max(axis=(0, 2))
        mags_b = np.abs(c).reshape(-1, c.shape[-2], c.shape[-1]).max(axis=(0, 1))
        A = int(np.nonzero(mags_a > tol)[0].max(initial=0))
        B = int(np.nonzero(mags_b > tol)[0].max(initial=0))
        return DiscFunction(c[..., : A + 1, : B + 1])

    # -- algebra --------------------------------------------------------------- #
    def __add__(self, other):
        a, b = _common_bidegree(self, _as_disc(other))
        return DiscFunction(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = _common_bidegree(self, _as_disc(other))
        return DiscFunction(a - b)

    def __neg__(self):
        return DiscFunction(-self.coeffs)

    def __mul__(self, other):
        if np.isscalar(other):
            return DiscFunction(self.coeffs * other)
        other = _as_disc(other)
        return DiscFunction(fftconvolve(self.coeffs, other.coeffs, axes=(-2, -1)))

    __rmul__ = __mul__

    def conj(self) -> "DiscFunction":
        """Complex conjugate: swaps the zeta / zbar grading."""
        return DiscFunction(np.conj(np.swapaxes(self.coeffs, -1, -2)))

    def dz(self) -> "DiscFunction":
        """d/dzeta, exact on coefficients."""
        A = self.zdeg
        if A == 0:
            return DiscFunction.zero(self.shape)
        a = np.arange(1, A + 1)
        return DiscFunction(self.coeffs[..., 1:, :] * a[:, None])

    def dbar(self) -> "DiscFunction":
        """d/dzbar, exact on coefficients."""
        B = self.zbardeg
        if B == 0:
            return DiscFunction.zero(self.shape)
        b = np.arange(1, B + 1)
        return DiscFunction(self.coeffs[..., :, 1:] * b)

    def eval(self, zeta):
        """Evaluate at complex points of arbitrary shape."""
        zeta = np.asarray(zeta, dtype=complex)
        flat = zeta.reshape(-1)
        Vz = flat[:, None] ** np.arange(self.zdeg + 1)
        Vb = np.conj(flat)[:, None] ** np.arange(self.zbardeg + 1)
        vals = np.einsum("...ab,pa,pb->...p", self.coeffs, Vz, Vb)
        return vals.reshape(self.shape + zeta.shape)

    def boundary_loop(self) -> FourierLoop:
        """Restriction to |zeta| = 1 as a FourierLoop (freq k = a - b)."""
        A, B = self.zdeg, self.zbardeg
        K = max(A, B)
        out = np.zeros(self.shape + (2 * K + 1,), dtype=complex)
        for b in range(B + 1):
            out[..., K - b: K - b + A + 1] += self.coeffs[..., :, b]
        return FourierLoop(out)

    def sup_norm(self, grid: int = 32) -> float:
        return float(np.abs(self.eval(disc_grid(grid))).max())

    def to_json(self) -> dict:
        if len(self.shape) != 1:
            raise ValueError("only vector disc functions serialize")
        c = self.coeffs
        return {
            "n_components": int(self.shape[0]),
            "zdeg": int(self.zdeg),
            "zbardeg": int(self.zbardeg),
            "coeffs": [[[[float(x.real), float(x.imag)] for x in row] for row in comp]
                       for comp in c],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DiscFunction":
        arr = np.asarray(obj["coeffs"], dtype=float)
        return cls(arr[..., 0] + 1j * arr[..., 1])


def _as_disc(x) -> DiscFunction:
    if isinstance(x, DiscFunction):
        return x
    return DiscFunction(np.asarray(x, dtype=complex)[..., None, None])


def _common_bidegree(x: DiscFunction, y: DiscFunction):
    A = max(x.zdeg, y.zdeg)
    B = max(x.zbardeg, y.zbardeg)
    return x.pad(A, B).coeffs, y.pad(A, B).coeffs


def disc_grid(m: int = 32) -> np.ndarray:
    """m x m polar evaluation grid on the closed disc (radii in (0, 1])."""
    r = (np.arange(m) + 1.0) / m
    th = 2 * np.pi * np.arange(m) / m
    return (r[:, None] * np.exp(1j * th)[None, :]).reshape(-1)


def disc_matvec(A: DiscFunction, v: DiscFunction,
                caps: tuple[int, int] | None = None) -> DiscFunction:
    """(N,M) matrix of disc functions @ (M,) vector, exact then capped."""
    out = fftconvolve(A.coeffs, v.coeffs[None, :, :, :], axes=(-2, -1)).sum(axis=1)
    res = DiscFunction(out)
    return res if caps is None else res.truncate(*caps)


def disc_matmul(A: DiscFunction, B: DiscFunction,
                caps: tuple[int, int] | None = None) -> DiscFunction:
    """(N,K) @ (K,M) matrix product of disc-function matrices."""
    out = fftconvolve(A.coeffs[:, :, None, :, :], B.coeffs[None, :, :, :, :],
                      axes=(-2, -1)).sum(axis=1)
    res = DiscFunction(out)
    return res if caps is None else res.truncate(*caps)


# --------------------------------------------------------------------------- #
# module operations
# --------------------------------------------------------------------------- #

def cauchy_solve(g: DiscFunction,
                 zdeg_cap: int | None = None,
                 zbardeg_cap: int | None = None) -> DiscFunction:
    """Particular solution h of dh/dzbar = g by the monomial rule.

    zeta^a zbar^b -> zeta^a zbar^{b+1} / (b+1); differs from the solid Cauchy
    transform by an analytic function, which the linear RH solve absorbs.
    """
    zdeg_cap = defaults.M_DEFAULT if zdeg_cap is None else zdeg_cap
    zbardeg_cap = defaults.MB_DEFAULT if zbardeg_cap is None else zbardeg_cap
    if g.zdeg > zdeg_cap or g.zbardeg + 1 > zbardeg_cap:
        raise TruncationOverflowError(
            f"cauchy_solve input bidegree ({g.zdeg},{g.zbardeg}) exceeds caps "
            f"({zdeg_cap},{zbardeg_cap - 1})")
    B = g.zbardeg
    shape = g.shape + (g.zdeg + 1, B + 2)
    out = np.zeros(shape, dtype=complex)
    out[..., 1:] = g.coeffs / np.arange(1, B + 2)
    return DiscFunction(out)


def riesz_split(u: FourierLoop) -> tuple[FourierLoop, FourierLoop]:
    """Split u = u_plus + u_minus into frequencies k >= 0 and k < 0."""
    K = u.modes
    plus = u.coeffs.copy()
    plus[..., :K] = 0.0
    minus = u.coeffs - plus
    return FourierLoop(plus), FourierLoop(minus)


def winding_number(s: FourierLoop, threshold: float | None = None) -> int:
    """Winding of a nonvanishing scalar loop around 0 by phase increments."""
    if s.shape != ():
        raise ValueError("winding_number expects a scalar loop")
    threshold = defaults.WINDING_MIN_MODULUS if threshold is None else threshold
    P = max(256, 16 * max(s.modes, 1))
    for _ in range(4):
        vals = s.samples(P)
        if float(np.abs(vals).min()) <= threshold:
            raise NearVanishingLoopError(
                f"loop modulus {np.abs(vals).min():.3e} below threshold {threshold:.1e}")
        steps = np.angle(np.roll(vals, -1) / vals)
        if np.abs(steps).max() < 0.5 * np.pi:
            total = steps.sum() / (2 * np.pi)
            w = int(np.round(total))
            if abs(total - w) > 1e-6:
                raise NearVanishingLoopError("winding did not close to an integer")
            return w
        P *= 2
    raise NearVanishingLoopError("phase increments too coarse even after refinement")
