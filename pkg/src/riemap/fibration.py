"""Totally real fibrations over the circle.

The central object is the conormal system of the unit sphere written for
meromorphic lifts (z, zeta^{-1} w): the defining functions below take the
holomorphic fiber component w directly, with the pole factor absorbed:

    r^1      = |z|^2 - 1
    r^2      = i z^1 w_1 zeta^{-1} - i conj(z^1 w_1 zeta^{-1})        (on |zeta|=1)
    r^{2k-1} = zbar^1 w_k zeta^{-1} - zbar^k w_1 zeta^{-1} + conj(...)
    r^{2k}   = i [ zbar^1 w_k zeta^{-1} - zbar^k w_1 zeta^{-1} - conj(...) ]

which is the elimination of the real parameter c from t = c zbar with
t = zeta^{-1} w.  K(zeta) collects the conjugate gradients row-wise and
B = -conj(K)^{-1} K drives the index theory.
"""

from __future__ import annotations

import numpy as np

from . import defaults
from .errors import DegenerateFibrationError, SingularLoopMatrixError
from .loop_algebra import FourierLoop

__all__ = [
    "FibrationSystem",
    "SphereConormalSystem",
    "GenericFibration",
    "LoopMatrix",
    "sphere_conormal_system",
    "matrix_K",
    "matrix_B",
    "totally_real_check",
]

# matrix loops reuse the FourierLoop class with leading shape (N, N)
LoopMatrix = FourierLoop


class FibrationSystem:
    """N real defining functions r^j(z, w, zeta, lambda) on C^n x C^n x S^1.

    Interface contract: `residual` returns the N real values and `grad_z`,
    `grad_w` the exact complex gradients, vectorized over a zeta-grid.
    """

    n: int          # base complex dimension
    N: int          # number of defining functions = ambient complex dimension
    homogeneous: bool = False

    def residual(self, z, w, zeta, lam: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def grad_z(self, z, w, zeta, lam: float = 0.0) -> np.ndarray:
        raise NotImplementedError

    def grad_w(self, z, w, zeta, lam: float = 0.0) -> np.ndarray:
        raise NotImplementedError


class SphereConormalSystem(FibrationSystem):
    """Conormal bundle of the unit sphere along meromorphic lifts.

    lambda-independent: structure deformations keep the sphere (and its
    conormal system) fixed; only the interior operators see lambda.
    """

    homogeneous = True

    def __init__(self, n: int):
        if n < 2:
            raise ValueError("sphere conormal system needs n >= 2")
        self.n = n
        self.N = 2 * n

    # z, w: (n, P) complex; zeta: (P,) on the unit circle
    def residual(self, z, w, zeta, lam: float = 0.0) -> np.ndarray:
        z = np.atleast_2d(z)
        w = np.atleast_2d(w)
        zc = np.conj(z)
        izeta = 1.0 / zeta
        out = np.empty((self.N,) + z.shape[1:], dtype=float)
        out[0] = (z * zc).sum(axis=0).real - 1.0
        a = 1j * z[0] * w[0] * izeta
        out[1] = 2.0 * a.real
        for k in range(1, self.n):
            u = (zc[0] * w[k] - zc[k] * w[0]) * izeta
            out[2 * k] = 2.0 * u.real
            out[2 * k + 1] = -2.0 * u.imag
        return out

    def grad_z(self, z, w, zeta, lam: float = 0.0) -> np.ndarray:
        z = np.atleast_2d(z)
        w = np.atleast_2d(w)
        zc = np.conj(z)
        wc = np.conj(w)
        izeta = 1.0 / zeta
        G = np.zeros((self.N, self.n) + z.shape[1:], dtype=complex)
        G[0] = zc
        G[1, 0] = 1j * w[0] * izeta
        for k in range(1, self.n):
            # r^{2k}: u + conj(u) with u = (zbar1 w_k - zbar_k w_1) / zeta
            G[2 * k, 0] = wc[k] * zeta
            G[2 * k, k] = -wc[0] * zeta
            # r^{2k+1}: i(u - conj(u))
            G[2 * k + 1, 0] = -1j * wc[k] * zeta
            G[2 * k + 1, k] = 1j * wc[0] * zeta
        return G

    def grad_w(self, z, w, zeta, lam: float = 0.0) -> np.ndarray:
        z = np.atleast_2d(z)
        zc = np.conj(z)
        izeta = 1.0 / zeta
        G = np.zeros((self.N, self.n) + z.shape[1:], dtype=complex)
        G[1, 0] = 1j * z[0] * izeta
        for k in range(1, self.n):
            G[2 * k, 0] = -zc[k] * izeta
            G[2 * k, k] = zc[0] * izeta
            G[2 * k + 1, 0] = -1j * zc[k] * izeta
            G[2 * k + 1, k] = 1j * zc[0] * izeta
        return G

    def central_lift(self, zeta):
        """Boundary values (z, w) of the lifted disc (zeta, 0,..; 1, 0,..)."""
        zeta = np.asarray(zeta, dtype=complex)
        z = np.zeros((self.n,) + zeta.shape, dtype=complex)
        z[0] = zeta
        w = np.zeros_like(z)
        w[0] = 1.0
        return z, w


class GenericFibration(FibrationSystem):
    """User-supplied fibration from callables (test/diagnostic use)."""

    def __init__(self, n: int, funcs, grads_z, grads_w, homogeneous: bool = False):
        self.n = n
        self.N = len(funcs)
        self._funcs = funcs
        self._gz = grads_z
        self._gw = grads_w
        self.homogeneous = homogeneous

    def residual(self, z, w, zeta, lam: float = 0.0):
        return np.stack([f(z, w, zeta, lam) for f in self._funcs])

    def grad_z(self, z, w, zeta, lam: float = 0.0):
        return np.stack([g(z, w, zeta, lam) for g in self._gz])

    def grad_w(self, z, w, zeta, lam: float = 0.0):
        return np.stack([g(z, w, zeta, lam) for g in self._gw])


def sphere_conormal_system(n: int) -> SphereConormalSystem:
    """The 2n defining functions of the sphere conormal bundle, as printed."""
    return SphereConormalSystem(n)


def _gradient_matrix(F: FibrationSystem, z, w, zeta, lam: float):
    """Combined complex gradient [dr/dz | dr/dw], shape (N, N, P)."""
    Gz = F.grad_z(z, w, zeta, lam)
    Gw = F.grad_w(z, w, zeta, lam)
    return np.concatenate([Gz, Gw], axis=1)


def matrix_K(F: FibrationSystem, z, w, zeta, lam: float = 0.0,
             modes: int | None = None, min_sv: float = 1e-10) -> LoopMatrix:
    """Rows nu_j = conjugate gradients (dr^j/dwbar^1..N) along the disc."""
    G = _gradient_matrix(F, z, w, zeta, lam)
    K = np.conj(G)
    sv = np.linalg.svd(np.moveaxis(K, -1, 0), compute_uv=False)
    if float(sv[..., -1].min()) < min_sv:
        raise SingularLoopMatrixError("K singular on the circle grid "
                                      f"(min sv {sv[..., -1].min():.2e})")
    P = K.shape[-1]
    if modes is None:
        modes = P // 2 - 1
    return FourierLoop.from_samples(K, modes).trimmed(1e-13)


def matrix_B(K: LoopMatrix, P: int | None = None, min_sv: float = 1e-10,
             modes: int | None = None) -> LoopMatrix:
    """B(zeta) = -conj(K)^{-1} K pointwise, re-projected to Fourier modes."""
    if P is None:
        P = max(defaults.grid_size(max(K.modes, 1), 0), 4 * K.shape[0] * max(K.modes, 1) + 8)
    vals = K.samples(P)                     # (N, N, P)
    Kp = np.moveaxis(vals, -1, 0)
    sv = np.linalg.svd(Kp, compute_uv=False)
    if float(sv[..., -1].min()) < min_sv:
        raise SingularLoopMatrixError("near-singular K in matrix_B")
    B = -np.linalg.solve(np.conj(Kp), Kp)
    if modes is None:
        modes = P // 2 - 1
    loop = FourierLoop.from_samples(np.moveaxis(B, 0, -1), modes)
    return loop.trimmed(1e-11)


def totally_real_check(F: FibrationSystem, zeta, point, lam: float = 0.0,
                       margin_tol: float = 1e-8):
    """Totally-real verdict for the fiber E(zeta) at a point (z, w).

    The tangent space is cut by the N real differentials; its intersection
    with the J0-rotation is the complex kernel of K.  Returns (verdict,
    margin) with margin the smallest principal-angle sine between the
    tangent space and its rotation; raises on rank-deficient gradients.
    """
    z, w = point
    zeta = np.asarray([zeta], dtype=complex)
    z = np.asarray(z, dtype=complex).reshape(-1, 1)
    w = np.asarray(w, dtype=complex).reshape(-1, 1)
    G = _gradient_matrix(F, z, w, zeta, lam)[..., 0]   # (N, N) complex
    N = F.N
    # real differentials d r^j as 2N-covectors: dr(v) = 2 Re(sum G_jk v_k)
    rows = np.concatenate([2 * G.real, -2 * G.imag], axis=1)   # acting on (Re v, Im v)
    if np.linalg.matrix_rank(rows, tol=1e-10) < N:
        raise DegenerateFibrationError("rank-deficient gradient set "
                                       "(real differentials dependent)")
    K = np.conj(G)
    norms = np.linalg.norm(K, axis=1, keepdims=True)
    sv = np.linalg.svd(K / norms, compute_uv=False)
    margin = float(sv[-1])
    if margin <= margin_tol * 1e-4:
        raise DegenerateFibrationError(
            "gradient matrix complex-rank deficient (fiber carries a complex tangent)")
    # principal angles between T = ker(rows) and J0 T
    T = _nullspace(rows)
    J0v = np.concatenate([-T[N:], T[:N]], axis=0)
    ang = np.linalg.svd(T.T @ J0v, compute_uv=False)
    principal = float(np.sqrt(max(0.0, 1.0 - min(1.0, ang.max(initial=0.0) ** 2))))
    verdict = margin > margin_tol
    return verdict, min(margin, principal) if verdict else 0.0


def _nullspace(A: np.ndarray) -> np.ndarray:
    _, s, vt = np.linalg.svd(A)
    rank = int((s > 1e-10 * s[0]).sum())
    return vt[rank:].T
