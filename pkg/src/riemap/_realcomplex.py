"""Real <-> complex dictionaries for the base and fiber coordinates.

Base side ("z"): x = (x^1..x^n, y^1..y^n) in R^{2n} <-> z = x + iy in C^n,
with J0 = [[0,-I],[I,0]] acting as multiplication by i.

Fiber side ("t"): cotangent coordinates p = (p_x, p_y) in R^{2n} <-> the
complex fiber coordinate t = p_x - i p_y of a (1,0)-form t·dz with real part
p·dx.  The transpose structure tJ0 = -J0 then acts on t as multiplication
by i, so fiber holomorphy is the plain dbar-equation in t.

A real-linear operator A on R^{2n} is carried as a pair (E, F) acting on the
complex representative w by w -> E w + F conj(w).
"""

import numpy as np

SIGMA = {"z": 1.0, "t": -1.0}


def j0(n: int) -> np.ndarray:
    """Standard complex structure on R^{2n}."""
    J = np.zeros((2 * n, 2 * n))
    J[:n, n:] = -np.eye(n)
    J[n:, :n] = np.eye(n)
    return J


def to_complex(x, side: str = "z"):
    """Real 2n-vector(s) -> complex n-vector(s); trailing axis is the 2n one."""
    x = np.asarray(x)
    n = x.shape[-1] // 2
    return x[..., :n] + 1j * SIGMA[side] * x[..., n:]


def to_real(w, side: str = "z"):
    """Complex n-vector(s) -> real 2n-vector(s)."""
    w = np.asarray(w)
    return np.concatenate([w.real, SIGMA[side] * w.imag], axis=-1)


def op_to_pair(A, side_in: str = "z", side_out: str = "z"):
    """Split a real 2n x 2n operator into its (E, F) complex pair.

    A @ real(w) == real(E w + F conj(w)) with the side conventions above.
    Works entrywise for any array-like blocks (numbers or objects supporting
    +,-,* by scalars), so it is reused for DiscFunction-valued matrices.
    """
    si, so = SIGMA[side_in], SIGMA[side_out]
    n = len(A) // 2
    A11, A12 = A[:n, :n], A[:n, n:]
    A21, A22 = A[n:, :n], A[n:, n:]
    reE = 0.5 * (A11 + (si * so) * A22)
    reF = 0.5 * (A11 - (si * so) * A22)
    imE = 0.5 * (so * A21 - si * A12)
    imF = 0.5 * (so * A21 + si * A12)
    return reE + 1j * imE, reF + 1j * imF


def pair_to_op(E, F, side_in: str = "z", side_out: str = "z") -> np.ndarray:
    """Inverse of op_to_pair for plain numeric matrices."""
    si, so = SIGMA[side_in], SIGMA[side_out]
    n = E.shape[0]
    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = E.real + F.real
    A[:n, n:] = si * (F.imag - E.imag)
    A[n:, :n] = so * (E.imag + F.imag)
    A[n:, n:] = so * si * (E.real - F.real)
    return A


def apply_real_op(A, w, side_in: str = "z", side_out: str = "z"):
    """Apply a real 2n x 2n matrix to complex n-vector values (..., n)."""
    x = to_real(w, side_in)
    y = np.einsum("ij,...j->...i", A, x)
    return to_complex(y, side_out)
