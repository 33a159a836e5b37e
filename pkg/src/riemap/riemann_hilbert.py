"""Linear Riemann-Hilbert solver and numerical partial indices.

solve_linear_rh   least-squares collocation for 2 Re[G(zeta) h(zeta)] = c over
                  analytic vector polynomials of degree M; minimal-norm
                  particular solution plus an orthonormal kernel basis read
                  off the SVD.
partial_indices   Birkhoff partial indices of a matrix loop B by probing the
                  kernel dimensions phi(m) of the Toeplitz sections of
                  zeta^{-m} B^T: for B = F+ diag(zeta^{k_i}) F- one has
                  phi(m) = sum_i max(0, m - k_i), so the multiset {k_i}
                  is recovered from the increments of phi.
maslov_index      winding of det B (cheap path).

Rank decisions use a relative singular-value threshold with an enforced gap
ratio; ambiguous gaps raise instead of guessing.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import defaults
from .errors import IndexWindowError, RankGapError, SingularLoopMatrixError
from .loop_algebra import DiscFunction, FourierLoop, loop_det, winding_number

__all__ = [
    "LinearRHProblem",
    "RHSolution",
    "IndexReport",
    "solve_linear_rh",
    "partial_indices",
    "maslov_index",
]


@dataclass
class LinearRHProblem:
    """Boundary data for h -> 2 Re[G h] = rhs over analytic h of degree M."""

    G: FourierLoop                  # (N, N) matrix loop
    rhs: FourierLoop                # (N,) real-valued loop
    truncation: int = defaults.M_DEFAULT

    def __post_init__(self):
        if len(self.G.shape) != 2 or self.G.shape[0] != self.G.shape[1]:
            raise ValueError("G must be a square matrix loop")
        if self.rhs.shape != (self.G.shape[0],):
            raise ValueError("rhs must be an N-component loop")
        if not self.rhs.is_real_valued(1e-9):
            raise ValueError("rhs must be real-valued on the circle")


@dataclass
class RHSolution:
    particular: DiscFunction                 # analytic (N,) disc function
    kernel: list                             # orthonormal analytic kernel basis
    residual: float
    gap_ratio: float
    singular_values: np.ndarray

    @property
    def kernel_dim(self) -> int:
        return len(self.kernel)


@dataclass
class IndexReport:
    """Partial indices k_1 >= ... >= k_N with the sum identity enforced."""

    partial_indices: list
    maslov: int
    det_winding: int
    gaps: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if sum(self.partial_indices) != self.det_winding:
            raise IndexWindowError(
                f"sum of indices {sum(self.partial_indices)} != det winding "
                f"{self.det_winding}")
        assert self.maslov == self.det_winding

    def to_json(self) -> dict:
        return {
            "partial_indices": [int(k) for k in self.partial_indices],
            "maslov": int(self.maslov),
            "det_winding": int(self.det_winding),
            "gaps": self.gaps,
        }


def _rank_split(s: np.ndarray, rel_tol: float, gap_min: float):
    """Numerical rank of a singular spectrum; enforces a clean gap."""
    if s.size == 0 or s[0] == 0.0:
        return 0, np.inf
    cut = rel_tol * s[0]
    rank = int((s > cut).sum())
    if rank == s.size:
        return rank, np.inf
    small = s[rank] if s[rank] > 0 else 1e-300
    gap = (s[rank - 1] / small) if rank > 0 else np.inf
    if gap < gap_min:
        raise RankGapError(
            f"singular-value gap {gap:.1e} below required ratio {gap_min:.0e} "
            f"(s[{rank-1}]={s[rank-1]:.3e}, s[{rank}]={s[rank]:.3e})")
    return rank, float(gap)


def _collocation_matrix(Gp: np.ndarray, M: int, zeta: np.ndarray) -> np.ndarray:
    """Real matrix of (h-coeffs) -> values of 2 Re[G h] at the grid.

    Unknown layout: for component j and degree a, the complex coefficient
    c_{j,a} contributes columns Re c and Im c.
    """
    N, _, P = Gp.shape
    pows = zeta[:, None] ** np.arange(M + 1)              # (P, M+1)
    W = np.einsum("ijp,pa->ipja", Gp, pows)               # (N, P, N, M+1)
    A = np.empty((N * P, N * (M + 1), 2))
    A[..., 0] = 2.0 * W.real.reshape(N * P, N * (M + 1))
    A[..., 1] = -2.0 * W.imag.reshape(N * P, N * (M + 1))
    return A.reshape(N * P, 2 * N * (M + 1))


def _coeffs_from_vector(x: np.ndarray, N: int, M: int) -> np.ndarray:
    c = x.reshape(N, M + 1, 2)
    return c[..., 0] + 1j * c[..., 1]


def solve_linear_rh(problem: LinearRHProblem,
                    grid: int | None = None,
                    rank_rel_tol: float = defaults.RANK_REL_TOL,
                    gap_min: float = defaults.GAP_MIN) -> RHSolution:
    """Solve 2 Re[G h] = rhs by least-squares collocation.

    Returns the minimal-norm particular solution and an orthonormal basis of
    the kernel (the singular directions below the rank threshold).
    """
    G, rhs, M = problem.G, problem.rhs, problem.truncation
    N = G.shape[0]
    if grid is None:
        grid = defaults.grid_size(max(M, G.modes + rhs.modes // 2 + 1))
    zeta = np.exp(2j * np.pi * np.arange(grid) / grid)
    Gp = G.samples(grid)
    b = rhs.samples(grid).real.reshape(N * grid)
    A = _collocation_matrix(Gp, M, zeta)

    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    rank, gap = _rank_split(s, rank_rel_tol, gap_min)
    coef = (U[:, :rank].T @ b) / s[:rank]
    x = Vt[:rank].T @ coef
    residual = float(np.abs(A @ x - b).max())

    particular = DiscFunction.from_analytic(_coeffs_from_vector(x, N, M))
    kernel = [DiscFunction.from_analytic(_coeffs_from_vector(Vt[r], N, M))
              for r in range(rank, Vt.shape[0])]
    return RHSolution(particular=particular, kernel=kernel, residual=residual,
                      gap_ratio=gap, singular_values=s)


# --------------------------------------------------------------------------- #
# partial indices
# --------------------------------------------------------------------------- #

def _toeplitz_kernel_dim(Bc: np.ndarray, m: int, D: int,
                         rel_tol: float, gap_min: float):
    """dim of {h poly deg<=D: P_+(zeta^{-m} B^T h) = 0} via a rectangular
    Toeplitz section (all nonnegative output frequencies kept)."""
    N = Bc.shape[0]
    K = (Bc.shape[-1] - 1) // 2
    # output frequencies of zeta^{-m} B^T h: [-K-m, D+K-m]; keep rows >= 0
    top = D + K - m
    if top < 0:
        return N * (D + 1), np.inf
    rows = top + 1
    T = np.zeros((rows, N, D + 1, N), dtype=complex)
    for a in range(D + 1):
        for r in range(rows):
            f = r + m - a
            if -K <= f <= K:
                T[r, :, a, :] = Bc[:, :, f + K].T
    T = T.reshape(rows * N, (D + 1) * N)
    s = np.linalg.svd(T, compute_uv=False)
    ncols = (D + 1) * N
    if s.size < ncols:
        s = np.concatenate([s, np.zeros(ncols - s.size)])
    rank, gap = _rank_split(s, rel_tol, gap_min)
    return ncols - rank, gap


def partial_indices(B: FourierLoop,
                    probe_degree: int | None = None,
                    rank_rel_tol: float = defaults.RANK_REL_TOL,
                    gap_min: float = defaults.GAP_MIN,
                    max_probe_degree: int = 64) -> IndexReport:
    """Partial indices of an invertible matrix loop by Toeplitz kernel probing.

    For non-polynomial symbols the kernel vectors have geometric tails; an
    ambiguous singular-value gap triggers a retry with a doubled section until
    the gap certifies, erroring at max_probe_degree.
    """
    D0 = probe_degree if probe_degree is not None else \
        max(16, 3 * B.trimmed(1e-12).modes + 4)
    D = D0
    while True:
        try:
            return _partial_indices_at(B, D, rank_rel_tol, gap_min)
        except RankGapError:
            if 2 * D > max_probe_degree:
                raise
            D *= 2


def _partial_indices_at(B: FourierLoop, D: int, rank_rel_tol: float,
                        gap_min: float) -> IndexReport:
    N = B.shape[0]
    det = loop_det(B)
    w = winding_number(det)
    d = B.trimmed(1e-12).modes
    Bc = B.coeffs
    center = int(round(w / N))
    lo = center - d - 2
    hi = center + d + 2
    cache: dict[int, int] = {}
    gaps: list[float] = []

    def phi(m: int) -> int:
        if m not in cache:
            dim, gap = _toeplitz_kernel_dim(Bc, m, D, rank_rel_tol, gap_min)
            cache[m] = dim
            if np.isfinite(gap):
                gaps.append(gap)
        return cache[m]

    for _ in range(40):
        # increments of phi: c_m = #{i: k_i <= m}
        incs = {m: phi(m + 1) - phi(m) for m in range(lo, hi)}
        if incs[lo] != 0:
            lo -= max(2, (hi - lo) // 2)
            continue
        if incs[hi - 1] != N:
            hi += max(2, (hi - lo) // 2)
            continue
        ks: list[int] = []
        prev = 0
        for m in range(lo, hi):
            count = incs[m] - prev
            if count < 0:
                raise IndexWindowError("phi profile not convex; enlarge the probe degree")
            ks.extend([m] * count)
            prev = incs[m]
        if len(ks) != N:
            raise IndexWindowError(
                f"recovered {len(ks)} indices for an {N}-loop; enlarge window "
                f"[{lo},{hi}] or probe degree {D}")
        ks.sort(reverse=True)
        if sum(ks) != w:
            raise IndexWindowError(
                f"index sum {sum(ks)} != det winding {w}; enlarge probe degree {D}")
        report = IndexReport(partial_indices=ks, maslov=w, det_winding=w,
                             gaps={"min_gap_ratio": float(min(gaps)) if gaps else np.inf,
                                   "probe_degree": D})
        return report
    raise IndexWindowError(f"index window did not stabilize in [{lo},{hi}]")


def maslov_index(B: FourierLoop) -> int:
    """Total index = winding of det B around 0."""
    try:
        return winding_number(loop_det(B))
    except Exception as exc:  # noqa: BLE001 - rewrap with context
        raise SingularLoopMatrixError(f"near-vanishing determinant: {exc}") from exc
