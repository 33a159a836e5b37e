"""Pseudo-spectral value grid for the bidegree algebra.

A bidegree polynomial sum d[a,b] zeta^a zbar^b is a polynomial in two
independent unimodular variables (u, v); sampling on the square torus grid
u = w^s, v = w^t (w = exp(2 pi i / G)) turns products, compositions and
pointwise matrix inversion into plain array operations.  Coefficients are
recovered by a 2-D FFT; aliasing folds degrees >= G, whose true spectral mass
is below roundoff for the working truncations (deviation-order lambda^k sits
at bidegree ~5k, so G ~ 2 * caps reaches lambda^{~36}).

Complex conjugation of an algebra element (swap of the grading) is the index
flip conj(V[-t, -s]) on the square grid.
"""

from __future__ import annotations

import numpy as np
from scipy.fft import fft2, ifft2, next_fast_len

from .loop_algebra import DiscFunction

__all__ = ["TorusGrid"]


class TorusGrid:
    """Square torus value grid of size G x G for bidegree polynomials."""

    def __init__(self, caps: tuple[int, int], size: int | None = None):
        self.caps = caps
        need = 2 * (max(caps) + 1)
        self.G = size if size is not None else next_fast_len(need)
        if self.G < max(caps) + 2:
            raise ValueError("torus grid smaller than the coefficient caps")

    # -- transforms ----------------------------------------------------------- #
    def values(self, f: DiscFunction) -> np.ndarray:
        """Sample on the torus: V[.., s, t] = sum c[a,b] w^{sa} w^{tb}."""
        G = self.G
        c = f.coeffs
        if f.zdeg >= G or f.zbardeg >= G:
            raise ValueError("bidegree exceeds torus grid")
        spec = np.zeros(c.shape[:-2] + (G, G), dtype=complex)
        spec[..., : c.shape[-2], : c.shape[-1]] = c
        return ifft2(spec, axes=(-2, -1)) * (G * G)

    def coeffs(self, V: np.ndarray, caps: tuple[int, int] | None = None) -> DiscFunction:
        """Project torus values back to capped bidegree coefficients."""
        A, B = caps if caps is not None else self.caps
        spec = fft2(V, axes=(-2, -1)) / (self.G * self.G)
        return DiscFunction(spec[..., : A + 1, : B + 1])

    # -- algebra on values ------------------------------------------------------ #
    def flip_conj(self, V: np.ndarray) -> np.ndarray:
        """Values of the conjugate element: W[s,t] = conj(V[-t, -s])."""
        idx = (-np.arange(self.G)) % self.G
        W = V[..., idx, :][..., :, idx]
        return np.conj(np.swapaxes(W, -1, -2))

    def real_part(self, V: np.ndarray) -> np.ndarray:
        return 0.5 * (V + self.flip_conj(V))

    def imag_part(self, V: np.ndarray) -> np.ndarray:
        return -0.5j * (V - self.flip_conj(V))

    def constant(self, M) -> np.ndarray:
        M = np.asarray(M, dtype=complex)
        return np.broadcast_to(M[..., None, None], M.shape + (self.G, self.G)).copy()
