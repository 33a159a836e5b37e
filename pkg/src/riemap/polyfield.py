"""Real multivariate polynomial fields on R^m with tensor coefficients.

Used for structure deviations, conjugators and polynomial diffeomorphisms.
Coefficients are stored per monomial exponent tuple so every derivative is
exact, and composition with disc functions stays inside the bidegree algebra.
"""

from __future__ import annotations

import numpy as np

from .loop_algebra import DiscFunction

__all__ = ["PolyField", "MonomialCache"]


class PolyField:
    """sum_alpha C_alpha x^alpha with x in R^{nvars}, C_alpha real tensors."""

    __slots__ = ("nvars", "terms", "_shape")

    def __init__(self, nvars: int, terms: dict | None = None, shape: tuple | None = None):
        self.nvars = nvars
        self.terms: dict[tuple, np.ndarray] = {}
        self._shape = shape
        if terms:
            for alpha, coeff in terms.items():
                self._put(tuple(int(a) for a in alpha), np.asarray(coeff, dtype=float))

    def _put(self, alpha, coeff):
        if len(alpha) != self.nvars:
            raise ValueError("exponent tuple length mismatch")
        if alpha in self.terms:
            self.terms[alpha] = self.terms[alpha] + coeff
        else:
            self.terms[alpha] = coeff.copy()

    # -- constructors -------------------------------------------------------- #
    @classmethod
    def constant(cls, nvars: int, value) -> "PolyField":
        return cls(nvars, {(0,) * nvars: np.asarray(value, dtype=float)})

    @classmethod
    def coordinate(cls, nvars: int, i: int) -> "PolyField":
        alpha = [0] * nvars
        alpha[i] = 1
        return cls(nvars, {tuple(alpha): np.asarray(1.0)})

    # -- structure ------------------------------------------------------------ #
    @property
    def tensor_shape(self):
        for coeff in self.terms.values():
            return coeff.shape
        return self._shape if self._shape is not None else ()

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def prune(self, tol: float = 0.0) -> "PolyField":
        kept = {a: c for a, c in self.terms.items() if np.abs(c).max(initial=0.0) > tol}
        return PolyField(self.nvars, kept, shape=self.tensor_shape)

    def entry(self, *idx) -> "PolyField":
        """Scalar component of a tensor-valued field."""
        return PolyField(self.nvars, {a: c[idx] for a, c in self.terms.items()}, shape=())

    # -- algebra --------------------------------------------------------------- #
    def __add__(self, other: "PolyField") -> "PolyField":
        out = PolyField(self.nvars, self.terms, shape=self.tensor_shape or other.tensor_shape)
        for a, c in other.terms.items():
            out._put(a, c)
        return out

    def __sub__(self, other: "PolyField") -> "PolyField":
        return self + (other * -1.0)

    def __mul__(self, other):
        if np.isscalar(other):
            return PolyField(self.nvars, {a: c * other for a, c in self.terms.items()},
                             shape=self.tensor_shape)
        # polynomial product; at least one factor must be scalar-valued
        if other.tensor_shape != () and self.tensor_shape != ():
            raise ValueError("tensor-tensor polynomial product is not defined")
        out = PolyField(self.nvars, shape=self.tensor_shape or other.tensor_shape)
        for a, ca in self.terms.items():
            for b, cb in other.terms.items():
                out._put(tuple(x + y for x, y in zip(a, b)), ca * cb)
        return out

    __rmul__ = __mul__

    def lmatmul_const(self, M) -> "PolyField":
        """Constant matrix times tensor-valued field: x -> M @ P(x)."""
        M = np.asarray(M, dtype=float)
        shp = (M.shape[0],) + self.tensor_shape[1:] if self.tensor_shape else self.tensor_shape
        return PolyField(self.nvars, {a: M @ c for a, c in self.terms.items()}, shape=shp)

    def rmatmul_const(self, M) -> "PolyField":
        """Tensor-valued field times constant matrix: x -> P(x) @ M."""
        M = np.asarray(M, dtype=float)
        shp = self.tensor_shape[:-1] + (M.shape[1],) if self.tensor_shape else self.tensor_shape
        return PolyField(self.nvars, {a: c @ M for a, c in self.terms.items()}, shape=shp)

    def partial(self, c: int) -> "PolyField":
        """Exact partial derivative with respect to x^c."""
        out = PolyField(self.nvars, shape=self.tensor_shape)
        for a, coeff in self.terms.items():
            if a[c] == 0:
                continue
            alpha = list(a)
            alpha[c] -= 1
            out._put(tuple(alpha), coeff * a[c])
        return out

    def jacobian(self) -> "PolyField":
        """For a vector field (shape (m,)): matrix field dPhi[i,j] = dPhi_i/dx_j."""
        m = self.tensor_shape[0]
        out = PolyField(self.nvars, shape=(m, self.nvars))
        for j in range(self.nvars):
            pj = self.partial(j)
            for a, coeff in pj.terms.items():
                full = np.zeros((m, self.nvars))
                full[:, j] = coeff
                out._put(a, full)
        return out

    # -- evaluation -------------------------------------------------------------- #
    def __call__(self, points):
        """Evaluate at points (..., nvars) -> (..., *tensor_shape)."""
        pts = np.asarray(points, dtype=float)
        scalar_pt = pts.ndim == 1
        if scalar_pt:
            pts = pts[None, :]
        lead = pts.shape[:-1]
        flat = pts.reshape(-1, self.nvars)
        maxdeg = [0] * self.nvars
        for a in self.terms:
            for i, ai in enumerate(a):
                maxdeg[i] = max(maxdeg[i], ai)
        pows = [flat[:, i][:, None] ** np.arange(maxdeg[i] + 1) for i in range(self.nvars)]
        out = np.zeros((flat.shape[0],) + self.tensor_shape)
        for a, coeff in self.terms.items():
            mono = np.ones(flat.shape[0])
            for i, ai in enumerate(a):
                if ai:
                    mono = mono * pows[i][:, ai]
            out += mono.reshape((-1,) + (1,) * coeff.ndim) * coeff
        out = out.reshape(lead + self.tensor_shape)
        return out[0] if scalar_pt else out

    def subs(self, new_vars: list["PolyField"]) -> "PolyField":
        """Substitute each coordinate by a scalar PolyField (e.g. affine charts)."""
        out = PolyField(new_vars[0].nvars, shape=self.tensor_shape)
        cache: dict[tuple, PolyField] = {}

        def mono(alpha) -> PolyField:
            if alpha in cache:
                return cache[alpha]
            if sum(alpha) == 0:
                p = PolyField.constant(out.nvars, 1.0)
            else:
                i = next(k for k, ak in enumerate(alpha) if ak > 0)
                prev = list(alpha)
                prev[i] -= 1
                p = mono(tuple(prev)) * new_vars[i]
            cache[alpha] = p
            return p

        for a, coeff in self.terms.items():
            m = mono(a)
            for b, s in m.terms.items():
                out._put(b, coeff * s)
        return out

    def compose_disc(self, cache: "MonomialCache") -> DiscFunction:
        """Compose with disc functions x_i(zeta) (real-valued, via cache)."""
        monos = {a: cache.get(a) for a in self.terms}
        A = max((m.zdeg for m in monos.values()), default=0)
        B = max((m.zbardeg for m in monos.values()), default=0)
        out = np.zeros(self.tensor_shape + (A + 1, B + 1), dtype=complex)
        for a, coeff in self.terms.items():
            m = monos[a]
            out[..., : m.zdeg + 1, : m.zbardeg + 1] += coeff[..., None, None] * m.coeffs
        return DiscFunction(out)

    # -- serialization -------------------------------------------------------------- #
    def to_json(self) -> dict:
        return {",".join(str(x) for x in a): np.asarray(c).tolist()
                for a, c in sorted(self.terms.items())}

    @classmethod
    def from_json(cls, nvars: int, obj: dict) -> "PolyField":
        terms = {}
        for key, val in obj.items():
            alpha = tuple(int(x) for x in key.split(",")) if key else ()
            terms[alpha] = np.asarray(val, dtype=float)
        return cls(nvars, terms)


class MonomialCache:
    """Shared cache of monomials x^alpha of disc functions, capped bidegree."""

    def __init__(self, xvars: list[DiscFunction], caps: tuple[int, int]):
        self.xvars = xvars
        self.caps = caps
        self._store: dict[tuple, DiscFunction] = {}

    def get(self, alpha: tuple) -> DiscFunction:
        alpha = tuple(alpha)
        hit = self._store.get(alpha)
        if hit is not None:
            return hit
        if sum(alpha) == 0:
            out = DiscFunction.constant(1.0)
        else:
            i = next(k for k, ak in enumerate(alpha) if ak > 0)
            prev = list(alpha)
            prev[i] -= 1
            out = (self.get(tuple(prev)) * self.xvars[i]).truncate(*self.caps)
            out = out.trimmed(1e-17)
        self._store[alpha] = out
        return out
