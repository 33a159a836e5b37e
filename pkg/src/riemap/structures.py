"""Almost complex structure fields on the ball and their prolongations.

A structure is stored through a polynomial conjugator C(x):

    J(x) = C(x)^{-1} J0 C(x)

which squares to -I identically regardless of truncation.  Two generator
kinds cover the test families:

  * "polynomial": C = I - (lambda/2) J0 D(x) with D a polynomial deviation
    field anticommuting with J0, so J = J0 + lambda D + O(lambda^2);
  * "pullback":   C = dPhi for a polynomial diffeomorphism Phi of the closed
    ball, so Phi is a (J, J0)-biholomorphism.

Also here: the Beltrami coefficient of a structure, the vertical lift to the
cotangent bundle with its fiber-equation coefficients, point normalization
charts, Levi forms by finite-difference brackets, and generators for the test
structures.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import cached_property

import numpy as np

from . import defaults
from ._realcomplex import j0, op_to_pair
from .errors import StructureDomainError, NonContractionError, SchemaError
from .loop_algebra import DiscFunction, disc_matmul, disc_matvec
from .polyfield import PolyField, MonomialCache

__all__ = [
    "StructureField",
    "PolynomialMap",
    "ProlongationTensor",
    "HypersurfaceDef",
    "beltrami_coefficient",
    "vertical_lift",
    "prolongation_coefficients",
    "normalize_at_point",
    "levi_form",
    "pullback_structure",
    "make_deviation_structure",
    "make_flow_diffeo",
    "ball_grid",
]


def ball_grid(n: int, count: int = 200, seed: int = 12345) -> np.ndarray:
    """Deterministic sample of the closed ball in R^{2n} (standard test grid)."""
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((count, 2 * n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = rng.uniform(0.0, 1.0, count) ** (1.0 / (2 * n))
    return dirs * radii[:, None]


# --------------------------------------------------------------------------- #
# polynomial diffeomorphisms
# --------------------------------------------------------------------------- #

class PolynomialMap:
    """Polynomial map of R^{2n} with exact Jacobian and Newton inverse."""

    def __init__(self, poly: PolyField, n: int):
        self.poly = poly
        self.n = n
        self.jac = poly.jacobian()

    def __call__(self, pts):
        return self.poly(pts)

    def jacobian_at(self, pts):
        return self.jac(pts)

    def d0(self) -> np.ndarray:
        return self.jac(np.zeros(2 * self.n))

    def inverse(self, pts, tol: float = 1e-14, maxit: int = 60):
        """Pointwise Newton inversion (the inverse is not polynomial)."""
        pts = np.asarray(pts, dtype=float)
        x = pts.copy()
        for _ in range(maxit):
            res = self(x) - pts
            if np.abs(res).max() < tol:
                return x
            Jm = self.jacobian_at(x)
            x = x - np.linalg.solve(Jm, res[..., None])[..., 0]
        raise StructureDomainError("polynomial map inversion did not converge")

    def min_jacobian_det(self, pts) -> float:
        return float(np.abs(np.linalg.det(self.jacobian_at(pts))).min())

    def to_json(self) -> dict:
        return {"n": self.n, "phi_coeffs": self.poly.to_json()}

    @classmethod
    def from_json(cls, obj: dict) -> "PolynomialMap":
        n = int(obj["n"])
        return cls(PolyField.from_json(2 * n, obj["phi_coeffs"]), n)


# --------------------------------------------------------------------------- #
# structure fields
# --------------------------------------------------------------------------- #

class StructureField:
    """Almost complex structure J(x) = C(x)^{-1} J0 C(x) on the closed ball."""

    def __init__(self, n: int, lam: float, conjugator: PolyField,
                 kind: str = "custom", meta: dict | None = None):
        self.n = n
        self.lam = float(lam)
        self.C = conjugator
        self.kind = kind
        self.meta = meta or {}
        self._J0 = j0(n)
        self._dC = [self.C.partial(c) for c in range(2 * n)]

    # -- constructors -------------------------------------------------------- #
    @classmethod
    def standard(cls, n: int) -> "StructureField":
        C = PolyField.constant(2 * n, np.eye(2 * n))
        return cls(n, 0.0, C, kind="standard")

    @classmethod
    def from_deviation(cls, n: int, lam: float, deviation: PolyField) -> "StructureField":
        """J = J0 + lam * deviation + O(lam^2); deviation should anticommute with J0."""
        C = PolyField.constant(2 * n, np.eye(2 * n)) + \
            (deviation.lmatmul_const(j0(n)) * (-0.5 * lam))
        return cls(n, lam, C, kind="polynomial", meta={"deviation": deviation})

    @classmethod
    def pullback(cls, phi: PolynomialMap, lam: float | None = None) -> "StructureField":
        grid = ball_grid(phi.n)
        if phi.min_jacobian_det(grid) < 1e-8:
            raise StructureDomainError("dPhi singular on the test grid")
        lam = 0.0 if lam is None else lam
        return cls(phi.n, lam, phi.jac, kind="pullback", meta={"phi": phi})

    def with_lambda(self, lam: float) -> "StructureField":
        if self.kind == "standard" or (self.kind == "polynomial" and "deviation" in self.meta):
            if lam == 0.0:
                return StructureField.standard(self.n)
            if self.kind == "standard":
                raise StructureDomainError("standard structure has no deformation to scale")
            return StructureField.from_deviation(self.n, lam, self.meta["deviation"])
        if self.kind == "pullback" and "generator" in self.meta:
            return make_pullback_structure(self.n, lam, self.meta["generator"])
        raise StructureDomainError(f"cannot rescale structure of kind {self.kind!r}")

    def homotopy(self, s: float) -> "StructureField":
        """Path of exact structures from J0 (s=0) to this field (s=1).

        Interpolates the conjugator, C_s = I + s (C - I); for deviation-kind
        fields this coincides with rescaling lambda to s*lambda.
        """
        if s == 0.0:
            return StructureField.standard(self.n)
        if s == 1.0:
            return self
        eye = PolyField.constant(2 * self.n, np.eye(2 * self.n))
        Cs = eye + (self.C - eye) * s
        return StructureField(self.n, s * self.lam, Cs,
                              kind=f"{self.kind}_homotopy", meta={"base": self, "s": s})

    # -- pointwise evaluation -------------------------------------------------- #
    def conj_at(self, pts):
        return self.C(pts)

    def J(self, pts):
        """J(x) at points (..., 2n) -> (..., 2n, 2n)."""
        Cv = self.C(pts)
        return np.linalg.solve(Cv, self._J0 @ Cv)

    def dJ(self, pts):
        """Spatial derivatives dJ/dx^c at points -> (..., 2n_c, 2n, 2n)."""
        pts = np.asarray(pts, dtype=float)
        Cv = self.C(pts)
        Cinv = np.linalg.inv(Cv)
        Jv = Cinv @ self._J0 @ Cv
        parts = []
        for c in range(2 * self.n):
            dC = self._dC[c](pts)
            parts.append(Cinv @ (self._J0 @ dC - dC @ Jv))
        return np.stack(parts, axis=-3)

    def deviation_norm(self, pts) -> float:
        """sup of the spectral norm of J - J0 over the points."""
        S = self.J(pts) - self._J0
        return float(np.linalg.norm(S, ord=2, axis=(-2, -1)).max())

    def acs_residual(self, pts) -> float:
        """max over points of || J(x)^2 + I ||; identically ~0 by construction."""
        Jv = self.J(pts)
        I = np.eye(2 * self.n)
        return float(np.abs(Jv @ Jv + I).max())

    def along_disc(self, f: DiscFunction, caps: tuple[int, int]) -> "DiscComposedStructure":
        return DiscComposedStructure(self, f, caps)

    # -- serialization ----------------------------------------------------------- #
    def to_json(self) -> dict:
        if self.kind == "polynomial" and "deviation" in self.meta:
            return {"n": self.n, "lambda": self.lam, "kind": "polynomial",
                    "deviation_coeffs": self.meta["deviation"].to_json()}
        if self.kind == "pullback" and "phi" in self.meta:
            return {"n": self.n, "lambda": self.lam, "kind": "pullback",
                    "phi_coeffs": self.meta["phi"].poly.to_json()}
        if self.kind == "standard":
            return {"n": self.n, "lambda": 0.0, "kind": "polynomial",
                    "deviation_coeffs": {}}
        raise SchemaError(f"structure of kind {self.kind!r} has no file form")

    @classmethod
    def from_json(cls, obj: dict) -> "StructureField":
        try:
            n = int(obj["n"])
            lam = float(obj["lambda"])
            kind = obj["kind"]
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"structure file: missing/invalid field ({exc})") from exc
        if kind == "polynomial":
            if "deviation_coeffs" not in obj:
                raise SchemaError("structure file: kind 'polynomial' needs deviation_coeffs")
            D = PolyField.from_json(2 * n, obj["deviation_coeffs"])
            if not D.terms:
                return cls.standard(n)
            return cls.from_deviation(n, lam, D)
        if kind == "pullback":
            if "phi_coeffs" not in obj:
                raise SchemaError("structure file: kind 'pullback' needs phi_coeffs")
            phi = PolynomialMap(PolyField.from_json(2 * n, obj["phi_coeffs"]), n)
            return cls.pullback(phi, lam)
        raise SchemaError(f"structure file: unknown kind {kind!r}")


# --------------------------------------------------------------------------- #
# disc-composed structure data (coefficients along a disc)
# --------------------------------------------------------------------------- #

def _const_lmul(M: np.ndarray, D: DiscFunction) -> DiscFunction:
    return DiscFunction(np.einsum("ij,j...->i...", M, D.coeffs))


def _const_rmul(D: DiscFunction, M: np.ndarray) -> DiscFunction:
    return DiscFunction(np.einsum("ij...,jk->ik...", D.coeffs, M))


def disc_matrix_inverse(A: DiscFunction, caps: tuple[int, int],
                        tol: float = 1e-15, maxit: int = 80) -> DiscFunction:
    """Neumann-series inverse of a matrix disc function with dominant constant."""
    A0 = A.coeffs[..., 0, 0]
    A0inv = np.linalg.inv(A0)
    Nmat = _const_lmul(A0inv, DiscFunction.constant(A0) - A)  # A0^{-1}(A0 - A)
    Nmat = Nmat.truncate(*caps).trimmed(1e-17)
    X = DiscFunction.constant(A0inv)
    term = DiscFunction.constant(A0inv)
    for _ in range(maxit):
        term = disc_matmul(Nmat, term, caps).trimmed(1e-17)
        X = X + term
        if float(np.abs(term.coeffs).max()) < tol:
            return X.truncate(*caps).trimmed(0.0)
    raise NonContractionError("matrix inverse series did not converge "
                              "(structure too far from the reference)")


def disc_op_pair(A: DiscFunction, side_in: str, side_out: str):
    """(E, F) complex pair of a real-matrix-valued disc function."""
    E, F = op_to_pair(A.coeffs, side_in, side_out)
    return DiscFunction(E), DiscFunction(F)


def apply_pair(E: DiscFunction, F: DiscFunction, w: DiscFunction,
               caps: tuple[int, int]) -> DiscFunction:
    """Apply the real-linear operator (E, F): w -> E w + F conj(w)."""
    from scipy.signal import fftconvolve
    w = w.trimmed(1e-17)
    wc = w.conj()
    L = max(w.zdeg, wc.zdeg)
    Lb = max(w.zbardeg, wc.zbardeg)
    A = max(E.zdeg, F.zdeg)
    B = max(E.zbardeg, F.zbardeg)
    ops = np.stack([E.pad(A, B).coeffs, F.pad(A, B).coeffs])        # (2,i,k,.,.)
    vecs = np.stack([w.pad(L, Lb).coeffs, wc.pad(L, Lb).coeffs])    # (2,k,.,.)
    out = fftconvolve(ops, vecs[:, None], axes=(-2, -1)).sum(axis=(0, 2))
    return DiscFunction(out).truncate(*caps)


class DiscComposedStructure:
    """Structure and prolongation coefficients composed with a disc f.

    All nonlinear algebra (composition, matrix inversion, products) runs
    pointwise on a padded torus value grid; coefficient-space views are
    produced on demand.  Matrices are stored value-leading (G, G, 2n, 2n).
    """

    def __init__(self, field: StructureField, f: DiscFunction, caps: tuple[int, int]):
        from .torus import TorusGrid
        self.field = field
        self.f = f
        self.caps = caps
        self.grid = TorusGrid(caps)
        self.J0 = field._J0
        n = field.n
        fv = self.grid.values(f.truncate(*caps))          # (n, G, G)
        self.fV = fv
        xs = [self.grid.real_part(fv[j]) for j in range(n)]
        xs += [self.grid.imag_part(fv[j]) for j in range(n)]
        self.xV = np.stack(xs, axis=0)                    # (2n, G, G)

    # -- pointwise pipeline ---------------------------------------------------- #
    @cached_property
    def _all_fields(self):
        vals = _poly_values_multi([self.field.C] + list(self.field._dC), self.xV)
        return vals

    @cached_property
    def _CV(self):
        return self._all_fields[0]                        # (G, G, 2n, 2n)

    @cached_property
    def _JV(self):
        CV = self._CV
        return np.linalg.solve(CV, np.einsum("ij,stjk->stik", self.J0, CV))

    @cached_property
    def _SV(self):
        return self._JV - self.J0

    @cached_property
    def _base_ops(self):
        A1 = 0.5 * np.einsum("ij,stjk->stik", self.J0, self._SV)
        P = np.eye(2 * self.field.n) - A1
        Q1 = -np.linalg.solve(P, A1)
        Pinv = np.linalg.inv(P)
        return Q1, Pinv

    @cached_property
    def _fiber_ops(self):
        tS = np.swapaxes(self._SV, -1, -2)
        A2 = 0.5 * np.einsum("ij,stjk->stik", self.J0.T, tS)
        P2 = np.eye(2 * self.field.n) - A2
        Q2 = -np.linalg.solve(P2, A2)
        P2inv = np.linalg.inv(P2)
        return Q2, P2inv

    @cached_property
    def _dJV(self):
        """dJ/dx^c pointwise, stacked (2n_c, G, G, 2n, 2n)."""
        CV = self._CV
        JV = self._JV
        Cinv = np.linalg.inv(CV)
        dC = np.stack(self._all_fields[1:], axis=0)       # (c, G, G, 2n, 2n)
        inner = np.einsum("ij,cstjk->cstik", self.J0, dC) - dC @ JV
        return Cinv @ inner

    @cached_property
    def _AkV(self):
        """A^k[j,i] = d_i J[k,j] - d_j J[k,i], stacked (2n_k, G, G, 2n, 2n)."""
        D = self._dJV                                     # (c, G, G, row, col)
        return D.transpose(3, 1, 2, 4, 0) - D.transpose(3, 1, 2, 0, 4)

    # -- value-space accessors for the extensions -------------------------------- #
    def q1_values(self):
        Q1 = np.moveaxis(self._base_ops[0], (-2, -1), (0, 1))   # (2n,2n,G,G)
        return op_to_pair(Q1, "z", "z")

    def q2_values(self):
        Q2 = np.moveaxis(self._fiber_ops[0], (-2, -1), (0, 1))
        return op_to_pair(Q2, "t", "t")

    def mk_values(self, fxV_real: np.ndarray) -> np.ndarray:
        """m_k = -1/2 P2^{-1} tJ0 A^k f_x on the grid, (2n_k, n, G, G) t-coords."""
        P2inv = self._fiber_ops[1]                        # (G,G,2n,2n)
        v = np.einsum("kstji,ist->kstj", self._AkV, fxV_real)
        v = np.einsum("ij,kstj->ksti", -0.5 * self.J0.T, v)
        out = np.einsum("stij,kstj->kist", P2inv, v)      # (k, 2n, G, G)
        n = self.field.n
        return out[:, :n] - 1j * out[:, n:]

    def fx_values_real(self, f: DiscFunction) -> np.ndarray:
        fx = (f.dz() + f.dbar()).truncate(*self.caps)
        V = self.grid.values(fx)
        n = self.field.n
        parts = [self.grid.real_part(V[j]) for j in range(n)]
        parts += [self.grid.imag_part(V[j]) for j in range(n)]
        return np.stack(parts, axis=0)

    # -- coefficient-space views (residual checks, tests) ------------------------- #
    def q1_pair(self):
        E, F = self.q1_values()
        return self.grid.coeffs(E), self.grid.coeffs(F)

    def q2_pair(self):
        E, F = self.q2_values()
        return self.grid.coeffs(E), self.grid.coeffs(F)

    def q3_pieces(self, fx_real: DiscFunction) -> DiscFunction:
        mk = self.mk_values(self.grid.values(fx_real))
        return self.grid.coeffs(mk)

    def Sf(self) -> DiscFunction:
        return self.grid.coeffs(np.moveaxis(self._SV, (-2, -1), (0, 1)))


def _poly_values_multi(fields, xV: np.ndarray):
    """Evaluate several PolyFields on the same torus values with one shared
    monomial pass.  xV: (m, G, G) -> list of (G, G, *tensor_shape)."""
    m = xV.shape[0]
    G1, G2 = xV.shape[-2:]
    alphas = sorted({a for P in fields for a in P.terms},
                    key=lambda a: (sum(a), a))
    mono: dict[tuple, np.ndarray] = {}
    ones = np.ones((G1, G2), dtype=complex)

    def get(alpha):
        hit = mono.get(alpha)
        if hit is not None:
            return hit
        if sum(alpha) == 0:
            out = ones
        else:
            i = next(k for k, ak in enumerate(alpha) if ak > 0)
            prev = list(alpha)
            prev[i] -= 1
            out = get(tuple(prev)) * xV[i]
        mono[alpha] = out
        return out

    stack = np.stack([get(a) for a in alphas], axis=0)    # (T, G, G)
    index = {a: t for t, a in enumerate(alphas)}
    outs = []
    for P in fields:
        coeff = np.zeros((len(alphas),) + P.tensor_shape)
        for a, c in P.terms.items():
            coeff[index[a]] = c
        outs.append(np.tensordot(stack, coeff, axes=(0, 0)))
    return outs


def _poly_values(P, xV: np.ndarray) -> np.ndarray:
    """Evaluate a PolyField pointwise on torus values xV (m, G, G)."""
    return _poly_values_multi([P], xV)[0]


# --------------------------------------------------------------------------- #
# operations
# --------------------------------------------------------------------------- #

def beltrami_coefficient(J: StructureField | np.ndarray, x=None) -> np.ndarray:
    """Pointwise Beltrami operator Q(x) = -(I - J0 S/2)^{-1} (J0 S/2), S = J - J0.

    Maps solving df o J0 = J o df are exactly the solutions of
    dbar f + Q(f) df = 0 (componentwise J0-operators); the defining
    validation is the real-form residual, not this formula.
    """
    if isinstance(J, StructureField):
        Jx = J.J(np.asarray(x, dtype=float))
        n = J.n
    else:
        Jx = np.asarray(J, dtype=float)
        n = Jx.shape[-1] // 2
    J0m = j0(n)
    S = Jx - J0m
    if np.linalg.norm(S, ord=2) >= 2.0:
        raise StructureDomainError("structure too far from J0 (||S|| >= 2)")
    A = 0.5 * (J0m @ S)
    P = np.eye(2 * n) - A
    if abs(np.linalg.det(P)) < 1e-12:
        raise StructureDomainError("I - J0 S / 2 is not invertible at x")
    return -np.linalg.solve(P, A)


@dataclass
class ProlongationTensor:
    """Block tensor [[J, 0], [sum_k y_k A^k, B]] on ball x fiber.

    Constructed by vertical_lift: A^k is the antisymmetrized derivative block
    of J and B is the pointwise transpose of J, so conditions (A^k == 0 and
    B == tJ0 at the reference) hold automatically for families with J(0)=J0.
    """

    structure: StructureField
    kind: str = "vertical_lift"

    @property
    def n(self) -> int:
        return self.structure.n

    def base_matrix(self, x):
        return self.structure.J(x)

    def fiber_matrix(self, x):
        """Lower-right block B(x) = transpose of J(x)."""
        Jv = self.structure.J(x)
        return np.swapaxes(Jv, -1, -2)

    def A_k(self, x):
        """A^k(x) stacked (..., 2n_k, 2n, 2n): A^k[j,i] = d_i J[k,j] - d_j J[k,i].

        The index reading is pinned by the invariance of the lift under
        cotangent lifts of diffeomorphisms (direct image of the lift equals
        the lift of the direct image).
        """
        D = self.structure.dJ(x)     # (..., c, row, col)
        return np.moveaxis(D, -3, -1) - np.swapaxes(D, -3, -2)

    def lower_left(self, x, y):
        A = self.A_k(x)
        return np.einsum("...k,...kji->...ji", np.asarray(y, dtype=float), A)

    def matrix(self, x, y):
        """Full (4n x 4n) tensor at a base/fiber point."""
        n2 = 2 * self.n
        Jv = self.base_matrix(x)
        out = np.zeros(Jv.shape[:-2] + (2 * n2, 2 * n2))
        out[..., :n2, :n2] = Jv
        out[..., n2:, :n2] = self.lower_left(x, y)
        out[..., n2:, n2:] = self.fiber_matrix(x)
        return out

    def ac_defect(self, x, y) -> float:
        """|| T^2 + I ||: zero iff the lift is an almost complex structure here."""
        T = self.matrix(x, y)
        return float(np.abs(T @ T + np.eye(T.shape[-1])).max())


def vertical_lift(J: StructureField) -> ProlongationTensor:
    """Canonical lift of J to the cotangent bundle (invariant under cotangent
    lifts of diffeomorphisms)."""
    return ProlongationTensor(J, kind="vertical_lift")


def prolongation_coefficients(T: ProlongationTensor, x, y, base_dx=None):
    """Pointwise fiber coefficients (Q2, Q3) of the elliptic prolongation.

    Q2 is the fiber Beltrami operator; Q3 (a matrix acting on the real fiber
    representative of g) contracts the base derivative, supplied as base_dx
    (defaults to e1, the central-disc direction).
    """
    n = T.n
    J0m = j0(n)
    Jx = T.base_matrix(x)
    tS = Jx.T - J0m.T
    A2 = 0.5 * (J0m.T @ tS)
    P2 = np.eye(2 * n) - A2
    if abs(np.linalg.det(P2)) < 1e-12:
        raise StructureDomainError("fiber reduction not invertible at x")
    Q2 = -np.linalg.solve(P2, A2)
    if base_dx is None:
        base_dx = np.eye(2 * n)[0]
    base_dx = np.asarray(base_dx, dtype=float)
    A = T.A_k(x)                                   # (2n_k, 2n, 2n)
    cols = np.einsum("kji,i->jk", A, base_dx)      # column k = A^k @ base_dx
    Q3 = -0.5 * np.linalg.solve(P2, J0m.T @ cols)
    # sanity: Q3 must act linearly on the fiber (columns independent of y)
    _ = np.asarray(y, dtype=float)
    return Q2, Q3


@dataclass
class AffineChart:
    """z(x) = (1/delta) Lambda (x - p); pushes J(p) to J0 and dilates."""

    p: np.ndarray
    Lambda: np.ndarray
    delta: float

    def apply(self, x):
        return np.einsum("ij,...j->...i", self.Lambda, np.asarray(x) - self.p) / self.delta

    def invert(self, u):
        Li = np.linalg.inv(self.Lambda)
        return self.p + self.delta * np.einsum("ij,...j->...i", Li, np.asarray(u))


def _conjugating_basis(Jp: np.ndarray) -> np.ndarray:
    """Basis B = [v_1..v_n | J v_1..J v_n] with B^{-1} J B = J0."""
    m = Jp.shape[0]
    n = m // 2
    if np.abs(Jp @ Jp + np.eye(m)).max() > 1e-8:
        raise StructureDomainError("J(p)^2 != -I; cannot normalize")
    chosen: list[np.ndarray] = []
    ortho = np.zeros((m, 0))
    for _ in range(n):
        # pick the coordinate direction least captured by the current span
        resid = np.eye(m) - ortho @ ortho.T
        scores = np.linalg.norm(resid, axis=0)
        v = resid[:, int(np.argmax(scores))]
        v = v / np.linalg.norm(v)
        chosen.append(v)
        block = np.stack([v, Jp @ v], axis=1)
        q, _ = np.linalg.qr(np.concatenate([ortho, block], axis=1))
        ortho = q
    B = np.concatenate([np.stack(chosen, axis=1),
                        np.stack([Jp @ v for v in chosen], axis=1)], axis=1)
    if abs(np.linalg.det(B)) < 1e-10:
        raise StructureDomainError("failed to build a conjugating basis at p")
    return B


def normalize_at_point(J: StructureField, p, bound: float,
                       grid_count: int = 200) -> tuple[AffineChart, StructureField]:
    """Affine chart (conjugation + dilation) making the deviation <= bound.

    Returns the chart (with its dilation factor) and the direct-image field
    measured on the standard test grid.
    """
    p = np.asarray(p, dtype=float)
    Jp = J.J(p)
    B = _conjugating_basis(Jp)
    Lam = np.linalg.inv(B)
    grid = ball_grid(J.n, grid_count)
    delta = 1.0
    for _ in range(60):
        chart = AffineChart(p=p, Lambda=Lam, delta=delta)
        img = _affine_image(J, chart)
        dev = img.deviation_norm(grid)
        if dev <= bound:
            return chart, img
        delta *= 0.5
    raise StructureDomainError("dilation below 1e-18 without meeting the bound")


def _affine_image(J: StructureField, chart: AffineChart) -> StructureField:
    """Direct image structure J'(u) = Lambda J(p + delta Lambda^{-1} u) Lambda^{-1}."""
    n = J.n
    Li = np.linalg.inv(chart.Lambda)
    coords = []
    for i in range(2 * n):
        f = PolyField.constant(2 * n, chart.p[i])
        for jdx in range(2 * n):
            if Li[i, jdx] != 0.0:
                f = f + PolyField.coordinate(2 * n, jdx) * (chart.delta * Li[i, jdx])
        coords.append(f)
    Cnew = J.C.subs(coords).rmatmul_const(Li)
    return StructureField(n, J.lam, Cnew, kind="affine_image",
                          meta={"base": J, "chart": chart})


def pullback_structure(phi: PolynomialMap, lam: float | None = None) -> StructureField:
    """J = dPhi^{-1} J0 dPhi, making Phi a (J, J0)-biholomorphism of the ball."""
    return StructureField.pullback(phi, lam)


# --------------------------------------------------------------------------- #
# hypersurfaces and Levi forms
# --------------------------------------------------------------------------- #

@dataclass
class HypersurfaceDef:
    """Defining function r with gradient/Hessian evaluators; r < 0 inside."""

    value: callable
    gradient: callable
    hessian: callable = None
    name: str = "hypersurface"

    @classmethod
    def unit_sphere(cls, n: int) -> "HypersurfaceDef":
        def val(x):
            x = np.asarray(x, dtype=float)
            return (x * x).sum(axis=-1) - 1.0

        def grad(x):
            return 2.0 * np.asarray(x, dtype=float)

        def hess(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(2.0 * np.eye(2 * n), x.shape[:-1] + (2 * n, 2 * n))

        return cls(val, grad, hess, name="unit_sphere")

    @classmethod
    def quadric(cls, base: np.ndarray, grad0: np.ndarray, hess0: np.ndarray,
                name: str = "quadric") -> "HypersurfaceDef":
        base = np.asarray(base, dtype=float)
        grad0 = np.asarray(grad0, dtype=float)
        hess0 = np.asarray(hess0, dtype=float)

        def val(x):
            d = np.asarray(x, dtype=float) - base
            return d @ grad0 + 0.5 * np.einsum("...i,ij,...j->...", d, hess0, d)

        def grad(x):
            d = np.asarray(x, dtype=float) - base
            return grad0 + d @ hess0.T

        def hess(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(hess0, x.shape[:-1] + hess0.shape)

        return cls(val, grad, hess, name=name)

    def grad_norm_positive(self, samples, tol: float = 1e-10) -> bool:
        g = self.gradient(samples)
        return bool(np.linalg.norm(g, axis=-1).min() > tol)


def _h_projection(J: StructureField, gamma: HypersurfaceDef, q):
    """Orthogonal projector onto H^J_q(Gamma) = ker dr ∩ ker(dr o J)."""
    g = gamma.gradient(q)
    gn = np.linalg.norm(g)
    if gn < 1e-12:
        raise StructureDomainError("vanishing gradient: degenerate point on Gamma")
    Jq = J.J(q)
    n1 = g / gn
    w = Jq.T @ g
    w = w - (w @ n1) * n1
    wn = np.linalg.norm(w)
    if wn < 1e-12:
        raise StructureDomainError("degenerate J-tangency: extension failed")
    n2 = w / wn
    return np.eye(len(g)) - np.outer(n1, n1) - np.outer(n2, n2)


def levi_form(J: StructureField, gamma: HypersurfaceDef, p, X,
              step: float | None = None) -> float:
    """Levi form of Gamma at p in direction X in H^J_p(Gamma).

    Computed as (1/4) dr(J [Xt, J Xt])(p) with Xt the projection-based local
    extension of X to a section of H^J(Gamma); finite-difference brackets with
    one Richardson level.  Calibrated so the unit sphere with r = |z|^2 - 1
    gives |X|^2 (value 1 on unit vectors).
    """
    p = np.asarray(p, dtype=float)
    X = np.asarray(X, dtype=float)
    step = defaults.LEVI_FD_STEP if step is None else step
    g = gamma.gradient(p)
    Jp = J.J(p)
    scale = max(np.linalg.norm(X), 1e-30) * np.linalg.norm(g)
    if abs(g @ X) > 1e-10 * scale or abs(g @ (Jp @ X)) > 1e-10 * scale:
        raise StructureDomainError("X is not in the J-holomorphic tangent space at p")

    def xt(q):
        try:
            return _h_projection(J, gamma, q) @ X
        except (ZeroDivisionError, FloatingPointError) as exc:
            raise StructureDomainError("extension failed near a degenerate point") from exc

    def jxt(q):
        return J.J(q) @ xt(q)

    def bracket(h):
        xp = xt(p)
        jp = jxt(p)
        d_jx = (jxt(p + h * xp) - jxt(p - h * xp)) / (2 * h)
        d_x = (xt(p + h * jp) - xt(p - h * jp)) / (2 * h)
        return d_jx - d_x

    b = (4.0 * bracket(step / 2) - bracket(step)) / 3.0
    return float(0.25 * (g @ (Jp @ b)))


# --------------------------------------------------------------------------- #
# test-structure generators
# --------------------------------------------------------------------------- #

def _anticommuting_projection(P: PolyField, n: int) -> PolyField:
    """(P + J0 P J0)/2: the part anticommuting with J0."""
    J0m = j0(n)
    return (P.lmatmul_const(J0m).rmatmul_const(J0m) + P) * 0.5


def make_deviation_structure(n: int, lam: float, seed: int = 0,
                             degree: int = 4) -> StructureField:
    """Random polynomial deviation structure (generally non-integrable)."""
    rng = np.random.default_rng(seed)
    D = PolyField(2 * n)
    for total in range(0, degree + 1):
        for alpha in _exponents(2 * n, total):
            if total == 0:
                continue  # keep J(0) = J0
            coeff = rng.standard_normal((2 * n, 2 * n)) * (0.5 ** total)
            D = D + PolyField(2 * n, {alpha: coeff})
    D = _anticommuting_projection(D, n).prune(0.0)
    # unit-normalize the deviation on the ball so lam is the deformation size
    grid = ball_grid(n)
    sup = np.linalg.norm(D(grid), ord=2, axis=(-2, -1)).max()
    D = D * (1.0 / sup)
    return StructureField.from_deviation(n, lam, D)


def _exponents(nvars: int, total: int):
    if nvars == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _exponents(nvars - 1, total - head):
            yield (head,) + rest


def make_flow_diffeo(n: int, lam: float, seed: int = 0) -> PolynomialMap:
    """Ball-preserving non-holomorphic polynomial diffeomorphism.

    Phi(x) = x + lam (1 - |x|^2) V(x) with V(0) = 0, dV(0) = 0: the Euler step
    of a sphere-tangent flow.  Fixes the sphere pointwise, Phi(0) = 0 and
    dPhi(0) = I, so pullback Riemann maps compare against Phi directly.
    """
    rng = np.random.default_rng(seed)
    m = 2 * n
    V = PolyField(m)
    for total in (2, 3):
        for alpha in _exponents(m, total):
            coeff = rng.standard_normal(m) * (0.6 ** total)
            V = V + PolyField(m, {alpha: coeff})
    # normalize V on the ball
    grid = ball_grid(n)
    sup = np.linalg.norm(V(grid), axis=-1).max()
    V = V * (1.0 / sup)
    rsq = PolyField(m)
    for i in range(m):
        rsq = rsq + PolyField.coordinate(m, i) * PolyField.coordinate(m, i)
    one_minus = PolyField.constant(m, 1.0) - rsq
    identity = PolyField(m)
    for i in range(m):
        e = np.zeros(m)
        e[i] = 1.0
        alpha = [0] * m
        alpha[i] = 1
        identity = identity + PolyField(m, {tuple(alpha): e})
    phi = identity + (one_minus * V) * lam
    return PolynomialMap(phi.prune(0.0), n)


def make_pullback_structure(n: int, lam: float, seed: int = 0) -> StructureField:
    phi = make_flow_diffeo(n, lam, seed)
    S = StructureField.pullback(phi, lam)
    S.meta["generator"] = seed
    return S
