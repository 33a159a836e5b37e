"""Nonlinear solver for the boundary problem: stationary discs by Beltrami
interior extension, outer quasi-Newton on the boundary condition, and
continuation in the deformation parameter.

Unknowns are the analytic parts (h1, h2) of the pair (f, g) plus the scale
rho of the tangent vector v = rho * u on the indicatrix (and, for the
through-point solve, a direction chart and the radius r).  Each Newton step
solves the linearized boundary problem 2 Re[G (dh1, dh2)] = -residual by
collocation and selects the unique update in the affine solution set through
the normalization constraints

    f(0) = 0,   f_x(0) = rho u,   Re<g(0), g_seed(0)> = |g_seed(0)|^2,

plus f(r) = z for the through-point system.  The interior equations are
enforced by fixed-point extensions: f solves the base Beltrami equation with
analytic part h1, and g the linear fiber equation with analytic part h2.

Continuation walks structure.homotopy(s), s in [0, 1], in effective-lambda
steps of `lambda_step`, halving on Newton failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import defaults
from ._realcomplex import to_complex, to_real
from .errors import (ContinuationStallError, IndexChangeError,
                     NewtonFailureError, NonContractionError,
                     NormalizationError)
from .fibration import FibrationSystem, matrix_B, matrix_K
from .loop_algebra import DiscFunction, FourierLoop, cauchy_solve, disc_grid
from .riemann_hilbert import LinearRHProblem, partial_indices, solve_linear_rh
from .structures import (DiscComposedStructure, ProlongationTensor,
                         StructureField, apply_pair)

__all__ = [
    "StationaryDiscSolution",
    "SolveOptions",
    "beltrami_extend",
    "fiber_extend",
    "solve_bp",
    "circle_rotate",
    "solve_disc_through_point",
    "evaluate_residuals",
]


@dataclass
class SolveOptions:
    M: int = defaults.M_DEFAULT
    lambda_step: float = defaults.LAMBDA_STEP
    lambda_min_step: float = defaults.LAMBDA_MIN_STEP
    boundary_tol: float = defaults.BOUNDARY_TOL
    update_tol: float = defaults.UPDATE_TOL
    newton_maxit: int = defaults.NEWTON_MAXIT
    check_indices: bool = True
    grid: int | None = None

    @property
    def caps(self) -> tuple[int, int]:
        return (self.M + defaults.WORK_ZDEG_MARGIN, defaults.WORK_ZBARDEG)

    def boundary_grid(self) -> int:
        return self.grid or defaults.grid_size(self.M)


@dataclass
class StationaryDiscSolution:
    """A solved disc pair with its lift data and residual diagnostics."""

    f: DiscFunction
    g: DiscFunction
    v: np.ndarray                     # df(0)(d/dx) as a real 2n-vector
    lam: float
    residuals: dict
    normalization: dict
    n: int
    structure: StructureField = dc_field(repr=False, default=None)
    fibration: FibrationSystem = dc_field(repr=False, default=None)

    @property
    def v_complex(self) -> np.ndarray:
        return to_complex(self.v, "z")

    def boundary_values(self, P: int):
        zeta = np.exp(2j * np.pi * np.arange(P) / P)
        return self.f.eval(zeta), self.g.eval(zeta), zeta

    def analytic_parts(self):
        return self.f.analytic_part(), self.g.analytic_part()

    def tangent_at_origin(self) -> np.ndarray:
        fx0 = self.f.coeffs[:, 1, 0].copy()
        if self.f.zbardeg >= 1:
            fx0 += self.f.coeffs[:, 0, 1]
        return to_real(fx0, "z")

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "lambda": self.lam,
            "v": [float(x) for x in self.v],
            "f_coeffs": self.f.to_json(),
            "g_coeffs": self.g.to_json(),
            "residuals": {k: float(val) for k, val in self.residuals.items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "StationaryDiscSolution":
        f = DiscFunction.from_json(obj["f_coeffs"])
        g = DiscFunction.from_json(obj["g_coeffs"])
        return cls(f=f, g=g, v=np.asarray(obj["v"], dtype=float),
                   lam=float(obj["lambda"]), residuals=dict(obj["residuals"]),
                   normalization={}, n=int(obj["n"]))


# --------------------------------------------------------------------------- #
# interior extensions
# --------------------------------------------------------------------------- #

def _fx_real(f: DiscFunction, caps) -> DiscFunction:
    """x-derivative of f as a real-representative (2n,) disc function."""
    fx = (f.dz() + f.dbar()).truncate(*caps)
    re = (0.5 * (fx + fx.conj())).truncate(*caps)
    im = (-0.5j * (fx - fx.conj())).truncate(*caps)
    A, B = caps
    return DiscFunction(np.concatenate([re.pad(A, B).coeffs, im.pad(A, B).coeffs], axis=0))


def _beltrami_inner(h, f, E1V, F1V, grid, caps, tol, maxit):
    """Fixed point with frozen coefficients; returns (f, rates)."""
    rates = []
    for _ in range(maxit):
        fz = f.dz().truncate(*caps)
        FZ = grid.values(fz)
        rhsV = np.einsum("ijst,jst->ist", E1V, FZ) + \
            np.einsum("ijst,jst->ist", F1V, grid.flip_conj(FZ))
        rhs = grid.coeffs(rhsV, (caps[0], caps[1] - 1))
        f_new = (h - cauchy_solve(rhs, caps[0], caps[1])).truncate(*caps)
        delta = float(np.abs((f_new - f).coeffs).max())
        scale = max(float(np.abs(f.coeffs).max()), 1e-30)
        rates.append(delta / scale)
        f = f_new
        if delta <= tol * scale:
            return f, rates
    raise NonContractionError(
        f"inner Beltrami iteration stalled (last rate {rates[-1]:.2e})")


def beltrami_extend(h: DiscFunction, J: StructureField,
                    caps: tuple[int, int] | None = None,
                    tol: float = defaults.FIXPOINT_TOL,
                    maxit: int = defaults.FIXPOINT_MAXIT,
                    outer: int = 10, f0: DiscFunction | None = None,
                    frozen: "DiscComposedStructure | None" = None):
    """Fixed point of f = h - cauchy_solve(Q(f) df) for analytic part h.

    Returns (f, composed-structure, diagnostics).  The Beltrami coefficient
    is recomposed per outer sweep on the torus grid; the frozen inner
    iteration is a contraction of factor O(lambda).  With `frozen` given,
    a single inner pass runs against those stale coefficients (inexact
    Newton mode) and no recomposition happens here.
    """
    if not h.is_analytic(0.0):
        raise ValueError("beltrami_extend expects an analytic seed")
    caps = caps or (h.zdeg + defaults.WORK_ZDEG_MARGIN, defaults.WORK_ZBARDEG)
    if J.kind == "standard":
        return h, None, {"contraction": 0.0, "outer_sweeps": 0}
    f = (f0 if f0 is not None else h).truncate(*caps)
    if frozen is not None:
        E1V, F1V = frozen.q1_values()
        f, rates = _beltrami_inner(h, f, E1V, F1V, frozen.grid, caps, tol, maxit)
        contraction = rates[1] / rates[0] if len(rates) >= 2 and rates[0] > 1e-14 else 0.0
        return f, frozen, {"contraction": contraction, "outer_sweeps": 0}
    contraction = 0.0
    sweep = 0
    comp = None
    for sweep in range(outer):
        comp = J.along_disc(f, caps)
        E1V, F1V = comp.q1_values()
        prev_outer = f
        f, rates = _beltrami_inner(h, f, E1V, F1V, comp.grid, caps, tol, maxit)
        if len(rates) >= 2 and rates[0] > 1e-14:
            contraction = max(contraction, rates[1] / rates[0])
            if rates[1] > 0.95 * rates[0] and rates[0] > 0.5:
                raise NonContractionError(
                    f"no contraction (observed factor {rates[1] / rates[0]:.2f}); "
                    "deformation too large")
        outer_delta = float(np.abs((f - prev_outer).coeffs).max())
        if outer_delta <= tol * max(float(np.abs(f.coeffs).max()), 1e-30):
            # Q1(f_final) differs from the sweep's frozen Q1 by O(lam * delta):
            # far below tolerance, so the last composition is reused as-is.
            break
    else:
        raise NonContractionError("outer Beltrami sweeps did not settle")
    return f, comp, {"contraction": contraction, "outer_sweeps": sweep + 1}


def _y_components(g: DiscFunction, caps) -> DiscFunction:
    """Real fiber coordinates of g in t-convention, stacked (2n,):
    y = (Re g, -Im g)."""
    gc = g.conj()
    L = max(g.zdeg, gc.zdeg)
    Lb = max(g.zbardeg, gc.zbardeg)
    gp = g.pad(L, Lb).coeffs
    gcp = gc.pad(L, Lb).coeffs
    ys = np.concatenate([0.5 * (gp + gcp), 0.5j * (gp - gcp)], axis=0)
    return DiscFunction(ys).truncate(*caps)


def fiber_extend(h2: DiscFunction, comp: DiscComposedStructure | None,
                 caps: tuple[int, int],
                 tol: float = defaults.FIXPOINT_TOL,
                 maxit: int = defaults.FIXPOINT_MAXIT) -> DiscFunction:
    """Solve the linear fiber equation with analytic part h2 over a fixed base."""
    if comp is None:  # standard structure: g = h2
        return h2
    grid = comp.grid
    E2V, F2V = comp.q2_values()
    mkV = comp.mk_values(comp.fx_values_real(comp.f))     # (2n_k, n, G, G)
    n = comp.field.n
    g = h2.truncate(*caps)
    for _ in range(maxit):
        gz = g.dz().truncate(*caps)
        GZ = grid.values(gz)
        GV = grid.values(g)
        # t-side real coordinates: y = (Re g, -Im g)
        ys = [grid.real_part(GV[j]) for j in range(n)]
        ys += [-grid.imag_part(GV[j]) for j in range(n)]
        yV = np.stack(ys, axis=0)                          # (2n, G, G)
        rhsV = np.einsum("ijst,jst->ist", E2V, GZ) + \
            np.einsum("ijst,jst->ist", F2V, grid.flip_conj(GZ)) + \
            np.einsum("kist,kst->ist", mkV, yV)
        rhs = grid.coeffs(rhsV, (caps[0], caps[1] - 1))
        g_new = (h2 - cauchy_solve(rhs, caps[0], caps[1])).truncate(*caps)
        delta = float(np.abs((g_new - g).coeffs).max())
        g = g_new
        if delta <= tol * max(float(np.abs(g.coeffs).max()), 1e-30):
            return g
    raise NonContractionError("fiber extension did not converge")


def _zero_order_term(g: DiscFunction, mks: DiscFunction, caps) -> DiscFunction:
    """sum_k y_k(g) m_k with y the real fiber coordinates of g."""
    from scipy.signal import fftconvolve
    ys = _y_components(g, caps).trimmed(1e-17)
    out = fftconvolve(ys.coeffs[:, None], mks.coeffs, axes=(-2, -1)).sum(axis=0)
    return DiscFunction(out).truncate(*caps)


# --------------------------------------------------------------------------- #
# residual bundle
# --------------------------------------------------------------------------- #

def evaluate_residuals(f: DiscFunction, g: DiscFunction, lam: float,
                       F: FibrationSystem, structure: StructureField,
                       comp: DiscComposedStructure | None,
                       P: int, caps, grid_m: int = 32) -> dict:
    """Boundary, interior-PDE, real-form and lifted-tensor residuals."""
    zeta = np.exp(2j * np.pi * np.arange(P) / P)
    zb, wb = f.eval(zeta), g.eval(zeta)
    boundary = float(np.abs(F.residual(zb, wb, zeta, lam)).max())

    pts = disc_grid(grid_m)
    fv = f.eval(pts).T                      # (G, n)
    fx = (f.dz() + f.dbar()).eval(pts).T
    fy = (1j * (f.dz() - f.dbar())).eval(pts).T
    gx = (g.dz() + g.dbar()).eval(pts).T
    gy = (1j * (g.dz() - g.dbar())).eval(pts).T
    X = to_real(fv, "z")
    J = structure.J(X)
    rf = to_real(fy, "z") - np.einsum("pij,pj->pi", J, to_real(fx, "z"))
    real_form = float(np.abs(rf).max())

    # lifted-tensor column residual: g_y = L(x, y) f_x + B(x) g_x
    T = ProlongationTensor(structure)
    Yg = to_real(g.eval(pts).T, "t")
    Lm = T.lower_left(X, Yg)
    Bm = T.fiber_matrix(X)
    fib = to_real(gy, "t") - np.einsum("pij,pj->pi", Lm, to_real(fx, "z")) \
        - np.einsum("pij,pj->pi", Bm, to_real(gx, "t"))
    lifted = max(real_form, float(np.abs(fib).max()))

    if comp is None:
        interior_f = float(np.abs(f.dbar().coeffs).max()) if f.zbardeg else 0.0
        interior_g = float(np.abs(g.dbar().coeffs).max()) if g.zbardeg else 0.0
    else:
        E1, F1 = comp.q1_pair()
        res_f = f.dbar() + apply_pair(E1, F1, f.dz().truncate(*caps), caps)
        interior_f = res_f.sup_norm(grid_m)
        E2, F2 = comp.q2_pair()
        mks = comp.q3_pieces(_fx_real(f, caps))
        res_g = g.dbar() + apply_pair(E2, F2, g.dz().truncate(*caps), caps) + \
            _zero_order_term(g, mks, caps)
        interior_g = res_g.sup_norm(grid_m)

    return {
        "boundary": boundary,
        "interior_f": interior_f,
        "interior_g": interior_g,
        "real_form": real_form,
        "lifted_tensor": lifted,
    }


# --------------------------------------------------------------------------- #
# Newton core
# --------------------------------------------------------------------------- #

def _seed_state(u: np.ndarray, M: int, n: int):
    """lambda = 0 canonical disc along direction u: f = zeta u, g = conj(u)."""
    uc = to_complex(u, "z")
    h1 = np.zeros((n, M + 1), dtype=complex)
    h1[:, 1] = uc
    h2 = np.zeros((n, M + 1), dtype=complex)
    h2[:, 0] = np.conj(uc)
    return {"h1": h1, "h2": h2, "rho": 1.0, "u": u.copy()}


def _extend_pair(structure: StructureField, state, opts: SolveOptions,
                 f_warm: DiscFunction | None = None):
    caps = opts.caps
    hf = DiscFunction.from_analytic(state["h1"])
    hg = DiscFunction.from_analytic(state["h2"])
    f, comp, _ = beltrami_extend(hf, structure, caps, f0=f_warm)
    g = fiber_extend(hg, comp, caps)
    return f, g, comp


def _linearized_system(F: FibrationSystem, f, g, lam, opts: SolveOptions):
    P = opts.boundary_grid()
    zeta = np.exp(2j * np.pi * np.arange(P) / P)
    zb, wb = f.eval(zeta), g.eval(zeta)
    R = F.residual(zb, wb, zeta, lam)                        # (N, P)
    Gz = F.grad_z(zb, wb, zeta, lam)
    Gw = F.grad_w(zb, wb, zeta, lam)
    Gp = np.concatenate([Gz, Gw], axis=1)                    # (N, N, P)
    modes = P // 2 - 1
    Gl = FourierLoop.from_samples(Gp, modes).trimmed(1e-13)
    rl = FourierLoop.from_samples(-R.astype(complex), modes).trimmed(1e-13)
    rl = FourierLoop(0.5 * (rl.coeffs + np.conj(rl.coeffs[..., ::-1])))
    sol = solve_linear_rh(LinearRHProblem(Gl, rl, truncation=opts.M), grid=P)
    return sol, float(np.abs(R).max())


def _sphere_frame(u: np.ndarray) -> np.ndarray:
    """Orthonormal frame of the tangent space of S^{2n-1} at u, (2n, 2n-1)."""
    m = len(u)
    mat = np.concatenate([u[:, None], np.eye(m)], axis=1)
    q, _ = np.linalg.qr(mat)
    return q[:, 1:m]


def _current_jet(f: DiscFunction, g: DiscFunction):
    f0 = f.coeffs[:, 0, 0]
    fx0 = f.coeffs[:, 1, 0].copy()
    if f.zbardeg >= 1:
        fx0 += f.coeffs[:, 0, 1]
    g0 = g.coeffs[:, 0, 0]
    return f0, fx0, g0


def _constraint_violation(f, g, state, pin, through):
    f0, fx0, g0 = _current_jet(f, g)
    u_c = to_complex(state["u"], "z")
    viol = max(float(np.abs(f0).max()),
               float(np.abs(fx0 - state["rho"] * u_c).max()),
               abs(float(np.real(np.vdot(pin, g0)) - np.vdot(pin, pin).real)))
    if through is not None:
        fr = f.eval(np.array([state["r"]]))[:, 0]
        viol = max(viol, float(np.abs(fr - through["z_c"]).max()))
    return viol


def _newton(F: FibrationSystem, structure: StructureField, lam: float,
            state: dict, opts: SolveOptions, pin,
            through: dict | None = None):
    """Quasi-Newton loop at fixed lambda; mutates a copy of state."""
    n = structure.n
    state = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in state.items()}
    state["u"] = state["u"] / np.linalg.norm(state["u"])
    last_update = np.inf
    bres = np.inf
    f = None
    for _ in range(opts.newton_maxit):
        f, g, comp = _extend_pair(structure, state, opts, f_warm=f)
        sol, bres = _linearized_system(F, f, g, lam, opts)
        cviol = _constraint_violation(f, g, state, pin, through)
        if max(bres, cviol) <= opts.boundary_tol and last_update <= opts.update_tol:
            return state, f, g, comp, bres
        delta = sol.particular.coeffs[..., 0]           # (N, M+1) analytic
        kernel = sol.kernel
        kdim = len(kernel)
        u_c = to_complex(state["u"], "z")
        frame = _sphere_frame(state["u"]) if through is not None else None

        ncols = kdim + 1 + (0 if through is None else (2 * n - 1) + 1)
        rows, rhs = [], []

        def kmat(sel_row, sel_col):
            if kdim == 0:
                return np.zeros((n, 0), complex)
            return np.stack([k.coeffs[sel_row, sel_col, 0] for k in kernel], axis=1)

        h10_k = kmat(slice(0, n), 0)
        h1p_k = kmat(slice(0, n), 1)
        h20_k = kmat(slice(n, 2 * n), 0)
        f0, fx0, g0 = _current_jet(f, g)
        f0 = f0 + delta[:n, 0]
        fx0 = fx0 + delta[:n, 1]
        g0 = g0 + delta[n:, 0]

        def add_complex(row, val):
            rows.append(row.real.copy())
            rhs.append(val.real)
            rows.append(row.imag.copy())
            rhs.append(val.imag)

        for j in range(n):                               # f(0) = 0
            row = np.zeros(ncols, complex)
            row[:kdim] = h10_k[j]
            add_complex(row, -f0[j])
        for j in range(n):                               # f_x(0) = rho u
            row = np.zeros(ncols, complex)
            row[:kdim] = h1p_k[j]
            row[kdim] = -u_c[j]
            if through is not None:
                frame_c = to_complex(frame.T, "z").T      # (n, 2n-1)
                row[kdim + 1: kdim + 2 * n] = -state["rho"] * frame_c[j]
            add_complex(row, state["rho"] * u_c[j] - fx0[j])
        row = np.zeros(ncols, complex)                   # fiber pin
        row[:kdim] = np.conj(pin) @ h20_k
        rows.append(row.real)
        rhs.append(float(np.vdot(pin, pin).real - np.real(np.conj(pin) @ g0)))
        if through is not None:                          # f(r) = z
            r = state["r"]
            rarr = np.array([r])
            fr = f.eval(rarr)[:, 0] + \
                np.polynomial.polynomial.polyval(r, np.moveaxis(delta[:n], -1, 0))
            fx_at_r = (f.dz() + f.dbar()).eval(rarr)[:, 0]
            kr = np.stack([k.eval(rarr)[:n, 0] for k in kernel], axis=1) \
                if kdim else np.zeros((n, 0), complex)
            for j in range(n):
                row = np.zeros(ncols, complex)
                row[:kdim] = kr[j]
                row[-1] = fx_at_r[j]
                add_complex(row, through["z_c"][j] - fr[j])

        A = np.asarray(rows, dtype=float)
        b = np.asarray(rhs, dtype=float)
        coef, _, _, sv = np.linalg.lstsq(A, b, rcond=None)
        if sv[0] <= 0 or sv[-1] / sv[0] < 1e-12:
            raise NormalizationError(
                "normalization constraints fail to cut the kernel transversally "
                f"(cond {sv[0] / max(sv[-1], 1e-300):.2e})")

        upd = DiscFunction.from_analytic(delta)
        for rdx in range(kdim):
            upd = upd + coef[rdx] * kernel[rdx]
        upd_c = upd.coeffs[..., 0]
        state["h1"] = state["h1"] + upd_c[:n]
        state["h2"] = state["h2"] + upd_c[n:]
        state["rho"] = float(state["rho"] + coef[kdim])
        last_update = float(np.abs(upd_c).max()) + abs(coef[kdim])
        if through is not None:
            ds = coef[kdim + 1: kdim + 2 * n]
            unew = state["u"] + frame @ ds
            state["u"] = unew / np.linalg.norm(unew)
            state["r"] = float(state["r"] + coef[-1])
            last_update += float(np.abs(ds).max(initial=0.0)) + abs(coef[-1])
            if not (0.0 < state["r"] < 1.0):
                raise NewtonFailureError(f"radius left (0,1): r = {state['r']:.4f}")
        if not np.isfinite(last_update):
            raise NewtonFailureError("non-finite Newton update")
    raise NewtonFailureError(
        f"Newton did not converge in {opts.newton_maxit} iterations "
        f"(boundary residual {bres:.3e}, last update {last_update:.3e})")


def _check_indices_along(F, f, g, lam, opts: SolveOptions):
    P = opts.boundary_grid()
    zeta = np.exp(2j * np.pi * np.arange(P) / P)
    zb, wb = f.eval(zeta), g.eval(zeta)
    K = matrix_K(F, zb, wb, zeta, lam)
    rep = partial_indices(matrix_B(K), probe_degree=24)
    if min(rep.partial_indices) < -1:
        raise IndexChangeError(
            f"partial index below -1 along the path: {rep.partial_indices}")
    return rep


def _continue_in_lambda(F, structure, lam_target, state, pin, opts: SolveOptions,
                        through=None, s_start: float = 0.0):
    """Walk structure.homotopy(s) from s_start to 1 in lambda-sized steps."""
    if structure.kind == "standard" or lam_target == 0.0:
        new_state, f, g, comp, _ = _newton(F, StructureField.standard(structure.n),
                                           0.0, state, opts, pin, through=through)
        return new_state, f, g, comp
    s = s_start
    step_s = opts.lambda_step / abs(lam_target)
    min_step_s = opts.lambda_min_step / abs(lam_target)
    while s < 1.0:
        s_next = min(s + step_s, 1.0)
        S = structure.homotopy(s_next)
        try:
            new_state, f, g, comp, _ = _newton(F, S, s_next * lam_target, state,
                                               opts, pin, through=through)
        except (NewtonFailureError, NonContractionError) as exc:
            step_s *= 0.5
            if step_s < min_step_s:
                raise ContinuationStallError(
                    f"minimum lambda step reached at s={s:.4f}: {exc}") from exc
            continue
        state = new_state
        s = s_next
        if opts.check_indices:
            _check_indices_along(F, f, g, s * lam_target, opts)
    return state, f, g, comp


# --------------------------------------------------------------------------- #
# public solves
# --------------------------------------------------------------------------- #

def solve_bp(F: FibrationSystem, T: ProlongationTensor, lam: float,
             direction=None, seed: StationaryDiscSolution | None = None,
             opts: SolveOptions | None = None) -> StationaryDiscSolution:
    """Canonical disc at deformation lam with tangent direction `direction`.

    Continuation in lambda from the exact lambda = 0 disc (or, when a seed at
    the target lambda is given, a warm-started Newton solve).
    """
    opts = opts or SolveOptions()
    structure = T.structure
    n = structure.n
    if seed is not None:
        state, pin = _state_from_seed(seed, opts)
        if seed.lam == lam:
            new_state, f, g, comp, _ = _newton(F, structure, lam, state, opts, pin)
            if opts.check_indices:
                _check_indices_along(F, f, g, lam, opts)
            return _package(new_state, f, g, comp, F, structure, lam, opts, pin)
        s_start = seed.lam / lam if lam else 0.0
        state, f, g, comp = _continue_in_lambda(F, structure, lam, state, pin,
                                                opts, s_start=s_start)
        return _package(state, f, g, comp, F, structure, lam, opts, pin)
    if direction is None:
        raise ValueError("either a direction or a seed solution is required")
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    state = _seed_state(u, opts.M, n)
    pin = np.conj(to_complex(u, "z"))
    state, f, g, comp = _continue_in_lambda(F, structure, lam, state, pin, opts)
    return _package(state, f, g, comp, F, structure, lam, opts, pin)


def _state_from_seed(seed: StationaryDiscSolution, opts: SolveOptions):
    h1f, h2f = seed.analytic_parts()
    state = {
        "h1": _resize_poly(h1f, opts.M),
        "h2": _resize_poly(h2f, opts.M),
        "rho": float(np.linalg.norm(seed.v)),
        "u": seed.v / np.linalg.norm(seed.v),
    }
    pin = np.asarray(seed.normalization.get(
        "pin", np.conj(to_complex(state["u"], "z"))), dtype=complex)
    return state, pin


def _resize_poly(c: np.ndarray, M: int) -> np.ndarray:
    out = np.zeros((c.shape[0], M + 1), dtype=complex)
    m = min(M + 1, c.shape[1])
    out[:, :m] = c[:, :m]
    return out


def _package(state, f, g, comp, F, structure, lam, opts: SolveOptions, pin):
    n = structure.n
    res = evaluate_residuals(f, g, lam, F, structure, comp,
                             opts.boundary_grid(), opts.caps)
    f0, fx0, _ = _current_jet(f, g)
    v = to_real(fx0, "z")
    if float(np.abs(g.coeffs).max()) < 1e-12:
        raise NewtonFailureError("trivial lift: g vanished")
    norm = {"u": np.asarray(state["u"], dtype=float), "rho": float(state["rho"]),
            "pin": np.asarray(pin, dtype=complex), "M": opts.M}
    if "r" in state:
        norm["r"] = float(state["r"])
    return StationaryDiscSolution(
        f=f.trimmed(1e-16), g=g.trimmed(1e-16), v=v, lam=lam, residuals=res,
        normalization=norm, n=n, structure=structure, fibration=F)


def circle_rotate(sol: StationaryDiscSolution, theta: float) -> StationaryDiscSolution:
    """Exact rotation (f, g) -> (f(e^{i t} .), e^{-i t} g(e^{i t} .)).

    This is the conformal reparametrization of the meromorphic lift; the
    residuals of the rotated pair are re-evaluated honestly.
    """
    a = np.arange(sol.f.zdeg + 1)[:, None]
    b = np.arange(sol.f.zbardeg + 1)[None, :]
    f_new = DiscFunction(sol.f.coeffs * np.exp(1j * theta * (a - b)))
    a2 = np.arange(sol.g.zdeg + 1)[:, None]
    b2 = np.arange(sol.g.zbardeg + 1)[None, :]
    g_new = DiscFunction(sol.g.coeffs * np.exp(1j * theta * (a2 - b2)) *
                         np.exp(-1j * theta))
    v_new = to_real(np.exp(1j * theta) * sol.v_complex, "z")
    residuals = dict(sol.residuals)
    if sol.structure is not None and sol.fibration is not None:
        opts = SolveOptions(M=int(sol.normalization.get("M", defaults.M_DEFAULT)))
        comp = None
        if sol.structure.kind != "standard":
            comp = sol.structure.along_disc(f_new, opts.caps)
        residuals = evaluate_residuals(f_new, g_new, sol.lam, sol.fibration,
                                       sol.structure, comp,
                                       opts.boundary_grid(), opts.caps)
    norm = dict(sol.normalization)
    norm["rotated_by"] = float(theta)
    return StationaryDiscSolution(f=f_new, g=g_new, v=v_new, lam=sol.lam,
                                  residuals=residuals, normalization=norm,
                                  n=sol.n, structure=sol.structure,
                                  fibration=sol.fibration)


def solve_disc_through_point(F: FibrationSystem, T: ProlongationTensor,
                             lam: float, z,
                             seed: StationaryDiscSolution | None = None,
                             opts: SolveOptions | None = None):
    """The unique canonical disc through an interior point z != 0.

    Augmented Newton with unknowns (disc, direction chart, scale rho, radius
    r); seeded from the lambda = 0 answer v = z/|z|, r = |z| or warm-started
    from a nearby solved disc at the same lambda.  Returns (solution, v, r).
    """
    opts = opts or SolveOptions()
    structure = T.structure
    n = structure.n
    z_c = np.asarray(z, dtype=complex).reshape(n)
    znorm = float(np.linalg.norm(z_c))
    if not 0.0 < znorm < 1.0:
        raise ValueError("need 0 < |z| < 1 (the foliation is singular at 0)")
    if znorm < 1e-3:
        raise ValueError("z too close to the singular origin of the foliation")
    through = {"z_c": z_c}

    if seed is not None and seed.lam == lam:
        state, pin = _state_from_seed(seed, opts)
        state["r"] = float(seed.normalization.get("r", znorm))
        th = dict(through)
        new_state, f, g, comp, _ = _newton(F, structure, lam, state, opts, pin,
                                           through=th)
        if opts.check_indices:
            _check_indices_along(F, f, g, lam, opts)
        sol = _package(new_state, f, g, comp, F, structure, lam, opts, pin)
        return sol, sol.v, float(new_state["r"])

    u = to_real(z_c / znorm, "z")
    state = _seed_state(u, opts.M, n)
    state["r"] = znorm
    pin = np.conj(to_complex(u, "z"))
    state, f, g, comp = _continue_in_lambda(F, structure, lam, state, pin, opts,
                                            through=through)
    sol = _package(state, f, g, comp, F, structure, lam, opts, pin)
    return sol, sol.v, float(state["r"])
