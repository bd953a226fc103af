"""Modulation decomposition near the soliton family and derived functionals.

A state close to the family {+-(W_sigma(. - c), 0)} is written as
u = T^c S^sigma (s W_vec + v) with the residual v constrained by the
orthogonality conditions <v1 | Lambda_0 rho> = 0 and <v1 | grad rho> = 0,
which pin (sigma, c) through a damped Newton solve.  Mode amplitudes are
taken of the sign-adjusted residual w = s * v, so every derived quantity
is invariant under u -> -u:

    lambda_j = <w_j | rho>,   lambda_+- = sqrt(k/2) (lambda_1 +- lambda_2 / k),
    mu_j = <w_1 | d_j rho> / a_W,   alpha = <w_1 | Lambda_0 rho>,
    gamma = w - lambda_+ g+ - lambda_- g- - mu . grad W_vec.

The distance d_W to the family blends the raw manifold distance d_0 with
the energy-based d_1^2 = E - J(W) + k^2 lambda_1^2; the sign functional is
-sign(lambda_1) in the inner region and sign(K) outside, with the two
rules asserted to agree on the overlap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import Thresholds
from .fields import (Field3D, RadialField, State, eval_W, eval_W_dr,
                     nonlinearity_power, sobolev_exponent)
from .functionals import (energy_E, functional_J, functional_K,
                          h1_seminorm_sq, l2_inner, l2_norm_sq,
                          norm_H, smooth_cutoff)
from .grids import Box3DGrid, RadialGrid
from .operators import _resample_box
from .spectral import SpectralData


class FitError(RuntimeError):
    """The modulation solve failed (outside the capture region)."""


class SignAmbiguityError(FitError):
    """Both manifold signs are comparably distant; the fit is rejected."""


class SignConsistencyError(RuntimeError):
    """Inner and outer sign rules disagree on the overlap region."""


class UndefinedRegionError(RuntimeError):
    """The sign functional is queried where neither rule applies."""


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

class ModulationFit:
    """Result of the modulation solve; the residual state v materializes
    lazily (resampling a 3-D state is far costlier than the solve)."""

    def __init__(self, sign_s: int, sigma: float, c: np.ndarray,
                 converged: bool, newton_iters: int,
                 orth_residual: float = math.nan, v_factory=None):
        self.sign_s = sign_s
        self.sigma = sigma
        self.c = c
        self.converged = converged
        self.newton_iters = newton_iters
        self.orth_residual = orth_residual
        self._v_factory = v_factory
        self._v: State | None = None

    @property
    def v(self) -> State | None:
        if self._v is None and self._v_factory is not None:
            self._v = self._v_factory()
        return self._v

    @property
    def is_radial(self) -> bool:
        return self.v is not None and self.v.representation == "radial"

    def __repr__(self):
        return (f"ModulationFit(sign_s={self.sign_s}, sigma={self.sigma:.6g}, "
                f"converged={self.converged}, iters={self.newton_iters})")


@dataclass
class ModeSplit:
    lambda_plus: float
    lambda_minus: float
    lambda1: float
    lambda2: float
    mu: np.ndarray
    alpha: float
    gamma: State

    def as_record(self) -> dict:
        return {"lambda_plus": self.lambda_plus, "lambda_minus": self.lambda_minus,
                "lambda1": self.lambda1, "lambda2": self.lambda2,
                "mu": list(np.atleast_1d(self.mu)), "alpha": self.alpha}


@dataclass
class DistanceReport:
    d0: float
    d1: float
    dW: float
    regime: str                 # inner | blend | outer
    fit: ModulationFit | None

    def as_record(self) -> dict:
        return {"d0": self.d0, "d1": self.d1, "dW": self.dW, "regime": self.regime}


# ---------------------------------------------------------------------------
# reference quantities per grid
# ---------------------------------------------------------------------------

class _GridRefs:
    """Cached same-grid reference values of the ground state."""

    _cache: dict = {}

    @classmethod
    def get(cls, spec: SpectralData, grid) -> dict:
        key = (id(spec), grid)
        hit = cls._cache.get(key)
        if hit is not None:
            return hit
        if isinstance(grid, RadialGrid):
            w = RadialField(grid, spec.W_on(grid))
            zeros = RadialField(grid, np.zeros(grid.n))
            refs = {
                "J_W": functional_J(w),
                "grad_W_sq": h1_seminorm_sq(w),
                "W_state": State(w, zeros),
                "rho_norm_sq": l2_norm_sq(RadialField(grid, spec.rho_on(grid))),
            }
        else:
            wvals = np.asarray(eval_W(3, grid.radius ** 2))
            w = Field3D(grid, wvals)
            zeros = Field3D(grid, np.zeros_like(wvals))
            rho = Field3D(grid, np.asarray(spec.rho_profile(grid.radius)))
            gw = w.gradient()
            refs = {
                "J_W": functional_J(w),
                "grad_W_sq": grid.quad(gw[0] ** 2 + gw[1] ** 2 + gw[2] ** 2),
                "W_state": State(w, zeros),
                "rho_norm_sq": grid.quad(rho.values ** 2),
                "mode_consts": None,
            }
        cls._cache[key] = refs
        return refs


def reference_J(spec: SpectralData, grid) -> float:
    """J(W) under the same grid quadrature as the state being analyzed."""
    return _GridRefs.get(spec, grid)["J_W"]


# ---------------------------------------------------------------------------
# transported-mode inner products
# ---------------------------------------------------------------------------

def _radial_mode_ip(spec: SpectralData, fld: RadialField, profile,
                    sigma: float) -> float:
    """<f | S_1^sigma phi> for a radial mode profile phi (adjoint transport)."""
    g = fld.grid
    amp = math.exp((g.d / 2.0 + 1.0) * sigma)
    vals = amp * np.asarray(profile(math.exp(sigma) * g.r))
    return g.quad_meas(fld.values * vals)


def _box_mode_fields(spec: SpectralData, grid: Box3DGrid, sigma: float,
                     c: np.ndarray, mesh=None) -> list[np.ndarray]:
    """[T^c S_1^sigma Lambda_0 rho, T^c S_1^sigma d_j rho] sampled on the box."""
    es = math.exp(sigma)
    amp = math.exp((3 / 2.0 + 1.0) * sigma)
    x, y, z = grid.meshgrid if mesh is None else mesh
    dx_, dy_, dz_ = x - c[0], y - c[1], z - c[2]
    rr = np.sqrt(dx_ ** 2 + dy_ ** 2 + dz_ ** 2)
    lam0 = amp * np.asarray(spec.lambda0_rho_profile(es * rr))
    slope = amp * es * np.asarray(spec.rho_dr_profile(es * rr)) / np.maximum(rr, 1e-300)
    return [lam0, slope * dx_, slope * dy_, slope * dz_]


# ---------------------------------------------------------------------------
# the modulation solve
# ---------------------------------------------------------------------------

def _choose_sign(spec: SpectralData, s: State, margin: float) -> int:
    """Manifold sign by the smaller coarse distance; error when ambiguous."""
    if s.representation == "radial":
        helper = _RadialDistance(spec, s)
        best = {sgn: min(helper.dist_sq(sgn, sig)
                         for sig in np.linspace(-1.5, 1.5, 13))
                for sgn in (+1, -1)}
    else:
        q = s.grid.quad
        wv = _GridRefs.get(spec, s.grid)["W_state"].u1.values
        uu = q(s.u1.values ** 2)
        ww = q(wv ** 2)
        cross = q(s.u1.values * wv)
        best = {sgn: uu - 2 * sgn * cross + ww for sgn in (+1, -1)}
    lo, hi = min(best.values()), max(best.values())
    if hi > 0 and (hi - lo) < margin * hi:
        raise SignAmbiguityError(
            f"both manifold signs comparably distant ({lo:.3e} vs {hi:.3e})")
    return +1 if best[+1] <= best[-1] else -1


def _w_sigma_field(grid: RadialGrid, sigma: float) -> np.ndarray:
    es = math.exp(sigma)
    amp = es ** (grid.d / 2.0 - 1.0)
    return amp * np.asarray(eval_W(grid.d, (es * grid.r) ** 2))


def _w_sigma_deriv(grid: RadialGrid, sigma: float) -> np.ndarray:
    es = math.exp(sigma)
    amp = es ** (grid.d / 2.0 - 1.0)
    return amp * es * np.asarray(eval_W_dr(grid.d, es * grid.r))


def _newton_loop(residual, h0: np.ndarray, x: np.ndarray, tol: float,
                 max_iters: int, f0=None):
    """Damped quasi-Newton with Broyden updates of the inverse Jacobian.

    h0 is the initial inverse Jacobian (the constant-Jacobian seed
    diag(-b_W, a_W, ..., a_W) inverted and signed).
    """
    h = h0.copy()
    f = residual(x) if f0 is None else f0
    res = float(np.linalg.norm(f))
    iters = 0
    while res > tol and iters < max_iters:
        dx_full = -h @ f
        lam = 1.0
        while lam > 1.0 / 64.0:
            x_new = x + lam * dx_full
            f_new = residual(x_new)
            res_new = float(np.linalg.norm(f_new))
            if res_new < res or res_new <= tol:
                break
            lam *= 0.5
        else:
            break
        dx = x_new - x
        df = f_new - f
        denom = float(dx @ (h @ df))
        if abs(denom) > 1e-14 * max(float(dx @ dx), 1e-300):
            h = h + np.outer(dx - h @ df, dx @ h) / denom
        x, f, res = x_new, f_new, res_new
        iters += 1
    return x, f, res, iters


def fit_modulation(s: State, spec: SpectralData,
                   thresholds: Thresholds | None = None,
                   sign_hint: int | None = None,
                   sigma0: float = 0.0) -> ModulationFit:
    """Solve the orthogonality conditions for (sign, sigma[, c]).

    Radial states pin c = 0 and solve for sigma only.  The quasi-Newton
    iteration starts from the constant Jacobian diag(-b_W, a_W, ..., a_W)
    (times the manifold sign) with step halving on residual increase;
    failure to converge signals a state outside the capture region.  The
    orthogonality target is relative to the residual size ||v||_H, so
    states close to the family are resolved proportionally better.
    """
    th = thresholds or Thresholds()
    if sign_hint is not None:
        sgn = sign_hint
    else:
        sgn = _choose_sign(spec, s, th.sign_ambiguity_margin)
    scale = norm_H(s)
    tol_coarse = th.tol_orth * max(scale, 1e-12)
    radial = s.representation == "radial"

    if radial:
        g = s.grid
        w_ip_lam0 = spec.W_inner_lambda0_rho(g)

        def residual(x):
            f = (_radial_mode_ip(spec, s.u1, spec.lambda0_rho_profile, x[0])
                 - sgn * w_ip_lam0)
            return np.array([f])

        h0 = np.array([[-float(sgn) / spec.b_W]])
        x = np.array([sigma0])
    else:
        g = s.grid
        refs = _GridRefs.get(spec, g)
        w_vals = refs["W_state"].u1.values
        # the mode integrands decay like e^(-k r): the cube corners beyond
        # the inscribed ball contribute below 1e-8 and are dropped, which
        # halves the cost of every residual evaluation
        if "ball_mask" not in refs:
            x3, y3, z3 = g.meshgrid
            mask = g.radius <= g.half_width
            refs["ball_where"] = mask
            refs["ball_mask"] = (x3[mask], y3[mask], z3[mask])
            refs["mode_consts"] = [
                float(np.sum(w_vals[mask] * m)) * g.cell_volume
                for m in _box_mode_fields(spec, g, 0.0, np.zeros(3),
                                          refs["ball_mask"])]
        mesh_b = refs["ball_mask"]
        consts = refs["mode_consts"]
        u1_b = s.u1.values[refs["ball_where"]]
        vol = g.cell_volume
        # coarse warm-start lattice: stride-2 subsampling (8x cheaper
        # residuals) gets (sigma, c) near the root before ball polishing
        stride = 2
        mesh_c = tuple(m[::stride, ::stride, ::stride] for m in g.meshgrid)
        u1_c = s.u1.values[::stride, ::stride, ::stride]
        vol_c = vol * stride ** 3
        w_c = w_vals[::stride, ::stride, ::stride]
        consts_c = [float(np.sum(w_c * m)) * vol_c for m in
                    _box_mode_fields(spec, g, 0.0, np.zeros(3), mesh_c)]

        def residual_coarse(x):
            modes = _box_mode_fields(spec, g, x[0], x[1:], mesh_c)
            return np.array([float(np.sum(u1_c * m)) * vol_c - sgn * c0
                             for m, c0 in zip(modes, consts_c)])

        def residual(x):
            modes = _box_mode_fields(spec, g, x[0], x[1:], mesh_b)
            return np.array([float(np.sum(u1_b * m)) * vol - sgn * c0
                             for m, c0 in zip(modes, consts)])

        h0 = np.diag([-float(sgn) / spec.b_W, float(sgn) / spec.a_W,
                      float(sgn) / spec.a_W, float(sgn) / spec.a_W])
        x = np.concatenate([[sigma0], np.zeros(3)])
        x, _, _, _ = _newton_loop(residual_coarse, h0, x, 1e-4, 12)

    x, f, res, iters = _newton_loop(residual, h0, x, tol_coarse,
                                    th.newton_max_iters)
    converged = res <= tol_coarse
    sigma = float(x[0])
    c = np.zeros(3) if radial else np.asarray(x[1:], dtype=float)
    if converged:
        # the orthogonality equations have spurious roots far from the
        # family; a root with a large residual state is not a capture
        v_norm = _residual_norm_estimate(s, spec, sgn, sigma, c)
        if v_norm > th.delta_A:
            converged = False
    if converged:
        # refine to the ||v||-relative orthogonality target; ||v|| equals
        # the distance to the fitted family member by unitarity of T^c S^sigma
        tol_fine = max(th.tol_orth * v_norm, 1e-13 * max(scale, 1.0))
        if res > tol_fine:
            x, f, res, it2 = _newton_loop(residual, h0, x, tol_fine,
                                          th.newton_max_iters, f0=f)
            iters += it2
            converged = res <= tol_fine
            sigma = float(x[0])
            c = np.zeros(3) if radial else np.asarray(x[1:], dtype=float)
    factory = None
    if converged:
        sig_f, c_f = sigma, c
        factory = lambda: _residual_state(s, spec, sgn, sig_f, c_f)
    return ModulationFit(sign_s=sgn, sigma=sigma, c=c,
                         converged=converged, newton_iters=iters,
                         orth_residual=res, v_factory=factory)


def _residual_norm_estimate(s: State, spec: SpectralData, sgn: int,
                            sigma: float, c: np.ndarray) -> float:
    """||v||_H = ||s - sgn W_vec_sigma(. - c)||_H without materializing v."""
    if s.representation == "radial":
        return math.sqrt(max(_RadialDistance(spec, s).dist_sq(sgn, sigma), 0.0))
    g = s.grid
    refs = _GridRefs.get(spec, g)
    if "grad_u_cache" not in refs or refs["grad_u_cache"][0] is not s.u1:
        refs["grad_u_cache"] = (s.u1, s.u1.gradient())
    gx, gy, gz = refs["grad_u_cache"][1]
    x, y, z = g.meshgrid
    es = math.exp(sigma)
    dx_, dy_, dz_ = x - c[0], y - c[1], z - c[2]
    rr = np.sqrt(dx_ ** 2 + dy_ ** 2 + dz_ ** 2)
    slope = (math.exp(sigma / 2.0) * es * np.asarray(eval_W_dr(3, es * rr))
             / np.maximum(rr, 1e-300))
    cross = g.quad(gx * slope * dx_ + gy * slope * dy_ + gz * slope * dz_)
    uu = g.quad(gx * gx + gy * gy + gz * gz) + g.quad(s.u2.values ** 2)
    return math.sqrt(max(uu - 2.0 * sgn * cross + refs["grad_W_sq"], 0.0))


def _residual_state(s: State, spec: SpectralData, sgn: int, sigma: float,
                    c: np.ndarray) -> State:
    """v = S^(-sigma) T^(-c) u - sgn W_vec."""
    if s.representation == "radial":
        g = s.grid
        w = spec.W_on(g)
        if abs(sigma) < 1e-14:
            v1 = s.u1.values - sgn * w
            v2 = s.u2.values.copy()
        else:
            es = math.exp(-sigma)
            p1 = s.u1.profile(parity=1, tail="power")
            p2 = s.u2.profile(parity=1, tail="power")
            v1 = (math.exp((g.d / 2.0 - 1.0) * -sigma) * np.asarray(p1(es * g.r))
                  - sgn * w)
            v2 = math.exp((g.d / 2.0) * -sigma) * np.asarray(p2(es * g.r))
        return State(RadialField(g, v1), RadialField(g, v2))
    g = s.grid
    es = math.exp(-sigma)
    refs = _GridRefs.get(spec, g)
    w = refs["W_state"].u1.values

    def pts(x, y, z):
        return (es * x + c[0], es * y + c[1], es * z + c[2])

    u1 = _resample_box(s.u1, pts).values * math.exp((3 / 2.0 - 1.0) * -sigma)
    u2 = _resample_box(s.u2, pts).values * math.exp((3 / 2.0) * -sigma)
    return State(Field3D(g, u1 - sgn * w), Field3D(g, u2))


def assemble_state(spec: SpectralData, sgn: int, sigma: float, c, v: State) -> State:
    """u = T^c S^sigma (sgn W_vec + v): the inverse of a converged fit."""
    c = np.asarray(c, dtype=float)
    if v.representation == "radial":
        if np.any(c != 0.0):
            raise ValueError("radial assembly requires c = 0")
        g = v.grid
        es = math.exp(sigma)
        p1 = v.u1.profile(parity=1, tail="power")
        p2 = v.u2.profile(parity=1, tail="power")
        u1 = (sgn * _w_sigma_field(g, sigma)
              + math.exp((g.d / 2.0 - 1.0) * sigma) * np.asarray(p1(es * g.r)))
        u2 = math.exp((g.d / 2.0) * sigma) * np.asarray(p2(es * g.r))
        return State(RadialField(g, u1), RadialField(g, u2))
    g = v.grid
    es = math.exp(sigma)

    def pts(x, y, z):
        return (es * (x - c[0]), es * (y - c[1]), es * (z - c[2]))

    x, y, z = g.meshgrid
    xs, ys, zs = pts(x, y, z)
    rr2 = xs * xs + ys * ys + zs * zs
    amp1 = math.exp((3 / 2.0 - 1.0) * sigma)
    w_part = sgn * amp1 * np.asarray(eval_W(3, rr2))
    u1 = w_part + amp1 * _resample_box(v.u1, pts).values
    u2 = math.exp((3 / 2.0) * sigma) * _resample_box(v.u2, pts).values
    return State(Field3D(g, u1), Field3D(g, u2))


# ---------------------------------------------------------------------------
# mode split and linearized norm
# ---------------------------------------------------------------------------

def split_modes(fit: ModulationFit, spec: SpectralData) -> ModeSplit:
    """Mode amplitudes of the sign-adjusted residual w = sign_s * v."""
    if not fit.converged or fit.v is None:
        raise FitError("cannot split an unconverged fit")
    w = fit.v * float(fit.sign_s)
    k = spec.k
    if w.representation == "radial":
        g = w.grid
        rho = RadialField(g, spec.rho_on(g))
        rho_sq = _GridRefs.get(spec, g)["rho_norm_sq"]
        lam1 = l2_inner(w.u1, rho) / rho_sq
        lam2 = l2_inner(w.u2, rho) / rho_sq
        mu = np.zeros(0)
        alpha = l2_inner(w.u1, RadialField(g, spec.lambda0_rho_on(g)))
        gamma = State(RadialField(g, w.u1.values - lam1 * rho.values),
                      RadialField(g, w.u2.values - lam2 * rho.values))
    else:
        g = w.grid
        q = g.quad
        rr = g.radius
        rho = np.asarray(spec.rho_profile(rr))
        rho_sq = _GridRefs.get(spec, g)["rho_norm_sq"]
        lam1 = q(w.u1.values * rho) / rho_sq
        lam2 = q(w.u2.values * rho) / rho_sq
        slope = np.asarray(spec.rho_dr_profile(rr)) / np.maximum(rr, 1e-300)
        x, y, z = g.meshgrid
        grads_rho = [slope * x, slope * y, slope * z]
        mu = np.array([q(w.u1.values * gr) for gr in grads_rho]) / spec.a_W
        alpha = q(w.u1.values * np.asarray(spec.lambda0_rho_profile(rr)))
        wslope = np.asarray(eval_W_dr(3, rr)) / np.maximum(rr, 1e-300)
        g1 = w.u1.values - lam1 * rho - (mu[0] * wslope * x + mu[1] * wslope * y
                                         + mu[2] * wslope * z)
        gamma = State(Field3D(g, g1), Field3D(g, w.u2.values - lam2 * rho))
    sk = math.sqrt(k / 2.0)
    return ModeSplit(lambda_plus=sk * (lam1 + lam2 / k),
                     lambda_minus=sk * (lam1 - lam2 / k),
                     lambda1=lam1, lambda2=lam2, mu=mu, alpha=float(alpha),
                     gamma=gamma)


def quadratic_form_L(spec: SpectralData, fld) -> float:
    """<L+ f | f> = ||grad f||^2 - p int W^(p-1) f^2."""
    if isinstance(fld, RadialField):
        g = fld.grid
        p = nonlinearity_power(g.d)
        w_pm1 = spec.W_on(g) ** (p - 1.0)
        return h1_seminorm_sq(fld) - p * g.quad_meas(w_pm1 * fld.values ** 2)
    g = fld.grid
    w_pm1 = np.asarray(eval_W(3, g.radius ** 2)) ** 4.0
    gx, gy, gz = fld.gradient()
    return (g.quad(gx * gx + gy * gy + gz * gz)
            - 5.0 * g.quad(w_pm1 * fld.values ** 2))


def linearized_norm_sq(ms: ModeSplit, spec: SpectralData) -> float:
    """||v||_E^2 = (k^2 l1^2 + l2^2)/2 + <L gamma | gamma>/2 + alpha^2 + |mu|^2."""
    k = spec.k
    g1, g2 = ms.gamma.u1, ms.gamma.u2
    if ms.gamma.representation == "radial":
        g2_sq = l2_norm_sq(g2)
    else:
        g2_sq = ms.gamma.grid.quad(g2.values ** 2)
    quad_g = quadratic_form_L(spec, g1) + g2_sq
    return (0.5 * (k * k * ms.lambda1 ** 2 + ms.lambda2 ** 2)
            + 0.5 * quad_g + ms.alpha ** 2 + float(np.sum(ms.mu ** 2)))


def superquadratic_C(v1, spec: SpectralData | None = None) -> float:
    """The beyond-quadratic part of the static energy around W.

    C(v) = int [ (|W+v1|^(2*) - W^(2*)) / 2* - W^p v1 - (p/2) W^(p-1) v1^2 ],
    cubic at the origin: C(eps rho)/eps^3 has a finite limit.
    """
    if isinstance(v1, RadialField):
        g = v1.grid
        d = g.d
        w = np.asarray(eval_W(d, g.r ** 2))
        quad = g.quad_meas
    else:
        g = v1.grid
        d = 3
        w = np.asarray(eval_W(3, g.radius ** 2))
        quad = g.quad
    ts = sobolev_exponent(d)
    p = nonlinearity_power(d)
    f = v1.values
    integrand = ((np.abs(w + f) ** ts - w ** ts) / ts
                 - w ** p * f - (p / 2.0) * w ** (p - 1.0) * f * f)
    return float(quad(integrand))


# ---------------------------------------------------------------------------
# distance to the soliton family
# ---------------------------------------------------------------------------

def _w_sigma_farfield(d: int, sigma: float) -> tuple[float, float]:
    """(c, b) of W_sigma ~ c r^(2-d) + b r^(-d), from the closed form."""
    dd = d * (d - 2.0)
    c0 = dd ** ((d - 2.0) / 2.0)
    b0 = -c0 * dd * (d - 2.0) / 2.0
    return (c0 * math.exp(-(d / 2.0 - 1.0) * sigma),
            b0 * math.exp(-(d / 2.0 + 1.0) * sigma))


def _h1_tail_pair(g: RadialGrid, cf, bf, cg, bg) -> float:
    d, R = g.d, g.r_max
    val = ((d - 2.0) * cf * cg * R ** (2 - d)
           + (d - 2.0) * (cf * bg + cg * bf) * R ** (-d)
           + d * d * bf * bg * R ** (-d - 2) / (d + 2.0))
    return g.angular_factor * val


class _RadialDistance:
    """Precomputed pieces of ||s - sgn W_vec_sigma||_H^2 for repeated sigma
    evaluations (coarse scans, golden-section, fit seeding proxies)."""

    def __init__(self, spec: SpectralData, s: State):
        g = s.grid
        self.g = g
        self.gw = _GridRefs.get(spec, g)["grad_W_sq"]
        self.du = s.u1.deriv()
        self.cu, self.bu = g.tail_fit(s.u1.values)
        self.uu = (g.quad_meas(self.du * self.du)
                   + _h1_tail_pair(g, self.cu, self.bu, self.cu, self.bu)
                   + l2_norm_sq(s.u2))
        self.wdu = self.du * g.w_meas

    def dist_sq(self, sgn: int, sigma: float) -> float:
        g = self.g
        dw = _w_sigma_deriv(g, sigma)
        cw, bw_t = _w_sigma_farfield(g.d, sigma)
        cross = float(self.wdu @ dw) + _h1_tail_pair(g, self.cu, self.bu, cw, bw_t)
        return self.uu - 2.0 * sgn * cross + self.gw


def _manifold_distance_sq(spec: SpectralData, s: State, sgn: int,
                          sigma: float) -> float:
    """||s - sgn W_vec_sigma||_H^2 for radial states (analytic W_sigma)."""
    return _RadialDistance(spec, s).dist_sq(sgn, sigma)


def _golden_min(fun, lo: float, hi: float, tol: float = 1e-6) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - invphi * (b - a)
    c2 = a + invphi * (b - a)
    f1, f2 = fun(c1), fun(c2)
    while (b - a) > tol:
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - invphi * (b - a)
            f1 = fun(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + invphi * (b - a)
            f2 = fun(c2)
    x = 0.5 * (a + b)
    return x, fun(x)


def manifold_distance(spec: SpectralData, s: State,
                      sigma_seed: float | None = None,
                      c_seed: np.ndarray | None = None) -> float:
    """inf over (+-, sigma[, c]) of ||s -+ W_vec_sigma(. - c)||_H (radial: c = 0).

    Golden-section in sigma, seeded either by a modulation fit or by a
    coarse scan; box states additionally run a few Newton steps in c on
    the smooth quadratic cross term.
    """
    if s.representation == "radial":
        helper = _RadialDistance(spec, s)
        best = math.inf
        for sgn in (+1, -1):
            if sigma_seed is None:
                sigmas = np.linspace(-2.0, 4.0, 25)
                vals = [helper.dist_sq(sgn, x) for x in sigmas]
                i = int(np.argmin(vals))
                lo, hi = sigmas[max(i - 1, 0)], sigmas[min(i + 1, len(sigmas) - 1)]
            else:
                lo, hi = sigma_seed - 0.4, sigma_seed + 0.4
            _, val = _golden_min(lambda x: helper.dist_sq(sgn, x), lo, hi)
            best = min(best, val)
        return math.sqrt(max(best, 0.0))
    # box: distance to sgn W_sigma(. - c) over sgn, sigma, c
    g = s.grid
    refs = _GridRefs.get(spec, g)
    x, y, z = g.meshgrid
    u2_sq = g.quad(s.u2.values ** 2)
    gx, gy, gz = s.u1.gradient()
    uu = g.quad(gx * gx + gy * gy + gz * gz)
    gw = refs["grad_W_sq"]

    def dist_sq(sgn, sigma, c):
        es = math.exp(sigma)
        dx_, dy_, dz_ = x - c[0], y - c[1], z - c[2]
        rr = np.sqrt(dx_ ** 2 + dy_ ** 2 + dz_ ** 2)
        slope = (math.exp((3 / 2.0 - 1.0) * sigma) * es
                 * np.asarray(eval_W_dr(3, es * rr)) / np.maximum(rr, 1e-300))
        cross = g.quad(gx * slope * dx_ + gy * slope * dy_ + gz * slope * dz_)
        return uu - 2.0 * sgn * cross + gw + u2_sq

    c0 = np.zeros(3) if c_seed is None else np.asarray(c_seed, dtype=float)
    best = math.inf
    for sgn in (+1, -1):
        seed = 0.0 if sigma_seed is None else sigma_seed
        _, val = _golden_min(lambda t: dist_sq(sgn, t, c0), seed - 1.0, seed + 1.0)
        best = min(best, val)
    return math.sqrt(max(best, 0.0))


def distance_dW(s: State, spec: SpectralData,
                thresholds: Thresholds | None = None,
                fit: ModulationFit | None = None) -> DistanceReport:
    """The blended distance d_W = chi d_1 + (1 - chi) d_0 to the family."""
    th = thresholds or Thresholds()
    if fit is None:
        try:
            fit = fit_modulation(s, spec, th)
        except FitError:
            fit = None
    sigma_seed = fit.sigma if (fit is not None and fit.converged) else None
    c_seed = fit.c if (fit is not None and fit.converged) else None
    d0 = th.C_d0 * manifold_distance(spec, s, sigma_seed, c_seed)
    d1 = math.nan
    if fit is not None and fit.converged:
        ms = split_modes(fit, spec)
        jref = reference_J(spec, s.grid)
        d1_sq = energy_E(s) - jref + spec.k ** 2 * ms.lambda1 ** 2
        d1 = math.sqrt(max(d1_sq, 0.0))
    x = 2.0 * d0 / th.delta_A
    chi = float(smooth_cutoff(x, 1.0, 2.0))
    if not math.isnan(d1):
        dw = chi * d1 + (1.0 - chi) * d0
    else:
        dw = d0
        chi = 0.0
    regime = "inner" if chi >= 1.0 else ("outer" if chi <= 0.0 else "blend")
    return DistanceReport(d0=d0, d1=d1, dW=dw, regime=regime, fit=fit)


# ---------------------------------------------------------------------------
# sign functional and region predicates
# ---------------------------------------------------------------------------

def _sign_of(x: float) -> int:
    """sign with the convention sign 0 = +1."""
    return -1 if x < 0.0 else +1


def sign_functional(s: State, spec: SpectralData,
                    thresholds: Thresholds | None = None,
                    report: DistanceReport | None = None) -> int:
    """The fate sign: -sign(lambda1) near the family, sign(K) away from it.

    On the overlap both rules must agree; disagreement raises
    SignConsistencyError, a query outside both regions raises
    UndefinedRegionError.
    """
    th = thresholds or Thresholds()
    if report is None:
        report = distance_dW(s, spec, th)
    inner_ok = (report.dW <= th.delta_E and report.fit is not None
                and report.fit.converged)
    outer_ok = report.dW >= th.delta_S
    if not inner_ok and not outer_ok:
        raise UndefinedRegionError(
            f"neither sign rule applies at d_W = {report.dW:.3e}")
    sign_inner = sign_outer = None
    if inner_ok:
        ms = split_modes(report.fit, spec)
        sign_inner = -_sign_of(ms.lambda1)
    if outer_ok:
        sign_outer = _sign_of(functional_K(s.u1))
    if inner_ok and outer_ok and sign_inner != sign_outer:
        raise SignConsistencyError(
            f"inner rule gives {sign_inner}, outer rule gives {sign_outer} "
            f"at d_W = {report.dW:.3e}")
    return sign_inner if inner_ok else sign_outer


def region_predicates(s: State, spec: SpectralData,
                      thresholds: Thresholds | None = None,
                      report: DistanceReport | None = None) -> dict:
    """Membership in the energy band, the X-region, and the variational zone."""
    th = thresholds or Thresholds()
    if report is None:
        report = distance_dW(s, spec, th)
    jref = reference_J(spec, s.grid)
    e = energy_E(s)
    in_star = e <= jref + th.eps_star ** 2
    in_x = in_star and (e < jref + 0.5 * report.dW ** 2)
    j1 = functional_J(s.u1)
    in_var = (j1 < jref + th.eps_star ** 2) and (report.dW > th.delta_S)
    return {"in_H_star": bool(in_star), "in_H_X": bool(in_x),
            "in_variational_zone": bool(in_var),
            "E": e, "J_u1": j1, "dW": report.dW}
