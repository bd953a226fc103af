"""Spectrum of the linearized operator around the ground state.

L+ = -Laplace - p W^(p-1) acting on radial functions has exactly one
negative eigenvalue -k^2 with positive ground state rho, a threshold zero
mode W' = (r d/dr + d/2 - 1) W (a resonance in d = 3, an eigenfunction in
d = 5), and continuous spectrum [0, inf).

The eigenpair is computed two independent ways:

* a symmetric matrix eigenproblem: substituting v = r^((d-1)/2) u folds
  the radial measure in symmetrically and the operator becomes
  -v'' + [(d-1)(d-3)/(4 r^2) - p W^(p-1)] v on a uniform cell-centered
  grid (4th-order five-point stencil, parity fold at the origin), solved
  by shifted inverse iteration with Rayleigh-quotient refinement;
* an ODE shooting method integrating from both ends and matching
  logarithmic derivatives, bisecting in k.

The two k values must agree to 1e-4 relative; the matrix residual and all
derived constants are recorded in a constants file.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .fields import (RadialField, RadialProfile, State, eval_W,
                     eval_W_prime_mode, nonlinearity_power)
from .functionals import h1_seminorm_sq, l2_inner, l2_norm_sq
from .grids import RadialGrid

DEFAULT_EIGEN_N = 16384
SHOOT_MATCH_RADIUS = 2.0
SHOOT_OUTER_RADIUS = 60.0


class SpectralConsistencyError(RuntimeError):
    """Independent routes to a spectral constant disagree beyond tolerance."""


# ---------------------------------------------------------------------------
# symmetric matrix discretization
# ---------------------------------------------------------------------------

class LinearizedOperator:
    """Symmetric discretization of radial L+ on a uniform cell-centered grid."""

    def __init__(self, grid: RadialGrid):
        if grid.spacing != "uniform":
            raise ValueError("the symmetric matrix form requires a uniform grid")
        self.grid = grid
        d, n, h = grid.d, grid.n, grid.r[1] - grid.r[0]
        self.h = h
        r = grid.r
        p = nonlinearity_power(d)
        potential = ((d - 1.0) * (d - 3.0) / 4.0 / (r * r)
                     - p * np.asarray(eval_W(d, r * r)) ** (p - 1.0))
        c = 1.0 / (12.0 * h * h)
        main = 30.0 * c + potential
        off1 = np.full(n - 1, -16.0 * c)
        off2 = np.full(n - 2, 1.0 * c)
        mat = sparse.diags([off2, off1, main, off1, off2], [-2, -1, 0, 1, 2],
                           format="lil")
        # parity fold at the origin: ghost -1 mirrors node 0, ghost -2 node 1
        par = -1.0 if d == 3 else 1.0  # v = r^((d-1)/2) u is odd in d=3, even in d=5
        mat[0, 0] += par * (-16.0 * c)
        mat[0, 1] += par * (1.0 * c)
        mat[1, 0] += par * (1.0 * c)
        # outer edge: Dirichlet zero ghosts (eigenfunctions decay like e^(-k r))
        self.matrix = mat.tocsc()
        self._weight = r ** ((d - 1.0) / 2.0)

    def apply_v(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def apply_samples(self, u: np.ndarray) -> np.ndarray:
        """L+ u for scalar samples u on the operator's grid."""
        return (self.matrix @ (self._weight * u)) / self._weight

    def apply_field(self, fld: RadialField) -> RadialField:
        if fld.grid != self.grid:
            raise ValueError("field lives on a different grid")
        return RadialField(self.grid, self.apply_samples(fld.values))


def build_lplus(grid: RadialGrid) -> LinearizedOperator:
    return LinearizedOperator(grid)


def apply_lplus_fd(fld: RadialField) -> RadialField:
    """L+ by direct finite differences on any radial grid (cross-check path)."""
    g = fld.grid
    p = nonlinearity_power(g.d)
    du = fld.deriv(parity=1)
    d2u = g.deriv(du, parity=-1)
    w_pow = np.asarray(eval_W(g.d, g.r ** 2)) ** (p - 1.0)
    vals = -(d2u + (g.d - 1.0) / g.r * du) - p * w_pow * fld.values
    return RadialField(g, vals)


def _inverse_iteration(op: LinearizedOperator) -> tuple[np.ndarray, float]:
    """Smallest eigenpair of the symmetric matrix, v normalized in l2."""
    a = op.matrix
    n = a.shape[0]
    p = nonlinearity_power(op.grid.d)
    shift = -(p + 1.0)  # spectrum is bounded below by -p
    v = np.exp(-op.grid.r) * op._weight
    v /= np.linalg.norm(v)
    lam = float(v @ (a @ v))
    ident = sparse.identity(n, format="csc")
    lu = splu((a - shift * ident))
    for _ in range(8):
        v = lu.solve(v)
        v /= np.linalg.norm(v)
    # Rayleigh-quotient refinement
    for _ in range(10):
        lam = float(v @ (a @ v))
        resid = np.linalg.norm(a @ v - lam * v)
        if resid < 1e-11 * max(1.0, abs(lam)):
            break
        try:
            lu = splu((a - lam * ident))
            v_new = lu.solve(v)
        except RuntimeError:  # shift collided with the eigenvalue
            break
        v = v_new / np.linalg.norm(v_new)
    lam = float(v @ (a @ v))
    if v.sum() < 0:
        v = -v
    return v, lam


# ---------------------------------------------------------------------------
# shooting cross-check
# ---------------------------------------------------------------------------

def _shoot_mismatch(k: float, d: int) -> float:
    """Normalized Wronskian of the inward/outward solutions at the match radius.

    Vanishes exactly at eigenvalues and, unlike a log-derivative difference,
    has no poles when one solution happens to have a node at the matching
    point.
    """
    p = nonlinearity_power(d)
    cd = (d - 1.0) * (d - 3.0) / 4.0

    def rhs(r, y):
        w = eval_W(d, r * r)
        coeff = k * k + cd / (r * r) - p * w ** (p - 1.0)
        return [y[1], coeff * y[0]]

    r0 = 1e-3
    half = (d - 1.0) / 2.0
    # regular branch: u = 1 + a r^2 with a = (V(0) + k^2) / (2 d)
    a0 = (k * k - p) / (2.0 * d)
    v0 = r0 ** half * (1.0 + a0 * r0 * r0)
    dv0 = half * r0 ** (half - 1.0) * (1.0 + a0 * r0 * r0) + r0 ** half * 2.0 * a0 * r0
    out = solve_ivp(rhs, (r0, SHOOT_MATCH_RADIUS), [v0, dv0],
                    rtol=1e-11, atol=1e-300, dense_output=False, method="RK45")
    r1 = SHOOT_OUTER_RADIUS
    decay = math.sqrt(k * k + cd / (r1 * r1))
    inn = solve_ivp(rhs, (r1, SHOOT_MATCH_RADIUS), [1.0, -decay],
                    rtol=1e-11, atol=1e-300, dense_output=False, method="RK45")
    yo, yi = out.y[:, -1], inn.y[:, -1]
    wron = yo[1] * yi[0] - yi[1] * yo[0]
    return wron / (math.hypot(*yo) * math.hypot(*yi))


def shooting_rate(d: int) -> float:
    """The unstable-mode rate k by two-sided shooting and bracketing."""
    p = nonlinearity_power(d)
    ks = np.linspace(0.2, math.sqrt(p) * 0.999, 48)
    vals = [_shoot_mismatch(k, d) for k in ks]
    for i in range(len(ks) - 1):
        if vals[i] == 0.0:
            return float(ks[i])
        if vals[i] * vals[i + 1] < 0:
            return float(brentq(_shoot_mismatch, ks[i], ks[i + 1], args=(d,),
                                xtol=1e-12, rtol=1e-12))
    raise SpectralConsistencyError("shooting found no bound state bracket")


# ---------------------------------------------------------------------------
# spectral data bundle
# ---------------------------------------------------------------------------

@dataclass
class SpectralData:
    """Computed eigenpair, constants, and evaluate-anywhere mode profiles."""

    d: int
    k: float
    a_W: float
    b_W: float
    eigen_grid: RadialGrid
    rho_eigen: RadialField          # unit L^2 norm on the eigen grid
    rho_profile: RadialProfile
    rho_dr_profile: RadialProfile
    lambda0_rho_profile: RadialProfile
    residuals: dict

    def __post_init__(self):
        self._per_grid: dict = {}

    # -- resampling caches ------------------------------------------------

    def _bundle(self, grid: RadialGrid) -> dict:
        cached = self._per_grid.get(grid)
        if cached is not None:
            return cached
        r = grid.r
        rho = np.asarray(self.rho_profile(r))
        lam0 = np.asarray(self.lambda0_rho_profile(r))
        w = np.asarray(eval_W(grid.d, r * r))
        bundle = {
            "rho": rho,
            "lambda0_rho": lam0,
            "rho_dr": np.asarray(self.rho_dr_profile(r)),
            "W": w,
            "W_ip_rho": grid.quad_meas(w * rho),
            "W_ip_lambda0_rho": grid.quad_meas(w * lam0),
        }
        self._per_grid[grid] = bundle
        return bundle

    def rho_on(self, grid: RadialGrid) -> np.ndarray:
        return self._bundle(grid)["rho"]

    def lambda0_rho_on(self, grid: RadialGrid) -> np.ndarray:
        return self._bundle(grid)["lambda0_rho"]

    def rho_dr_on(self, grid: RadialGrid) -> np.ndarray:
        return self._bundle(grid)["rho_dr"]

    def W_on(self, grid: RadialGrid) -> np.ndarray:
        return self._bundle(grid)["W"]

    def W_inner_rho(self, grid: RadialGrid) -> float:
        return self._bundle(grid)["W_ip_rho"]

    def W_inner_lambda0_rho(self, grid: RadialGrid) -> float:
        return self._bundle(grid)["W_ip_lambda0_rho"]

    # -- modes -------------------------------------------------------------

    def rho_field(self, grid: RadialGrid) -> RadialField:
        return RadialField(grid, self.rho_on(grid))

    def mode_states(self, grid: RadialGrid) -> tuple[State, State]:
        """(g_plus, g_minus) = (1, +-k) rho / sqrt(2k) on the given grid."""
        rho = self.rho_on(grid)
        norm = 1.0 / math.sqrt(2.0 * self.k)
        gp = State(RadialField(grid, rho * norm),
                   RadialField(grid, rho * (self.k * norm)))
        gm = State(RadialField(grid, rho * norm),
                   RadialField(grid, rho * (-self.k * norm)))
        return gp, gm

    def wprime_field(self, grid: RadialGrid) -> RadialField:
        return RadialField(grid, np.asarray(eval_W_prime_mode(grid.d, grid.r)))

    # -- constants file ------------------------------------------------------

    def to_constants_dict(self) -> dict:
        return {
            "d": self.d,
            "k": self.k,
            "a_W": self.a_W,
            "b_W": self.b_W,
            "grid": self.eigen_grid.describe(),
            "residuals": self.residuals,
        }

    def save_constants(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_constants_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def solve_ground_state(grid: RadialGrid,
                       eigen_n: int = DEFAULT_EIGEN_N) -> tuple[RadialField, float]:
    """Smallest eigenpair of L+, resampled onto the given grid.

    Returns (rho, k) with rho positive and unit L^2 norm under the given
    grid's quadrature; raises if the discretization yields no negative
    eigenvalue.
    """
    data = build_spectral_data(grid, eigen_n=eigen_n, cross_check=False)
    rho = data.rho_field(grid)
    nrm = math.sqrt(l2_norm_sq(rho))
    return RadialField(grid, rho.values / nrm), data.k


def compute_constants(spec: SpectralData, bw_tol: float = 1e-3) -> tuple[float, float]:
    """(a_W, b_W) from an eigenpair, with the dual-route b_W consistency check.

    a_W = (1/d) <W^(2*-1) | rho>; b_W is computed both as <W' | Lambda_0 rho>
    and via the commutator route k^-2 p (p-1) <W^(p-2) (W')^2 | rho>, which
    must agree to bw_tol relative.
    """
    egrid = spec.eigen_grid
    d = spec.d
    p = nonlinearity_power(d)
    rho = spec.rho_eigen.values
    w_vals = np.asarray(eval_W(d, egrid.r ** 2))
    wprime = np.asarray(eval_W_prime_mode(d, egrid.r))
    lam0 = np.asarray(spec.lambda0_rho_profile(egrid.r))
    a_w = egrid.quad_meas(w_vals ** p * rho) / d
    b_w = egrid.quad_meas(wprime * lam0)
    b_w_alt = (p * (p - 1.0) / (spec.k ** 2)
               * egrid.quad_meas(w_vals ** (p - 2.0) * wprime ** 2 * rho))
    if abs(b_w - b_w_alt) / abs(b_w) > bw_tol:
        raise SpectralConsistencyError(
            f"b_W routes disagree: {b_w:.8f} vs {b_w_alt:.8f}")
    return a_w, b_w


def build_spectral_data(grid: RadialGrid | None = None,
                        eigen_n: int = DEFAULT_EIGEN_N,
                        cross_check: bool = True,
                        shoot_tol: float = 1e-4,
                        bw_tol: float = 1e-3) -> SpectralData:
    """Solve the eigenproblem and assemble all spectral constants.

    cross_check=True also runs the shooting solver and the second b_W
    formula and enforces their agreement.
    """
    if grid is None:
        grid = RadialGrid(3, 200.0, 4096, "sinh", 6.0)
    d = grid.d
    egrid = RadialGrid(d, grid.r_max, eigen_n, "uniform")
    op = LinearizedOperator(egrid)
    v, lam = _inverse_iteration(op)
    if lam >= 0:
        raise SpectralConsistencyError(
            f"smallest eigenvalue {lam:.3e} is not negative; grid too coarse")
    k = math.sqrt(-lam)
    u = v / op._weight
    rho = RadialField(egrid, u)
    nrm = math.sqrt(l2_norm_sq(rho))
    rho = RadialField(egrid, u / nrm)
    if float(np.min(rho.values)) <= 0.0:
        raise SpectralConsistencyError("computed ground state is not positive")

    # mode derivatives on the eigen grid, then splines
    rho_dr = rho.deriv(parity=1)
    lam0 = egrid.r * rho_dr + (d / 2.0) * rho.values
    rho_prof = RadialProfile.from_samples(egrid, rho.values, parity=1, tail="decay")
    rho_dr_prof = RadialProfile.from_samples(egrid, rho_dr, parity=-1, tail="decay")
    lam0_prof = RadialProfile.from_samples(egrid, lam0, parity=1, tail="decay")

    p = nonlinearity_power(d)
    w_vals = np.asarray(eval_W(d, egrid.r ** 2))
    a_w = egrid.quad_meas(w_vals ** p * rho.values) / d
    wprime = np.asarray(eval_W_prime_mode(d, egrid.r))
    b_w = egrid.quad_meas(wprime * lam0)

    vres = op.matrix @ (v / np.linalg.norm(v)) - lam * (v / np.linalg.norm(v))
    h = egrid.r[1] - egrid.r[0]
    residuals = {
        "eig_residual_l2": float(np.linalg.norm(vres) * math.sqrt(h)
                                 * math.sqrt(egrid.angular_factor) / nrm * np.linalg.norm(v)),
        "rho_min": float(np.min(rho.values)),
        "rho_norm_err": abs(math.sqrt(l2_norm_sq(rho)) - 1.0),
        "wprime_orth": egrid.quad_meas(wprime * rho.values),
    }

    if cross_check:
        k_shoot = shooting_rate(d)
        rel = abs(k - k_shoot) / k
        residuals["k_shooting"] = k_shoot
        residuals["k_rel_diff"] = rel
        if rel > shoot_tol:
            raise SpectralConsistencyError(
                f"matrix k = {k:.8f} vs shooting k = {k_shoot:.8f} "
                f"differ by {rel:.2e} > {shoot_tol:.0e}")
        b_w_alt = (p * (p - 1.0) / (k * k)
                   * egrid.quad_meas(w_vals ** (p - 2.0) * wprime ** 2 * rho.values))
        rel_b = abs(b_w - b_w_alt) / abs(b_w)
        residuals["b_W_alt"] = b_w_alt
        residuals["b_W_rel_diff"] = rel_b
        if rel_b > bw_tol:
            raise SpectralConsistencyError(
                f"b_W routes disagree: {b_w:.8f} vs {b_w_alt:.8f} ({rel_b:.2e})")

    return SpectralData(d=d, k=k, a_W=a_w, b_W=b_w, eigen_grid=egrid,
                        rho_eigen=rho, rho_profile=rho_prof,
                        rho_dr_profile=rho_dr_prof,
                        lambda0_rho_profile=lam0_prof, residuals=residuals)


# ---------------------------------------------------------------------------
# coercivity sampling
# ---------------------------------------------------------------------------

def _random_probe(grid: RadialGrid, rng: np.random.Generator) -> np.ndarray:
    """Gaussian bumps with random center/width plus decaying polynomials."""
    r = grid.r
    f = np.zeros(grid.n)
    for _ in range(rng.integers(1, 4)):
        center = rng.uniform(0.0, 8.0)
        width = rng.uniform(0.5, 4.0)
        f += rng.normal() * np.exp(-((r - center) / width) ** 2)
    deg = rng.integers(0, 3)
    scale = rng.uniform(1.0, 5.0)
    f += 0.3 * rng.normal() * (r / scale) ** deg * np.exp(-(r / scale) ** 2)
    return f


def coercivity_probe(spec: SpectralData, n_samples: int = 100,
                     grid: RadialGrid | None = None,
                     seed: int = 7, include_wprime: bool = True) -> dict:
    """Sample the quadratic-form lower bound over probes orthogonal to rho.

    For each probe f with <f | rho> = 0 the ratio
    [<L+ f | f> + <f | Lambda_0 rho>^2 + <f | grad rho>^2] / ||grad f||^2
    is recorded; the report carries (c_low, c_high) and any failure sample.
    In radial symmetry the <f | grad rho> term vanishes identically.
    """
    if grid is None:
        grid = RadialGrid(spec.d, 200.0, 4096, "sinh", 6.0)
    rng = np.random.default_rng(seed)
    rho = spec.rho_field(grid)
    lam0 = RadialField(grid, spec.lambda0_rho_on(grid))
    p = nonlinearity_power(grid.d)
    w_pm1 = np.asarray(eval_W(grid.d, grid.r ** 2)) ** (p - 1.0)
    ratios = []
    failures = []

    def ratio_of(f_vals: np.ndarray) -> float:
        f = RadialField(grid, f_vals)
        f = RadialField(grid, f.values - l2_inner(f, rho) * rho.values)
        grad_sq = h1_seminorm_sq(f)
        quad_form = grad_sq - p * grid.quad_meas(w_pm1 * f.values ** 2)
        lam0_ip = l2_inner(f, lam0)
        return (quad_form + lam0_ip ** 2) / grad_sq

    for i in range(n_samples):
        rat = ratio_of(_random_probe(grid, rng))
        ratios.append(rat)
        if rat <= 0:
            failures.append(i)
    if include_wprime:
        # near-null direction: the threshold mode itself
        ratios.append(ratio_of(np.asarray(eval_W_prime_mode(grid.d, grid.r))))
        if ratios[-1] <= 0:
            failures.append("wprime")
    return {"c_low": float(min(ratios)), "c_high": float(max(ratios)),
            "n_samples": len(ratios), "failures": failures}
