"""Field containers, the static ground state, and field serialization.

The phase space is H = H^1_dot x L^2, represented either by a pair of
radial fields (spherically symmetric states) or by a pair of 3-D box
fields (translated / boosted states).  All values are dimensionless.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .grids import Box3DGrid, RadialGrid


# ---------------------------------------------------------------------------
# ground state closed forms
# ---------------------------------------------------------------------------

def sobolev_exponent(d: int) -> float:
    """The critical exponent 2* = 2d/(d-2)."""
    return 2.0 * d / (d - 2.0)


def nonlinearity_power(d: int) -> float:
    """p = 2* - 1, the power in the focusing nonlinearity |u|^(p-1) u."""
    return sobolev_exponent(d) - 1.0


def eval_W(d: int, rsq) -> np.ndarray | float:
    """Ground state W at squared radius rsq: (1 + |x|^2/(d(d-2)))^(1-d/2).

    Positive, radially decreasing, W(0) = 1.
    """
    if d not in (3, 5):
        raise ValueError("dimension must be 3 or 5")
    return (1.0 + np.asarray(rsq) / (d * (d - 2.0))) ** (1.0 - d / 2.0)


def eval_W_dr(d: int, r) -> np.ndarray | float:
    """Radial derivative dW/dr in closed form."""
    r = np.asarray(r, dtype=float)
    dd = d * (d - 2.0)
    return (1.0 - d / 2.0) * (2.0 * r / dd) * (1.0 + r * r / dd) ** (-d / 2.0)


def eval_W_prime_mode(d: int, r) -> np.ndarray | float:
    """The scaling mode W' = (r d/dr + d/2 - 1) W (threshold mode of the
    linearized operator; a resonance for d = 3, an eigenfunction for d = 5)."""
    r = np.asarray(r, dtype=float)
    return r * eval_W_dr(d, r) + (d / 2.0 - 1.0) * eval_W(d, r * r)


# ---------------------------------------------------------------------------
# radial profiles: evaluate-anywhere wrappers
# ---------------------------------------------------------------------------

class RadialProfile:
    """A radial function evaluable at arbitrary radii.

    Wraps either a closed form or a cubic spline through samples, with a
    parity-correct extension through the origin and a far-field model
    beyond the last sample (power-law c*r^(2-d) + b*r^(-d), or zero for
    exponentially decaying profiles).
    """

    def __init__(self, fn, r_max: float = math.inf):
        self._fn = fn
        self.r_max = r_max

    def __call__(self, r) -> np.ndarray:
        return self._fn(np.asarray(r, dtype=float))

    @classmethod
    def from_callable(cls, fn) -> "RadialProfile":
        return cls(fn)

    @classmethod
    def from_samples(cls, grid: RadialGrid, values: np.ndarray,
                     parity: int = 1, tail: str = "decay") -> "RadialProfile":
        """Spline through (grid.r, values).

        parity : +1 / -1 behavior under r -> -r (for evaluation near 0)
        tail : "decay" (zero beyond r_max) or "power" (c r^(2-d) + b r^-d)
        """
        n_mirror = 6
        r_ext = np.concatenate([-grid.r[:n_mirror][::-1], grid.r])
        v_ext = np.concatenate([parity * values[:n_mirror][::-1], values])
        spline = CubicSpline(r_ext, v_ext, extrapolate=False)
        r_last = grid.r[-1]
        d = grid.d
        if tail == "power":
            c, b = grid.tail_fit(values)
        else:
            c = b = 0.0

        def fn(r):
            rr = np.abs(np.asarray(r, dtype=float))
            out = np.asarray(spline(rr))
            far = rr > r_last
            if np.any(far):
                rf = np.where(far, rr, r_last)
                out = np.where(far, c * rf ** (2.0 - d) + b * rf ** (-float(d)), out)
            return out

        return cls(fn, r_max=r_last)


# ---------------------------------------------------------------------------
# field containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialField:
    """Samples of a radially symmetric function on a radial grid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    @property
    def d(self) -> int:
        return self.grid.d

    def deriv(self, parity: int = 1) -> np.ndarray:
        return self.grid.deriv(self.values, parity)

    def profile(self, parity: int = 1, tail: str = "power") -> RadialProfile:
        return RadialProfile.from_samples(self.grid, self.values, parity, tail)

    def __add__(self, other: "RadialField") -> "RadialField":
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        _check_same_grid(self, other)
        return RadialField(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "RadialField":
        return RadialField(self.grid, self.values * a)

    __rmul__ = __mul__


@dataclass(frozen=True)
class Field3D:
    """Samples of a general function on a uniform cube grid."""

    grid: Box3DGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        m = self.grid.m
        if v.shape != (m, m, m):
            raise ValueError(f"expected shape {(m, m, m)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    def gradient(self) -> list[np.ndarray]:
        return self.grid.gradient(self.values)

    def __add__(self, other: "Field3D") -> "Field3D":
        _check_same_grid(self, other)
        return Field3D(self.grid, self.values + other.values)

    def __sub__(self, other: "Field3D") -> "Field3D":
        _check_same_grid(self, other)
        return Field3D(self.grid, self.values - other.values)

    def __mul__(self, a: float) -> "Field3D":
        return Field3D(self.grid, self.values * a)

    __rmul__ = __mul__


def _check_same_grid(a, b):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True)
class State:
    """A point (u1, u2) = (u, du/dt) in the energy space."""

    u1: RadialField | Field3D
    u2: RadialField | Field3D

    def __post_init__(self):
        if type(self.u1) is not type(self.u2):
            raise ValueError("u1 and u2 must share a representation")
        _check_same_grid(self.u1, self.u2)

    @property
    def representation(self) -> str:
        return "radial" if isinstance(self.u1, RadialField) else "box3d"

    @property
    def grid(self):
        return self.u1.grid

    @property
    def d(self) -> int:
        return self.u1.grid.d if self.representation == "radial" else 3

    def __add__(self, other: "State") -> "State":
        return State(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "State") -> "State":
        return State(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, a: float) -> "State":
        return State(self.u1 * a, self.u2 * a)

    __rmul__ = __mul__

    def time_reversed(self) -> "State":
        return State(self.u1, self.u2 * -1.0)


@dataclass(frozen=True)
class BoostParams:
    """Scale sigma, boost vector p and center q of the soliton family."""

    sigma: float = 0.0
    p: tuple[float, float, float] = (0.0, 0.0, 0.0)
    q: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        vals = (self.sigma, *self.p, *self.q)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("boost parameters must be finite")

    @property
    def p_norm(self) -> float:
        return math.sqrt(sum(c * c for c in self.p))

    @property
    def lorentz_factor(self) -> float:
        """<p> = sqrt(1 + |p|^2)."""
        return math.sqrt(1.0 + self.p_norm ** 2)


# ---------------------------------------------------------------------------
# sampling the soliton family
# ---------------------------------------------------------------------------

def boost_matrix(p: np.ndarray) -> np.ndarray:
    """A = I + (<p> - 1) p p^T / |p|^2, the spatial contraction of the boost.

    The p -> 0 limit is the identity (the coefficient tends to zero), so
    small |p| is evaluated through a series-stable form.
    """
    p = np.asarray(p, dtype=float)
    psq = float(p @ p)
    gamma = math.sqrt(1.0 + psq)
    if psq < 1e-28:
        return np.eye(3)
    # (gamma - 1)/|p|^2 = 1/(gamma + 1), exact and stable for small |p|
    return np.eye(3) + np.outer(p, p) / (gamma + 1.0)


def boosted_soliton_values(params: BoostParams, x: np.ndarray, y: np.ndarray,
                           z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(u1, u2) samples of the traveling soliton at t = 0 on given points.

    u1 = W_sigma(A (x - q)),  u2 = -grad u1 . p / <p>, from closed forms.
    """
    p = np.asarray(params.p, dtype=float)
    q = np.asarray(params.q, dtype=float)
    gamma = params.lorentz_factor
    a = boost_matrix(p)
    es = math.exp(params.sigma)
    # y_i = A_(i.) (x - q); the scaling acts afterwards: W_sigma(y) = e^{s/2} W(e^s y)
    xs = (x - q[0], y - q[1], z - q[2])
    w = [a[i, 0] * xs[0] + a[i, 1] * xs[1] + a[i, 2] * xs[2] for i in range(3)]
    rsq = w[0] ** 2 + w[1] ** 2 + w[2] ** 2
    d = 3
    amp = es ** (d / 2.0 - 1.0)
    u1 = amp * eval_W(d, es * es * rsq)
    r = np.sqrt(rsq)
    with np.errstate(invalid="ignore", divide="ignore"):
        slope = np.where(r > 0, amp * es * eval_W_dr(d, es * r) / np.maximum(r, 1e-300), 0.0)
    # grad u1 = slope * A^T A (x-q); u2 = -slope * (A w) . p / gamma
    grad_dot_p = np.zeros_like(u1)
    ap = a @ p
    for i in range(3):
        grad_dot_p = grad_dot_p + w[i] * ap[i]
    u2 = -slope * grad_dot_p / gamma
    return u1, u2


def sample_W_family(params: BoostParams, grid: RadialGrid | Box3DGrid) -> State:
    """Sample the scaled/boosted/translated soliton as a State.

    Radial grids require p = q = 0; the contracted core scale e^(-sigma)
    must span at least four cells of the grid.
    """
    es = math.exp(params.sigma)
    if isinstance(grid, RadialGrid):
        if params.p_norm != 0.0 or any(c != 0.0 for c in params.q):
            raise ValueError("radial sampling requires p = 0 and q = 0")
        if not grid.resolves_scale(math.exp(-params.sigma)):
            raise ResolutionError(
                f"scale e^-sigma = {math.exp(-params.sigma):.3g} below 4 cells "
                f"of size {grid.min_spacing:.3g}")
        d = grid.d
        amp = es ** (d / 2.0 - 1.0)
        u1 = amp * eval_W(d, (es * grid.r) ** 2)
        return State(RadialField(grid, u1),
                     RadialField(grid, np.zeros(grid.n)))
    # core radius of W_sigma is e^-sigma sqrt(d(d-2)) (d = 3); require >= 2 cells
    core = math.exp(-params.sigma) * math.sqrt(3.0)
    if core < 2.0 * grid.dx:
        raise ResolutionError(
            f"core radius {core:.3g} below 2 cells of size {grid.dx:.3g}")
    x, y, z = grid.meshgrid
    u1, u2 = boosted_soliton_values(params, x, y, z)
    return State(Field3D(grid, u1), Field3D(grid, u2))


class ResolutionError(ValueError):
    """A requested transform is finer than the grid can represent."""


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_radial_field(path, fld: RadialField) -> None:
    """Columnar text format: header lines, then `r value` pairs."""
    g = fld.grid
    with open(path, "w") as fh:
        fh.write(f"# d={g.d} n={g.n} r_max={g.r_max!r}\n")
        fh.write(f"# spacing={g.spacing} beta={g.beta!r}\n")
        for r, v in zip(g.r, fld.values):
            fh.write(f"{float(r)!r} {float(v)!r}\n")


def load_radial_field(path) -> RadialField:
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        k, v = tok.split("=", 1)
                        meta[k] = v
                continue
            a, b = line.split()
            rows.append((float(a), float(b)))
    grid = RadialGrid(int(meta["d"]), float(meta["r_max"]), int(meta["n"]),
                      meta.get("spacing", "sinh"), float(meta.get("beta", 6.0)))
    r_file = np.array([ab[0] for ab in rows])
    if len(rows) != grid.n or not np.allclose(r_file, grid.r, rtol=1e-12, atol=0):
        raise ValueError(f"node mismatch loading {path}")
    return RadialField(grid, np.array([ab[1] for ab in rows]))


def save_field3d(path_prefix, fld: Field3D) -> None:
    """Raw little-endian float64 block plus a JSON grid sidecar."""
    raw = str(path_prefix) + ".f64"
    fld.values.astype("<f8").tofile(raw)
    sidecar = {"half_width": fld.grid.half_width, "m": fld.grid.m,
               "dtype": "<f8", "order": "C"}
    with open(str(path_prefix) + ".json", "w") as fh:
        json.dump(sidecar, fh, sort_keys=True)
        fh.write("\n")


def load_field3d(path_prefix) -> Field3D:
    with open(str(path_prefix) + ".json") as fh:
        sidecar = json.load(fh)
    grid = Box3DGrid(float(sidecar["half_width"]), int(sidecar["m"]))
    vals = np.fromfile(str(path_prefix) + ".f64", dtype="<f8")
    return Field3D(grid, vals.reshape((grid.m,) * 3))


def save_state(path_prefix, s: State) -> None:
    if s.representation == "radial":
        save_radial_field(str(path_prefix) + "_u1.dat", s.u1)
        save_radial_field(str(path_prefix) + "_u2.dat", s.u2)
    else:
        save_field3d(str(path_prefix) + "_u1", s.u1)
        save_field3d(str(path_prefix) + "_u2", s.u2)


def load_state(path_prefix, representation: str = "radial") -> State:
    if representation == "radial":
        return State(load_radial_field(str(path_prefix) + "_u1.dat"),
                     load_radial_field(str(path_prefix) + "_u2.dat"))
    return State(load_field3d(str(path_prefix) + "_u1"),
                 load_field3d(str(path_prefix) + "_u2"))
