"""Symmetry operators: dilations, translations, and their generators.

The scaling group S_a^sigma acts by (S_a^sigma f)(x) = e^((d/2+a) sigma) f(e^sigma x);
a = -1 preserves the H^1_dot seminorm, a = 0 preserves L^2.  Its generator
is Lambda_a = r d/dr + d/2 + a.  States scale by S_(-1) on the first and
S_0 on the second component.  Translations T^c act by (T^c f)(x) = f(x - c).

Resampling a sampled field under these maps uses the spline-plus-far-field
profiles from :mod:`critwave.fields`; closed-form fields should be resampled
analytically by the caller instead when exactness matters.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.ndimage import map_coordinates

from .fields import Field3D, RadialField, ResolutionError, State
from .grids import Box3DGrid

_SPLINE_ORDER = 5


def generator_Lambda(fld: RadialField, a: float) -> RadialField:
    """Lambda_a f = r f' + (d/2 + a) f, by centered finite differences."""
    g = fld.grid
    return RadialField(g, g.r * fld.deriv() + (g.d / 2.0 + a) * fld.values)


def scale_profile(profile, d: int, a: float, sigma: float):
    """Callable for S_a^sigma applied to a radial profile."""
    amp = math.exp((d / 2.0 + a) * sigma)
    es = math.exp(sigma)

    def fn(r):
        return amp * profile(es * np.asarray(r, dtype=float))

    return fn


def apply_scaling_field(fld: RadialField, sigma: float, a: float) -> RadialField:
    """Resample S_a^sigma f on the field's own grid."""
    g = fld.grid
    if sigma > 0 and not g.resolves_scale(math.exp(-sigma)):
        raise ResolutionError(
            f"scale e^-sigma = {math.exp(-sigma):.3g} below 4 cells of "
            f"size {g.min_spacing:.3g}")
    prof = fld.profile(parity=1, tail="power")
    return RadialField(g, scale_profile(prof, g.d, a, sigma)(g.r))


def apply_scaling(s: State, sigma: float) -> State:
    """The H-unitary vector scaling S_(-1)^sigma x S_0^sigma on a state."""
    if s.representation == "radial":
        return State(apply_scaling_field(s.u1, sigma, -1.0),
                     apply_scaling_field(s.u2, sigma, 0.0))
    return State(_scale_box(s.u1, sigma, -1.0), _scale_box(s.u2, sigma, 0.0))


def apply_translation(s: State, c) -> State:
    """T^c on a state; radial states accept only c = 0."""
    c = np.asarray(c, dtype=float)
    if s.representation == "radial":
        if np.any(c != 0.0):
            raise ValueError("radial states only support c = 0")
        return s
    return State(_translate_box(s.u1, c), _translate_box(s.u2, c))


def _resample_box(fld: Field3D, point_map) -> Field3D:
    g = fld.grid
    x, y, z = g.meshgrid
    px, py, pz = point_map(x, y, z)
    coords = np.stack([g.index_coords(px), g.index_coords(py), g.index_coords(pz)])
    vals = map_coordinates(fld.values, coords, order=_SPLINE_ORDER,
                           mode="constant", cval=0.0)
    return Field3D(g, vals)


def _translate_box(fld: Field3D, c: np.ndarray) -> Field3D:
    return _resample_box(fld, lambda x, y, z: (x - c[0], y - c[1], z - c[2]))


def _scale_box(fld: Field3D, sigma: float, a: float) -> Field3D:
    es = math.exp(sigma)
    if es > 1.0 and math.exp(-sigma) < 4.0 * fld.grid.dx:
        raise ResolutionError("scaled field finer than 4 cells")
    amp = math.exp((3 / 2.0 + a) * sigma)
    out = _resample_box(fld, lambda x, y, z: (es * x, es * y, es * z))
    return Field3D(fld.grid, amp * out.values)


def evaluate_radial_on_box(profile, grid: Box3DGrid, center=None) -> np.ndarray:
    """Sample a radial profile of |x - center| on a 3-D box grid."""
    if center is None:
        rr = grid.radius
    else:
        c = np.asarray(center, dtype=float)
        x, y, z = grid.meshgrid
        rr = np.sqrt((x - c[0]) ** 2 + (y - c[1]) ** 2 + (z - c[2]) ** 2)
    return profile(rr)
