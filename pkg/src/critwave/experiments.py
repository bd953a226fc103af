"""Experiment orchestration: initial-data recipes, single runs, the
four-quadrant sweep, and the static verification suite.

Every run is deterministic given (spec, constants file, seed); randomness
enters only through seeded generators whose seeds are recorded in the
outputs.  Sweeps parallelize over independent runs with a worker pool and
merge results in a fixed order.
"""

from __future__ import annotations

import json
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import EvolutionConfig, Thresholds
from .fields import (BoostParams, RadialField, State, eval_W, eval_W_dr,
                     load_state)
from .functionals import (boost_energy_momentum, functional_J,
                          functional_K, h1_seminorm_sq, l2_inner,
                          l2_norm_sq, norm_H, symplectic_omega)
from .grids import Box3DGrid, RadialGrid
from .modulation import assemble_state, distance_dW, fit_modulation
from .evolve import (BLOWUP, SCATTER, UNDETERMINED, TrajectoryRecord,
                     evolve_with_monitors, one_pass_check)
from .spectral import SpectralData, build_spectral_data, coercivity_probe

QUADRANT_DIRECTIONS = {"+1,0": (1, 0), "-1,0": (-1, 0),
                       "0,+1": (0, 1), "0,-1": (0, -1)}
# verdict pairs (backward, forward) predicted by the linearized phase portrait
QUADRANT_EXPECTED = {"+1,0": (BLOWUP, BLOWUP), "-1,0": (SCATTER, SCATTER),
                     "0,+1": (SCATTER, BLOWUP), "0,-1": (BLOWUP, SCATTER)}


# ---------------------------------------------------------------------------
# experiment specification and initial data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    recipe: str                      # quadrant | scaled_w | bump | gmode | file
    params: dict = field(default_factory=dict)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    out_dir: str | None = None
    seed: int = 20240801

    def validate(self, thresholds: Thresholds) -> None:
        if self.recipe == "quadrant":
            a = self.params.get("a")
            if tuple(a) not in QUADRANT_DIRECTIONS.values():
                raise ValueError(f"quadrant direction must be one of "
                                 f"{sorted(QUADRANT_DIRECTIONS)}, got {a}")
            eps = float(self.params.get("eps", 0.0))
            if not 0.0 < eps <= thresholds.eps_star:
                raise ValueError(
                    f"eps = {eps} outside (0, eps_star = {thresholds.eps_star}]")


def build_initial_state(spec_exp: ExperimentSpec, spectral: SpectralData,
                        rng: np.random.Generator | None = None) -> State:
    cfg = spec_exp.evolution
    grid = RadialGrid(3, cfg.r_max, cfg.n, "uniform")
    p = spec_exp.params
    w_vals = np.asarray(eval_W(3, grid.r ** 2))
    zeros = np.zeros(grid.n)
    if spec_exp.recipe == "quadrant":
        a1, a2 = p["a"]
        eps = float(p["eps"])
        rho = spectral.rho_on(grid)
        u1 = w_vals + eps * a1 * rho
        u2 = eps * a2 * rho
    elif spec_exp.recipe == "scaled_w":
        u1 = float(p["c"]) * w_vals
        u2 = zeros
    elif spec_exp.recipe == "bump":
        amp = float(p.get("amplitude", 0.1))
        width = float(p.get("width", 4.0))
        center = float(p.get("center", 0.0))
        u1 = amp * np.exp(-((grid.r - center) / width) ** 2)
        u2 = zeros.copy()
        if p.get("velocity"):
            u2 = float(p["velocity"]) * np.exp(-((grid.r - center) / width) ** 2)
    elif spec_exp.recipe == "gmode":
        eps = float(p["eps"])
        sign = float(p.get("mode_sign", +1))
        rho = spectral.rho_on(grid)
        norm = 1.0 / math.sqrt(2.0 * spectral.k)
        u1 = w_vals + eps * norm * rho
        u2 = eps * sign * spectral.k * norm * rho
    elif spec_exp.recipe == "file":
        return load_state(p["path"], p.get("representation", "radial"))
    else:
        raise ValueError(f"unknown recipe {spec_exp.recipe!r}")
    state = State(RadialField(grid, u1), RadialField(grid, u2))
    pert = float(p.get("perturb_norm", 0.0))
    if pert > 0.0:
        if rng is None:
            rng = np.random.default_rng(derive_seed(spec_exp.seed, spec_exp.name))
        state = perturb_state(state, pert, rng)
    return state


def perturb_state(s: State, target_norm: float,
                  rng: np.random.Generator) -> State:
    """Add a generic smooth bump of prescribed energy-space norm."""
    g = s.grid
    f1 = np.zeros(g.n)
    f2 = np.zeros(g.n)
    for _ in range(2):
        c, wd = rng.uniform(1.0, 10.0), rng.uniform(1.0, 4.0)
        f1 += rng.normal() * np.exp(-((g.r - c) / wd) ** 2)
        c, wd = rng.uniform(1.0, 10.0), rng.uniform(1.0, 4.0)
        f2 += rng.normal() * np.exp(-((g.r - c) / wd) ** 2)
    nrm = math.sqrt(h1_seminorm_sq(RadialField(g, f1))
                    + l2_norm_sq(RadialField(g, f2)))
    scale = target_norm / nrm
    return State(RadialField(g, s.u1.values + scale * f1),
                 RadialField(g, s.u2.values + scale * f2))


def derive_seed(seed: int, name: str) -> int:
    return (seed ^ zlib.crc32(name.encode())) & 0x7FFFFFFF


# ---------------------------------------------------------------------------
# single experiment
# ---------------------------------------------------------------------------

def run_experiment(spec_exp: ExperimentSpec, spectral: SpectralData,
                   thresholds: Thresholds | None = None) -> TrajectoryRecord:
    """Evolve one experiment in both time directions and emit artifacts."""
    th = thresholds or Thresholds()
    spec_exp.validate(th)
    state0 = build_initial_state(spec_exp, spectral)
    record = evolve_with_monitors(state0, spec_exp.evolution, spectral, th)
    if spec_exp.out_dir:
        os.makedirs(spec_exp.out_dir, exist_ok=True)
        base = os.path.join(spec_exp.out_dir, spec_exp.name)
        record.to_csv(base + ".csv")
        record.to_extended_csv(base + "_ext.csv")
        record.save_verdict(base + "_verdict.json")
    return record


def exit_code_for(records: list[TrajectoryRecord]) -> int:
    verdicts = [v for r in records for v in (r.verdict_forward, r.verdict_backward)]
    return 2 if UNDETERMINED in verdicts else 0


# ---------------------------------------------------------------------------
# linearized-mode comparison
# ---------------------------------------------------------------------------

def linearized_lambda_deviation(record: TrajectoryRecord, spectral: SpectralData,
                                thresholds: Thresholds | None = None) -> float:
    """Max relative deviation of lambda_1(tau) from the linearized solution.

    The linearized flow through (lambda_1, lambda_2)(0) is
    lambda_1^0(tau) = lambda_1(0) cosh(k tau) + lambda_2(0) sinh(k tau)/k,
    compared per time direction while the trajectory is still well inside
    the ejection scale (d_W <= delta_H / 2) and above the transient floor.
    """
    th = thresholds or Thresholds()
    k = spectral.k
    t = record.column("t")
    tau = record.column("tau")
    lam1 = record.column("lambda1")
    lam2 = record.column("lambda2")
    dw = record.column("dW")
    i0 = int(np.argmin(np.abs(t)))
    l10, l20 = lam1[i0], lam2[i0]
    eps_scale = max(abs(l10), abs(l20) / k, 1e-12)
    dev = 0.0
    ok = np.isfinite(tau) & np.isfinite(lam1) & (dw <= 0.5 * th.delta_H)
    for i in np.nonzero(ok)[0]:
        model = l10 * math.cosh(k * tau[i]) + l20 * math.sinh(k * tau[i]) / k
        if abs(model) < 1.5 * eps_scale:
            continue
        dev = max(dev, abs(lam1[i] - model) / abs(model))
    return dev


# ---------------------------------------------------------------------------
# the four-quadrant sweep
# ---------------------------------------------------------------------------

@dataclass
class QuadrantRow:
    a: str
    eps: float
    variant: str
    verdict_backward: str
    verdict_forward: str
    ejection_rate: float
    runtime: float
    lambda_form_dev: float
    one_pass_ok: bool
    expected: tuple[str, str]

    @property
    def matches_expected(self) -> bool:
        return (self.verdict_backward, self.verdict_forward) == self.expected


@dataclass
class QuadrantTable:
    rows: list[QuadrantRow]
    seed: int

    def all_match(self) -> bool:
        return all(r.matches_expected for r in self.rows if r.variant == "base")

    def any_undetermined(self) -> bool:
        return any(UNDETERMINED in (r.verdict_backward, r.verdict_forward)
                   for r in self.rows)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("a,eps,verdict_backward,verdict_forward,ejection_rate,runtime\n")
            for r in self.rows:
                if r.variant != "base":
                    continue
                rate = "nan" if math.isnan(r.ejection_rate) else repr(r.ejection_rate)
                fh.write(f"{r.a},{r.eps!r},{r.verdict_backward},"
                         f"{r.verdict_forward},{rate},{r.runtime:.3f}\n")

    def to_json(self, path) -> None:
        payload = {"seed": self.seed, "rows": [
            {"a": r.a, "eps": r.eps, "variant": r.variant,
             "verdict_backward": r.verdict_backward,
             "verdict_forward": r.verdict_forward,
             "ejection_rate": None if math.isnan(r.ejection_rate) else r.ejection_rate,
             "runtime": r.runtime,
             "lambda_form_dev": None if math.isnan(r.lambda_form_dev) else r.lambda_form_dev,
             "one_pass_ok": r.one_pass_ok,
             "expected": list(r.expected),
             "matches_expected": r.matches_expected} for r in self.rows]}
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")


_POOL_CTX: dict = {}


def _pool_init(eigen_n: int):
    _POOL_CTX["spectral"] = build_spectral_data(cross_check=False,
                                                eigen_n=eigen_n)


def _pool_case(case: dict) -> dict:
    spectral = _POOL_CTX["spectral"]
    return _run_quadrant_case(case, spectral)


def _run_quadrant_case(case: dict, spectral: SpectralData) -> dict:
    th = Thresholds(**case["thresholds"]) if case.get("thresholds") else Thresholds()
    cfg = EvolutionConfig(**case["evolution"])
    exp = ExperimentSpec(name=case["name"], recipe="quadrant",
                         params=case["params"], evolution=cfg,
                         out_dir=case.get("out_dir"), seed=case["seed"])
    t0 = time.time()
    record = run_experiment(exp, spectral, th)
    wall = time.time() - t0
    dev = linearized_lambda_deviation(record, spectral, th)
    check = one_pass_check(record, th)
    rate = record.ejection_rate_forward
    if math.isnan(rate):
        rate = record.ejection_rate_backward
    return {"name": case["name"], "a": case["a_key"], "eps": case["params"]["eps"],
            "variant": case["variant"],
            "verdict_backward": record.verdict_backward,
            "verdict_forward": record.verdict_forward,
            "ejection_rate": rate, "runtime": wall,
            "lambda_form_dev": dev, "one_pass_ok": bool(check["ok"])}


def run_quadrant_sweep(eps_list=(1e-3, 3e-3, 1e-2),
                       spectral: SpectralData | None = None,
                       thresholds: Thresholds | None = None,
                       evolution: EvolutionConfig | None = None,
                       n_perturbed: int = 0,
                       perturb_fraction: float = 0.10,
                       seed: int = 20240801,
                       threads: int = 1,
                       out_dir: str | None = None) -> QuadrantTable:
    """All four directions for each amplitude, plus perturbed-variant probes.

    Perturbed variants add a generic bump of perturb_fraction * eps in the
    energy norm; their verdicts probe the open-set (interior) claim and
    must match the base run.
    """
    th = thresholds or Thresholds()
    cfg = evolution or EvolutionConfig(n=8192, r_max=64.0, t_max=45.0,
                                       monitor_stride=0.25)
    if spectral is None:
        spectral = build_spectral_data(cross_check=False)
    cases = []
    for a_key, a in QUADRANT_DIRECTIONS.items():
        for eps in eps_list:
            base = {"a_key": a_key, "variant": "base",
                    "name": f"quadrant_a{a_key}_eps{eps:g}",
                    "params": {"a": a, "eps": float(eps)},
                    "evolution": cfg.__dict__.copy(),
                    "thresholds": th.__dict__.copy(),
                    "seed": seed, "out_dir": out_dir}
            cases.append(base)
    for idx in range(n_perturbed):
        a_key = sorted(QUADRANT_DIRECTIONS)[idx % 4]
        eps = float(eps_list[(idx // 4) % len(eps_list)])
        name = f"quadrant_a{a_key}_eps{eps:g}_pert{idx}"
        cases.append({"a_key": a_key, "variant": f"pert{idx}", "name": name,
                      "params": {"a": QUADRANT_DIRECTIONS[a_key], "eps": eps,
                                 "perturb_norm": perturb_fraction * eps},
                      "evolution": cfg.__dict__.copy(),
                      "thresholds": th.__dict__.copy(),
                      "seed": derive_seed(seed, name), "out_dir": out_dir})
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads, initializer=_pool_init,
                                 initargs=(spectral.eigen_grid.n,)) as pool:
            results = list(pool.map(_pool_case, cases))
    else:
        results = [_run_quadrant_case(c, spectral) for c in cases]
    rows = [QuadrantRow(a=r["a"], eps=r["eps"], variant=r["variant"],
                        verdict_backward=r["verdict_backward"],
                        verdict_forward=r["verdict_forward"],
                        ejection_rate=r["ejection_rate"], runtime=r["runtime"],
                        lambda_form_dev=r["lambda_form_dev"],
                        one_pass_ok=r["one_pass_ok"],
                        expected=QUADRANT_EXPECTED[r["a"]])
            for r in results]
    table = QuadrantTable(rows=rows, seed=seed)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        table.to_csv(os.path.join(out_dir, "quadrant_table.csv"))
        table.to_json(os.path.join(out_dir, "quadrant_table.json"))
    return table


# ---------------------------------------------------------------------------
# random orthogonal residuals (round-trip material)
# ---------------------------------------------------------------------------

class BoxResidualClosure:
    """An exactly evaluable 3-D residual v = (v1, v2).

    v1 is a Gaussian sum with the mode components (Lambda_0 rho and grad rho)
    projected out under the box quadrature; v2 is a Gaussian sum.  Because
    every term has a closed form (or a spline profile evaluable anywhere),
    assembled family members T^c S^sigma (s W + v) can be sampled without
    interpolating grid data, which keeps round-trip errors at quadrature
    level.
    """

    def __init__(self, spectral: SpectralData, gaussians1, gaussians2,
                 mode_coefs):
        self.spectral = spectral
        self.g1 = gaussians1          # list of (amp, center(3,), width)
        self.g2 = gaussians2
        self.mode_coefs = np.asarray(mode_coefs, dtype=float)  # (4,)

    @staticmethod
    def _gauss_sum(terms, x, y, z):
        out = 0.0
        for amp, c, wd in terms:
            out = out + amp * np.exp(-(((x - c[0]) ** 2 + (y - c[1]) ** 2
                                        + (z - c[2]) ** 2) / wd ** 2))
        return out

    def v1(self, x, y, z):
        rr = np.sqrt(x * x + y * y + z * z)
        out = self._gauss_sum(self.g1, x, y, z)
        out = out - self.mode_coefs[0] * np.asarray(
            self.spectral.lambda0_rho_profile(rr))
        slope = (np.asarray(self.spectral.rho_dr_profile(rr))
                 / np.maximum(rr, 1e-300))
        out = out - slope * (self.mode_coefs[1] * x + self.mode_coefs[2] * y
                             + self.mode_coefs[3] * z)
        return out

    def v2(self, x, y, z):
        return self._gauss_sum(self.g2, x, y, z) + np.zeros_like(x)

    def sample(self, grid: Box3DGrid) -> State:
        from .fields import Field3D
        x, y, z = grid.meshgrid
        return State(Field3D(grid, self.v1(x, y, z)),
                     Field3D(grid, self.v2(x, y, z)))


_BOX_MODE_CACHE: dict = {}


def _cached_box_modes(spectral: SpectralData, grid: Box3DGrid):
    key = (id(spectral), grid)
    modes = _BOX_MODE_CACHE.get(key)
    if modes is None:
        x, y, z = grid.meshgrid
        rr = grid.radius
        slope = np.asarray(spectral.rho_dr_profile(rr)) / np.maximum(rr, 1e-300)
        modes = [np.asarray(spectral.lambda0_rho_profile(rr)),
                 slope * x, slope * y, slope * z]
        _BOX_MODE_CACHE[key] = modes
    return modes


def random_box_closure(spectral: SpectralData, grid: Box3DGrid,
                       rng: np.random.Generator,
                       amplitude: float = 0.02) -> BoxResidualClosure:
    """Random residual closure satisfying the box-quadrature orthogonality."""
    def draw(n):
        return [(rng.normal(), rng.uniform(-3.0, 3.0, size=3),
                 rng.uniform(1.2, 3.0)) for _ in range(n)]

    g1, g2 = draw(3), draw(3)
    x, y, z = grid.meshgrid
    modes = _cached_box_modes(spectral, grid)
    f1 = BoxResidualClosure._gauss_sum(g1, x, y, z)
    f2 = BoxResidualClosure._gauss_sum(g2, x, y, z)
    gram = np.array([[grid.quad(m1 * m2) for m2 in modes] for m1 in modes])
    rhs = np.array([grid.quad(f1 * m) for m in modes])
    coef = np.linalg.solve(gram, rhs)
    v1 = f1 - sum(cf * m for cf, m in zip(coef, modes))
    gx, gy, gz = grid.gradient(v1)
    nrm = math.sqrt(grid.quad(gx ** 2 + gy ** 2 + gz ** 2) + grid.quad(f2 * f2))
    scale = amplitude / max(nrm, 1e-300)
    g1s = [(a * scale, c, w) for a, c, w in g1]
    g2s = [(a * scale, c, w) for a, c, w in g2]
    return BoxResidualClosure(spectral, g1s, g2s, coef * scale)


def assemble_box_exact(spectral: SpectralData, grid: Box3DGrid, sgn: int,
                       sigma: float, c, closure: BoxResidualClosure) -> State:
    """u = T^c S^sigma (sgn W_vec + v) with every term sampled exactly."""
    from .fields import Field3D
    c = np.asarray(c, dtype=float)
    es = math.exp(sigma)
    x, y, z = grid.meshgrid
    xs, ys, zs = es * (x - c[0]), es * (y - c[1]), es * (z - c[2])
    rr2 = xs * xs + ys * ys + zs * zs
    amp1 = math.exp(sigma / 2.0)
    u1 = sgn * amp1 * np.asarray(eval_W(3, rr2)) + amp1 * closure.v1(xs, ys, zs)
    u2 = math.exp(1.5 * sigma) * closure.v2(xs, ys, zs)
    return State(Field3D(grid, u1), Field3D(grid, u2))

def random_orthogonal_residual(spectral: SpectralData, grid,
                               rng: np.random.Generator,
                               amplitude: float = 0.02) -> State:
    """A random smooth residual v with <v1|Lambda_0 rho> = <v1|grad rho> = 0.

    Built from Gaussian bumps with the mode components projected out via a
    Gram solve, so assembled states T^c S^sigma (s W + v) are exact members
    of the fitted family.
    """
    radial = isinstance(grid, RadialGrid)
    if radial:
        r = grid.r
        f1 = np.zeros(grid.n)
        f2 = np.zeros(grid.n)
        for _ in range(3):
            c, wd = rng.uniform(0.0, 6.0), rng.uniform(0.8, 3.0)
            f1 += rng.normal() * np.exp(-((r - c) / wd) ** 2)
            c, wd = rng.uniform(0.0, 6.0), rng.uniform(0.8, 3.0)
            f2 += rng.normal() * np.exp(-((r - c) / wd) ** 2)
        modes = [spectral.lambda0_rho_on(grid)]
        gram = np.array([[grid.quad_meas(m1 * m2) for m2 in modes] for m1 in modes])
        rhs = np.array([grid.quad_meas(f1 * m) for m in modes])
        coef = np.linalg.solve(gram, rhs)
        for cf, m in zip(coef, modes):
            f1 = f1 - cf * m
        v1, v2 = f1, f2
        nrm = math.sqrt(h1_seminorm_sq(RadialField(grid, v1))
                        + l2_norm_sq(RadialField(grid, v2)))
        scale = amplitude / max(nrm, 1e-300)
        return State(RadialField(grid, scale * v1), RadialField(grid, scale * v2))
    x, y, z = grid.meshgrid
    f1 = np.zeros((grid.m,) * 3)
    f2 = np.zeros((grid.m,) * 3)
    for _ in range(3):
        c = rng.uniform(-3.0, 3.0, size=3)
        wd = rng.uniform(1.0, 3.0)
        f1 += rng.normal() * np.exp(-(((x - c[0]) ** 2 + (y - c[1]) ** 2
                                       + (z - c[2]) ** 2) / wd ** 2))
        c = rng.uniform(-3.0, 3.0, size=3)
        wd = rng.uniform(1.0, 3.0)
        f2 += rng.normal() * np.exp(-(((x - c[0]) ** 2 + (y - c[1]) ** 2
                                       + (z - c[2]) ** 2) / wd ** 2))
    rr = grid.radius
    slope = np.asarray(spectral.rho_dr_profile(rr)) / np.maximum(rr, 1e-300)
    modes = [np.asarray(spectral.lambda0_rho_profile(rr)),
             slope * x, slope * y, slope * z]
    gram = np.array([[grid.quad(m1 * m2) for m2 in modes] for m1 in modes])
    rhs = np.array([grid.quad(f1 * m) for m in modes])
    coef = np.linalg.solve(gram, rhs)
    for cf, m in zip(coef, modes):
        f1 = f1 - cf * m
    from .fields import Field3D
    gx, gy, gz = grid.gradient(f1)
    nrm = math.sqrt(grid.quad(gx ** 2 + gy ** 2 + gz ** 2) + grid.quad(f2 ** 2))
    scale = amplitude / max(nrm, 1e-300)
    return State(Field3D(grid, scale * f1), Field3D(grid, scale * f2))


# ---------------------------------------------------------------------------
# static verification suite
# ---------------------------------------------------------------------------

def _check(name: str, value: float, tol: float, kind: str = "abs_le",
           detail: str = "") -> dict:
    if kind == "abs_le":
        passed = abs(value) <= tol
    elif kind == "gt":
        passed = value > tol
    else:
        raise ValueError(kind)
    return {"name": name, "value": float(value), "tolerance": tol,
            "kind": kind, "passed": bool(passed), "detail": detail}


def run_static_suite(spectral: SpectralData | None = None,
                     thresholds: Thresholds | None = None,
                     grid: RadialGrid | None = None,
                     n_coercivity: int = 100,
                     n_roundtrip_radial: int = 60,
                     n_roundtrip_box: int = 8,
                     seed: int = 20240801,
                     reference_constants: dict | None = None) -> dict:
    """All static acceptance checks with measured values and tolerances.

    Deliberate under-resolution (a coarse or unstretched grid) makes the
    ground-state cancellation checks fail with an explicit convergence
    message in the report.
    """
    th = thresholds or Thresholds()
    grid = grid or RadialGrid(3, 200.0, 4096, "sinh", 6.0)
    if spectral is None:
        spectral = build_spectral_data(grid)
    checks: list[dict] = []
    rng = np.random.default_rng(seed)

    # ground-state identities
    w_fld = RadialField(grid, spectral.W_on(grid))
    grad_sq = h1_seminorm_sq(w_fld)
    k_of_w = functional_K(w_fld)
    j_of_w = functional_J(w_fld)
    checks.append(_check("K(W)_over_gradW_sq", k_of_w / grad_sq, 1e-6,
                         detail="ground-state virial cancellation; fails when "
                                "the grid under-resolves W or its far field"))
    checks.append(_check("J_identity", (j_of_w - grad_sq / grid.d) / j_of_w, 1e-8,
                         detail="static energy vs gradient-norm identity"))

    # spectral consistency
    res = spectral.residuals
    checks.append(_check("eigen_residual", res["eig_residual_l2"], 1e-6))
    if "k_rel_diff" in res:
        checks.append(_check("k_matrix_vs_shooting", res["k_rel_diff"], 1e-4))
        checks.append(_check("b_W_two_routes", res["b_W_rel_diff"], 1e-3))
    checks.append(_check("a_W_positive", spectral.a_W, 0.0, kind="gt"))
    checks.append(_check("b_W_positive", spectral.b_W, 0.0, kind="gt"))
    gp, gm = spectral.mode_states(grid)
    checks.append(_check("omega_gp_gm_minus_1",
                         symplectic_omega(gp, gm) - 1.0, 1e-8))
    rho_f = spectral.rho_field(grid)
    wp = spectral.wprime_field(grid)
    checks.append(_check("wprime_orth_rho", l2_inner(wp, rho_f), 1e-6))
    lam0_f = RadialField(grid, spectral.lambda0_rho_on(grid))
    checks.append(_check("rho_orth_lambda0_rho", l2_inner(rho_f, lam0_f), 1e-8))
    wdr = RadialField(grid, np.asarray(eval_W_dr(grid.d, grid.r)))
    rdr = RadialField(grid, spectral.rho_dr_on(grid))
    grad_pair = grid.quad_meas(wdr.values * rdr.values) / grid.d
    checks.append(_check("grad_pair_identity",
                         (grad_pair - spectral.a_W) / spectral.a_W, 1e-4,
                         detail="<d_j W | d_k rho> = + delta_jk a_W"))

    # coercivity sampling
    co = coercivity_probe(spectral, n_samples=n_coercivity, grid=grid, seed=seed)
    checks.append(_check("coercivity_c_low", co["c_low"], 0.0, kind="gt",
                         detail=f"range [{co['c_low']:.4f}, {co['c_high']:.4f}] "
                                f"over {co['n_samples']} probes"))

    # modulation round trips
    worst = 0.0
    for i in range(n_roundtrip_radial):
        v = random_orthogonal_residual(spectral, grid, rng,
                                       amplitude=rng.uniform(0.002, 0.05))
        sgn = int(rng.choice([-1, 1]))
        sigma = float(rng.uniform(-0.5, 0.5))
        u = assemble_state(spectral, sgn, sigma, np.zeros(3), v)
        fit = fit_modulation(u, spectral, th)
        if not fit.converged or fit.sign_s != sgn:
            worst = math.inf
            break
        err = abs(fit.sigma - sigma)
        err = max(err, norm_H(fit.v - v))
        worst = max(worst, err)
    # the default m = 64 box aliases the mode quadrature at ~1e-3, displacing
    # the fit fixed point; the 1e-6 recovery check needs the finer probe box.
    # sigma stays nonnegative here (expanded modes hit the box edge); the
    # radial cases above cover sigma < 0 without truncation.
    box = Box3DGrid(20.0, 128)
    for i in range(n_roundtrip_box):
        closure = random_box_closure(spectral, box, rng,
                                     amplitude=rng.uniform(0.002, 0.03))
        sigma = float(rng.uniform(0.0, 0.3))
        c = rng.uniform(-0.4, 0.4, size=3)
        u = assemble_box_exact(spectral, box, +1, sigma, c, closure)
        fit = fit_modulation(u, spectral, th)
        if not fit.converged:
            worst = math.inf
            break
        err = max(abs(fit.sigma - sigma), float(np.max(np.abs(fit.c - c))))
        worst = max(worst, err)
    checks.append(_check("modulation_round_trip", worst, 1e-6,
                         detail=f"{n_roundtrip_radial} radial + "
                                f"{n_roundtrip_box} box assemblies"))

    # distance on and near the family (moderate scales: the sqrt of the
    # energy quadrature's sigma-drift floors d_W near 1e-6 past |sigma|~0.4)
    zero = RadialField(grid, np.zeros(grid.n))
    on_manifold = 0.0
    for sigma in (-0.4, 0.0, 0.2):
        st = State(RadialField(grid, _w_sigma(grid, sigma)), zero)
        on_manifold = max(on_manifold, distance_dW(st, spectral, th).dW)
        st_neg = State(RadialField(grid, -_w_sigma(grid, sigma)), zero)
        on_manifold = max(on_manifold, distance_dW(st_neg, spectral, th).dW)
    checks.append(_check("dW_on_manifold", on_manifold, 1e-6))
    dev = 0.0
    for eps in (1e-3, 3e-4):
        st = State(RadialField(grid, spectral.W_on(grid)
                               + eps * spectral.rho_on(grid)), zero)
        measured = distance_dW(st, spectral, th).dW ** 2
        expect = 0.5 * spectral.k ** 2 * eps ** 2
        dev = max(dev, abs(measured - expect) / expect)
    checks.append(_check("dW_sq_unstable_pair", dev, 0.02,
                         detail="d_W^2 vs k^2 eps^2 / 2 from the energy expansion"))

    # boost identity
    jref = functional_J(RadialField(grid, spectral.W_on(grid)))
    worst_boost = 0.0
    for pmag in (0.1, 0.2, 0.4):
        e_val, p_vec = boost_energy_momentum(BoostParams(0.0, (pmag, 0.0, 0.0)))
        worst_boost = max(worst_boost,
                          abs(e_val ** 2 - float(p_vec @ p_vec) - jref ** 2)
                          / jref ** 2)
    checks.append(_check("boost_energy_momentum_identity", worst_boost, 1e-3))

    # constants reproducibility
    if reference_constants is not None:
        cur = spectral.to_constants_dict()
        drift = max(abs(cur[key] - reference_constants[key])
                    for key in ("k", "a_W", "b_W"))
        checks.append(_check("constants_regeneration", drift, 1e-10,
                             detail="k, a_W, b_W vs stored reference"))

    report = {"grid": grid.describe(), "seed": seed,
              "n_checks": len(checks),
              "n_failed": sum(0 if c["passed"] else 1 for c in checks),
              "checks": checks}
    report["all_passed"] = report["n_failed"] == 0
    return report


def _w_sigma(grid: RadialGrid, sigma: float) -> np.ndarray:
    es = math.exp(sigma)
    return es ** (grid.d / 2.0 - 1.0) * np.asarray(eval_W(grid.d, (es * grid.r) ** 2))


def save_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
