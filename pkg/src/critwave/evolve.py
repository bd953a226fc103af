"""Radial evolution of the critical wave equation in d = 3 with monitors.

The substitution w = r u turns the radial equation u_tt = Delta u + u^5
into w_tt = w_rr + w^5 / r^4 on the half-line with w(0) = 0, which is
discretized on a uniform cell-centered grid (odd-parity fold at the
origin, 4th-order five-point Laplacian inside, first-order outgoing
Sommerfeld closure at r_max) and stepped with velocity-Verlet at a fixed
CFL fraction.  Runs are sized so the light cone of the perturbed region
never returns reflections into the monitored window.

Monitors record conserved quantities, the distance to the soliton family,
the modulation parameters (sigma, lambda_1, lambda_2), the rescaled time
tau with d tau / dt = e^sigma, the exterior energy, and the localized
virial and equipartition brackets.  Classification of each time direction
(blow-up / scattering) is a numerical proxy: norm escape confirmed under
refinement for blow-up, sustained free-wave dominance for scattering, and
an honest Undetermined otherwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .config import EvolutionConfig, Thresholds
from .fields import RadialField, State
from .functionals import (crit_norm, energy_E, functional_K, h1_seminorm_sq,
                          l2_norm_sq, norm_H, smooth_cutoff)
from .grids import RadialGrid
from .modulation import (FitError, distance_dW, fit_modulation,
                         reference_J, split_modes, _manifold_distance_sq)
from .spectral import SpectralData

BLOWUP = "Blowup"
SCATTER = "Scatter"
UNDETERMINED = "Undetermined"

_EXT_PAD = 2.0          # grid-speed allowance in the exterior-energy radius
_MAX_SAFE_AMP = 1e12    # amplitude at which the run is certainly diverging


# ---------------------------------------------------------------------------
# the stepper
# ---------------------------------------------------------------------------

class RadialWaveEvolver:
    """Velocity-Verlet integrator for w_tt = w_rr + w^5 / r^4 (d = 3)."""

    def __init__(self, grid: RadialGrid, cfl: float = 0.45):
        if grid.d != 3:
            raise ValueError("the evolution engine is d = 3 only")
        if grid.spacing != "uniform":
            raise ValueError("evolution requires a uniform grid")
        self.grid = grid
        self.h = grid.r[1] - grid.r[0]
        self.r = grid.r
        self.r4 = grid.r ** 4
        self.dt0 = cfl * self.h
        self.inv12h2 = 1.0 / (12.0 * self.h * self.h)

    def force(self, w: np.ndarray, v: np.ndarray) -> np.ndarray:
        h, c = self.h, self.inv12h2
        with np.errstate(over="ignore", invalid="ignore"):
            a = np.empty_like(w)
            a[2:-2] = (-w[:-4] + 16.0 * w[1:-3] - 30.0 * w[2:-2]
                       + 16.0 * w[3:-1] - w[4:]) * c
            # odd-parity ghosts across r = 0
            a[0] = (-46.0 * w[0] + 17.0 * w[1] - w[2]) * c
            a[1] = (17.0 * w[0] - 30.0 * w[1] + 16.0 * w[2] - w[3]) * c
            # outgoing closure: ghost from (d_t + d_r) w = 0 at the last node
            h2 = h * h
            a[-2] = (w[-3] - 2.0 * w[-2] + w[-1]) / h2
            a[-1] = (2.0 * w[-2] - 2.0 * w[-1] - 2.0 * h * v[-1]) / h2
            u_sq = (w * w) / (self.r * self.r)
            a += w * u_sq * u_sq
        return a

    def steps(self, w, v, n: int, dt: float):
        """n velocity-Verlet steps in place; returns (w, v, last_force)."""
        a = self.force(w, v)
        half = 0.5 * dt
        for _ in range(n):
            vh = v + half * a
            w = w + dt * vh
            a = self.force(w, vh)
            v = vh + half * a
        return w, v, a

    def state_to_wv(self, s: State):
        if s.grid != self.grid:
            raise ValueError("state lives on a different grid")
        return self.r * s.u1.values, self.r * s.u2.values

    def wv_to_state(self, w, v) -> State:
        return State(RadialField(self.grid, w / self.r),
                     RadialField(self.grid, v / self.r))


def step(s: State, dt: float, n_steps: int = 1, cfl: float = 0.45) -> State:
    """Advance a radial state by n_steps explicit steps of size dt."""
    ev = RadialWaveEvolver(s.grid, cfl)
    w, v = ev.state_to_wv(s)
    w, v, _ = ev.steps(w, v, n_steps, dt)
    return ev.wv_to_state(w, v)


def staticity_residual(s: State) -> float:
    """||u_tt||_2 at t = 0 under the discrete interior operator.

    The two outer closure rows are excluded: they encode the outgoing
    radiation condition, which is not exactly compatible with a static
    power-law tail (its slow erosion is a boundary effect, not a failure
    of staticity).
    """
    ev = RadialWaveEvolver(s.grid)
    w, v = ev.state_to_wv(s)
    acc = ev.force(w, v) / ev.r
    acc[-2:] = 0.0
    return math.sqrt(l2_norm_sq(RadialField(s.grid, acc)))


# ---------------------------------------------------------------------------
# monitors and records
# ---------------------------------------------------------------------------

_SERIES_KEYS = ("t", "tau", "E", "K", "dW", "lambda1", "sigma", "Eext",
                "Vw", "equip")
_EXTRA_KEYS = ("lambda2", "norm_H", "free_ratio", "gamma_norm", "sign", "d0",
               "u2_sq")


@dataclass
class DirectionRun:
    """Monitor series and verdict of a single time direction."""

    series: dict
    verdict: str
    detail: dict
    ejection_rate: float = math.nan

    def arr(self, key: str) -> np.ndarray:
        return np.asarray(self.series[key])


@dataclass
class TrajectoryRecord:
    """Two-sided monitor series (t < 0 is the backward direction) plus
    per-direction verdicts; series carry the true solution's values."""

    times: np.ndarray
    series: dict
    verdict_forward: str
    verdict_backward: str
    detail_forward: dict
    detail_backward: dict
    ejection_rate_forward: float = math.nan
    ejection_rate_backward: float = math.nan
    config: EvolutionConfig | None = None

    def column(self, key: str) -> np.ndarray:
        return np.asarray(self.series[key])

    def forward_mask(self) -> np.ndarray:
        return self.times >= 0

    def to_csv(self, path) -> None:
        cols = [self.column(k) for k in _SERIES_KEYS]
        with open(path, "w") as fh:
            fh.write(",".join(_SERIES_KEYS) + "\n")
            for row in zip(*cols):
                fh.write(",".join(_fmt(x) for x in row) + "\n")

    def to_extended_csv(self, path) -> None:
        keys = _SERIES_KEYS + _EXTRA_KEYS
        cols = [self.column(k) for k in keys]
        with open(path, "w") as fh:
            fh.write(",".join(keys) + "\n")
            for row in zip(*cols):
                fh.write(",".join(_fmt(x) for x in row) + "\n")

    def verdict_sidecar(self) -> dict:
        return {
            "verdict_forward": self.verdict_forward,
            "verdict_backward": self.verdict_backward,
            "ejection_rate_forward": _json_num(self.ejection_rate_forward),
            "ejection_rate_backward": _json_num(self.ejection_rate_backward),
            "detail_forward": self.detail_forward,
            "detail_backward": self.detail_backward,
        }

    def save_verdict(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.verdict_sidecar(), fh, indent=1, sort_keys=True,
                      default=_to_jsonable)
            fh.write("\n")


def _fmt(x) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def _json_num(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return None
    return float(x)


def _to_jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return _json_num(float(x))
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON-serializable: {type(x)}")


class _MonitorState:
    """Carries fit seeds and tau accumulation between monitor times."""

    def __init__(self, cfg: EvolutionConfig, thresholds: Thresholds):
        self.cfg = cfg
        self.th = thresholds
        self.sigma_seed = 0.0
        self.sign_seed: int | None = None
        self.tau = 0.0
        self.tau_valid = True
        self.last_fit_t = math.nan
        self.last_sigma = math.nan
        self.gap = 0


def _attempt_fit(s: State, spec: SpectralData, mon: _MonitorState):
    """Try the modulation solve near the family; None when clearly far."""
    th = mon.th
    # cheap proximity proxy at the seeded (sign, sigma)
    signs = (mon.sign_seed,) if mon.sign_seed is not None else (+1, -1)
    prox = min(_manifold_distance_sq(spec, s, sg, mon.sigma_seed)
               for sg in signs)
    if math.sqrt(max(prox, 0.0)) * th.C_d0 > 1.5 * th.delta_A:
        return None
    try:
        fit = fit_modulation(s, spec, th, sign_hint=mon.sign_seed,
                             sigma0=mon.sigma_seed)
    except FitError:
        return None
    if not fit.converged:
        return None
    mon.sigma_seed = fit.sigma
    mon.sign_seed = fit.sign_s
    return fit


def _monitor_row(s: State, t: float, spec: SpectralData, mon: _MonitorState,
                 jref: float) -> dict:
    cfg, th = mon.cfg, mon.th
    g = s.grid
    row: dict = {"t": t}
    fit = _attempt_fit(s, spec, mon)
    rep = distance_dW(s, spec, th, fit=fit) if fit is not None else None
    if rep is None:
        from .modulation import manifold_distance
        d0 = th.C_d0 * manifold_distance(spec, s)
        row.update({"dW": d0, "d0": d0, "lambda1": math.nan,
                    "lambda2": math.nan, "sigma": math.nan,
                    "gamma_norm": math.nan})
        sigma_now = math.nan
    else:
        ms = split_modes(fit, spec)
        row.update({"dW": rep.dW, "d0": rep.d0, "lambda1": ms.lambda1,
                    "lambda2": ms.lambda2, "sigma": fit.sigma,
                    "gamma_norm": norm_H(ms.gamma)})
        sigma_now = fit.sigma
    # tau accumulation: trapezoid of e^sigma across converged stretches
    if not math.isnan(sigma_now):
        if not math.isnan(mon.last_sigma):
            if mon.gap <= 5:
                dt_gap = t - mon.last_fit_t
                mon.tau += 0.5 * (math.exp(mon.last_sigma)
                                  + math.exp(sigma_now)) * dt_gap
            else:
                mon.tau_valid = False
        mon.last_sigma = sigma_now
        mon.last_fit_t = t
        mon.gap = 0
    else:
        mon.gap += 1
        if mon.gap > 5:
            mon.tau_valid = False
    row["tau"] = mon.tau if mon.tau_valid and not math.isnan(sigma_now) else math.nan

    e_val = energy_E(s)
    k_val = functional_K(s.u1)
    nham = norm_H(s)
    row.update({"E": e_val, "K": k_val, "norm_H": nham,
                "u2_sq": l2_norm_sq(s.u2)})
    row["free_ratio"] = crit_norm(s.u1) / max(nham * nham, 1e-300)
    # exterior energy beyond the light cone of the nominal support
    r_cut = cfg.support_radius + abs(t) + _EXT_PAD
    row["Eext"] = _exterior_energy(s, r_cut)
    # localized virial and equipartition brackets
    wcut = smooth_cutoff(g.r / (abs(t) + cfg.cone_S))
    du = s.u1.deriv()
    lam0_u = g.r * du + 1.5 * s.u1.values
    row["Vw"] = g.quad_meas(wcut * s.u2.values * lam0_u)
    row["equip"] = g.quad_meas(wcut * s.u2.values * s.u1.values)
    # fate sign where defined (0 when neither rule applies); sign 0 = +1
    sign = 0
    if rep is not None and rep.dW <= th.delta_E and fit is not None:
        sign = +1 if row["lambda1"] < 0 else -1
    elif row["dW"] >= th.delta_S:
        sign = -1 if k_val < 0 else +1
    row["sign"] = sign
    return row


def exterior_energy(s: State, r_cut: float) -> float:
    """||u_vec||^2 in the energy seminorm restricted to r > r_cut."""
    g = s.grid
    mask = g.r > r_cut
    if not np.any(mask):
        return 0.0
    du = s.u1.deriv()
    return float(np.sum(g.w_meas[mask] * (du[mask] ** 2 + s.u2.values[mask] ** 2)))


_exterior_energy = exterior_energy


# ---------------------------------------------------------------------------
# single-direction evolution
# ---------------------------------------------------------------------------

def evolve_direction(state0: State, cfg: EvolutionConfig, spec: SpectralData,
                     thresholds: Thresholds | None = None) -> DirectionRun:
    """Integrate forward in time with monitors and classify the outcome."""
    th = thresholds or Thresholds()
    ev = RadialWaveEvolver(state0.grid, cfg.cfl)
    w, v = ev.state_to_wv(state0)
    jref = reference_J(spec, state0.grid)
    mon = _MonitorState(cfg, th)
    norm0 = norm_H(state0)
    threshold = cfg.blowup_norm_mult * max(norm0, cfg.blowup_norm_floor)
    rows: list[dict] = []
    checkpoints: list[tuple[float, np.ndarray, np.ndarray]] = []
    t = 0.0
    exceeded_at = None
    stepper_floor = False
    nan_seen = False

    def record(tnow, wnow, vnow):
        s = ev.wv_to_state(wnow, vnow)
        rows.append(_monitor_row(s, tnow, spec, mon, jref))
        return rows[-1]

    while True:
        amp = float(np.max(np.abs(w / ev.r)))
        if not math.isfinite(amp):
            nan_seen = True
            break
        row = record(t, w, v)
        if not math.isfinite(row["norm_H"]):
            nan_seen = True
            break
        checkpoints.append((t, w.copy(), v.copy()))
        if len(checkpoints) > 24:
            checkpoints.pop(0)
        if row["norm_H"] > threshold or amp > _MAX_SAFE_AMP:
            exceeded_at = t
            break
        if t >= cfg.t_max - 1e-9 * max(1.0, cfg.t_max):
            break
        if _scatter_now(rows, cfg, th):
            break
        # advance one monitor stride with amplitude-limited dt
        t_target = min(t + cfg.monitor_stride, cfg.t_max)
        while t < t_target - 1e-12:
            dt_cap = _nl_dt_cap(amp, ev.dt0)
            if dt_cap < ev.dt0 / cfg.dt_floor_factor:
                stepper_floor = True
                break
            dt = min(dt_cap, t_target - t)
            w, v, _ = ev.steps(w, v, 1, dt)
            t += dt
            amp = float(np.max(np.abs(w[::8] / ev.r[::8])))
            if not math.isfinite(amp) or amp > _MAX_SAFE_AMP:
                break
        if stepper_floor:
            exceeded_at = t
            break

    series = {k: np.array([r.get(k, math.nan) for r in rows])
              for k in _SERIES_KEYS + _EXTRA_KEYS}
    verdict, detail = _classify(series, cfg, th, exceeded_at, nan_seen,
                                stepper_floor, checkpoints, ev, threshold, spec)
    run = DirectionRun(series=series, verdict=verdict, detail=detail)
    try:
        run.ejection_rate = fit_ejection_rate(series, spec, th)["rate"]
    except (ValueError, RuntimeError):
        run.ejection_rate = math.nan
    return run


def _nl_dt_cap(amp: float, dt0: float) -> float:
    """Stability cap from the instantaneous nonlinear frequency sqrt(5) u^2."""
    if amp <= 0 or not math.isfinite(amp):
        return dt0
    omega = math.sqrt(5.0) * amp * amp
    return min(dt0, 0.35 / max(omega, 1e-300))


def _scatter_now(rows: list[dict], cfg: EvolutionConfig, th: Thresholds) -> bool:
    if not rows or rows[-1]["t"] < cfg.scatter_window * 1.5:
        return False
    t_hi = rows[-1]["t"]
    window = [r for r in rows if r["t"] >= t_hi - cfg.scatter_window]
    if len(window) < 4:
        return False
    return _window_scatters(window, cfg, th)


def _window_scatters(window: list[dict], cfg: EvolutionConfig,
                     th: Thresholds) -> bool:
    norms = [r["norm_H"] for r in window]
    return (all(r["K"] > 0 for r in window)
            and all(r["dW"] >= th.delta_star for r in window)
            and max(norms) <= 1.25 * max(min(norms), 1e-12)
            and all(r["free_ratio"] < cfg.free_ratio_threshold for r in window))


def _classify(series, cfg, th, exceeded_at, nan_seen, stepper_floor,
              checkpoints, ev, threshold, spec):
    detail: dict = {"threshold": threshold, "t_last": float(series["t"][-1])
                    if len(series["t"]) else 0.0}
    if nan_seen or exceeded_at is not None:
        confirmed, info = _confirm_blowup(checkpoints, ev, cfg, threshold)
        detail.update(info)
        detail["exceeded_at"] = _json_num(exceeded_at if exceeded_at is not None
                                          else detail["t_last"])
        detail["stepper_floor"] = bool(stepper_floor)
        return (BLOWUP if confirmed else UNDETERMINED), detail
    # scattering over the trailing window
    t_arr = series["t"]
    if len(t_arr) >= 4:
        t_hi = float(t_arr[-1])
        mask = t_arr >= t_hi - cfg.scatter_window
        window = [{k: float(series[k][i]) for k in
                   ("t", "K", "dW", "norm_H", "free_ratio")}
                  for i in np.nonzero(mask)[0]]
        if len(window) >= 4 and _window_scatters(window, cfg, th):
            detail["scatter_window_start"] = t_hi - cfg.scatter_window
            return SCATTER, detail
    detail["reason"] = "horizon reached without confirmed escape or dispersal"
    return UNDETERMINED, detail


def _confirm_blowup(checkpoints, ev: RadialWaveEvolver, cfg: EvolutionConfig,
                    threshold: float):
    """Re-run the tail window on a refined grid and a halved step.

    Norm escape must persist under refinement to count as blow-up.
    """
    if not checkpoints:
        return False, {"confirmed": False, "reason": "no checkpoint"}
    t_back = checkpoints[-1][0] - cfg.confirm_window
    start = checkpoints[0]
    for cp in checkpoints:
        if cp[0] <= t_back:
            start = cp
    t0, w0, v0 = start
    fine = RadialGrid(3, ev.grid.r_max, ev.grid.n * cfg.confirm_refine, "uniform")
    ev2 = RadialWaveEvolver(fine, 0.5 * (ev.dt0 / ev.h))
    w = _resample_w(ev.grid.r, w0, fine.r)
    v = _resample_w(ev.grid.r, v0, fine.r)
    t = t0
    horizon = checkpoints[-1][0] + cfg.confirm_window
    peak = 0.0
    prev_norm = None
    growing = False
    while t < horizon:
        amp = float(np.max(np.abs(w / ev2.r)))
        if not math.isfinite(amp) or amp > _MAX_SAFE_AMP:
            return True, {"confirmed": True, "mode": "overflow on refined grid",
                          "t_confirm": t}
        nrm = math.sqrt(max(h1_seminorm_sq(RadialField(fine, w / fine.r))
                            + l2_norm_sq(RadialField(fine, v / fine.r)), 0.0))
        peak = max(peak, nrm)
        if prev_norm is not None:
            growing = nrm > prev_norm
        prev_norm = nrm
        if nrm > threshold and growing:
            return True, {"confirmed": True, "mode": "norm escape on refined grid",
                          "t_confirm": t, "refined_norm": nrm}
        dt = min(ev2.dt0, _nl_dt_cap(amp, ev2.dt0))
        if dt < ev2.dt0 / cfg.dt_floor_factor:
            return True, {"confirmed": True, "mode": "stepper floor on refined grid",
                          "t_confirm": t}
        nsub = max(int(round(min(cfg.monitor_stride, horizon - t) / dt)), 1)
        w, v, _ = ev2.steps(w, v, nsub, dt)
        t += nsub * dt
    return False, {"confirmed": False, "peak_refined_norm": peak,
                   "reason": "refined run did not sustain escape"}


def _resample_w(r_old, w_old, r_new):
    spl = CubicSpline(np.concatenate([[0.0], r_old]),
                      np.concatenate([[0.0], w_old]))
    return np.asarray(spl(np.clip(r_new, 0.0, r_old[-1])))


# ---------------------------------------------------------------------------
# two-sided evolution
# ---------------------------------------------------------------------------

def evolve_with_monitors(state0: State, cfg: EvolutionConfig,
                         spec: SpectralData,
                         thresholds: Thresholds | None = None) -> TrajectoryRecord:
    """Forward plus backward (time-reversed) evolution with monitors.

    The combined series carries the true solution's values at signed times:
    odd quantities (lambda2, tau, Vw, equip) flip sign on the backward half.
    """
    th = thresholds or Thresholds()
    fwd = evolve_direction(state0, cfg, spec, th)
    bwd = evolve_direction(state0.time_reversed(), cfg, spec, th)
    series: dict = {}
    for key in _SERIES_KEYS + _EXTRA_KEYS:
        fb = np.asarray(bwd.series[key], dtype=float)[::-1]
        ff = np.asarray(fwd.series[key], dtype=float)
        if key in ("t", "tau", "lambda2", "Vw", "equip"):
            fb = -fb
        series[key] = np.concatenate([fb[:-1], ff]) if len(fb) else ff
    return TrajectoryRecord(
        times=series["t"], series=series,
        verdict_forward=fwd.verdict, verdict_backward=bwd.verdict,
        detail_forward=fwd.detail, detail_backward=bwd.detail,
        ejection_rate_forward=fwd.ejection_rate,
        ejection_rate_backward=bwd.ejection_rate,
        config=cfg)


# ---------------------------------------------------------------------------
# post-processing: detectors, ejection fit, modulation residual
# ---------------------------------------------------------------------------

def detect_blowup(run: DirectionRun) -> bool:
    return run.verdict == BLOWUP


def detect_scattering(run: DirectionRun) -> bool:
    return run.verdict == SCATTER


def fit_ejection_rate(series: dict, spec: SpectralData,
                      thresholds: Thresholds | None = None,
                      window: tuple[float, float] | None = None) -> dict:
    """Least-squares slope of log|lambda_1| against tau on the ejection window.

    The window keeps cosh/sinh transients out (|lambda_1| above a multiple
    of its initial size) and stops at delta_H / 2 where quadratic
    corrections set in; monotonicity of d_W and the scale-drift bound
    |sigma - sigma_0| <= C_sigma d_W are asserted alongside.
    """
    th = thresholds or Thresholds()
    tau = np.asarray(series["tau"], dtype=float)
    lam1 = np.asarray(series["lambda1"], dtype=float)
    lam2 = np.asarray(series["lambda2"], dtype=float)
    dw = np.asarray(series["dW"], dtype=float)
    sig = np.asarray(series["sigma"], dtype=float)
    ok = np.isfinite(tau) & np.isfinite(lam1) & np.isfinite(dw)
    if window is None:
        # transient floor: 5x the linearized amplitude scale at tau = 0
        if np.any(ok):
            i0 = int(np.nonzero(ok)[0][0])
            scale0 = max(abs(lam1[i0]),
                         abs(lam2[i0]) / spec.k if math.isfinite(lam2[i0]) else 0.0)
        else:
            scale0 = math.nan
        lam_lo = max(5.0 * scale0, 1e-7)
        dw_hi = 0.5 * th.delta_H
    else:
        lam_lo, dw_hi = window
    sel = ok & (np.abs(lam1) >= lam_lo) & (dw <= dw_hi)
    if np.count_nonzero(sel) < 5:
        raise ValueError(f"ejection window too short ({np.count_nonzero(sel)} points)")
    x, y = tau[sel], np.log(np.abs(lam1[sel]))
    slope, intercept = np.polyfit(x, y, 1)
    dsel = dw[sel]
    monotone = bool(np.all(np.diff(dsel) > -1e-10))
    sig_sel = sig[sel]
    sigma_drift_ok = bool(np.all(np.abs(sig_sel - sig_sel[0])
                                 <= th.C_sigma * dsel + 1e-12))
    return {"rate": float(slope), "rate_over_k": float(slope / spec.k),
            "n_points": int(np.count_nonzero(sel)),
            "dW_monotone": monotone, "sigma_drift_ok": sigma_drift_ok,
            "tau_span": float(x[-1] - x[0])}


def modulation_ode_residual(series: dict, spec: SpectralData,
                            thresholds: Thresholds | None = None) -> dict:
    """Residual of d lambda_1 / d tau = lambda_2 + sigma_tau lambda_1.

    Centered differences on the recorded monitor series; also verifies the
    drift bound |sigma_tau| <= C ||gamma||_H on the same segment.
    """
    th = thresholds or Thresholds()
    tau = np.asarray(series["tau"], dtype=float)
    lam1 = np.asarray(series["lambda1"], dtype=float)
    lam2 = np.asarray(series["lambda2"], dtype=float)
    sig = np.asarray(series["sigma"], dtype=float)
    gam = np.asarray(series["gamma_norm"], dtype=float)
    ok = np.isfinite(tau) & np.isfinite(lam1) & np.isfinite(lam2) & np.isfinite(sig)
    idx = np.nonzero(ok)[0]
    resid = []
    sigma_tau_vals = []
    gamma_vals = []
    lam2_scale = []
    for j in range(1, len(idx) - 1):
        i0, i1, i2 = idx[j - 1], idx[j], idx[j + 1]
        dtau = tau[i2] - tau[i0]
        if dtau <= 0:
            continue
        dl1 = (lam1[i2] - lam1[i0]) / dtau
        st = (sig[i2] - sig[i0]) / dtau
        resid.append(abs(dl1 - (lam2[i1] + st * lam1[i1])))
        sigma_tau_vals.append(abs(st))
        gamma_vals.append(gam[i1])
        lam2_scale.append(abs(lam2[i1]))
    if not resid:
        raise ValueError("no converged segment for the residual check")
    resid = np.asarray(resid)
    scale = np.maximum(np.asarray(lam2_scale), 1e-12)
    return {"max_abs_residual": float(np.max(resid)),
            "max_rel_residual": float(np.max(resid / scale)),
            "median_rel_residual": float(np.median(resid / scale)),
            "sigma_tau_max": float(np.max(sigma_tau_vals)),
            "sigma_tau_over_gamma": float(np.max(
                np.asarray(sigma_tau_vals)
                / np.maximum(np.asarray(gamma_vals), 1e-12)))}


def one_pass_check(record: TrajectoryRecord,
                   thresholds: Thresholds | None = None) -> dict:
    """Shadow of the one-pass property on a recorded trajectory.

    Violation: the d_W series exits above delta_*, re-enters below it, and
    the recorded fate sign differs across the excursion.
    """
    th = thresholds or Thresholds()
    dw = record.column("dW")
    sign = record.column("sign")
    ok = np.isfinite(dw)
    dw, sign = dw[ok], sign[ok]
    n_changes = 0
    last = 0
    for s in sign:
        if s != 0 and last != 0 and s != last:
            n_changes += 1
        if s != 0:
            last = s
    violations = 0
    exited = False
    sign_at_exit = 0
    cur = 0
    for d, s in zip(dw, sign):
        if s != 0:
            cur = s
        if d > th.delta_star and not exited:
            exited = True
            sign_at_exit = cur
        elif d < th.delta_star and exited:
            if cur != 0 and sign_at_exit != 0 and cur != sign_at_exit:
                violations += 1
            exited = False
    return {"ok": violations == 0 and n_changes <= 1,
            "sign_changes": n_changes, "reentry_violations": violations}
