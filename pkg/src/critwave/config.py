"""Configuration dataclasses and the flat key=value config format.

Threshold values are empirical calibrations, not ground truth: the capture
radius delta_A is set where the modulation solve converges reliably, and
the remaining radii keep the ordering
eps_* << delta_* << delta_S < delta_H < delta_E < delta_A.
The experiment amplitude cap eps_star is configured independently of the
delta chain so that the four-quadrant sweep can run amplitudes up to 1e-2.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace


@dataclass(frozen=True)
class Thresholds:
    """Neighborhood radii and calibration constants for the distance/sign
    machinery (all dimensionless, calibrated at the default resolution)."""

    delta_A: float = 0.8          # capture radius of the modulation solve
    delta_E: float = 0.2          # inner region: d_W <= delta_E uses d_1
    delta_H: float = 0.05         # ejection scale
    delta_S: float = 0.0125       # outer sign rule applies for d_W >= delta_S
    delta_star: float = 0.003125  # one-pass exit radius
    eps_star: float = 0.0125      # energy band / experiment amplitude cap
    C_d0: float = 1.2444          # calibrated so d_0 = d_1 at d_1 = delta_E/2
    C_sigma: float = 1.5          # |sigma(t)-sigma(t0)| <= C_sigma d_W bound
    L_dW: float = 2.0             # sampled Lipschitz constant of d_W (max seen 1.04)
    K_expansion_const: float = 15.0  # |K(W+v)+ (2*-2)<W^(2*-1)|v>| <= C ||v||^2 (max seen 7.2)
    tol_orth: float = 1e-8        # relative orthogonality tolerance of a fit
    newton_max_iters: int = 30
    sign_ambiguity_margin: float = 0.10


@dataclass(frozen=True)
class EvolutionConfig:
    """Radial evolution engine configuration (d = 3)."""

    n: int = 12288
    r_max: float = 96.0
    cfl: float = 0.45
    t_max: float = 50.0
    monitor_stride: float = 0.25
    blowup_norm_mult: float = 6.0      # threshold = mult * max(||u(0)||_H, floor)
    blowup_norm_floor: float = 4.0
    scatter_window: float = 8.0
    free_ratio_threshold: float = 0.02
    cone_S: float = 25.0               # cutoff offset in w(t,r) = chi(r/(t+S))
    support_radius: float = 30.0       # nominal data support for E_ext
    dt_floor_factor: float = 4096.0    # give up once dt < dt0 / factor
    confirm_refine: int = 2
    confirm_window: float = 3.0
    seed: int = 20240801

    @property
    def dx(self) -> float:
        return self.r_max / self.n

    @property
    def dt(self) -> float:
        return self.cfl * self.dx


_SECTION_MAP = {"thresholds": Thresholds, "evolution": EvolutionConfig}


def _coerce(example, text: str):
    if isinstance(example, bool):
        return text.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(example, int):
        return int(text)
    if isinstance(example, float):
        return float(text)
    return text


def load_config(path) -> dict:
    """Read a flat key = value config with [thresholds] / [evolution] sections.

    Unknown sections are returned verbatim as string dicts (experiment
    recipes consume them).
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    with open(path) as fh:
        parser.read_file(fh)
    out: dict = {}
    for section in parser.sections():
        items = dict(parser.items(section))
        cls = _SECTION_MAP.get(section)
        if cls is None:
            out[section] = items
            continue
        base = cls()
        kwargs = {}
        # configparser lowercases option names; match fields case-blind
        by_lower = {f.name.lower(): f.name for f in fields(cls)}
        for key in list(items):
            name = by_lower.get(key)
            if name is not None:
                kwargs[name] = _coerce(getattr(base, name), items.pop(key))
        if items:
            raise ValueError(f"unknown keys in [{section}]: {sorted(items)}")
        out[section] = replace(base, **kwargs)
    return out


def save_config(path, sections: dict) -> None:
    parser = configparser.ConfigParser()
    for name, value in sections.items():
        if hasattr(value, "__dataclass_fields__"):
            parser[name] = {f.name: repr(getattr(value, f.name))
                            for f in fields(value)}
        else:
            parser[name] = {k: str(v) for k, v in value.items()}
    with open(path, "w") as fh:
        parser.write(fh)
