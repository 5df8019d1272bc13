"""
Experiment runners behind the command line.

Each runner reads a scene file, applies overrides, and writes CSV tables
(plus waveform/filter artifacts for the design runs) into ``output_dir``.
Every row carries the seed and the scene parameters, and float columns
are written with ``repr`` so reruns with the same seed are byte-identical.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import qsinr as qs
from .files import ensure_dir, load_filter, load_scene, load_waveform, save_filter, save_waveform
from .greet import GreetConfig, greet, mvdr_filter
from .montecarlo import (McConfig, exceedance_curve, moment_error_mc, moment_error_exact,
                         sigma_in_sq_mc, simulate_outputs, qsinr_mc)
from .radar_model import (RadarScene, TargetModel, apply_channel, db,
                          matched_phase_onebit_waveform, phase_matched_waveform,
                          transmit_beampattern)

log = logging.getLogger(__name__)

KINDS = ("noise-only-loss", "detection-curves", "codesign", "mc-validate", "uncertainty-sweep")


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    scene_path: str
    output_dir: str
    seed: int = 0
    overrides: Tuple[str, ...] = ()
    trials: int = 2000
    grid: Optional[str] = None
    greet: GreetConfig = field(default_factory=GreetConfig)
    workers: int = 1
    pf: float = 1e-2
    waveform_path: Optional[str] = None
    filter_path: Optional[str] = None
    n_seeds: int = 3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")

    def scene(self) -> RadarScene:
        return load_scene(self.scene_path, self.overrides)

    def mc(self, seed_offset: int = 0) -> McConfig:
        return McConfig(trials=self.trials, seed=self.seed + seed_offset, workers=self.workers)


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def parse_values(text: str) -> List[float]:
    """``"1,2,5"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        a, b, c = (float(x) for x in text.split(":"))
        if c <= 0:
            raise ValueError("grid step must be positive")
        n = int(math.floor((b - a) / c + 1e-9)) + 1
        return [a + i * c for i in range(n)]
    return [float(x) for x in text.split(",") if x.strip()]


def parse_grid(text: Optional[str], defaults: Dict[str, Sequence[float]]) -> Dict[str, List[float]]:
    """``"key=values;key=values"``; unknown keys are rejected."""
    out = {k: list(v) for k, v in defaults.items()}
    if not text:
        return out
    for part in text.split(";"):
        if not part.strip():
            continue
        if "=" not in part:
            if len(defaults) != 1:
                raise ValueError(f"grid entry {part!r} needs a key")
            key, vals = next(iter(defaults)), part
        else:
            key, vals = part.split("=", 1)
            key = key.strip()
        if key not in defaults:
            raise ValueError(f"unknown grid key {key!r}; expected {sorted(defaults)}")
        out[key] = parse_values(vals)
    return out


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return x


def write_csv(path, rows: List[dict]) -> Path:
    path = Path(path)
    cols: List[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(cols)
        for r in rows:
            wr.writerow([_fmt(r.get(c)) for c in cols])
    return path


def scene_columns(scene: RadarScene) -> dict:
    ints = "|".join(
        f"{math.degrees(math.asin(src.mean_normalized_angle))!r}:{10 * math.log10(src.power)!r}:{src.uncertainty!r}"
        for src in scene.interferences)
    return {"n_tx": scene.geometry.n_tx, "n_rx": scene.geometry.n_rx,
            "code_length": scene.code_length,
            "theta0_deg": math.degrees(scene.target.angle),
            "target_kind": scene.target.kind,
            "target_power_db": 10 * math.log10(scene.target.power),
            "noise_power": float(scene.noise_power),
            "interference": ints}


def greet_columns(cfg: GreetConfig) -> dict:
    return {"rho1": float(cfg.rho1), "rho2": float(cfg.rho2),
            "admm_iters": cfg.max_admm_iters, "alt_iters": cfg.max_altopt_iters}


def with_target_power(scene: RadarScene, power: float) -> RadarScene:
    t = scene.target
    if t.kind == "nft":
        new = TargetModel(t.angle, "nft", amplitude=math.sqrt(power))
    else:
        new = TargetModel(t.angle, t.kind, variance=power)
    return scene.replace(target=new)


def with_interference(scene: RadarScene, power: Optional[float] = None,
                      delta: Optional[float] = None) -> RadarScene:
    srcs = tuple(replace(src,
                         power=src.power if power is None else power,
                         uncertainty=src.uncertainty if delta is None else delta)
                 for src in scene.interferences)
    return scene.replace(interferences=srcs)


def _design_source(spec: ExperimentSpec, scene: RadarScene):
    if spec.waveform_path:
        s = load_waveform(spec.waveform_path)
    else:
        s = matched_phase_onebit_waveform(scene.geometry, scene.target.angle, scene.code_length)
    w = load_filter(spec.filter_path) if spec.filter_path else mvdr_filter(s, scene)
    return s, w


def _mc_feasible(pf: float, trials: int) -> bool:
    return pf >= 10.0 / trials


# --------------------------------------------------------------------------
# runners
# --------------------------------------------------------------------------

def run_noise_only_loss(spec: ExperimentSpec) -> Path:
    """Infinite/one-bit DAC x ADC combinations over an ``N_r L`` grid."""
    base = spec.scene()
    if base.n_interferences:
        raise ValueError("noise-only-loss needs a scene without interference")
    grid = parse_grid(spec.grid, {"nrl": [100, 200, 500, 1000, 2000]})
    geom, theta = base.geometry, base.target.angle
    snr = base.target.power / base.noise_power
    rows = []
    for i, nrl in enumerate(grid["nrl"]):
        L = max(1, int(round(nrl / geom.n_rx)))
        scene = base.replace(code_length=L)
        s_inf = phase_matched_waveform(geom, theta, L)
        s_one = matched_phase_onebit_waveform(geom, theta, L)
        F = transmit_beampattern(geom, s_one, theta)
        omega = math.sin(theta)
        c3, se3 = qsinr_mc(apply_channel(geom, omega, s_inf), s_inf, scene, spec.mc(2 * i))
        c4, se4 = qsinr_mc(apply_channel(geom, omega, s_one), s_one, scene, spec.mc(2 * i + 1))
        rows.append({"NrL": geom.n_rx * L,
                     "C1_db": db(snr), "C2_db": db(snr * F),
                     "C3_db": db(2 / math.pi * snr), "C4_db": db(2 / math.pi * snr * F),
                     "C3_mc_db": db(c3) if c3 > 0 else None,
                     "C4_mc_db": db(c4) if c4 > 0 else None,
                     "C3_stderr_db": 10 / math.log(10) * se3 / c3 if c3 > 0 else None,
                     "C4_stderr_db": 10 / math.log(10) * se4 / c4 if c4 > 0 else None,
                     "trials": spec.trials, "seed": spec.seed, **scene_columns(scene)})
    return write_csv(Path(ensure_dir(spec.output_dir)) / "noise_loss.csv", rows)


def run_detection_curves(spec: ExperimentSpec) -> Tuple[Path, Path]:
    """``P_f`` versus threshold and ``P_d`` versus target power."""
    scene = spec.scene()
    out = ensure_dir(spec.output_dir)
    s, w = _design_source(spec, scene)
    grid = parse_grid(spec.grid, {"power_db": parse_values("-10:20:2"),
                                  "pf": list(np.geomspace(1.0, 1e-3, 20))})
    sin2 = qs.sigma_in_sq(w, s, scene)
    params = scene_columns(scene)

    z0, _ = simulate_outputs(w, s, scene, spec.mc(0))
    pf_rows = []
    for p in grid["pf"]:
        T = qs.threshold_for_pf(p, sin2)
        row = {"threshold": T, "pf_analytic": qs.pf(T, sin2), "pf_mc": None, "stderr": None}
        if _mc_feasible(p, spec.trials):
            (pm,), (se,) = exceedance_curve(z0, [T])
            row.update(pf_mc=float(pm), stderr=float(se))
        else:
            log.warning("P_f=%g below 10/trials: analytic only", p)
        pf_rows.append({**row, "trials": spec.trials, "seed": spec.seed, **params})

    do_mc = _mc_feasible(spec.pf, spec.trials)
    if not do_mc:
        log.warning("P_f=%g below 10/trials: P_d curve is analytic only", spec.pf)
    T = qs.threshold_for_pf(spec.pf, sin2)
    pd_rows = []
    for i, p_db in enumerate(grid["power_db"]):
        sc = with_target_power(scene, 10 ** (p_db / 10))
        rep = qs.detection_report(w, s, sc, spec.pf)
        b0 = rep.beta0
        row = {"target_power_db": p_db, "qsinr_db": db(rep.qsinr), "pf": spec.pf,
               "pd_rft": qs.pd_rft(spec.pf, sc.target.power, b0, rep.sigma_in_sq),
               "pd_nft": qs.pd_nft(spec.pf, math.sqrt(sc.target.power), b0, rep.sigma_in_sq),
               "pd_mc": None, "stderr": None}
        if do_mc:
            _, z1 = simulate_outputs(w, s, sc, spec.mc(1 + i))
            (pm,), (se,) = exceedance_curve(z1, [T])
            row.update(pd_mc=float(pm), stderr=float(se))
        pd_rows.append({**row, "trials": spec.trials, "seed": spec.seed,
                        **{k: v for k, v in params.items() if k != "target_power_db"}})
    return (write_csv(out / "pf_curve.csv", pf_rows), write_csv(out / "pd_curve.csv", pd_rows))


def _greet_cell(args):
    scene, cfg = args
    w, s, diag = greet(scene, cfg)
    return w, s, diag


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_codesign(spec: ExperimentSpec) -> Path:
    """GREET over an (interference power, angle uncertainty) grid."""
    base = spec.scene()
    if not base.n_interferences:
        raise ValueError("codesign needs a scene with at least one interference")
    out = ensure_dir(spec.output_dir)
    grid = parse_grid(spec.grid, {"power_db": [10 * math.log10(base.interferences[0].power)],
                                  "delta": [0.0, 0.1, 0.2]})
    cells = [(p, d) for p in grid["power_db"] for d in grid["delta"]]
    cfg = replace(spec.greet, seed=spec.seed)
    scenes = [with_interference(base, 10 ** (p / 10), d) for p, d in cells]
    results = _map(_greet_cell, [(sc, cfg) for sc in scenes], spec.workers)

    rows = []
    for i, ((p, d), sc, (w, s, diag)) in enumerate(zip(cells, scenes, results)):
        tag = f"cell{i:03d}"
        save_waveform(s, out / f"{tag}_waveform.yaml")
        save_filter(w, out / f"{tag}_filter.csv")
        diag.to_csv(out / f"{tag}_diagnostics.csv")
        m = matched_phase_onebit_waveform(sc.geometry, sc.target.angle, sc.code_length)
        rows.append({"cell": tag, "interference_power_db": p, "delta": d,
                     "initial_qsinr_db": db(diag.qsinr_trace[0]),
                     "final_qsinr_db": db(diag.qsinr_trace[-1]),
                     "matched_mvdr_qsinr_db": db(qs.qsinr(mvdr_filter(m, sc), m, sc)),
                     "final_residual_d": diag.residual_d[-1],
                     "final_residual_c1": diag.residual_c1[-1],
                     "final_residual_c2": diag.residual_c2[-1],
                     "seed": spec.seed, **greet_columns(cfg), **scene_columns(sc)})
    return write_csv(out / "codesign.csv", rows)


def run_uncertainty_sweep(spec: ExperimentSpec) -> Tuple[Path, Path]:
    """GREET from several seeds at each angle uncertainty; per-run and summary tables."""
    base = spec.scene()
    if not base.n_interferences:
        raise ValueError("uncertainty-sweep needs a scene with at least one interference")
    out = ensure_dir(spec.output_dir)
    grid = parse_grid(spec.grid, {"delta": [0.0, 0.1, 0.2]})
    seeds = [spec.seed + k for k in range(spec.n_seeds)]
    jobs = [(with_interference(base, delta=d), replace(spec.greet, seed=sd))
            for d in grid["delta"] for sd in seeds]
    results = _map(_greet_cell, jobs, spec.workers)

    rows, summary = [], []
    for j, ((sc, cfg), (w, s, diag)) in enumerate(zip(jobs, results)):
        d = grid["delta"][j // len(seeds)]
        rows.append({"delta": d, "run_seed": cfg.seed, "final_qsinr_db": db(diag.qsinr_trace[-1]),
                     "initial_qsinr_db": db(diag.qsinr_trace[0]), "seed": spec.seed,
                     **greet_columns(cfg), **scene_columns(sc)})
    for k, d in enumerate(grid["delta"]):
        vals = [r["final_qsinr_db"] for r in rows[k * len(seeds):(k + 1) * len(seeds)]]
        lin = np.mean([10 ** (v / 10) for v in vals])
        summary.append({"delta": d, "mean_qsinr_db": db(lin), "min_qsinr_db": min(vals),
                        "max_qsinr_db": max(vals), "runs": len(vals), "seed": spec.seed,
                        **greet_columns(spec.greet), **scene_columns(with_interference(base, delta=d))})
    return write_csv(out / "sweep_runs.csv", rows), write_csv(out / "sweep_summary.csv", summary)


def run_mc_validate(spec: ExperimentSpec) -> Tuple[Path, Path, Path]:
    """Moment approximation error, output power and ``P_f`` checks."""
    scene = spec.scene()
    out = ensure_dir(spec.output_dir)
    grid = parse_grid(spec.grid, {"snr_db": parse_values("-30:0:5")})
    params = scene_columns(scene)

    moment_rows = []
    for i, snr in enumerate(grid["snr_db"]):
        h = math.sqrt(10 ** (snr / 10) * scene.noise_power / 2) * (1 + 1j)
        rm, rv, mm, mv = moment_error_mc(h, scene.noise_power, spec.mc(i), return_margin=True)
        em, ev = moment_error_exact(h, scene.noise_power)
        moment_rows.append({"snr_db": snr, "rae_mean_mc": rm, "rae_var_mc": rv,
                          "mc_margin_mean": mm, "mc_margin_var": mv,
                          "rae_mean_exact": em, "rae_var_exact": ev,
                          "trials": spec.trials, "seed": spec.seed})

    s = matched_phase_onebit_waveform(scene.geometry, scene.target.angle, scene.code_length)
    filters = {"mvdr": mvdr_filter(s, scene),
               "matched": apply_channel(scene.geometry, math.sin(scene.target.angle), s)}
    sig_rows = []
    for i, (name, w) in enumerate(filters.items()):
        est, se = sigma_in_sq_mc(w, s, scene, spec.mc(100 + i))
        sig_rows.append({"filter": name, "sigma_in_sq_analytic": qs.sigma_in_sq(w, s, scene),
                         "sigma_in_sq_mc": est, "stderr": se, "trials": spec.trials,
                         "seed": spec.seed, **params})

    w = filters["mvdr"]
    sin2 = qs.sigma_in_sq(w, s, scene)
    pfs = np.geomspace(0.9, max(1e-3, 10.0 / spec.trials), 20)
    T = np.sqrt(-sin2 * np.log(pfs))
    z0, _ = simulate_outputs(w, s, scene, spec.mc(200))
    pm, se = exceedance_curve(z0, T)
    pf_rows = [{"threshold": t, "pf_analytic": qs.pf(t, sin2), "pf_mc": p, "stderr": e,
                "z_score": (p - qs.pf(t, sin2)) / e if e > 0 else None,
                "trials": spec.trials, "seed": spec.seed, **params}
               for t, p, e in zip(T, pm, se)]
    return (write_csv(out / "moment_error.csv", moment_rows),
            write_csv(out / "sigma_in_sq.csv", sig_rows),
            write_csv(out / "pf_validation.csv", pf_rows))


RUNNERS = {
    "noise-only-loss": run_noise_only_loss,
    "detection-curves": run_detection_curves,
    "codesign": run_codesign,
    "mc-validate": run_mc_validate,
    "uncertainty-sweep": run_uncertainty_sweep,
}


def run(spec: ExperimentSpec):
    return RUNNERS[spec.kind](spec)
