"""Batch experiment protocol.

For every sampled parameter combination: warm up for ``kappa`` steps,
generate ``T + kappa`` steps of arrivals, compute the offline optimum for the
window ``(kappa+1, kappa+T)`` and run every policy over the same window.
Combinations are independent; each draws from its own RNG stream keyed by
``(master_seed, combination, repetition)`` so results do not depend on how
the work is split across processes.
"""
from __future__ import annotations

import csv
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .assignment import offline_optimum
from .model import ConfigError, Instance
from .policies import GOLDEN, PolicySpec
from .sim import run
from .workload import GenConfig, generate, make_rng, scenario1

log = logging.getLogger(__name__)

SCENARIOS = ("Plain", "Scenario1", "Scenario2", "Scenario3")
_COMBO_STREAM = 0
_RUN_STREAM = 1


def kappa_for(T: int) -> int:
    return max(40, math.ceil(0.4 * T))


@dataclass(frozen=True)
class ParamSpace:
    T: tuple[int, int] = (200, 200)
    lam: tuple[float, float] = (0.7, 20.0)
    w_max: tuple[int, int] = (1, 20)
    d_max: tuple[int, int] = (1, 40)
    bimodal_p: tuple[float, float] | None = None
    model: str = "Model1"

    def __post_init__(self):
        for name in ("T", "lam", "w_max", "d_max", "bimodal_p"):
            rng = getattr(self, name)
            if rng is not None and rng[0] > rng[1]:
                raise ConfigError(f"empty range for {name}: {rng}")

    def sample(self, rng: np.random.Generator) -> dict:
        params = {
            "T": int(rng.integers(self.T[0], self.T[1] + 1)),
            "lam": float(rng.uniform(*self.lam)),
            "w_max": int(rng.integers(self.w_max[0], self.w_max[1] + 1)),
            "d_max": int(rng.integers(self.d_max[0], self.d_max[1] + 1)),
        }
        if self.bimodal_p is not None:
            params["bimodal_p"] = float(rng.uniform(*self.bimodal_p))
        return params


@dataclass(frozen=True)
class BatchConfig:
    space: ParamSpace = field(default_factory=ParamSpace)
    combinations: int = 50
    reps: int = 20
    policies: tuple[PolicySpec, ...] = (PolicySpec("MG"), PolicySpec("MLP"))
    scenario: str = "Plain"
    master_seed: int = 0
    fresh_instance_reps: bool = False
    offline_mode: str = "horizon"

    def __post_init__(self):
        if self.combinations < 1:
            raise ConfigError(f"combinations must be >= 1, got {self.combinations}")
        if self.reps < 1:
            raise ConfigError(f"reps must be >= 1, got {self.reps}")
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if not self.policies:
            raise ConfigError("at least one policy is required")
        labels = [p.label for p in self.policies]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"policy labels must be unique, got {labels}")
        object.__setattr__(self, "policies", tuple(self.policies))


@dataclass
class BatchRecord:
    combo: int
    scenario: str
    params: dict
    kappa: int
    zeta_off: float
    zeta: dict[str, float]
    rho: dict[str, float]
    rho_hat: float | None
    nbar: float
    psi: float | None
    seed: tuple[int, ...]
    rho_sd: dict[str, float] = field(default_factory=dict)


def sample_combinations(batch: BatchConfig) -> list[dict]:
    rng = make_rng((batch.master_seed, _COMBO_STREAM))
    return [batch.space.sample(rng) for _ in range(batch.combinations)]


def gen_config(batch: BatchConfig, params: dict, combo: int, rep: int) -> GenConfig:
    T = params["T"]
    return GenConfig(
        T=T, lam=params["lam"], w_max=params["w_max"], d_max=params["d_max"],
        model=batch.space.model, bimodal_p=params.get("bimodal_p", 0.0),
        kappa=kappa_for(T), seed=_stream_key(batch, combo, rep),
    )


def _stream_key(batch: BatchConfig, combo: int, rep: int) -> tuple[int, ...]:
    return (batch.master_seed, _RUN_STREAM, combo, rep)


def _instance(batch: BatchConfig, params: dict, combo: int, rep: int) -> Instance:
    inst = generate(gen_config(batch, params, combo, rep))
    if batch.scenario == "Scenario1":
        inst = scenario1(inst)
    return inst


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def psi_from_log(eh_log, window) -> tuple[float | None, float | None]:
    lo, hi = window
    steps = [(ind, ch) for t, ind, ch in eh_log if lo <= t <= hi]
    if not steps:
        return None, None
    return (sum(i for i, _ in steps) / len(steps), sum(c for _, c in steps) / len(steps))


def evaluate(instance: Instance, policies, t_end: int, window: tuple[int, int],
             offline_mode: str = "horizon") -> dict:
    """Offline optimum plus one run of each policy on a single instance."""
    zeta_off, _ = offline_optimum(instance, t_end, window, offline_mode)
    out = {"zeta_off": zeta_off, "zeta": {}, "nbar": {}, "psi": None}
    for spec in policies:
        res = run(spec, instance, t_end, window)
        out["zeta"][spec.label] = res.zeta
        out["nbar"][spec.label] = res.nbar
        if spec.kind == "MG" and out["psi"] is None:
            out["psi"] = psi_from_log(res.extras["eh_log"], window)[0]
    return out


def _labels(batch):
    return [p.label for p in batch.policies]


def _rho_hat(zeta: dict) -> float | None:
    if "mg" in zeta and "mlp" in zeta:
        return _ratio(zeta["mlp"], zeta["mg"]) if zeta["mg"] > 0 else None
    return None


def run_combination(batch: BatchConfig, combo: int, params: dict) -> BatchRecord:
    T = params["T"]
    kappa = kappa_for(T)
    t_end, window = kappa + T, (kappa + 1, kappa + T)
    labels = _labels(batch)
    nbar_label = "mg" if "mg" in labels else labels[0]
    try:
        if not batch.fresh_instance_reps:
            # deterministic policies: repeating a run on the same instance reproduces it exactly
            inst = _instance(batch, params, combo, 0)
            ev = evaluate(inst, batch.policies, t_end, window, batch.offline_mode)
            rho = {k: _ratio(v, ev["zeta_off"]) for k, v in ev["zeta"].items()}
            return BatchRecord(combo, batch.scenario, params, kappa, ev["zeta_off"], ev["zeta"], rho,
                               _rho_hat(ev["zeta"]), ev["nbar"][nbar_label], ev["psi"],
                               _stream_key(batch, combo, 0))
        evs = []
        for rep in range(batch.reps):
            evs.append(evaluate(_instance(batch, params, combo, rep), batch.policies, t_end, window,
                                batch.offline_mode))
    except Exception:
        log.error("combination %d failed (params=%s, seed key=%s)", combo, params,
                  _stream_key(batch, combo, 0))
        raise
    ratios = {k: [_ratio(e["zeta"][k], e["zeta_off"]) for e in evs] for k in labels}
    hats = [h for h in (_rho_hat(e["zeta"]) for e in evs) if h is not None]
    psis = [e["psi"] for e in evs if e["psi"] is not None]
    return BatchRecord(
        combo, batch.scenario, params, kappa,
        statistics.fmean(e["zeta_off"] for e in evs),
        {k: statistics.fmean(e["zeta"][k] for e in evs) for k in labels},
        {k: statistics.fmean(v) for k, v in ratios.items()},
        statistics.fmean(hats) if hats else None,
        statistics.fmean(e["nbar"][nbar_label] for e in evs),
        statistics.fmean(psis) if psis else None,
        _stream_key(batch, combo, 0),
        {k: statistics.stdev(v) if len(v) > 1 else 0.0 for k, v in ratios.items()},
    )


def _run_one(args):
    return run_combination(*args)


def run_protocol(batch: BatchConfig, jobs: int = 1) -> list[BatchRecord]:
    combos = sample_combinations(batch)
    tasks = [(batch, c, params) for c, params in enumerate(combos)]
    if jobs <= 1:
        records = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, tasks))
    return sorted(records, key=lambda r: r.combo)


def psi_stat(instance: Instance, divisor: float = GOLDEN, t_end: int | None = None,
             window: tuple[int, int] | None = None) -> tuple[float | None, float | None]:
    """Fraction of nonempty steps with ``w_h > 1.618 w_e``, and fraction where MG sent h != e."""
    if not instance.packets:
        raise ValueError("psi_stat needs a nonempty instance")
    t_end = t_end or instance.horizon
    window = window or (1, t_end)
    res = run(PolicySpec("MG", phi=divisor), instance, t_end, window)
    return psi_from_log(res.extras["eh_log"], window)


def psi_grid(records: list[BatchRecord], keys=("w_max", "d_max")) -> dict[tuple, float]:
    """Mean psi per cell of the given parameter keys."""
    cells: dict[tuple, list[float]] = {}
    for r in records:
        if r.psi is not None:
            cells.setdefault(tuple(r.params[k] for k in keys), []).append(r.psi)
    return {k: statistics.fmean(v) for k, v in sorted(cells.items())}


@dataclass(frozen=True)
class PsiStudy:
    """Stratified psi sample: every (w_max, d_max) cell gets ``lam_samples`` rates."""
    w_max: tuple[int, ...] = (1, 2, 3, 5, 8, 12, 16, 20)
    d_max: tuple[int, ...] = (1, 5, 10, 20, 30, 40)
    lam: tuple[float, float] = (0.7, 20.0)
    lam_samples: int = 8
    T: int = 200
    master_seed: int = 0

    def __post_init__(self):
        if self.lam_samples < 1:
            raise ConfigError(f"lam_samples must be >= 1, got {self.lam_samples}")
        if not self.w_max or not self.d_max:
            raise ConfigError("psi study needs at least one w_max and one d_max value")


def psi_study(study: PsiStudy) -> list[dict]:
    """One row (w_max, d_max, lam, psi, freq_h) per run; runs with an always-empty window are skipped."""
    kappa = kappa_for(study.T)
    window = (kappa + 1, kappa + study.T)
    rows = []
    for i, (w_max, d_max) in enumerate((w, d) for w in study.w_max for d in study.d_max):
        lams = make_rng((study.master_seed, 2, i)).uniform(*study.lam, size=study.lam_samples)
        for j, lam in enumerate(lams.tolist()):
            cfg = GenConfig(T=study.T, lam=lam, w_max=w_max, d_max=d_max, kappa=kappa,
                            seed=(study.master_seed, 3, i, j))
            inst = generate(cfg)
            if not inst.packets:
                continue
            psi, freq = psi_stat(inst, GOLDEN, kappa + study.T, window)
            if psi is not None:
                rows.append({"w_max": w_max, "d_max": d_max, "lam": lam, "psi": psi, "freq_h": freq})
    return rows


def psi_cells(rows: list[dict], keys=("w_max", "d_max")) -> dict[tuple, float]:
    """Average psi over everything not in ``keys`` (by default: over lambda)."""
    cells: dict[tuple, list[float]] = {}
    for row in rows:
        cells.setdefault(tuple(row[k] for k in keys), []).append(row["psi"])
    return {k: statistics.fmean(v) for k, v in sorted(cells.items())}


PRESETS = {
    "S1": dict(space=ParamSpace(T=(200, 200), lam=(0.7, 20.0), w_max=(1, 20), d_max=(1, 40)),
               scenario="Scenario1"),
    "S2": dict(space=ParamSpace(T=(50, 750), lam=(0.5, 50.0), w_max=(2, 50), d_max=(1, 50)),
               scenario="Scenario2"),
    "S3": dict(space=ParamSpace(T=(100, 300), lam=(0.7, 6.0), w_max=(2, 7), d_max=(0, 0),
                                bimodal_p=(0.75, 0.95), model="Model2"),
               scenario="Scenario3"),
    # psi study: S1 ranges on the untransformed weights
    "PSI": dict(space=ParamSpace(T=(200, 200), lam=(0.7, 20.0), w_max=(1, 20), d_max=(1, 40)),
                scenario="Plain", policies=(PolicySpec("MG"),)),
    # parameter space shared by the MM / LMG / SMMG studies
    "MOD": dict(space=ParamSpace(T=(200, 200), lam=(0.7, 15.0), w_max=(1, 30), d_max=(1, 23)),
                scenario="Plain",
                policies=(PolicySpec("MG"), PolicySpec("MLP"), PolicySpec("MM"),
                          PolicySpec("LMG"), PolicySpec("SMMG"))),
}


def scenario_presets(name: str, combinations: int = 50, reps: int = 20, master_seed: int = 0,
                     **overrides) -> BatchConfig:
    try:
        preset = dict(PRESETS[name.upper()])
    except KeyError:
        raise ConfigError(f"unknown scenario preset {name!r}; choose from {sorted(PRESETS)}") from None
    preset.update(combinations=combinations, reps=reps, master_seed=master_seed)
    preset.update(overrides)
    return BatchConfig(**preset)


# --- output -------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{x:.6g}"


def csv_header(labels: list[str]) -> list[str]:
    return (["scenario", "T", "lambda", "wmax", "dmax", "p", "kappa", "nbar", "psi", "zeta_off"]
            + [f"zeta_{k}" for k in labels] + [f"rho_{k}" for k in labels]
            + ["rho_hat", "combo", "seed"])


def emit_csv(records: list[BatchRecord], path, labels: list[str] | None = None):
    """One row per record in a fixed column order; floats to 6 significant digits."""
    if labels is None:
        labels = list(records[0].zeta) if records else ["mg", "mlp"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(csv_header(labels))
        for r in records:
            p = r.params
            model2 = "bimodal_p" in p
            w.writerow(
                [r.scenario, _fmt(p["T"]), _fmt(p["lam"]), _fmt(p["w_max"]),
                 "" if model2 else _fmt(p["d_max"]), _fmt(p.get("bimodal_p")), _fmt(r.kappa),
                 _fmt(r.nbar), _fmt(r.psi), _fmt(r.zeta_off)]
                + [_fmt(r.zeta.get(k)) for k in labels] + [_fmt(r.rho.get(k)) for k in labels]
                + [_fmt(r.rho_hat), str(r.combo), "-".join(map(str, r.seed))]
            )


def emit_run_log(records: list[BatchRecord], path, batch: BatchConfig):
    """Seed keys per combination, enough to replay any single row."""
    lines = [f"master_seed={batch.master_seed} scenario={batch.scenario} "
             f"fresh_instance_reps={batch.fresh_instance_reps} reps={batch.reps}"]
    for r in records:
        params = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(r.params.items()))
        lines.append(f"combo={r.combo} seed_key={'-'.join(map(str, r.seed))} kappa={r.kappa} {params}")
    Path(path).write_text("\n".join(lines) + "\n")


def summarize(records: list[BatchRecord]) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation of every rho column and of rho_hat."""
    cols: dict[str, list[float]] = {}
    for r in records:
        for k, v in r.rho.items():
            cols.setdefault(f"rho_{k}", []).append(v)
        if r.rho_hat is not None:
            cols.setdefault("rho_hat", []).append(r.rho_hat)
    return {k: (statistics.fmean(v), statistics.stdev(v) if len(v) > 1 else 0.0)
            for k, v in cols.items()}


def with_policies(batch: BatchConfig, policies) -> BatchConfig:
    return replace(batch, policies=tuple(policies))
