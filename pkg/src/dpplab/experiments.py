"""Experiment orchestration: parameter sweeps, Monte Carlo runs, CSV output.

A single TOML config file drives every experiment kind.  Grid points run
in a thread pool capped by the LAB_THREADS environment variable; each
point's results land in deterministic grid order, so reruns with the same
config and seed produce byte-identical CSVs apart from the timestamp
header line.

Exit-code semantics (used by the CLI): 0 all gates passed, 1 a gate
failed, 2 a grid point raised an error (recorded in errors.csv).
"""

from __future__ import annotations

import csv
import datetime
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import determinant as det
from .limitlaw import Gaussian, classify_regime, limit_law
from .statistics import (
    GammaRule,
    LinearStatisticSpec,
    exact_variance_thinned,
    ks_distance,
    run_ensemble,
)
from .testfn import make_builtin

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "load_config",
    "dump_config",
    "default_config",
    "run_regime_sweep",
    "run_cgf_convergence",
    "run_mc",
    "run_sine",
]

SWEEP_COLUMNS = [
    "n_or_L",
    "alpha",
    "delta",
    "kappa",
    "lambda",
    "cgf_exact",
    "cgf_asymptotic",
    "cgf_limit",
    "abs_err_exact_vs_limit",
]


@dataclass
class ExperimentResult:
    csv_path: Path
    gates_passed: bool
    errors: list

    @property
    def exit_code(self):
        if self.errors:
            return 2
        return 0 if self.gates_passed else 1


@dataclass
class ExperimentConfig:
    kind: str = "cgf"
    output_dir: str = "out"
    seed: int = 20260810
    function_id: str = "cosine_hat"
    function_params: list = field(default_factory=list)
    n: list = field(default_factory=lambda: [256, 512, 1024])
    box_L: list = field(default_factory=lambda: [50.0, 100.0])
    alpha: list = field(default_factory=lambda: [0.5])
    delta: list = field(default_factory=lambda: [0.5])
    kappa: list = field(default_factory=lambda: [1.0])
    lam: list = field(default_factory=lambda: [0.1, 0.2])
    replicates: int = 400
    sampler_mode: str = "auto"
    process_override: str | None = None
    cdf_accuracy: float = 1e-4
    gate_final_rel_err: float | None = None
    gate_monotone: bool = False
    gate_model_selection: bool = False
    gate_ks: float | None = None

    def function(self):
        return make_builtin(self.function_id, self.function_params)

    def validate(self):
        f = self.function()
        for alpha in self.alpha:
            for delta in self.delta:
                classify_regime(
                    alpha if self.process == "cue" else 1, delta, self.process
                )
        sup = f.sup_norm
        scales = self.box_L if self.kind == "sine" else self.n
        for lam in self.lam:
            for scale in scales:
                s = 0.0  # most conservative normalization
                if abs(lam) * sup * float(scale) ** (-s) > det.SMALLNESS_LIMIT:
                    raise ValueError(
                        f"lambda={lam} outside the smallness region for "
                        f"function {self.function_id} (sup |f| = {sup})"
                    )

    @property
    def process(self):
        if self.process_override is not None:
            return self.process_override
        return "sine" if self.kind == "sine" else "cue"


_TOML_KEYS = {
    "experiment": ("kind", "output_dir", "seed"),
    "function": ("id", "params"),
    "grid": ("n", "L", "alpha", "delta", "kappa", "lambda"),
    "mc": ("replicates", "sampler_mode", "cdf_accuracy"),
    "gates": ("final_rel_err", "monotone", "model_selection", "ks"),
}


def load_config(path):
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    cfg = ExperimentConfig()
    exp = raw.get("experiment", {})
    cfg.kind = exp.get("kind", cfg.kind)
    cfg.output_dir = exp.get("output_dir", cfg.output_dir)
    if "process" in exp:
        if exp["process"] not in ("cue", "sine"):
            raise ValueError("experiment.process must be 'cue' or 'sine'")
        cfg.process_override = exp["process"]
    cfg.seed = int(exp.get("seed", cfg.seed))
    fn = raw.get("function", {})
    cfg.function_id = fn.get("id", cfg.function_id)
    cfg.function_params = list(fn.get("params", cfg.function_params))
    grid = raw.get("grid", {})
    cfg.n = [int(v) for v in grid.get("n", cfg.n)]
    cfg.box_L = [float(v) for v in grid.get("L", cfg.box_L)]
    cfg.alpha = [float(v) for v in grid.get("alpha", cfg.alpha)]
    cfg.delta = [float(v) for v in grid.get("delta", cfg.delta)]
    cfg.kappa = [float(v) for v in grid.get("kappa", cfg.kappa)]
    cfg.lam = [float(v) for v in grid.get("lambda", cfg.lam)]
    mc = raw.get("mc", {})
    cfg.replicates = int(mc.get("replicates", cfg.replicates))
    cfg.sampler_mode = mc.get("sampler_mode", cfg.sampler_mode)
    cfg.cdf_accuracy = float(mc.get("cdf_accuracy", cfg.cdf_accuracy))
    gates = raw.get("gates", {})
    if "final_rel_err" in gates:
        cfg.gate_final_rel_err = float(gates["final_rel_err"])
    cfg.gate_monotone = bool(gates.get("monotone", cfg.gate_monotone))
    cfg.gate_model_selection = bool(
        gates.get("model_selection", cfg.gate_model_selection)
    )
    if "ks" in gates:
        cfg.gate_ks = float(gates["ks"])
    cfg.validate()
    return cfg


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg):
    """TOML text with every default explicit (the --print-config dump)."""
    lines = [
        "[experiment]",
        f"kind = {_toml_value(cfg.kind)}",
        f"process = {_toml_value(cfg.process)}",
        f"output_dir = {_toml_value(cfg.output_dir)}",
        f"seed = {cfg.seed}",
        "",
        "[function]",
        f"id = {_toml_value(cfg.function_id)}",
        f"params = {_toml_value(cfg.function_params)}",
        "",
        "[grid]",
        f"n = {_toml_value(cfg.n)}",
        f"L = {_toml_value(cfg.box_L)}",
        f"alpha = {_toml_value(cfg.alpha)}",
        f"delta = {_toml_value(cfg.delta)}",
        f"kappa = {_toml_value(cfg.kappa)}",
        f"lambda = {_toml_value(cfg.lam)}",
        "",
        "[mc]",
        f"replicates = {cfg.replicates}",
        f"sampler_mode = {_toml_value(cfg.sampler_mode)}",
        f"cdf_accuracy = {_toml_value(cfg.cdf_accuracy)}",
        "",
        "[gates]",
        f"monotone = {_toml_value(cfg.gate_monotone)}",
        f"model_selection = {_toml_value(cfg.gate_model_selection)}",
    ]
    if cfg.gate_final_rel_err is not None:
        lines.append(f"final_rel_err = {_toml_value(cfg.gate_final_rel_err)}")
    if cfg.gate_ks is not None:
        lines.append(f"ks = {_toml_value(cfg.gate_ks)}")
    return "\n".join(lines) + "\n"


def default_config(kind="cgf"):
    cfg = ExperimentConfig()
    cfg.kind = kind
    return cfg


def _workers():
    cap = os.environ.get("LAB_THREADS")
    return max(1, int(cap)) if cap else min(4, os.cpu_count() or 1)


def _write_csv(path, columns, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# generated: {datetime.datetime.now().isoformat()}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def _run_grid(points, worker):
    """Evaluate worker over grid points in a pool; deterministic order."""
    results = [None] * len(points)
    errors = []
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        futures = {pool.submit(worker, pt): i for i, pt in enumerate(points)}
        for fut, i in futures.items():
            try:
                results[i] = fut.result()
            except Exception as exc:  # noqa: BLE001 - recorded, not swallowed
                errors.append((points[i], f"{type(exc).__name__}: {exc}"))
    return results, errors


def _centered_cue_cgf(f, n, alpha, delta, kappa, lam):
    gamma = 1.0 - kappa * float(n) ** (-delta)
    s = max(0.0, (alpha - delta) / 2.0)
    raw = det.cue_cgf_exact(f, n, alpha, gamma, s, lam)
    mean = gamma * float(n) ** alpha * f.fourier(0.0).real
    szego = det.cue_cgf_szego(f, n, alpha, gamma, s, lam)
    centered = raw - lam * float(n) ** (-s) * mean
    return centered, szego - lam * float(n) ** (-s) * mean


def _centered_sine_cgf(f, L, delta, kappa, lam):
    gamma = 1.0 - kappa * float(L) ** (-delta)
    s = max(0.0, (1.0 - delta) / 2.0)
    raw = det.sine_cgf_exact(f, L, gamma, s, lam)
    mean = gamma * L / np.pi * f.power_integral(1)
    asym = det.sine_cgf_asymptotic(f, L, gamma, s, lam)
    centered = raw - lam * float(L) ** (-s) * mean
    return centered, asym - lam * float(L) ** (-s) * mean


def run_cgf_convergence(cfg):
    """Tabulate |centered exact CGF - limit CGF| over the n grid.

    The monotone gate asserts a decrease over the last three n for every
    lambda; the rel-err gate bounds the final error against |limit|.
    """
    f = cfg.function()
    ns = sorted(cfg.n)
    points = [
        (n, a, d, k, lam)
        for a in cfg.alpha
        for d in cfg.delta
        for k in cfg.kappa
        for lam in cfg.lam
        for n in ns
    ]

    def worker(pt):
        n, a, d, k, lam = pt
        centered, asym = _centered_cue_cgf(f, n, a, d, k, lam)
        lim = det.limit_cgf_cue(f, a, d, k, lam)
        return [n, a, d, k, lam, centered, asym, lim, abs(centered - lim)]

    rows, errors = _run_grid(points, worker)
    rows = [r for r in rows if r is not None]
    out = Path(cfg.output_dir)
    path = _write_csv(out / "cgf_convergence.csv", SWEEP_COLUMNS, rows)
    _write_errors(out, errors)
    passed = not errors and _convergence_gates(cfg, rows, ns)
    return ExperimentResult(path, passed, errors)


def run_sine(cfg):
    """Same table as run_cgf_convergence for the sine/Fredholm route."""
    f = cfg.function()
    ls = sorted(cfg.box_L)
    points = [
        (L, d, k, lam)
        for d in cfg.delta
        for k in cfg.kappa
        for lam in cfg.lam
        for L in ls
    ]

    def worker(pt):
        L, d, k, lam = pt
        centered, asym = _centered_sine_cgf(f, L, d, k, lam)
        lim = det.limit_cgf_sine(f, d, k, lam)
        return [L, 1.0, d, k, lam, centered, asym, lim, abs(centered - lim)]

    rows, errors = _run_grid(points, worker)
    rows = [r for r in rows if r is not None]
    out = Path(cfg.output_dir)
    path = _write_csv(out / "sine_convergence.csv", SWEEP_COLUMNS, rows)
    _write_errors(out, errors)
    passed = not errors and _convergence_gates(cfg, rows, ls)
    return ExperimentResult(path, passed, errors)


def _convergence_gates(cfg, rows, scales):
    passed = True
    by_key = {}
    for r in rows:
        key = tuple(r[1:5])
        by_key.setdefault(key, []).append((r[0], r[8], abs(r[7])))
    for key, entries in by_key.items():
        entries.sort()
        errs = [e for _, e, _ in entries]
        lim = entries[-1][2]
        if cfg.gate_monotone and len(errs) >= 3:
            tail = errs[-3:]
            if not (tail[0] > tail[1] > tail[2]):
                passed = False
        if cfg.gate_final_rel_err is not None and lim > 0:
            if errs[-1] / lim > cfg.gate_final_rel_err:
                passed = False
    return passed


def run_regime_sweep(cfg):
    """Per (n, alpha, delta, kappa): CGF error vs limit for each lambda, the
    Monte Carlo KS distance against the predicted law, and the variance-
    decomposition shares of Poissonian vs CUE terms."""
    f = cfg.function()
    combos = [
        (n, a, d, k)
        for n in sorted(cfg.n)
        for a in cfg.alpha
        for d in cfg.delta
        for k in cfg.kappa
    ]

    def worker(pt):
        n, a, d, k = pt
        rule = GammaRule.scaled(k, d)
        spec = LinearStatisticSpec(f=f, process="cue", alpha=a, gamma_rule=rule)
        laws = {
            "predicted": limit_law(f, a, d, k, "cue"),
            "rmt_gaussian": Gaussian(f.sigma_squared),
            "classical_gaussian": Gaussian(k / (2 * np.pi) * f.power_integral(2)),
        }
        dist = run_ensemble(
            spec, n, cfg.replicates, cfg.seed, sampler_mode=cfg.sampler_mode
        )
        ks = {
            name: ks_distance(dist, law, accuracy=cfg.cdf_accuracy)
            for name, law in laws.items()
        }
        tv = exact_variance_thinned(spec, n)
        point_rows = []
        for lam in cfg.lam:
            centered, _ = _centered_cue_cgf(f, n, a, d, k, lam)
            lim = det.limit_cgf_cue(f, a, d, k, lam)
            point_rows.append(
                [
                    n,
                    a,
                    d,
                    k,
                    lam,
                    centered,
                    lim,
                    abs(centered - lim),
                    ks["predicted"],
                    ks["rmt_gaussian"],
                    ks["classical_gaussian"],
                    tv.poisson_term / tv.total if tv.total else 0.0,
                    tv.cue_term / tv.total if tv.total else 0.0,
                ]
            )
        return point_rows

    results, errors = _run_grid(combos, worker)
    rows = [row for chunk in results if chunk for row in chunk]
    columns = [
        "n_or_L",
        "alpha",
        "delta",
        "kappa",
        "lambda",
        "cgf_exact",
        "cgf_limit",
        "abs_err_exact_vs_limit",
        "ks_predicted",
        "ks_rmt_gaussian",
        "ks_classical_gaussian",
        "var_share_poisson",
        "var_share_cue",
    ]
    out = Path(cfg.output_dir)
    path = _write_csv(out / "regime_sweep.csv", columns, rows)
    _write_errors(out, errors)
    passed = not errors
    if cfg.gate_ks is not None:
        passed = passed and all(row[8] <= cfg.gate_ks for row in rows)
    if cfg.gate_model_selection:
        passed = passed and _model_selection_gate(rows)
    return ExperimentResult(path, passed, errors)


def _model_selection_gate(rows):
    """On the diagonal the critical law must win; off it, the right Gaussian."""
    ok = True
    for row in rows:
        alpha, delta = row[1], row[2]
        ks_pred, ks_rmt, ks_cls = row[8], row[9], row[10]
        if alpha == delta:
            ok = ok and ks_pred < min(ks_rmt, ks_cls)
        elif alpha < delta:
            ok = ok and ks_pred <= ks_cls
        else:
            ok = ok and ks_pred <= ks_rmt
    return ok


def run_mc(cfg):
    """Monte Carlo ensemble dump: values CSV, cumulant sidecar, KS summary."""
    f = cfg.function()
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    passed = True
    for n in sorted(cfg.n) if cfg.process == "cue" else sorted(cfg.box_L):
        for a in cfg.alpha if cfg.process == "cue" else [1.0]:
            for d in cfg.delta:
                for k in cfg.kappa:
                    rule = GammaRule.scaled(k, d)
                    spec = LinearStatisticSpec(
                        f=f,
                        process=cfg.process,
                        alpha=a if cfg.process == "cue" else None,
                        gamma_rule=rule,
                    )
                    dist = run_ensemble(
                        spec,
                        n,
                        cfg.replicates,
                        cfg.seed,
                        sampler_mode=cfg.sampler_mode,
                    )
                    law = limit_law(
                        f, a if cfg.process == "cue" else 1, d, k, cfg.process
                    )
                    ks = ks_distance(dist, law, accuracy=cfg.cdf_accuracy)
                    tag = f"n{n}_a{a}_d{d}_k{k}"
                    _write_csv(
                        out / f"mc_values_{tag}.csv",
                        ["value"],
                        [[v] for v in dist.values],
                    )
                    with open(out / f"mc_summary_{tag}.json", "w") as fh:
                        json.dump(
                            {**dist.summary(), "ks_predicted": ks}, fh, indent=2
                        )
                    rows.append([n, a, d, k, ks])
                    if cfg.gate_ks is not None and ks > cfg.gate_ks:
                        passed = False
    path = _write_csv(
        out / "mc_ks.csv",
        ["n_or_L", "alpha", "delta", "kappa", "ks_predicted"],
        rows,
    )
    return ExperimentResult(path, passed, [])


def _write_errors(out, errors):
    if errors:
        _write_csv(
            Path(out) / "errors.csv",
            ["point", "error"],
            [[str(pt), msg] for pt, msg in errors],
        )
