"""Linear statistics: exact moments, Monte Carlo ensembles, diagnostics.

Exact first and second moments of the thinned linear statistic come from
the kernel identities

    mean      = gamma * n^alpha * Ff(0)                       (CUE)
    variance  = n^alpha gamma (1-gamma) / (2 pi) * int f^2
                + gamma^2 * sum_k min(n,|k|) |h_hat(k)|^2     (CUE)

and their sine-process analogues with one-point density 1/pi.  Monte
Carlo ensembles center by the exact mean (never the sample mean) and
rescale by n^(-s) with s = max(0, (alpha-delta)/2) for the CUE and
s = max(0, (1-delta)/2) for the sine process.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre, sici

from .sampler import (
    RestrictedCueKernel,
    RestrictedSineKernel,
    replicate_rng,
    sample_cue,
    thin,
)
from .testfn import make_builtin

__all__ = [
    "GammaRule",
    "LinearStatisticSpec",
    "EmpiricalDistribution",
    "VarianceResult",
    "ThinnedVariance",
    "linear_statistic",
    "exact_mean_cue",
    "exact_variance_cue",
    "exact_variance_thinned",
    "exact_moments_sine",
    "sine_variance_fourier",
    "run_ensemble",
    "ks_distance",
]


@dataclass(frozen=True)
class GammaRule:
    """Thinning schedule: fixed gamma, or gamma = 1 - kappa * scale^(-delta)."""

    kind: str  # "fixed" or "scaled"
    gamma: float | None = None
    kappa: float | None = None
    delta: float | None = None

    @classmethod
    def fixed(cls, gamma):
        if not 0.0 <= gamma <= 1.0:
            raise ValueError("fixed gamma must lie in [0, 1]")
        return cls(kind="fixed", gamma=float(gamma))

    @classmethod
    def scaled(cls, kappa, delta):
        if kappa <= 0 or delta <= 0:
            raise ValueError("scaled rule needs kappa > 0 and delta > 0")
        return cls(kind="scaled", kappa=float(kappa), delta=float(delta))

    def gamma_at(self, scale):
        if self.kind == "fixed":
            return self.gamma
        g = 1.0 - self.kappa * float(scale) ** (-self.delta)
        if not 0.0 < g < 1.0:
            raise ValueError(
                f"gamma rule gives gamma={g:.4g} outside (0,1) at scale {scale}"
            )
        return g

    @property
    def effective_delta(self):
        """Decay exponent of 1 - gamma; inf for gamma identically 1."""
        if self.kind == "scaled":
            return self.delta
        return np.inf if self.gamma == 1.0 else 0.0


@dataclass(frozen=True)
class LinearStatisticSpec:
    """What to sum: test function, process, scale exponent, thinning rule."""

    f: object
    process: str  # "cue" or "sine"
    gamma_rule: GammaRule
    alpha: float | None = None

    def __post_init__(self):
        if self.process not in ("cue", "sine"):
            raise ValueError("process must be 'cue' or 'sine'")
        if self.process == "cue":
            if self.alpha is None or not 0.0 < self.alpha <= 1.0:
                raise ValueError("CUE spec needs alpha in (0, 1]")

    @property
    def normalization_s(self):
        d = self.gamma_rule.effective_delta
        if self.process == "cue":
            return max(0.0, (self.alpha - d) / 2.0) if np.isfinite(d) else 0.0
        return max(0.0, (1.0 - d) / 2.0) if np.isfinite(d) else 0.0


def linear_statistic(sample, spec, n_or_L=None):
    """Sum of the dilated test function over the sample points."""
    if sample.kind != spec.process:
        raise ValueError(f"sample kind {sample.kind!r} does not match spec")
    if len(sample) == 0:
        return 0.0
    if spec.process == "cue":
        n = sample.n if n_or_L is None else n_or_L
        return float(np.sum(spec.f(sample.points * float(n) ** (1.0 - spec.alpha))))
    if n_or_L is None:
        raise ValueError("sine statistic needs the box scale L")
    return float(np.sum(spec.f(sample.points / float(n_or_L))))


def exact_mean_cue(spec, n):
    """gamma * n * h_hat(0) = gamma * n^alpha * Ff(0)."""
    gamma = spec.gamma_rule.gamma_at(n)
    return gamma * float(n) ** spec.alpha * spec.f.fourier(0.0).real


class VarianceResult(NamedTuple):
    value: float
    tail_bound: float
    k_max: int


def exact_variance_cue(spec, n, k_max=None, tail_rel=1e-8):
    """Unthinned CUE variance sum_k min(n,|k|) |h_hat(k)|^2, tail certified.

    ``k_max`` doubles until the decay-certified tail drops below
    ``tail_rel`` of the partial sum.
    """
    f = spec.f
    if f.sup_norm == 0.0:
        return VarianceResult(0.0, 0.0, 0)
    scale = float(n) ** (spec.alpha - 1.0)
    c_decay, p = f.fourier_decay
    if 2.0 * p <= 2.0:
        raise ValueError("Fourier decay too weak to certify the variance tail")
    k = k_max if k_max is not None else max(64, int(8 * np.ceil(1.0 / scale)))
    for _ in range(32):
        ks = np.arange(1, k + 1)
        coeffs = scale * f.fourier(ks * scale)
        partial = 2.0 * float(np.dot(np.minimum(n, ks), np.abs(coeffs) ** 2))
        tail = _variance_tail_bound(n, scale, c_decay, p, k)
        if k_max is not None or tail <= tail_rel * max(partial, 1e-300):
            return VarianceResult(partial, tail, k)
        k *= 2
        if k > 2**26:
            break
    raise ValueError("variance tail not certifiable with declared decay")


def _variance_tail_bound(n, scale, c_decay, p, k):
    """Bound sum_{|k'|>k} min(n,k') * scale^2 |Ff(k' scale)|^2 via decay."""
    # requires k past the maximum of k' (1+k's)^(-2p)
    k = max(k, int(1.0 / (scale * (2.0 * p - 1.0))) + 1)
    v = 1.0 + k * scale
    # bound A: min(n,k') <= k'
    int_a = v ** (2.0 - 2.0 * p) / (2.0 * p - 2.0) - v ** (1.0 - 2.0 * p) / (
        2.0 * p - 1.0
    )
    bound_a = 2.0 * c_decay**2 * scale**2 * (int_a / scale**2 + k * v ** (-2.0 * p))
    # bound B: min(n,k') <= n
    bound_b = (
        2.0
        * c_decay**2
        * scale**2
        * n
        * (v ** (1.0 - 2.0 * p) / (scale * (2.0 * p - 1.0)) + v ** (-2.0 * p))
    )
    return min(bound_a, bound_b)


class ThinnedVariance(NamedTuple):
    total: float
    poisson_term: float
    cue_term: float


def exact_variance_thinned(spec, n, k_max=None):
    """Two-term decomposition of the thinned-CUE variance.

    poisson_term = n^alpha gamma (1-gamma) / (2 pi) * int f^2 over the
    window [-pi n^(1-alpha), pi n^(1-alpha)];
    cue_term = gamma^2 * exact_variance_cue.
    """
    gamma = spec.gamma_rule.gamma_at(n)
    half_window = np.pi * float(n) ** (1.0 - spec.alpha)
    if spec.f.support_radius <= half_window:
        f_sq = spec.f.power_integral(2)
    else:
        x, w = spec.f.quad_nodes()
        mask = np.abs(x) <= half_window
        f_sq = float(np.dot(w[mask], spec.f(x[mask]) ** 2))
    poisson = float(n) ** spec.alpha * gamma * (1.0 - gamma) / (2.0 * np.pi) * f_sq
    cue = gamma**2 * exact_variance_cue(spec, n, k_max=k_max).value
    return ThinnedVariance(poisson + cue, poisson, cue)


def exact_moments_sine(spec, L, quad_per_unit=3.0):
    """(mean, variance) for the thinned sine statistic at box scale L.

    mean = gamma L / pi * int f; the variance decomposition is
    gamma(1-gamma)/pi * L int f^2 + gamma^2 * Var_sine, with Var_sine
    evaluated by 2-D quadrature of the sine-squared difference kernel.
    """
    f = spec.f
    gamma = spec.gamma_rule.gamma_at(L)
    mean = gamma * L / np.pi * f.power_integral(1)
    poisson = gamma * (1.0 - gamma) / np.pi * L * f.power_integral(2)
    var_sine = _sine_variance_quadrature(f, L, quad_per_unit)
    return mean, poisson + gamma**2 * var_sine


def _sine_variance_quadrature(f, L, quad_per_unit=3.0):
    """(1/2 pi^2) iint_{R^2} ((h(x)-h(y))/(x-y))^2 sin^2(x-y), h = f(./L).

    The square where both variables sit inside supp h is a 2-D panel
    quadrature; the strips with one variable outside reduce to 1-D
    integrals against T(d) = int_d^inf sin^2(u)/u^2 du, which has the
    closed form pi/2 - Si(2d) + sin^2(d)/d.
    """
    if f.sup_norm == 0.0:
        return 0.0
    r = f.support_radius
    m = int(min(2400, max(240, np.ceil(quad_per_unit * L * r))))
    x, w = f.panel_nodes(m)
    fx = f(x)
    du = x[:, None] - x[None, :]
    np.fill_diagonal(du, 1.0)
    quot = (fx[:, None] - fx[None, :]) / du
    # in x = L u coordinates the Jacobian L^2 cancels the quotient's L^-2
    integrand = quot**2 * np.sin(L * (x[:, None] - x[None, :])) ** 2
    np.fill_diagonal(integrand, 0.0)
    inner = float(w @ integrand @ w)

    def tail_t(d):
        si, _ = sici(2.0 * d)
        small = d < 1e-12
        safe = np.where(small, 1.0, d)
        return np.where(small, np.pi / 2 - si, np.pi / 2 - si + np.sin(d) ** 2 / safe)

    strips = 2.0 * L * float(
        np.dot(w, fx**2 * (tail_t(L * (r - x)) + tail_t(L * (r + x))))
    )
    return (inner + strips) / (2.0 * np.pi**2)


def sine_variance_fourier(f, L):
    """Var_sine[f(./L)] = int |Ff(w)|^2 min(|w|, 2L) dw (Fourier route)."""
    if f.sup_norm == 0.0:
        return 0.0
    c_decay, p = f.fourier_decay

    def integrand(w):
        return np.minimum(w, 2.0 * L) * np.abs(f.fourier(w)) ** 2

    omega = max(8.0 * L, 16.0)
    body, _ = integrate.quad(
        integrand, 0.0, omega, limit=800, points=[2.0 * L] if 2.0 * L < omega else None
    )
    tail = 2.0 * L * c_decay**2 * (1.0 + omega) ** (1.0 - 2.0 * p) / (2.0 * p - 1.0)
    return 2.0 * body + tail


def _kstats(s1, s2, s3, s4, n):
    """Unbiased cumulant estimators (k-statistics) from power sums."""
    n = float(n)
    k1 = s1 / n
    k2 = (n * s2 - s1**2) / (n * (n - 1.0))
    k3 = (2.0 * s1**3 - 3.0 * n * s1 * s2 + n**2 * s3) / (
        n * (n - 1.0) * (n - 2.0)
    )
    k4 = (
        -6.0 * s1**4
        + 12.0 * n * s1**2 * s2
        - 3.0 * n * (n - 1.0) * s2**2
        - 4.0 * n * (n + 1.0) * s1 * s3
        + n**2 * (n + 1.0) * s4
    ) / (n * (n - 1.0) * (n - 2.0) * (n - 3.0))
    return k1, k2, k3, k4


@dataclass
class EmpiricalDistribution:
    """Sorted centered/rescaled replicates with cumulant diagnostics."""

    values: np.ndarray
    center_used: float
    scale_used: float
    cumulants: np.ndarray
    cumulant_se: np.ndarray

    @classmethod
    def from_raw(cls, raw, center, scale):
        vals = np.sort((np.asarray(raw, dtype=float) - center) * scale)
        n = len(vals)
        pows = [np.sum(vals**r) for r in (1, 2, 3, 4)]
        ks = np.array(_kstats(*pows, n))
        # delete-one jackknife via power-sum downdates
        loo = [pows[r] - vals ** (r + 1) for r in range(4)]
        ks_loo = np.stack(_kstats(*loo, n - 1))
        se = np.sqrt((n - 1.0) / n * np.sum((ks_loo - ks_loo.mean(axis=1, keepdims=True)) ** 2, axis=1))
        return cls(
            values=vals,
            center_used=float(center),
            scale_used=float(scale),
            cumulants=ks,
            cumulant_se=se,
        )

    def summary(self):
        return {
            "replicates": int(len(self.values)),
            "center_used": self.center_used,
            "scale_used": self.scale_used,
            "cumulants": [float(c) for c in self.cumulants],
            "cumulant_se": [float(c) for c in self.cumulant_se],
        }

    def to_csv(self, path, sidecar=True):
        """CSV with header ``value``, one replicate per row, plus a JSON
        sidecar (same stem, .json) with the cumulant summary."""
        import json
        from pathlib import Path

        path = Path(path)
        with open(path, "w") as fh:
            fh.write("value\n")
            for v in self.values:
                fh.write(format(v, ".17g") + "\n")
        if sidecar:
            with open(path.with_suffix(".json"), "w") as fh:
                json.dump(self.summary(), fh, indent=2)
        return path


def _spec_payload(spec):
    return (
        spec.f.name,
        tuple(spec.f.params),
        spec.process,
        spec.alpha,
        spec.gamma_rule.kind,
        spec.gamma_rule.gamma,
        spec.gamma_rule.kappa,
        spec.gamma_rule.delta,
    )


def _spec_from_payload(payload):
    name, params, process, alpha, kind, gamma, kappa, delta = payload
    rule = (
        GammaRule.fixed(gamma) if kind == "fixed" else GammaRule.scaled(kappa, delta)
    )
    return LinearStatisticSpec(
        f=make_builtin(name, params), process=process, alpha=alpha, gamma_rule=rule
    )


def _resolve_sampler_mode(spec, n_or_L, mode):
    if spec.process == "sine":
        return "window"
    if mode != "auto":
        return mode
    half_arc = spec.f.support_radius * float(n_or_L) ** (spec.alpha - 1.0)
    return "window" if half_arc <= 0.49 * np.pi else "full"


def _ensemble_chunk(payload, n_or_L, lo, hi, master_seed, mode):
    spec = _spec_from_payload(payload)
    gamma = spec.gamma_rule.gamma_at(n_or_L)
    out = np.empty(hi - lo)
    if gamma == 0.0:
        out.fill(0.0)
        return out
    if mode == "window":
        if spec.process == "cue":
            half = spec.f.support_radius * float(n_or_L) ** (spec.alpha - 1.0)
            kernel = RestrictedCueKernel(n_or_L, (-half, half))
            dil = float(n_or_L) ** (1.0 - spec.alpha)
            for i in range(lo, hi):
                pts = kernel.sample_points(gamma, replicate_rng(master_seed, i))
                out[i - lo] = np.sum(spec.f(pts * dil))
        else:
            half = spec.f.support_radius * float(n_or_L)
            kernel = RestrictedSineKernel((-half, half))
            for i in range(lo, hi):
                pts = kernel.sample_points(gamma, replicate_rng(master_seed, i))
                out[i - lo] = np.sum(spec.f(pts / float(n_or_L)))
    else:
        for i in range(lo, hi):
            rng = replicate_rng(master_seed, i)
            seed_a = int(rng.integers(0, 2**63))
            seed_b = int(rng.integers(0, 2**63))
            s = sample_cue(n_or_L, seed_a)
            if gamma < 1.0:
                s = thin(s, gamma, seed_b)
            out[i - lo] = linear_statistic(s, spec, n_or_L)
    return out


def run_ensemble(
    spec,
    n_or_L,
    replicates,
    master_seed,
    sampler_mode="auto",
    workers=None,
):
    """Monte Carlo ensemble of centered, rescaled linear statistics.

    Centering uses the exact mean; rescaling is n^(-s) with the spec's
    normalization exponent.  ``sampler_mode`` for the CUE is "full"
    (whole-spectrum sampler plus thinning), "window" (restricted-kernel
    HKPV on the mesoscopic arc carrying the statistic), or "auto".
    Identical (inputs, master_seed) give identical output regardless of
    ``workers``.
    """
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    mode = _resolve_sampler_mode(spec, n_or_L, sampler_mode)
    if spec.process == "cue":
        center = exact_mean_cue(spec, n_or_L)
    else:
        gamma = spec.gamma_rule.gamma_at(n_or_L)
        center = gamma * n_or_L / np.pi * spec.f.power_integral(1)
    scale = float(n_or_L) ** (-spec.normalization_s)

    payload = _spec_payload(spec)
    if workers is None:
        workers = int(os.environ.get("LAB_THREADS", "1"))
    if workers <= 1:
        raw = _ensemble_chunk(payload, n_or_L, 0, replicates, master_seed, mode)
    else:
        bounds = np.linspace(0, replicates, workers + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(
                    _ensemble_chunk, payload, n_or_L, lo, hi, master_seed, mode
                )
                for lo, hi in zip(bounds[:-1], bounds[1:])
                if hi > lo
            ]
            raw = np.concatenate([f.result() for f in futures])
    return EmpiricalDistribution.from_raw(raw, center, scale)


def ks_distance(dist, law, accuracy=1e-4):
    """sup-norm distance between the empirical CDF and the law's CDF."""
    values = dist.values
    n = len(values)
    cdf = law.cdf_batch(values, accuracy=accuracy)
    upper = np.max(np.arange(1, n + 1) / n - cdf)
    lower = np.max(cdf - np.arange(0, n) / n)
    return float(max(upper, lower))
