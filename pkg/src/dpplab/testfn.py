"""Compactly supported test functions and their Fourier machinery.

The Fourier transform convention throughout the package is

    Ff(w) = (1/2pi) * integral f(x) exp(-i x w) dx,

so that Ff(0) = (1/2pi) * integral f.  A dilated copy h(theta) =
f(theta * n^(1-alpha)) viewed as a function on the circle has Fourier
coefficients

    h_hat(k) = n^(alpha-1) * Ff(k * n^(alpha-1)),

which is the bridge between the transform of f and the coefficients used
by the Toeplitz-symbol code.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy import interpolate
from scipy.special import roots_legendre

__all__ = [
    "TestFunction",
    "DilatedFourierTable",
    "SymbolSamples",
    "make_builtin",
    "builtin_names",
    "fourier_coefficient",
    "dilated_table",
    "truncate",
    "choose_N",
    "sigma_f_squared",
    "weighted_norm",
]

_QUAD_NODES_PER_PANEL = 2048


class TestFunction:
    """A real test function with compact support and Fourier transform access.

    Instances are immutable after construction and safe to share across
    threads.  ``eval`` and ``fourier`` are vectorized callables; ``panels``
    lists breakpoints inside the support where the function is not smooth,
    so composite quadrature stays spectrally accurate.
    """

    def __init__(
        self,
        name,
        params,
        support_radius,
        eval_fn,
        fourier_fn,
        smoothness_epsilon,
        fourier_decay,
        panels=None,
        sup_norm=None,
    ):
        self.name = name
        self.params = tuple(params)
        self.support_radius = float(support_radius)
        self._eval = eval_fn
        self._fourier = fourier_fn
        self.smoothness_epsilon = float(smoothness_epsilon)
        # (C, p) with |Ff(w)| <= C (1+|w|)^(-p); used for certified tails.
        self.fourier_decay = (float(fourier_decay[0]), float(fourier_decay[1]))
        r = self.support_radius
        if panels is None:
            panels = (-r, r)
        self.panels = tuple(float(b) for b in panels)
        if sup_norm is None:
            x = np.linspace(-r, r, 20001)
            sup_norm = float(np.max(np.abs(eval_fn(x)))) if r > 0 else 0.0
        self.sup_norm = float(sup_norm)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x, dtype=float)
        inside = np.abs(x) <= self.support_radius
        if np.any(inside):
            out[inside] = self._eval(x[inside])
        return out if out.ndim else float(out)

    def fourier(self, omega):
        """Fourier transform Ff(omega); complex, Hermitian for real f."""
        omega = np.asarray(omega, dtype=float)
        val = np.asarray(self._fourier(omega), dtype=complex)
        return val if val.ndim else complex(val)

    def __repr__(self):
        return f"TestFunction({self.name!r}, params={list(self.params)})"

    @cached_property
    def _quad(self):
        """Composite Gauss-Legendre nodes/weights over the support panels."""
        xs, ws = [], []
        base_x, base_w = roots_legendre(_QUAD_NODES_PER_PANEL)
        for a, b in zip(self.panels[:-1], self.panels[1:]):
            half = 0.5 * (b - a)
            xs.append(0.5 * (a + b) + half * base_x)
            ws.append(half * base_w)
        return np.concatenate(xs), np.concatenate(ws)

    def quad_nodes(self):
        """(nodes, weights) suitable for integrals of smooth maps of f."""
        return self._quad

    def panel_nodes(self, nodes_per_panel, scale=1.0):
        """Composite Gauss-Legendre rule over the support panels scaled by
        ``scale``; keeps panel breakpoints aligned with kinks of f."""
        base_x, base_w = roots_legendre(nodes_per_panel)
        xs, ws = [], []
        for a, b in zip(self.panels[:-1], self.panels[1:]):
            a, b = a * scale, b * scale
            half = 0.5 * (b - a)
            xs.append(0.5 * (a + b) + half * base_x)
            ws.append(half * base_w)
        return np.concatenate(xs), np.concatenate(ws)

    def power_integral(self, m):
        """integral of f(x)^m over the support."""
        if self.support_radius == 0.0:
            return 0.0
        x, w = self._quad
        return float(np.dot(w, self(x) ** m))

    @cached_property
    def sigma_squared(self):
        """Cached value of sigma_f^2 = integral |w| |Ff(w)|^2 dw."""
        return sigma_f_squared(self)


@dataclass(frozen=True)
class DilatedFourierTable:
    """Fourier coefficients of theta -> f(theta * n^(1-alpha)) on the circle.

    ``coefficients[k + truncation_N]`` holds h_hat(k) for k in
    [-truncation_N, truncation_N].
    """

    n: int
    alpha: float
    truncation_N: int
    coefficients: np.ndarray

    def coefficient(self, k):
        if abs(k) > self.truncation_N:
            raise IndexError(f"coefficient index {k} outside stored range")
        return complex(self.coefficients[k + self.truncation_N])


@dataclass(frozen=True)
class SymbolSamples:
    """A trigonometric polynomial sampled on a uniform angular grid.

    ``values[m]`` is the polynomial at angle ``angles[m] = 2 pi m / grid_size``
    (reported wrapped into (-pi, pi]).
    """

    angles: np.ndarray
    values: np.ndarray
    table: DilatedFourierTable

    @property
    def grid_size(self):
        return len(self.values)


def _stable_cosine_hat_transform(omega):
    # sin(pi w) / (pi w (1 - w^2)) with removable singularities at 0, +-1.
    u = np.abs(np.asarray(omega, dtype=float))
    near_one = np.abs(u - 1.0) < 0.5
    safe_main = np.where(near_one, 0.0, u)
    main = np.sinc(safe_main) / (1.0 - safe_main**2)
    shifted = np.sinc(u - 1.0) / np.where(near_one, u * (1.0 + u), 1.0)
    return np.where(near_one, shifted, main) + 0.0j


def _triangle_transform(omega):
    # (1 - cos(pi w)) / (pi^2 w^2) = 0.5 * sinc(w/2)^2
    w = np.asarray(omega, dtype=float)
    return 0.5 * np.sinc(w / 2.0) ** 2 + 0.0j


class _FFTFourier:
    """FFT-backed Fourier transform on a zero-padded grid, with splines.

    The padded grid has 2^m samples with 2^m >= 16 * (support samples), so
    the spectral resolution is pi / (pad * support_radius).  Queries beyond
    the resolved band return 0; for the registered families the transform
    magnitude there is far below double precision.
    """

    def __init__(self, eval_fn, support_radius, support_samples=8192, pad=64):
        r = support_radius
        m_total = int(2 ** np.ceil(np.log2(support_samples * pad)))
        dx = 2.0 * r / support_samples
        x = (np.arange(m_total) - m_total // 2) * dx
        fx = np.where(np.abs(x) <= r, eval_fn(np.clip(x, -r, r)), 0.0)
        spectrum = np.fft.fft(np.fft.ifftshift(fx)) * (dx / (2.0 * np.pi))
        omega = np.fft.fftfreq(m_total, d=dx) * 2.0 * np.pi
        order = np.argsort(omega)
        self.omega_max = float(omega[order][-1])
        grid = omega[order]
        vals = spectrum[order]
        self._real = interpolate.CubicSpline(grid, vals.real, extrapolate=False)
        self._imag = interpolate.CubicSpline(grid, vals.imag, extrapolate=False)

    def __call__(self, omega):
        omega = np.asarray(omega, dtype=float)
        re = self._real(omega)
        im = self._imag(omega)
        re = np.where(np.isnan(re), 0.0, re)
        im = np.where(np.isnan(im), 0.0, im)
        return re + 1j * im


def _fit_decay_constant(fourier_fn, p, omega_max, safety=2.0):
    """Empirical constant C with |Ff| <= C (1+|w|)^(-p) on a dense grid."""
    w = np.linspace(0.0, omega_max, 40001)
    c = np.max(np.abs(fourier_fn(w)) * (1.0 + w) ** p)
    return safety * float(c)


def _make_zero(params):
    return TestFunction(
        "zero",
        params,
        support_radius=np.pi,
        eval_fn=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        fourier_fn=lambda w: np.zeros_like(np.asarray(w, dtype=float)) + 0.0j,
        smoothness_epsilon=1.0,
        fourier_decay=(0.0, 5.0),
        sup_norm=0.0,
    )


def _make_cosine_hat(params):
    if params:
        raise ValueError("cosine_hat takes no parameters")
    return TestFunction(
        "cosine_hat",
        params,
        support_radius=np.pi,
        eval_fn=lambda x: 1.0 + np.cos(x),
        fourier_fn=_stable_cosine_hat_transform,
        smoothness_epsilon=2.0,
        # |Ff| <= 1 everywhere and <= 1.43 (1+w)^-3 beyond w=2; C=27 covers
        # the (1+w)^3 factor on [0,2].
        fourier_decay=(27.0, 3.0),
        sup_norm=2.0,
    )


def _make_triangle(params):
    if params:
        raise ValueError("triangle takes no parameters")
    return TestFunction(
        "triangle",
        params,
        support_radius=np.pi,
        eval_fn=lambda x: np.maximum(0.0, 1.0 - np.abs(x) / np.pi),
        fourier_fn=_triangle_transform,
        smoothness_epsilon=0.9,
        fourier_decay=(2.0, 2.0),
        panels=(-np.pi, 0.0, np.pi),
        sup_norm=1.0,
    )


def _make_bump(params):
    r = float(params[0]) if params else np.pi
    if r <= 0:
        raise ValueError("bump radius must be positive")

    def ev(x):
        x = np.asarray(x, dtype=float)
        u2 = (x / r) ** 2
        out = np.zeros_like(x)
        inside = u2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - u2[inside]))
        return out

    fourier = _FFTFourier(ev, r)
    decay_c = _fit_decay_constant(fourier, 4.0, min(fourier.omega_max, 400.0))
    return TestFunction(
        "bump",
        (r,),
        support_radius=r,
        eval_fn=ev,
        fourier_fn=fourier,
        smoothness_epsilon=3.0,
        fourier_decay=(decay_c, 4.0),
        sup_norm=1.0,
    )


def _make_hermite_gauss(params):
    coeffs = [float(c) for c in params] if params else [1.0]
    if len(coeffs) > 24:
        raise ValueError("hermite_gauss polynomial degree too large")
    r = 7.5  # exp(-r^2) ~ 4e-25: truncation is machine negligible

    def ev(x):
        x = np.asarray(x, dtype=float)
        return npoly.polyval(x, coeffs) * np.exp(-(x**2))

    # F(p(x) exp(-x^2)) = q(w) exp(-w^2/4) where q is built by applying
    # q -> i (q' - w q / 2) once per power of x, starting from 1/(2 sqrt(pi)).
    base = np.array([1.0 / (2.0 * np.sqrt(np.pi))], dtype=complex)
    q = np.zeros(1, dtype=complex)
    term = base
    for m, c in enumerate(coeffs):
        if m > 0:
            term = 1j * npoly.polysub(
                npoly.polyder(term), 0.5 * npoly.polymulx(term)
            )
        q = npoly.polyadd(q, c * term)

    def fourier(w):
        w = np.asarray(w, dtype=float)
        return npoly.polyval(w, q) * np.exp(-(w**2) / 4.0)

    decay_c = _fit_decay_constant(fourier, 8.0, 80.0)
    return TestFunction(
        "hermite_gauss",
        coeffs,
        support_radius=r,
        eval_fn=ev,
        fourier_fn=fourier,
        smoothness_epsilon=3.0,
        fourier_decay=(decay_c, 8.0),
    )


_FAMILIES = {
    "zero": _make_zero,
    "cosine_hat": _make_cosine_hat,
    "triangle": _make_triangle,
    "bump": _make_bump,
    "hermite_gauss": _make_hermite_gauss,
}


def builtin_names():
    return sorted(_FAMILIES)


def make_builtin(name, params=()):
    """Construct a registered test function by id and parameter list."""
    try:
        factory = _FAMILIES[name]
    except KeyError:
        raise ValueError(
            f"unknown test function family {name!r}; known: {builtin_names()}"
        ) from None
    return factory(list(params))


def _check_dilation_fits_circle(f, n, alpha):
    if f.support_radius * n ** (alpha - 1.0) > np.pi * (1.0 + 1e-12):
        raise ValueError(
            f"support radius {f.support_radius} dilated by n^(alpha-1) "
            f"exceeds pi: the dilated function wraps around the circle "
            f"(n={n}, alpha={alpha})"
        )


def fourier_coefficient(f, n, alpha, k):
    """k-th Fourier coefficient of theta -> f(theta n^(1-alpha)).

    Equals n^(alpha-1) * Ff(k n^(alpha-1)).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    scale = float(n) ** (alpha - 1.0)
    return scale * f.fourier(np.asarray(k, dtype=float) * scale)


def dilated_table(f, n, alpha, N):
    """Table of dilated Fourier coefficients for |k| <= N."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    _check_dilation_fits_circle(f, n, alpha)
    k = np.arange(-N, N + 1)
    coeffs = np.asarray(fourier_coefficient(f, n, alpha, k), dtype=complex)
    return DilatedFourierTable(n=n, alpha=alpha, truncation_N=N, coefficients=coeffs)


def truncate(f, n, alpha, N, grid_size=None):
    """Evaluate the degree-N Fourier truncation of the dilated f on a grid.

    Returns the trigonometric polynomial sum_{|k|<=N} h_hat(k) z^k sampled
    at the ``grid_size`` angles 2 pi m / grid_size.
    """
    table = dilated_table(f, n, alpha, N)
    if grid_size is None:
        grid_size = int(2 ** np.ceil(np.log2(max(4 * N + 4, 16))))
    if grid_size < 2 * N + 1:
        raise ValueError(
            f"grid of {grid_size} points is too coarse for degree {N} "
            f"(need at least {2 * N + 1})"
        )
    c = np.zeros(grid_size, dtype=complex)
    c[0] = table.coefficients[N]
    for k in range(1, N + 1):
        c[k] = table.coefficients[N + k]
        c[-k] = table.coefficients[N - k]
    values = np.fft.ifft(c) * grid_size
    theta = 2.0 * np.pi * np.arange(grid_size) / grid_size
    theta = np.where(theta > np.pi, theta - 2.0 * np.pi, theta)
    return SymbolSamples(angles=theta, values=values.real, table=table)


def choose_N(n, alpha, delta=None):
    """Deterministic truncation order inside the admissible window.

    Uses the geometric midpoint exponent (1-alpha + min(1, 3(1-alpha)/2))/2,
    clipped so that n^(-2 delta) sqrt(N) / n^((1-alpha)/2) stays below one
    when a thinning exponent delta is supplied.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1) for the truncation window")
    e_lo = 1.0 - alpha
    e_hi = min(1.0, 1.5 * (1.0 - alpha))
    exponent = 0.5 * (e_lo + e_hi)
    N = int(np.round(float(n) ** exponent))
    if delta is not None:
        cap = int(np.floor(float(n) ** (1.0 - alpha + 4.0 * delta)))
        N = min(N, cap)
    return max(N, 1)


def _transform_band_integral(f, weight_power, omega_max, nodes_per_panel=8):
    """integral_0^omega_max (1+w)-free weighted |Ff(w)|^2 via composite GL.

    ``weight_power`` is the exponent a in a weight w^a (a = 1 for the
    sigma_f^2 integrand, 0 for plain L^2).  |Ff|^2 oscillates with period
    ~ pi / support_radius, so panels of half that width with a few GL
    nodes are spectrally accurate per panel.
    """
    panel = 0.5 * np.pi / f.support_radius
    count = int(np.ceil(omega_max / panel))
    base_x, base_w = roots_legendre(nodes_per_panel)
    edges = panel * np.arange(count + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * panel
    w = (mids[:, None] + half * base_x[None, :]).ravel()
    ww = np.broadcast_to(half * base_w, (count, nodes_per_panel)).ravel()
    vals = np.abs(f.fourier(w)) ** 2 * w**weight_power
    return float(np.dot(ww, vals))


def _general_weight_integral(f, weight_fn, omega_max, nodes_per_panel=8):
    panel = 0.5 * np.pi / f.support_radius
    count = int(np.ceil(omega_max / panel))
    base_x, base_w = roots_legendre(nodes_per_panel)
    edges = panel * np.arange(count + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * panel
    w = (mids[:, None] + half * base_x[None, :]).ravel()
    ww = np.broadcast_to(half * base_w, (count, nodes_per_panel)).ravel()
    vals = np.abs(f.fourier(w)) ** 2 * weight_fn(w)
    return float(np.dot(ww, vals))


def _decay_tail_bound(c_decay, p, omega, weight_power):
    """Upper bound for integral_omega^inf w^a C^2 (1+w)^(-2p) dw."""
    # w^a (1+w)^(-2p) <= (1+w)^(a-2p); integrable for 2p - a > 1.
    power = 2.0 * p - weight_power
    if power <= 1.0:
        raise ValueError("decay exponent too small for tail bound")
    return c_decay**2 * (1.0 + omega) ** (1.0 - power) / (power - 1.0)


def sigma_f_squared(f, rel_tol=1e-9):
    """integral over R of |w| |Ff(w)|^2 dw, with a certified tail bound.

    The body is composite panel quadrature on [0, Omega]; the tail beyond
    Omega is bounded through the declared decay |Ff| <= C (1+|w|)^(-p) and
    Omega grows until the bound is below ``rel_tol`` of the body.
    """
    if f.sup_norm == 0.0:
        return 0.0
    c_decay, p = f.fourier_decay
    if 2.0 * p - 1.0 <= 1.0:
        raise ValueError("declared Fourier decay too weak to certify the tail")
    omega = max(16.0, 8.0 / f.support_radius)
    for _ in range(40):
        tail = _decay_tail_bound(c_decay, p, omega, weight_power=1)
        body = _transform_band_integral(f, 1, omega)
        if tail <= rel_tol * max(body, 1e-300):
            return 2.0 * body + tail
        omega *= 2.0
        if omega > 1e7:
            break
    raise ValueError("tail of |w| |Ff|^2 did not converge; epsilon declared too large")


def weighted_norm(f, epsilon=None, rel_tol=1e-3):
    """integral |Ff(w)|^2 (1+|w|)^(1+eps) dw with a certified tail bound.

    Establishes finiteness of the smoothness condition; the returned value
    carries the analytic tail so it is an upper bound within rel_tol.
    """
    eps = f.smoothness_epsilon if epsilon is None else float(epsilon)
    if f.sup_norm == 0.0:
        return 0.0
    c_decay, p = f.fourier_decay
    power = 2.0 * p - (1.0 + eps)
    if power <= 1.0:
        raise ValueError("declared decay cannot certify the weighted norm tail")
    omega = max(16.0, 8.0 / f.support_radius)
    for _ in range(40):
        tail = c_decay**2 * (1.0 + omega) ** (1.0 - power) / (power - 1.0)
        body = _general_weight_integral(
            f, lambda w: (1.0 + np.abs(w)) ** (1.0 + eps), omega
        )
        if tail <= rel_tol * max(body, 1e-300):
            return 2.0 * body + tail
        omega *= 2.0
        if omega > 1e7:
            break
    raise ValueError("weighted norm tail did not converge")
