"""Spectral data of the periodic 2x2 Dirac system with potential phi = Q + iP.

The transfer matrix solves Psi' = A(x, lambda) Psi on [0, 2pi] with

    A = [[Q, P - lambda/2], [P + lambda/2, -Q]],

which is trace free, so det Psi is conserved.  The discriminant is
Delta(lambda) = trace Psi_lambda(2pi); for the zero potential it equals
2 cos(pi lambda).  Periodic spectrum and critical points are the real
solutions of Delta = +/-2 and Delta' = 0.

Linear statistics sum a strip-holomorphic, real-symmetric test function
over a two-sided index range of spectral points, either directly or by a
calculus-of-residues contour integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .floquet import (
    build_models,
    contour_sum,
    locate_spectral_points,
    rk4_transfer,
)
from .fourier_field import PeriodicField, l2_norm_sq

__all__ = [
    "Monodromy",
    "SpectralPoint",
    "SpectralDataDirac",
    "TestFunction",
    "monodromy",
    "picard_monodromy",
    "discriminant",
    "discriminant_batch",
    "discriminant_derivative",
    "periodic_eigenvalues",
    "critical_points",
    "spectral_data",
    "two_sided_slice",
    "linear_statistic_direct",
    "linear_statistic_contour",
    "lipschitz_probe_delta",
    "lorentzian",
    "cos_gauss",
    "poly_lorentzian",
    "parse_test_function",
    "InsufficientPointsError",
]

DEFAULT_STEPS = 2048


class InsufficientPointsError(ValueError):
    """Not enough spectral points for the requested two-sided index range."""


@dataclass(frozen=True, eq=False)
class Monodromy:
    """Transfer matrix over one period at a fixed spectral parameter."""

    matrix: np.ndarray
    lam: complex
    potential_hash: str

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("monodromy matrix must be 2x2")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> complex:
        return complex(self.matrix[0, 0] + self.matrix[1, 1])

    @property
    def determinant(self) -> complex:
        m = self.matrix
        return complex(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])


def _pq_half_grid(field: PeriodicField, steps: int) -> tuple[np.ndarray, np.ndarray]:
    """Q = Re phi and P = Im phi sampled at x_j = j * pi / steps, j = 0..2*steps."""
    xs = np.pi * np.arange(2 * steps + 1) / steps
    ns = field.modes
    vals = np.exp(1j * np.outer(xs, ns)) @ field.coeffs
    return np.imag(vals), np.real(vals)


def _transfer_entries(field: PeriodicField, steps: int):
    P, Q = _pq_half_grid(field, steps)

    def entries(j: int, lam: np.ndarray):
        half = lam / 2.0
        return (Q[j], P[j] - half, P[j] + half, -Q[j])

    return entries


def monodromy(field: PeriodicField, lam: complex, steps: int = DEFAULT_STEPS) -> Monodromy:
    """Psi_lambda(2 pi) by fixed-step RK4 with the field sampled on the grid."""
    e = _transfer_entries(field, steps)
    m = rk4_transfer(e, 2.0 * np.pi, steps, np.asarray([lam], dtype=complex))
    mat = np.array([[m[0][0], m[1][0]], [m[2][0], m[3][0]]])
    return Monodromy(mat, complex(lam), field.content_hash())


def discriminant_batch(field: PeriodicField, steps: int = DEFAULT_STEPS):
    """Closure evaluating Delta on arrays of spectral parameters."""
    e = _transfer_entries(field, steps)

    def disc(lams):
        lams = np.asarray(lams, dtype=complex)
        m = rk4_transfer(e, 2.0 * np.pi, steps, lams)
        return m[0] + m[3]

    return disc


def discriminant(field: PeriodicField, lam: complex, steps: int = DEFAULT_STEPS) -> complex:
    return complex(discriminant_batch(field, steps)(np.asarray([lam]))[0])


def discriminant_derivative(
    field: PeriodicField,
    lam: complex,
    order: int = 1,
    steps: int = DEFAULT_STEPS,
    radius: float = 0.5,
    nodes: int = 32,
) -> complex:
    """d^k Delta / d lambda^k via the Cauchy integral on a small circle.

    The discriminant is entire in lambda, so the trapezoid rule on the
    circle converges spectrally; radius 0.5 keeps the transfer matrices
    well inside the comfortable growth range.
    """
    if not (0 <= order <= 4):
        raise ValueError("order must be between 0 and 4")
    if order == 0:
        return discriminant(field, lam, steps)
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    ring = lam + radius * np.exp(1j * theta)
    vals = discriminant_batch(field, steps)(ring)
    coeff = np.mean(vals * np.exp(-1j * order * theta))
    return complex(math.factorial(order) * coeff / radius**order)


def picard_monodromy(
    field: PeriodicField,
    lam: complex,
    grid: int = 4096,
    max_iter: int = 200,
    tol: float = 1e-12,
) -> np.ndarray:
    """Slow reference solution of the Volterra integral form of the system.

    Iterates Psi <- E(x) (I + int_0^x E(-s) K(s) Psi(s) ds) with
    E(x) = exp((lam x / 2) [[0,-1],[1,0]]) and K = [[Q, P], [P, -Q]],
    using cumulative trapezoid quadrature.  Used only as a test oracle.
    """
    xs = np.linspace(0.0, 2.0 * np.pi, grid + 1)
    ns = field.modes
    vals = np.exp(1j * np.outer(xs, ns)) @ field.coeffs
    P, Q = np.imag(vals), np.real(vals)
    K = np.empty((grid + 1, 2, 2), dtype=complex)
    K[:, 0, 0] = Q
    K[:, 0, 1] = P
    K[:, 1, 0] = P
    K[:, 1, 1] = -Q

    def E(x, sign=1.0):
        a = sign * lam * x / 2.0
        c, s = np.cos(a), np.sin(a)
        out = np.empty(x.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
        return out

    Ex = E(xs)
    Em = E(xs, sign=-1.0)
    psi = Ex.copy()
    h = xs[1] - xs[0]
    for _ in range(max_iter):
        G = Em @ K @ psi
        integral = np.zeros_like(G)
        integral[1:] = np.cumsum(0.5 * h * (G[:-1] + G[1:]), axis=0)
        new = Ex @ (np.eye(2)[None, :, :] + integral)
        change = np.max(np.abs(new - psi))
        psi = new
        if change < tol:
            break
    return psi[-1]


# ---------------------------------------------------------------------------
# Spectral data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralPoint:
    value: float
    series: str          # 'principal' (Delta = 2) or 'complementary' (Delta = -2)
    multiplicity: int
    residual: float      # |Delta(value)^2 - 4| from the direct solver

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "series": self.series,
            "multiplicity": self.multiplicity,
            "residual": self.residual,
        }


@dataclass(frozen=True)
class SpectralDataDirac:
    window: tuple[float, float]
    periodic_points: tuple[SpectralPoint, ...] = ()
    critical_points: tuple[float, ...] = ()
    critical_residuals: tuple[float, ...] = ()

    def periodic_values(self, with_multiplicity: bool = False) -> np.ndarray:
        if with_multiplicity:
            return np.array(
                [p.value for p in self.periodic_points for _ in range(p.multiplicity)]
            )
        return np.array([p.value for p in self.periodic_points])

    def to_json(self) -> dict:
        return {
            "window": list(self.window),
            "periodic_points": [p.to_json() for p in self.periodic_points],
            "critical_points": list(self.critical_points),
            "critical_residuals": list(self.critical_residuals),
        }


def _series_name(level: float) -> str:
    return "principal" if level > 0 else "complementary"


def _scan_grid(window: tuple[float, float], spacing: float = 0.1) -> np.ndarray:
    lo, hi = window
    if hi <= lo:
        raise ValueError("empty window")
    n = max(8, int(math.ceil((hi - lo) / spacing)) + 1)
    return np.linspace(lo, hi, n)


def periodic_eigenvalues(
    field: PeriodicField,
    window: tuple[float, float],
    refine_tol: float = 1e-8,
    steps: int = DEFAULT_STEPS,
    double_tol: float = 1e-6,
) -> SpectralDataDirac:
    """Real solutions of Delta^2 = 4 in the window, with series labels.

    Eigenvalues of the free system sit on the integer lattice with unit
    spacing, so the scan grid uses spacing 0.1.  Returned points satisfy
    |Delta^2 - 4| < max(refine_tol, double_tol) against the direct solver.
    """
    disc = discriminant_batch(field, steps)
    roots, _ = locate_spectral_points(
        disc, _scan_grid(window), levels=(2.0, -2.0), double_tol=double_tol
    )
    roots = [r for r in roots if not r.is_critical and window[0] <= r.value <= window[1]]
    pts = []
    if roots:
        check = np.real(disc(np.array([r.value for r in roots], dtype=complex)))
        for r, dval in zip(roots, check):
            resid = abs(dval * dval - 4.0)
            if resid > max(refine_tol * 100.0, double_tol):
                raise FloatingPointError(
                    f"defining-equation residual {resid:.2e} too large at {r.value:.8f}; "
                    "increase the step budget or refine the window grid"
                )
            pts.append(SpectralPoint(r.value, _series_name(r.level), r.multiplicity, resid))
    return SpectralDataDirac(window=window, periodic_points=tuple(pts))


def critical_points(
    field: PeriodicField,
    window: tuple[float, float],
    refine_tol: float = 1e-8,
    steps: int = DEFAULT_STEPS,
) -> SpectralDataDirac:
    """Real zeros of Delta' in the window (free case: the integers)."""
    disc = discriminant_batch(field, steps)
    roots, models = locate_spectral_points(
        disc, _scan_grid(window), levels=(), want_critical=True
    )
    vals = [r.value for r in roots if r.is_critical and window[0] <= r.value <= window[1]]
    residuals = []
    for v in vals:
        resid = abs(discriminant_derivative(field, v, 1, steps))
        if resid > max(refine_tol * 100.0, 1e-6):
            raise FloatingPointError(
                f"|Delta'| residual {resid:.2e} too large at {v:.8f}"
            )
        residuals.append(float(resid))
    return SpectralDataDirac(
        window=window, critical_points=tuple(vals), critical_residuals=tuple(residuals)
    )


def spectral_data(
    field: PeriodicField,
    window: tuple[float, float],
    refine_tol: float = 1e-8,
    steps: int = DEFAULT_STEPS,
) -> SpectralDataDirac:
    per = periodic_eigenvalues(field, window, refine_tol, steps)
    crit = critical_points(field, window, refine_tol, steps)
    return SpectralDataDirac(
        window=window,
        periodic_points=per.periodic_points,
        critical_points=crit.critical_points,
        critical_residuals=crit.critical_residuals,
    )


def two_sided_slice(points: np.ndarray, M: int) -> np.ndarray:
    """Points indexed j = -M..M with j = 0 the point nearest zero.

    Indices increase with the spectral parameter.  Raises when fewer than
    M points lie on either side of the center.
    """
    pts = np.sort(np.asarray(points, dtype=float))
    if pts.size < 2 * M + 1:
        raise InsufficientPointsError(f"need {2 * M + 1} points, have {pts.size}")
    center = int(np.argmin(np.abs(pts)))
    if center - M < 0 or center + M >= pts.size:
        raise InsufficientPointsError(
            "two-sided range extends past the computed window; widen the window"
        )
    return pts[center - M : center + M + 1]


# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TestFunction:
    """Strip-holomorphic observable with the real symmetry g(conj z) = conj g(z)."""

    evaluator: object
    strip_height: float
    name: str

    def __call__(self, z):
        return self.evaluator(z)

    def validate(self, samples: int = 100, seed: int = 0, tol: float = 1e-10) -> None:
        rng = np.random.default_rng(seed)
        z = rng.uniform(-5, 5, samples) + 1j * rng.uniform(
            -self.strip_height, self.strip_height, samples
        )
        sym = np.max(np.abs(self(np.conj(z)) - np.conj(self(z))))
        if sym > tol:
            raise ValueError(f"{self.name}: real symmetry violated by {sym:.2e}")
        edge = rng.uniform(-50, 50, samples) + 1j * self.strip_height * np.sign(
            rng.standard_normal(samples)
        )
        vals = np.abs(self(edge))
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"{self.name}: unbounded on the strip boundary")


def lorentzian(c: float = 3.0, strip_height: float = 1.0) -> TestFunction:
    if c <= strip_height:
        raise ValueError("lorentzian scale c must exceed the strip height")
    g = TestFunction(lambda z: 1.0 / (np.asarray(z) ** 2 + c * c), strip_height, f"lorentzian(c={c:g})")
    g.validate()
    return g


def cos_gauss(a: float = 1.0, strip_height: float = 1.0) -> TestFunction:
    g = TestFunction(
        lambda z: np.cos(a * np.asarray(z)) * np.exp(-np.asarray(z) ** 2),
        strip_height,
        f"cos_gauss(a={a:g})",
    )
    g.validate()
    return g


def poly_lorentzian(
    c: float = 3.0, c0: float = 1.0, c2: float = 1.0, strip_height: float = 1.0
) -> TestFunction:
    if c <= strip_height:
        raise ValueError("poly_lorentzian scale c must exceed the strip height")
    g = TestFunction(
        lambda z: (c0 + c2 * np.asarray(z) ** 2) / (np.asarray(z) ** 2 + c * c),
        strip_height,
        f"poly_lorentzian(c={c:g},c0={c0:g},c2={c2:g})",
    )
    g.validate()
    return g


def parse_test_function(spec: str) -> TestFunction:
    """Parse 'builtin:lorentzian:c=3' style test-function descriptors."""
    parts = spec.split(":")
    if parts and parts[0] == "builtin":
        parts = parts[1:]
    if not parts:
        raise ValueError(f"empty test-function spec {spec!r}")
    name, kwargs = parts[0], {}
    for item in parts[1:]:
        key, _, val = item.partition("=")
        kwargs[key] = float(val)
    makers = {"lorentzian": lorentzian, "cos_gauss": cos_gauss, "poly_lorentzian": poly_lorentzian}
    if name not in makers:
        raise ValueError(f"unknown test function {name!r}; choose from {sorted(makers)}")
    return makers[name](**kwargs)


# ---------------------------------------------------------------------------
# Linear statistics
# ---------------------------------------------------------------------------

def linear_statistic_direct(points, g, M: int) -> float:
    """Sum of g over the two-sided slice j = -M..M of the given points."""
    sel = two_sided_slice(np.asarray(points, dtype=float), M)
    return float(np.real(np.sum(g(sel.astype(complex)))))


def linear_statistic_contour(
    field: PeriodicField,
    g,
    centers,
    radius: float = 0.2,
    kernel: str = "critical",
    steps: int = DEFAULT_STEPS,
    nodes: int = 64,
) -> float:
    """Residue-calculus evaluation of the linear statistic.

    Integrates g times Delta''/Delta' (critical points) or
    Delta'/(Delta -+ 2) (eigenvalue series) over a chain of circles.  Each
    circle must enclose the intended roots only; the g = 1 root count is
    checked for integrality and a failure raises ContourPlacementError.
    """
    if radius >= 0.25:
        raise ValueError("contour radius must stay below 1/4")
    centers = np.asarray(centers, dtype=complex)
    disc = discriminant_batch(field, steps)
    trust = max(0.25, radius + 0.05)
    models = build_models(disc, centers, radius=2.0 * trust, trust=trust, nodes=nodes)
    value, _counts = contour_sum(models, g, kernel, radius, nodes=nodes)
    return value


def lipschitz_probe_delta(
    field_a: PeriodicField,
    field_b: PeriodicField,
    lambda_set,
    steps: int = DEFAULT_STEPS,
) -> float:
    """max over the lambda set of |Delta_a - Delta_b| / ||phi_a - phi_b||_{L^2}."""
    diff = math.sqrt(l2_norm_sq(field_a - field_b))
    if diff == 0.0:
        raise ValueError("fields are identical; Lipschitz ratio undefined")
    lams = np.asarray(lambda_set, dtype=complex)
    da = discriminant_batch(field_a, steps)(lams)
    db = discriminant_batch(field_b, steps)(lams)
    return float(np.max(np.abs(da - db)) / diff)
