"""Hessian quadratic form of the nonlinear energy and convexity certification.

Everything here works in the real coordinates (a_n, b_n) of a field.  The
second derivative of V(phi) = int |phi|^p dx/2pi along the perturbation
phi + t*(psi + i*theta), with psi = sum xi_n e^{inx} and theta = sum eta_n
e^{inx} (real xi, eta), is

    (p/2)       int |phi|^{p-2} ||(delta, conj(delta))||^2     dx/2pi
  + (p(p-2)/4)  int |phi|^{p-4} |delta conj(phi) + conj(delta) phi|^2 dx/2pi

with delta = psi + i*theta, i.e. p*|delta|^2 in the first integrand and
p(p-2)*Re(delta conj(phi))^2 in the second.  This form is validated against
a finite-difference oracle in the test suite.  For p < 4 the second
integrand is evaluated in the guarded product form
|phi|^{p-2} * (Re(delta conj(phi)) / |phi|)^2, whose ratio is bounded by
|delta| pointwise, so zeros of phi are harmless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fourier_field import (
    PeriodicField,
    default_grid_size,
    evaluate,
    hamiltonian,
    kinetic_energy,
    l2_norm_sq,
    lp_integral,
    sobolev_norm_sq,
    sup_norm,
)

__all__ = [
    "Direction",
    "ConvexityParams",
    "ConvexityReport",
    "hessian_form_V",
    "hessian_fd_oracle",
    "hessian_matrix_V",
    "w_k_perturbation",
    "y_n_perturbation",
    "perturbed_hamiltonians",
    "certify_convexity",
    "lsi_lower_bound",
    "estimate_embedding_constants",
]

SINGULAR_GUARD = 1e-12  # |phi| floor inside the guarded integrand


@dataclass(frozen=True, eq=False)
class Direction:
    """Real perturbation (xi_n, eta_n) of the coordinates (a_n, b_n)."""

    xi: np.ndarray
    eta: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        eta = np.asarray(self.eta, dtype=float)
        if xi.shape != eta.shape or xi.ndim != 1 or xi.size % 2 == 0:
            raise ValueError("xi and eta must be equal odd-length 1-d arrays")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", eta)

    @property
    def cutoff(self) -> int:
        return (self.xi.size - 1) // 2

    def l2_norm_sq(self) -> float:
        return float(np.dot(self.xi, self.xi) + np.dot(self.eta, self.eta))

    def scaled(self, c: float) -> "Direction":
        return Direction(c * self.xi, c * self.eta)


@dataclass(frozen=True)
class ConvexityParams:
    """Configured exponents and embedding constants for the convexity bounds.

    The embedding constants are not pinned analytically; the defaults are
    heuristic estimates produced by :func:`estimate_embedding_constants`
    (maximizing the relevant norm ratios over random truncated fields) and
    should be treated as lower bounds on the true constants:

      c_gamma : ||phi||_{L^{p-2}} <= c_gamma * ||phi||_{H^gamma}  (p = 4)
      c_delta : ||phi||_infty     <= c_delta * ||phi||_{H^delta}
      kappa   : HessV bound by kappa ||phi||_{L^{p-2}}^{p-2} (sup norms), 2p(p-1)
      kappa_p : kappa combined with the embeddings, kappa * c_delta^2
    """

    delta: float = 0.75
    gamma: float = 0.3
    c_gamma: float = 1.0
    c_delta: float = 2.5
    kappa: float = 24.0
    kappa_p: float = 150.0
    holder_bound: float | None = None

    def __post_init__(self):
        if not (0.5 < self.delta < 1.0):
            raise ValueError("delta must lie in (1/2, 1)")
        if not (0.25 < self.gamma < 0.5):
            raise ValueError("gamma must lie in (1/4, 1/2)")
        for name in ("c_gamma", "c_delta", "kappa", "kappa_p"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    def growth_factor(self, beta: float) -> float:
        """1 + |beta| c_gamma kappa_p K^{p-2} with K the Holder bound (p = 4 form)."""
        if self.holder_bound is None:
            raise ValueError("holder_bound K is required")
        return 1.0 + abs(beta) * self.c_gamma * self.kappa_p * self.holder_bound**2

    def truncation_level(self, beta: float) -> int:
        """Smallest mode index M with M^{2(1-delta)} at least the growth factor.

        Recomputed from the inputs on every call; never cached.  At beta = 0
        the base equals 1 and the level is 1.
        """
        base = self.growth_factor(beta) ** (1.0 / (2.0 * (1.0 - self.delta)))
        return max(1, int(math.ceil(base - 1e-12)))


@dataclass(frozen=True)
class ConvexityReport:
    functional: str
    weight: str
    min_eigenvalue: float
    paper_bound: float
    certified: bool
    lsi_lower_bound: float
    convexity_modulus: float
    kernel_min_eigenvalue: float | None = None
    tolerance: float = 1e-9

    def to_json(self) -> dict:
        return {
            "functional": self.functional,
            "weight": self.weight,
            "min_eigenvalue": self.min_eigenvalue,
            "paper_bound": self.paper_bound,
            "certified": self.certified,
            "lsi_lower_bound": self.lsi_lower_bound,
            "convexity_modulus": self.convexity_modulus,
            "kernel_min_eigenvalue": self.kernel_min_eigenvalue,
            "tolerance": self.tolerance,
        }


# ---------------------------------------------------------------------------
# The quadratic form and its finite-difference oracle
# ---------------------------------------------------------------------------

def _form_batch(
    field: PeriodicField,
    xi_rows: np.ndarray,
    eta_rows: np.ndarray,
    p: float,
    grid_size: int | None = None,
) -> np.ndarray:
    """Hessian form of V applied to a batch of directions (rows)."""
    if p < 2:
        raise ValueError("p must be >= 2")
    g = grid_size or default_grid_size(field.cutoff)
    if g <= 2 * field.cutoff + 1:
        raise ValueError("grid too small for the field cutoff")
    phi = evaluate(field, g).values
    ns = np.arange(-field.cutoff, field.cutoff + 1)
    basis = np.exp(1j * np.outer(ns, 2 * np.pi * np.arange(g) / g))
    delta = (xi_rows + 1j * eta_rows) @ basis  # (B, g)

    absphi = np.abs(phi)
    if p == 2.0:
        w1 = np.ones(g)
    else:
        w1 = absphi ** (p - 2.0)
    term1 = p * np.mean(w1[None, :] * np.abs(delta) ** 2, axis=1)
    if p == 2.0:
        return term1
    # guarded product form of |phi|^{p-4} Re(delta conj(phi))^2
    safe = np.maximum(absphi, SINGULAR_GUARD)
    ratio = np.real(delta * np.conj(phi)[None, :]) / safe[None, :]
    term2 = p * (p - 2.0) * np.mean(w1[None, :] * ratio**2, axis=1)
    return term1 + term2


def hessian_form_V(
    field: PeriodicField,
    direction: Direction,
    p: float,
    grid_size: int | None = None,
) -> float:
    """Second derivative of the L^p energy along a coordinate direction.

    Always nonnegative; a value below -1e-9 signals an implementation bug
    and raises.
    """
    if direction.cutoff != field.cutoff:
        direction = _embed_direction(direction, field.cutoff)
    val = float(
        _form_batch(field, direction.xi[None, :], direction.eta[None, :], p, grid_size)[0]
    )
    if val < -1e-9:
        raise FloatingPointError(f"Hessian form returned {val} < 0")
    return val


def _embed_direction(direction: Direction, cutoff: int) -> Direction:
    old = direction.cutoff
    if old > cutoff:
        raise ValueError("direction cutoff exceeds field cutoff")
    xi = np.zeros(2 * cutoff + 1)
    eta = np.zeros(2 * cutoff + 1)
    xi[cutoff - old : cutoff + old + 1] = direction.xi
    eta[cutoff - old : cutoff + old + 1] = direction.eta
    return Direction(xi, eta)


def hessian_fd_oracle(
    field: PeriodicField,
    direction: Direction,
    p: float,
    h: float = 1e-4,
    grid_size: int | None = None,
) -> float:
    """Independent check: second central difference of the L^p energy."""
    if h <= 0:
        raise ValueError("h must be positive")
    if direction.cutoff != field.cutoff:
        direction = _embed_direction(direction, field.cutoff)
    step = PeriodicField(field.cutoff, direction.xi + 1j * direction.eta)
    g = grid_size or default_grid_size(field.cutoff)
    vp = lp_integral(field + h * step, p, g)
    v0 = lp_integral(field, p, g)
    vm = lp_integral(field + (-h) * step, p, g)
    return (vp - 2.0 * v0 + vm) / (h * h)


def hessian_matrix_V(
    field: PeriodicField, p: float, grid_size: int | None = None
) -> np.ndarray:
    """Dense Hessian of V in the coordinates (a_{-M..M}, b_{-M..M}).

    Assembled by applying the quadratic form to basis pairs and
    polarizing: H_ij = (Q[e_i + e_j] - Q[e_i - e_j]) / 4.
    """
    M = field.cutoff
    d = 2 * (2 * M + 1)
    eye = np.eye(2 * M + 1)
    zero = np.zeros((2 * M + 1, 2 * M + 1))
    basis_xi = np.vstack([eye, zero])  # rows: d basis directions
    basis_eta = np.vstack([zero, eye])

    iu, ju = np.triu_indices(d)
    xi_plus = basis_xi[iu] + basis_xi[ju]
    eta_plus = basis_eta[iu] + basis_eta[ju]
    xi_minus = basis_xi[iu] - basis_xi[ju]
    eta_minus = basis_eta[iu] - basis_eta[ju]
    q_plus = _form_batch(field, xi_plus, eta_plus, p, grid_size)
    q_minus = _form_batch(field, xi_minus, eta_minus, p, grid_size)
    H = np.zeros((d, d))
    H[iu, ju] = (q_plus - q_minus) / 4.0
    H[ju, iu] = H[iu, ju]
    return H


# ---------------------------------------------------------------------------
# Perturbations
# ---------------------------------------------------------------------------

def w_k_perturbation(
    field: PeriodicField, beta: float, p: float, params: ConvexityParams
) -> float:
    """Growth factor times M^{2 delta} times the low-mode mass sum_{|j|<=M}."""
    if params.holder_bound is None:
        raise ValueError("w_k_perturbation requires params.holder_bound")
    level = params.truncation_level(beta)
    M = field.cutoff
    lo = max(0, M - level)
    hi = min(2 * M, M + level)
    mass = float(np.sum(np.abs(field.coeffs[lo : hi + 1]) ** 2))
    return params.growth_factor(beta) * level ** (2.0 * params.delta) * mass


def w_k_sup_bound(beta: float, ball_radius: float, params: ConvexityParams) -> float:
    """Upper bound of the low-mode perturbation on the ball of mass N."""
    level = params.truncation_level(beta)
    return params.growth_factor(beta) * level ** (2.0 * params.delta) * ball_radius


def _y_n_rate(beta: float, ball_radius: float, params: ConvexityParams) -> float:
    if beta == 0.0:
        return 0.0
    d = params.delta
    return (1.0 - d) * (abs(beta) * params.c_delta * ball_radius) ** (1.0 / (1.0 - d))


def y_n_perturbation(
    field: PeriodicField, beta: float, ball_radius: float, params: ConvexityParams
) -> float:
    """(1-delta) (|beta| c_delta N)^{1/(1-delta)} times the L^2 mass."""
    return _y_n_rate(beta, ball_radius, params) * l2_norm_sq(field)


def y_n_sup_bound(beta: float, ball_radius: float, params: ConvexityParams) -> float:
    if beta == 0.0:
        return 0.0
    d = params.delta
    return (
        (1.0 - d)
        * (abs(beta) * params.c_delta) ** (1.0 / (1.0 - d))
        * ball_radius ** ((2.0 - d) / (1.0 - d))
    )


def perturbed_hamiltonians(
    field: PeriodicField,
    beta: float,
    p: float,
    ball_radius: float,
    params: ConvexityParams,
    nonlinear_weight: float | None = None,
) -> dict[str, float]:
    """Values of H, H_K = H + W_K and G_N = kinetic + Y_N + (beta/2) V.

    The focusing perturbations are identically zero at beta = 0, where the
    plain Hamiltonian is already convex; all three then reduce to the
    kinetic term.  ``nonlinear_weight`` overrides the beta/2 coefficient of
    V inside G_N (written for the quartic case).
    """
    H = hamiltonian(field, p, beta)
    wk = 0.0 if beta == 0.0 else w_k_perturbation(field, beta, p, params)
    coeff = (beta / 2.0) if nonlinear_weight is None else nonlinear_weight
    gn = (
        kinetic_energy(field)
        + y_n_perturbation(field, beta, ball_radius, params)
        + (0.0 if beta == 0.0 else coeff * lp_integral(field, p))
    )
    return {"H": H, "H_K": H + wk, "G_N": gn}


# ---------------------------------------------------------------------------
# Certification
# ---------------------------------------------------------------------------

def _weight_diagonal(weight: str, modes: np.ndarray, delta: float) -> np.ndarray:
    absn = np.abs(modes).astype(float)
    if weight == "l2":
        w = np.ones_like(absn)
    elif weight == "h1":
        w = absn**2
    elif weight == "h_delta":
        # Holder norm counts the zero mode with unit weight
        w = np.where(absn > 0, absn ** (2.0 * delta), 1.0)
    else:
        raise ValueError("weight must be 'l2', 'h1' or 'h_delta'")
    return np.concatenate([w, w])


def _functional_hessian(
    functional: str,
    field: PeriodicField,
    beta: float,
    p: float,
    ball_radius: float,
    params: ConvexityParams,
    grid_size: int | None,
    nonlinear_weight: float | None,
) -> np.ndarray:
    M = field.cutoff
    modes = np.arange(-M, M + 1).astype(float)
    kin = np.diag(np.concatenate([modes**2, modes**2]))
    if functional == "H":
        return kin + (beta / p) * hessian_matrix_V(field, p, grid_size)
    if functional == "H_K":
        H = kin + (beta / p) * hessian_matrix_V(field, p, grid_size)
        if beta == 0.0:
            return H
        level = params.truncation_level(beta)
        diag = np.where(
            np.abs(modes) <= level,
            2.0 * params.growth_factor(beta) * level ** (2.0 * params.delta),
            0.0,
        )
        return H + np.diag(np.concatenate([diag, diag]))
    if functional == "G_N":
        coeff = (beta / 2.0) if nonlinear_weight is None else nonlinear_weight
        rate = _y_n_rate(beta, ball_radius, params)
        out = kin + 2.0 * rate * np.eye(2 * (2 * M + 1))
        if beta != 0.0:
            out = out + coeff * hessian_matrix_V(field, p, grid_size)
        return out
    raise ValueError("functional must be 'H', 'H_K' or 'G_N'")


def default_paper_bound(functional: str, delta: float) -> float:
    """Hessian-scale lower bounds: twice the convexity modulus eta.

    G_N carries the (1/2)(1-delta) coefficient against the h1 seminorm;
    H_K carries modulus 1/4, i.e. 1/2 on the Hessian scale; the defocusing
    H is bounded below by the kinetic form itself.
    """
    if functional == "G_N":
        return 0.5 * (1.0 - delta)
    if functional == "H_K":
        return 0.5
    return 1.0


def certify_convexity(
    functional: str,
    field: PeriodicField,
    beta: float,
    p: float,
    ball_radius: float,
    params: ConvexityParams,
    weight: str = "h1",
    paper_bound: float | None = None,
    grid_size: int | None = None,
    tol: float = 1e-9,
    nonlinear_weight: float | None = None,
) -> ConvexityReport:
    """Dense eigenvalue certificate Hess >= bound * W for the chosen weight.

    ``min_eigenvalue`` is the smallest eigenvalue of W^{-1/2} Hess W^{-1/2}
    on the positive-weight subspace.  Certification additionally demands
    positive semidefiniteness of Hess - bound*W on the full space (reported
    through ``kernel_min_eigenvalue`` when W is singular), so weight kernels
    and cross terms are not silently ignored.
    """
    if field.cutoff > 16:
        raise ValueError("dense certification is limited to cutoff <= 16")
    if paper_bound is None:
        paper_bound = default_paper_bound(functional, params.delta)
    H = _functional_hessian(
        functional, field, beta, p, ball_radius, params, grid_size, nonlinear_weight
    )
    wdiag = _weight_diagonal(weight, np.arange(-field.cutoff, field.cutoff + 1), params.delta)
    pos = wdiag > 0
    scale = 1.0 / np.sqrt(wdiag[pos])
    Hw = H[np.ix_(pos, pos)] * scale[:, None] * scale[None, :]
    min_eig = float(np.linalg.eigvalsh(Hw)[0])

    kernel_eig: float | None = None
    full = H - paper_bound * np.diag(wdiag)
    full_min = float(np.linalg.eigvalsh(full)[0])
    if not np.all(pos):
        kernel_eig = full_min
    certified = (min_eig >= paper_bound - tol) and (full_min >= -tol)

    eta = max(min_eig, 0.0) / 2.0
    alpha = lsi_lower_bound(
        beta,
        p,
        ball_radius,
        params,
        eta=eta,
        route="holder" if functional == "H_K" else "ball",
    )
    return ConvexityReport(
        functional=functional,
        weight=weight,
        min_eigenvalue=min_eig,
        paper_bound=paper_bound,
        certified=bool(certified),
        lsi_lower_bound=alpha,
        convexity_modulus=eta,
        kernel_min_eigenvalue=kernel_eig,
        tolerance=tol,
    )


def lsi_lower_bound(
    beta: float,
    p: float,
    ball_radius: float,
    params: ConvexityParams,
    eta: float = 0.25,
    route: str = "ball",
) -> float:
    """Bounded-perturbation constant alpha = eta * exp(-2 * sup perturbation).

    ``route='holder'`` uses the low-mode perturbation bound on the Holder
    ball (requires params.holder_bound); ``route='ball'`` uses the L^2-mass
    perturbation bound.  At beta = 0 no perturbation is needed and alpha
    equals eta.  The value can underflow to 0.0 for large parameter
    regimes; callers needing the exponent should use the sup bounds
    directly.
    """
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    if beta == 0.0:
        return eta
    if route == "holder":
        sup = w_k_sup_bound(beta, ball_radius, params)
    elif route == "ball":
        sup = y_n_sup_bound(beta, ball_radius, params)
    else:
        raise ValueError("route must be 'ball' or 'holder'")
    return eta * math.exp(-2.0 * sup) if sup < 350 else 0.0


# ---------------------------------------------------------------------------
# Heuristic embedding constants
# ---------------------------------------------------------------------------

def estimate_embedding_constants(
    gamma: float = 0.3,
    delta: float = 0.75,
    p: float = 4.0,
    cutoff: int = 16,
    trials: int = 2000,
    seed: int = 0,
) -> dict[str, float]:
    """Estimate c_gamma and c_delta by maximizing norm ratios over random fields.

    Returns lower-bound estimates (a finite search cannot exceed the true
    suprema); reports flag them as heuristic.  kappa = 2p(p-1) is the
    analytic bound for the Hessian-form comparison and kappa_p combines it
    with the estimated embeddings.
    """
    rng = np.random.default_rng(seed)
    c_gamma = 0.0
    c_delta = 0.0
    for _ in range(trials):
        decay = rng.uniform(0.3, 2.0)
        ns = np.arange(-cutoff, cutoff + 1).astype(float)
        mag = (1.0 + np.abs(ns)) ** (-decay)
        phase = rng.standard_normal(2 * cutoff + 1) + 1j * rng.standard_normal(
            2 * cutoff + 1
        )
        f = PeriodicField(cutoff, mag * phase)
        hg = math.sqrt(sobolev_norm_sq(f, gamma))
        hd = math.sqrt(sobolev_norm_sq(f, delta))
        if hg > 0:
            lpn = lp_integral(f, max(p - 2.0, 2.0)) ** (1.0 / max(p - 2.0, 2.0))
            c_gamma = max(c_gamma, lpn / hg)
        if hd > 0:
            c_delta = max(c_delta, sup_norm(f) / hd)
    kappa = 2.0 * p * (p - 1.0)
    return {
        "c_gamma": c_gamma,
        "c_delta": c_delta,
        "kappa": kappa,
        "kappa_p": kappa * c_delta**2,
    }
