"""Weighted ensembles approximating truncated Gibbs measures.

The reference Gaussian ("Wiener loop") puts independent N(0, 1/n^2) weight
on each real coordinate of mode n != 0, which realizes exp(-(1/2) int |phi'|^2 dx/2pi)
on the truncated phase space.  The Gibbs ensemble reweights it by

    exp(-(beta/p) int |phi|^p dx/2pi)            (nls)
    exp(+(beta/6) int q^3  dx/2pi)               (kdv, real fields)

restricted to the closed ball ||phi||_{L^2}^2 <= N, optionally intersected
with a Holder ball ||phi||_{H^gamma} <= K.

Determinism: all sampling is driven by numpy SeedSequence streams derived
from the master seed.  Rejection sampling proceeds in global rounds; in
round r the pending sample indices (in ascending order) consume the rows of
one batch drawn from SeedSequence((seed, r)).  The result is a pure
function of (params, count, seed), independent of any worker fan-out.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .fourier_field import (
    PeriodicField,
    field_from_json,
    field_to_json,
    l2_norm_sq,
    lp_integral,
    cubic_integral,
    sobolev_norm_sq,
)

__all__ = [
    "GibbsParams",
    "GibbsEnsemble",
    "OmegaReport",
    "DivergentWeightError",
    "RejectionBudgetError",
    "sample_wiener_loop",
    "sample_kdv_loop",
    "gibbs_weight",
    "in_omega",
    "importance_ensemble",
    "mcmc_ensemble",
    "effective_sample_size",
    "save_ensemble_jsonl",
    "load_ensemble_jsonl",
]

MAX_LOG_WEIGHT = 700.0  # exp overflow threshold for float64
_MCMC_TAG = 2  # stream tag separating the chain from rejection rounds


class DivergentWeightError(FloatingPointError):
    """A Gibbs weight overflowed; relevant near the marginal focusing case."""


class RejectionBudgetError(RuntimeError):
    """Rejection sampling exhausted its attempt budget without acceptances."""


@dataclass(frozen=True)
class GibbsParams:
    """Parameters of a truncated Gibbs measure.

    ``ball_radius`` is the bound N on ||phi||_{L^2}^2.  When both
    ``holder_gamma`` and ``holder_bound`` are set, membership additionally
    requires ||phi||_{H^gamma} <= holder_bound.  ``pi_periodic`` conditions
    the kdv loop on the pi-periodic subspace (odd modes zero), which for a
    product Gaussian is the same as sampling even modes only.
    """

    p: float
    beta: float
    ball_radius: float
    cutoff: int
    kind: str = "nls"
    holder_gamma: float | None = None
    holder_bound: float | None = None
    pi_periodic: bool = False

    def __post_init__(self):
        if self.kind not in ("nls", "kdv"):
            raise ValueError("kind must be 'nls' or 'kdv'")
        if self.kind == "nls" and not (2.0 <= self.p <= 6.0):
            raise ValueError("nls requires 2 <= p <= 6")
        if self.ball_radius <= 0:
            raise ValueError("ball_radius must be positive")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")
        if (self.holder_gamma is None) != (self.holder_bound is None):
            raise ValueError("holder_gamma and holder_bound must be set together")
        if self.holder_gamma is not None and not (0.25 < self.holder_gamma < 0.5):
            raise ValueError("holder_gamma must lie in (1/4, 1/2)")
        if self.holder_bound is not None and self.holder_bound <= 0:
            raise ValueError("holder_bound must be positive")
        if self.pi_periodic and self.kind != "kdv":
            raise ValueError("pi_periodic applies to kdv sampling only")

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "beta": self.beta,
            "ball_radius": self.ball_radius,
            "cutoff": self.cutoff,
            "kind": self.kind,
            "holder_gamma": self.holder_gamma,
            "holder_bound": self.holder_bound,
            "pi_periodic": self.pi_periodic,
        }

    @staticmethod
    def from_json(obj: dict) -> "GibbsParams":
        return GibbsParams(
            p=float(obj["p"]),
            beta=float(obj["beta"]),
            ball_radius=float(obj["ball_radius"]),
            cutoff=int(obj["cutoff"]),
            kind=obj.get("kind", "nls"),
            holder_gamma=obj.get("holder_gamma"),
            holder_bound=obj.get("holder_bound"),
            pi_periodic=bool(obj.get("pi_periodic", False)),
        )


@dataclass(frozen=True)
class OmegaReport:
    in_ball: bool
    in_holder_ball: bool | None  # None when no Holder constraint configured


@dataclass(frozen=True)
class GibbsEnsemble:
    params: GibbsParams
    samples: tuple[PeriodicField, ...]
    weights: np.ndarray
    seed: int
    method: str
    diagnostics: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.samples) != w.size:
            raise ValueError("samples and weights lengths differ")
        if w.size and (not np.all(np.isfinite(w)) or np.any(w < 0)):
            raise ValueError("weights must be finite and nonnegative")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "samples", tuple(self.samples))

    def __len__(self) -> int:
        return len(self.samples)


# ---------------------------------------------------------------------------
# Wiener loops
# ---------------------------------------------------------------------------

def _nls_loop_batch(count: int, cutoff: int, rng: np.random.Generator) -> np.ndarray:
    """Rows of coefficients c_n = (zeta + i zeta')/n for 1 <= |n| <= M."""
    ns = np.arange(-cutoff, cutoff + 1)
    z = rng.standard_normal((count, 2 * cutoff + 1, 2))
    coeffs = z[:, :, 0] + 1j * z[:, :, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        coeffs = coeffs / ns[None, :]
    coeffs[:, cutoff] = 0.0
    return coeffs

def _kdv_loop_batch(
    count: int, cutoff: int, rng: np.random.Generator, pi_periodic: bool
) -> np.ndarray:
    """Real-field loops: c_n = (zeta + i zeta')/(sqrt(2) n) for n >= 1, mirrored.

    Per-component variance 1/(2 n^2) makes the product density equal
    exp(-(1/2) int (q')^2 dx/2pi) on the independent coordinates n >= 1.
    """
    ns = np.arange(1, cutoff + 1)
    z = rng.standard_normal((count, cutoff, 2))
    pos = (z[:, :, 0] + 1j * z[:, :, 1]) / (math.sqrt(2.0) * ns[None, :])
    if pi_periodic:
        pos[:, 0::2] = 0.0  # zero the odd modes n = 1, 3, ...
    coeffs = np.zeros((count, 2 * cutoff + 1), dtype=complex)
    coeffs[:, cutoff + 1 :] = pos
    coeffs[:, :cutoff] = np.conj(pos[:, ::-1])
    return coeffs


def _loop_batch(count: int, params: GibbsParams, rng: np.random.Generator) -> np.ndarray:
    if params.kind == "kdv":
        return _kdv_loop_batch(count, params.cutoff, rng, params.pi_periodic)
    return _nls_loop_batch(count, params.cutoff, rng)


def sample_wiener_loop(cutoff: int, seed: int) -> PeriodicField:
    """One draw of the complex loop with coefficients (zeta+i zeta')/n, zero mean mode."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return PeriodicField(cutoff, _nls_loop_batch(1, cutoff, rng)[0])


def sample_kdv_loop(cutoff: int, seed: int, pi_periodic: bool = False) -> PeriodicField:
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return PeriodicField(cutoff, _kdv_loop_batch(1, cutoff, rng, pi_periodic)[0])


# ---------------------------------------------------------------------------
# Weights and membership
# ---------------------------------------------------------------------------

def _log_weight(field: PeriodicField, params: GibbsParams) -> float:
    if params.beta == 0.0:
        return 0.0
    if params.kind == "kdv":
        return (params.beta / 6.0) * cubic_integral(field)
    return -(params.beta / params.p) * lp_integral(field, params.p)


def gibbs_weight(field: PeriodicField, params: GibbsParams) -> float:
    """exp(-(beta/p) V) for nls, exp(+(beta/6) int q^3) for kdv.

    Raises :class:`DivergentWeightError` instead of silently overflowing,
    which matters near the marginal focusing case p = 6.
    """
    lw = _log_weight(field, params)
    if lw > MAX_LOG_WEIGHT:
        raise DivergentWeightError(f"log-weight {lw:.3g} overflows float64")
    return math.exp(lw)


def in_omega(field: PeriodicField, params: GibbsParams) -> OmegaReport:
    """Closed-ball membership report for Omega_N (and Omega_{N,K} if set)."""
    in_ball = l2_norm_sq(field) <= params.ball_radius
    in_holder: bool | None = None
    if params.holder_bound is not None:
        in_holder = (
            sobolev_norm_sq(field, params.holder_gamma) <= params.holder_bound**2
        )
    return OmegaReport(in_ball=bool(in_ball), in_holder_ball=in_holder)


def _batch_in_omega(coeffs: np.ndarray, params: GibbsParams) -> np.ndarray:
    l2 = np.sum(np.abs(coeffs) ** 2, axis=1)
    ok = l2 <= params.ball_radius
    if params.holder_bound is not None:
        ns = np.arange(-params.cutoff, params.cutoff + 1)
        w = np.zeros_like(ns, dtype=float)
        nz = ns != 0
        w[nz] = np.abs(ns[nz]) ** (2.0 * params.holder_gamma)
        mag2 = np.abs(coeffs) ** 2
        h = mag2[:, params.cutoff] + mag2 @ w
        ok &= h <= params.holder_bound**2
    return ok


# ---------------------------------------------------------------------------
# Ensembles
# ---------------------------------------------------------------------------

def importance_ensemble(
    count: int,
    params: GibbsParams,
    seed: int,
    max_attempts: int = 10_000_000,
) -> GibbsEnsemble:
    """Rejection-sample `count` loops into Omega and attach Gibbs weights.

    The acceptance rate reported is accepted/attempted for the ball
    indicator; the nonlinear factor enters through importance weights, not
    through rejection.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    dim = 2 * params.cutoff + 1
    accepted = np.zeros((count, dim), dtype=complex)
    pending = np.arange(count)
    attempts = 0
    round_idx = 0
    while pending.size:
        if attempts >= max_attempts:
            raise RejectionBudgetError(
                f"no full acceptance after {attempts} attempts "
                f"({pending.size} of {count} still pending)"
            )
        rng = np.random.default_rng(np.random.SeedSequence((seed, round_idx)))
        draws = _loop_batch(pending.size, params, rng)
        attempts += pending.size
        ok = _batch_in_omega(draws, params)
        accepted[pending[ok]] = draws[ok]
        pending = pending[~ok]
        round_idx += 1

    fields = tuple(PeriodicField(params.cutoff, accepted[i]) for i in range(count))
    divergent = 0
    weights = np.empty(count)
    for i, f in enumerate(fields):
        try:
            weights[i] = gibbs_weight(f, params)
        except DivergentWeightError:
            divergent += 1
            weights[i] = 0.0
    diagnostics = {
        "acceptance_rate": count / attempts,
        "attempts": attempts,
        "divergent_weights": divergent,
    }
    if divergent:
        diagnostics["divergent_weight_event"] = True
    return GibbsEnsemble(params, fields, weights, seed, "importance", diagnostics)


def mcmc_ensemble(
    count: int,
    step_size: float,
    params: GibbsParams,
    seed: int,
    burn_in: int | None = None,
) -> GibbsEnsemble:
    """Markov chain with the Gaussian-preserving autoregressive proposal.

    Proposal phi' = sqrt(1-s^2) phi + s xi with xi a fresh loop draw leaves
    the reference Gaussian invariant, so the accept test only involves the
    nonlinear log-weight difference together with the ball indicators.
    Emitted samples carry unit weights.
    """
    if not (0.0 < step_size < 1.0):
        raise ValueError("step_size must lie in (0, 1)")
    if count < 1:
        raise ValueError("count must be >= 1")
    if burn_in is None:
        burn_in = min(1000, 10 * count)
    rng = np.random.default_rng(np.random.SeedSequence((seed, _MCMC_TAG)))
    dim = 2 * params.cutoff + 1

    state = np.zeros(dim, dtype=complex)  # zero field lies in every ball
    state_lw = _log_weight(PeriodicField(params.cutoff, state), params)
    keep = np.empty((count, dim), dtype=complex)
    n_accept = 0
    n_total = count + burn_in
    blend = math.sqrt(1.0 - step_size**2)
    for it in range(n_total):
        fresh = _loop_batch(1, params, rng)[0]
        u = rng.uniform()  # one uniform per step, used only when needed
        proposal = blend * state + step_size * fresh
        if bool(_batch_in_omega(proposal[None, :], params)[0]):
            prop_lw = _log_weight(PeriodicField(params.cutoff, proposal), params)
            log_ratio = prop_lw - state_lw
            if log_ratio >= 0 or math.log(u) < log_ratio:
                state = proposal
                state_lw = prop_lw
                n_accept += 1
        if it >= burn_in:
            keep[it - burn_in] = state
    fields = tuple(PeriodicField(params.cutoff, keep[i]) for i in range(count))
    diagnostics = {
        "accept_fraction": n_accept / n_total,
        "burn_in": burn_in,
        "step_size": step_size,
    }
    return GibbsEnsemble(params, fields, np.ones(count), seed, "mcmc", diagnostics)


def _integrated_autocorrelation(x: np.ndarray) -> float:
    """1 + 2 sum rho_k over the initial positive sequence of lags."""
    x = np.asarray(x, float)
    n = x.size
    if n < 3:
        return 1.0
    y = x - x.mean()
    var = np.dot(y, y) / n
    if var == 0.0:
        return 1.0
    tau = 1.0
    for k in range(1, n // 2):
        rho = np.dot(y[:-k], y[k:]) / ((n - k) * var)
        if rho <= 0:
            break
        tau += 2.0 * rho
    return tau


def effective_sample_size(ensemble: GibbsEnsemble) -> float:
    """Weight-based ESS (sum w)^2 / sum w^2; autocorrelation ESS for chains."""
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    if ensemble.method == "mcmc":
        trace = np.array([l2_norm_sq(f) for f in ensemble.samples])
        return len(ensemble) / _integrated_autocorrelation(trace)
    w = ensemble.weights
    s = w.sum()
    if s == 0:
        return 0.0
    return float(s * s / np.dot(w, w))


# ---------------------------------------------------------------------------
# JSON-lines serialization: header record then one record per sample.
# ---------------------------------------------------------------------------

def save_ensemble_jsonl(ensemble: GibbsEnsemble, path) -> None:
    with open(path, "w") as fh:
        header = {
            "kind": "header",
            "params": ensemble.params.to_json(),
            "seed": ensemble.seed,
            "method": ensemble.method,
            "count": len(ensemble),
            "diagnostics": ensemble.diagnostics,
        }
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for f, w in zip(ensemble.samples, ensemble.weights):
            rec = {"kind": "sample", "field": field_to_json(f), "weight": float(w)}
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def load_ensemble_jsonl(path) -> GibbsEnsemble:
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("kind") != "header":
            raise ValueError("first record must be the ensemble header")
        params = GibbsParams.from_json(header["params"])
        samples = []
        weights = []
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            samples.append(field_from_json(rec["field"]))
            weights.append(float(rec["weight"]))
    return GibbsEnsemble(
        params,
        tuple(samples),
        np.array(weights),
        int(header["seed"]),
        header["method"],
        dict(header.get("diagnostics", {})),
    )
