"""Exponentially weighted right Gauss-Radau rules in time.

All rules live on the reference interval ``[0, 1]`` with weight ``exp(-2*sigma*s)``.
A slab ``(t_left, t_left + tau]`` with exponent ``rho`` corresponds to
``sigma = rho * tau``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy import special

MAX_DEGREE = 10
MAX_SIGMA = 10.0
_EXACTNESS_TOL = 1e-11
_N_DISCRETE = 96


class QuadratureError(RuntimeError):
    """Raised when a weighted rule cannot be built to full accuracy."""


class ConfigurationError(ValueError):
    """Raised on inconsistent rule/slab parameters."""


def exp_moments(sigma: float, k_max: int) -> np.ndarray:
    """Moments ``mu_k = int_0^1 s^k exp(-2 sigma s) ds`` for ``k = 0..k_max``.

    The moments satisfy ``mu_k = (k mu_{k-1} - exp(-2 sigma)) / (2 sigma)``, but that
    recurrence loses accuracy fast when ``2 sigma < k``.  We use the alternating series
    for small arguments and the regularized incomplete gamma function otherwise.
    """
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    if sigma < 0 or not math.isfinite(sigma):
        raise ValueError(f"sigma must be finite and >= 0, got {sigma}")
    k = np.arange(k_max + 1, dtype=float)
    x = 2.0 * sigma
    if x == 0.0:
        return 1.0 / (k + 1.0)
    if x < 1.0:
        out = np.zeros(k_max + 1)
        term = 1.0
        for j in range(200):
            if j > 0:
                term *= -x / j
            contrib = term / (k + j + 1.0)
            out += contrib
            if abs(term) < 1e-18:
                break
        return out
    logs = special.gammaln(k + 1.0) + np.log(special.gammainc(k + 1.0, x)) - (k + 1.0) * math.log(x)
    return np.exp(logs)


def _recurrence(sigma: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Monic three-term recurrence coefficients (alpha_0..alpha_{n-1}, beta_0..beta_{n-1}).

    Discretized Stieltjes procedure on a Gauss-Legendre discretization of the weight.
    The weight is entire, so ``_N_DISCRETE`` points integrate every product that occurs
    here to machine precision for ``sigma <= MAX_SIGMA``.
    """
    x, w = npleg.leggauss(_N_DISCRETE)
    x = 0.5 * (x + 1.0)
    lam = 0.5 * w * np.exp(-2.0 * sigma * x)
    alpha = np.zeros(n)
    beta = np.zeros(n)
    p_prev = np.zeros_like(x)
    p = np.ones_like(x)
    norm_prev = 1.0
    for j in range(n):
        norm = np.dot(lam, p * p)
        alpha[j] = np.dot(lam, x * p * p) / norm
        beta[j] = norm if j == 0 else norm / norm_prev
        p_prev, p = p, (x - alpha[j]) * p - (beta[j] if j > 0 else 0.0) * p_prev
        norm_prev = norm
    return alpha, beta


def _monic_values(alpha: np.ndarray, beta: np.ndarray, z: float, n: int) -> tuple[float, float]:
    """Values of the monic orthogonal polynomials pi_{n-1}(z), pi_n(z)."""
    p_prev, p = 0.0, 1.0
    for j in range(n):
        p_prev, p = p, (z - alpha[j]) * p - (beta[j] if j > 0 else 0.0) * p_prev
    return p_prev, p


@dataclass(frozen=True)
class WeightedRadauRule:
    """``q+1``-point right Radau rule for ``int_0^1 p(s) exp(-2 sigma s) ds``."""

    q: int
    sigma: float
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))

    def moment_residuals(self) -> np.ndarray:
        """Relative errors on the monomials ``s^0 .. s^{2q}``."""
        mu = exp_moments(self.sigma, 2 * self.q)
        approx = np.array([np.dot(self.weights, self.nodes**k) for k in range(2 * self.q + 1)])
        return np.abs(approx - mu) / np.abs(mu)


def _build(q: int, sigma: float) -> WeightedRadauRule:
    if q < 0 or q > MAX_DEGREE:
        raise QuadratureError(f"degree q={q} outside supported range 0..{MAX_DEGREE}")
    if not (0.0 <= sigma <= MAX_SIGMA):
        raise QuadratureError(f"sigma={sigma} outside supported range [0, {MAX_SIGMA}]")
    n = q + 1
    alpha, beta = _recurrence(sigma, n)
    mu0 = exp_moments(sigma, 0)[0]
    # Radau modification fixing the node z = 1 (Golub's construction).
    p_qm1, p_q = _monic_values(alpha, beta, 1.0, q)
    a = alpha.copy()
    a[q] = 1.0 - (beta[q] * p_qm1 / p_q if q > 0 else 0.0)
    off = np.sqrt(beta[1:n])
    jac = np.diag(a) + np.diag(off, 1) + np.diag(off, -1)
    evals, evecs = np.linalg.eigh(jac)
    order = np.argsort(evals)
    nodes = evals[order]
    weights = mu0 * evecs[0, order] ** 2
    nodes[-1] = 1.0
    if np.any(weights <= 0) or np.any(np.diff(nodes) <= 0) or nodes[0] <= 0:
        raise QuadratureError(f"degenerate rule for q={q}, sigma={sigma}")
    rule = WeightedRadauRule(q=q, sigma=float(sigma), nodes=nodes, weights=weights)
    res = rule.moment_residuals()
    if res.max() > _EXACTNESS_TOL:
        raise QuadratureError(
            f"rule for q={q}, sigma={sigma} fails moment exactness (max rel. residual {res.max():.2e})"
        )
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return rule


@functools.lru_cache(maxsize=256)
def _cached(q: int, sigma_key: float) -> WeightedRadauRule:
    return _build(q, sigma_key)


def build_weighted_radau(q: int, sigma: float) -> WeightedRadauRule:
    """Right Gauss-Radau rule with ``q+1`` nodes for weight ``exp(-2 sigma s)`` on [0, 1].

    The last node is exactly 1. Rules are cached by ``(q, round(sigma, 14))``.
    """
    if not math.isfinite(sigma):
        raise QuadratureError("sigma must be finite")
    return _cached(int(q), round(float(sigma), 14))


@dataclass(frozen=True)
class SlabRule:
    """A reference rule mapped onto ``(t_left, t_left + tau]``.

    ``weights`` are fully scaled: ``sum(weights * v(nodes))`` approximates
    ``int v(t) exp(-2 rho (t - t_left)) dt`` over the slab.
    """

    rule: WeightedRadauRule
    t_left: float
    tau: float
    rho: float

    @property
    def nodes(self) -> np.ndarray:
        return self.t_left + self.tau * self.rule.nodes

    @property
    def weights(self) -> np.ndarray:
        return self.tau * self.rule.weights

    @property
    def t_right(self) -> float:
        return self.t_left + self.tau

    def integrate(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.weights, values, axes=(0, 0))

    def to_reference(self, t):
        return (np.asarray(t, dtype=float) - self.t_left) / self.tau


def map_to_slab(rule: WeightedRadauRule, t_left: float, tau: float, rho: float) -> SlabRule:
    if tau <= 0:
        raise ConfigurationError(f"slab length must be positive, got {tau}")
    if abs(rule.sigma - rho * tau) > 1e-12 * max(1.0, abs(rho * tau)):
        raise ConfigurationError(
            f"rule built with sigma={rule.sigma} but slab has rho*tau={rho * tau}"
        )
    return SlabRule(rule=rule, t_left=float(t_left), tau=float(tau), rho=float(rho))


class LagrangeBasis:
    """Lagrange polynomials at given nodes of [0, 1], evaluated through a Legendre expansion."""

    def __init__(self, nodes: np.ndarray):
        self.nodes = np.asarray(nodes, dtype=float)
        self.degree = len(self.nodes) - 1
        vander = npleg.legvander(2.0 * self.nodes - 1.0, self.degree)
        # column j holds the Legendre coefficients of l_j
        self._coef = np.linalg.inv(vander)
        self._dcoef = 2.0 * npleg.legder(self._coef, axis=0) if self.degree > 0 else np.zeros((1, 1))

    def __call__(self, s) -> np.ndarray:
        """Values ``l_j(s)``, shape ``(len(s), q+1)``."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return npleg.legvander(2.0 * s - 1.0, self.degree) @ self._coef

    def derivative(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.degree == 0:
            return np.zeros((len(s), 1))
        return npleg.legvander(2.0 * s - 1.0, self.degree - 1) @ self._dcoef


class RadauInterpolant:
    """Degree-q polynomial on a slab interpolating values at the slab's Radau nodes."""

    def __init__(self, slab: SlabRule, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape[0] != slab.rule.q + 1:
            raise ValueError(f"expected {slab.rule.q + 1} nodal values, got {values.shape[0]}")
        self.slab = slab
        self.values = values
        self.basis = LagrangeBasis(slab.rule.nodes)

    def __call__(self, t):
        b = self.basis(self.slab.to_reference(t))
        out = np.tensordot(b, self.values, axes=(1, 0))
        return out[0] if np.ndim(t) == 0 else out


def radau_interpolate(slab: SlabRule, values) -> RadauInterpolant:
    return RadauInterpolant(slab, values)


@dataclass(frozen=True)
class ThetaPoly:
    """Degree ``q+1`` polynomial vanishing at the rule nodes with value 1 at s = 0."""

    q: int
    nodes: np.ndarray

    @property
    def coefficients(self) -> np.ndarray:
        """Power-basis coefficients, lowest degree first."""
        c = np.polynomial.polynomial.polyfromroots(self.nodes)
        return c / np.prod(-self.nodes)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.prod(s[..., None] - self.nodes, axis=-1) / np.prod(-self.nodes)

    def derivative(self, s) -> np.ndarray:
        dc = np.polynomial.polynomial.polyder(self.coefficients)
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), dc)


def build_theta(rule: WeightedRadauRule) -> ThetaPoly:
    return ThetaPoly(q=rule.q, nodes=np.array(rule.nodes))
