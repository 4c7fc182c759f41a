"""Reference-simplex quadrature and monomial tables."""

from __future__ import annotations

import itertools

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.special import roots_jacobi


def gauss_interval(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre rule on [0, 1]."""
    x, w = npleg.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_triangle(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) product rule on the unit triangle, exact to degree 2n - 1."""
    u, wu = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (u + 1.0)
    ws = 0.25 * wu
    t, wt = gauss_interval(n)
    S, T = np.meshgrid(s, t, indexing="ij")
    pts = np.column_stack([S.ravel(), (T * (1.0 - S)).ravel()])
    w = np.outer(ws, wt).ravel()
    return pts, w


def reference_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule exact for polynomials of the given degree on the reference simplex."""
    n = degree // 2 + 1
    if dim == 1:
        x, w = gauss_interval(n)
        return x[:, None], w
    if dim == 2:
        return gauss_triangle(n)
    raise ValueError(f"unsupported dimension {dim}")


def monomial_exponents(dim: int, degree: int) -> list[tuple[int, ...]]:
    return [e for d in range(degree + 1) for e in itertools.product(range(d + 1), repeat=dim) if sum(e) == d]


def eval_monomials(exps, pts: np.ndarray) -> np.ndarray:
    """Values of ``prod x_i^{e_i}``, shape (np, n_monomials)."""
    pts = np.atleast_2d(pts)
    out = np.ones((len(pts), len(exps)))
    for j, e in enumerate(exps):
        for i, a in enumerate(e):
            if a:
                out[:, j] *= pts[:, i] ** a
    return out


def grad_monomials(exps, pts: np.ndarray) -> np.ndarray:
    """Gradients, shape (np, n_monomials, dim)."""
    pts = np.atleast_2d(pts)
    dim = pts.shape[1]
    out = np.zeros((len(pts), len(exps), dim))
    for j, e in enumerate(exps):
        for i in range(dim):
            if e[i] == 0:
                continue
            v = e[i] * np.ones(len(pts))
            for l, a in enumerate(e):
                p = a - 1 if l == i else a
                if p:
                    v = v * pts[:, l] ** p
            out[:, j, i] = v
    return out


def lattice(dim: int, k: int) -> np.ndarray:
    """Equispaced Lagrange nodes of degree k on the reference simplex."""
    return np.array(monomial_exponents(dim, k), dtype=float)[:, ::-1] / k if k > 0 else np.zeros((1, dim))
