"""Gauss-Legendre rules on [0,1] and their push-forward to mesh entities."""

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedOrder

MAX_POINTS = 16


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights on the reference interval [0, 1]."""

    points: np.ndarray
    weights: np.ndarray

    @property
    def order(self):
        return len(self.points)

    def mapped(self, a, b):
        """Nodes and weights on [a, b]."""
        return a + (b - a) * self.points, (b - a) * self.weights


def gauss_rule(q):
    """Gauss-Legendre rule with ``q`` points on [0, 1].

    Nodes are Newton-refined roots of the degree-q Legendre polynomial,
    accurate to machine precision; the rule integrates polynomials up to
    degree 2q-1 exactly.
    """
    if not 1 <= q <= MAX_POINTS:
        raise UnsupportedOrder(f"point count must be in 1..{MAX_POINTS}, got {q}")
    i = np.arange(q)
    x = np.cos(np.pi * (i + 0.75) / (q + 0.5))
    for _ in range(60):
        p, dp = _legendre_and_derivative(q, x)
        dx = p / dp
        x -= dx
        if np.max(np.abs(dx)) < 1e-16:
            break
    _, dp = _legendre_and_derivative(q, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    return QuadratureRule(points=(x[order] + 1.0) / 2.0, weights=w[order] / 2.0)


def _legendre_and_derivative(q, x):
    pm, p = np.ones_like(x), x.copy()
    for n in range(2, q + 1):
        pm, p = p, ((2 * n - 1) * x * p - (n - 1) * pm) / n
    dp = q * (x * p - pm) / (x * x - 1.0)
    return p, dp


def tensor_rule(q1, q2=None):
    """Tensor product rule on the unit square; returns (points (n,2), weights)."""
    r1 = gauss_rule(q1)
    r2 = gauss_rule(q2 if q2 is not None else q1)
    px, py = np.meshgrid(r1.points, r2.points, indexing="ij")
    wx, wy = np.meshgrid(r1.weights, r2.weights, indexing="ij")
    pts = np.column_stack([px.ravel(order="F"), py.ravel(order="F")])
    return pts, (wx * wy).ravel(order="F")


def element_rule(mesh, elem, q):
    """Quadrature points and weights on physical element ``elem``.

    The q x q reference rule is mapped through the geometry; weights are
    scaled by |det J| so that integrating 1 returns the element's area.
    """
    (a1, b1), (a2, b2) = mesh.element_box(elem)
    pts, w_hat = tensor_rule(q)
    x_hat = np.column_stack(
        [a1 + (b1 - a1) * pts[:, 0], a2 + (b2 - a2) * pts[:, 1]]
    )
    x, _, detj = mesh.geometry.evaluate_many(x_hat)
    w = w_hat * (b1 - a1) * (b2 - a2) * np.abs(detj)
    return x, w
