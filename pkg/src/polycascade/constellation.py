"""Constellations and the inverse of their kernel Gram matrix.

A constellation is the fixed point set at which a package's spline family is
specified.  The production choice is a cross-polytope (hyperoctahedron) of
unit vertices plus the origin: in n dimensions, 2n + 1 points with rows
ordered [origin, -e_1..-e_n, +e_1..+e_n].  Pairwise squared distances between
those points take only the values {0, 1, 2, 4}, which collapses the Gram
matrix inverse U = (K + sigma^2 I)^-1 to ten scalars: four kernel values,
three Schur-complement basis coefficients, their three inverses, and two
border coefficients.  ``synthesize_u`` assembles U from the scalars without
any matrix inversion; ``explicit_u`` computes it the slow way for arbitrary
point sets and doubles as the cross-check oracle for the closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import KernelParams, phi, phi_matrix
from .linalg import as_matrix, ensure_finite

# Pairwise squared distance at or below this counts as coincident points.
COINCIDENT_SQ_DIST = 1e-12


class DegenerateKernelError(ValueError):
    """Kernel parameters make the closed-form coefficient system singular."""


class SingularConstellationError(ValueError):
    """The constellation Gram matrix is not invertible (points too close?)."""


@dataclass(frozen=True)
class Constellation:
    """Point set for one package: implicit octahedral or an explicit matrix."""

    n: int
    k: int
    kind: str  # "octahedral" | "explicit"
    sigma2: float = 0.0
    points: np.ndarray | None = None  # k x n, only for explicit kind

    def materialize_points(self) -> np.ndarray:
        """Return the k x n point matrix (built on demand for octahedral)."""
        if self.kind == "explicit":
            return self.points
        return octahedral_points(self.n)


def octahedral_points(n: int, dtype=np.float64) -> np.ndarray:
    """Rows [origin; -I_n; +I_n] — the unit cross-polytope plus its center."""
    c = np.zeros((2 * n + 1, n), dtype=dtype)
    idx = np.arange(n)
    c[1 + idx, idx] = -1.0
    c[1 + n + idx, idx] = 1.0
    return c


def build_octahedral(n: int, sigma2: float = 0.0) -> Constellation:
    """Octahedral constellation over an n-dimensional input space."""
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    return Constellation(n=n, k=2 * n + 1, kind="octahedral", sigma2=sigma2)


def build_explicit(points, sigma2: float = 0.0) -> Constellation:
    """Constellation from an explicit k x n point matrix."""
    c = as_matrix(points, dtype=np.float64, name="constellation points")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    if sigma2 == 0.0:
        m = pairwise_sq_dists(c)
        off = m[~np.eye(m.shape[0], dtype=bool)]
        if off.size and off.min() <= COINCIDENT_SQ_DIST:
            raise SingularConstellationError(
                f"constellation has points closer than sq dist {COINCIDENT_SQ_DIST}; "
                "use sigma2 > 0 or separate them"
            )
    return Constellation(n=c.shape[1], k=c.shape[0], kind="explicit", sigma2=sigma2, points=c)


def pairwise_sq_dists(c: np.ndarray) -> np.ndarray:
    """All pairwise squared distances between rows of c (clipped at 0)."""
    sq = np.sum(c * c, axis=1, keepdims=True)
    m = sq + sq.T - 2.0 * (c @ c.T)
    # rounding can leave tiny negatives on (near-)coincident rows
    return np.maximum(m, 0.0, out=m)


@dataclass(frozen=True)
class OctaCoefficients:
    """The ten scalars the closed-form U is assembled from."""

    k0: float
    k1: float
    k2: float
    k4: float
    a1: float
    a2: float
    a3: float
    b1: float
    b2: float
    b3: float
    u1: float
    u2: float


def derive_coefficients(n: int, params: KernelParams, sigma2: float = 0.0) -> OctaCoefficients:
    """Closed-form coefficients for the octahedral Gram inverse.

    Cost is O(1) arithmetic regardless of n.  Raises DegenerateKernelError
    when any denominator of the coefficient system vanishes.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be >= 0, got {sigma2}")
    k0 = phi(0.0, params)
    k1 = phi(1.0, params)
    k2 = phi(2.0, params)
    k4 = phi(4.0, params)

    d0 = k0 + sigma2
    if d0 == 0.0:
        raise DegenerateKernelError("k0 + sigma2 is zero")
    a1 = k0 - k2 + sigma2
    a2 = k4 - k2
    a3 = k2 - k1 * k1 / d0

    if a1 * a1 == a2 * a2:
        raise DegenerateKernelError(f"a1^2 == a2^2 ({a1}, {a2}); basis inverse undefined")
    if a1 + a2 == 0.0:
        raise DegenerateKernelError("a1 + a2 is zero")
    ring = a1 + a2 + 2.0 * n * a3
    if ring == 0.0:
        raise DegenerateKernelError("a1 + a2 + 2n*a3 is zero")

    denom = a1 * a1 - a2 * a2
    b1 = a1 / denom
    b2 = -a2 / denom
    b3 = -a3 / (ring * (a1 + a2))

    row_sum = b1 + b2 + 2.0 * n * b3  # any row/column sum of the interior inverse
    u1 = 1.0 / d0 + (k1 * k1) / (d0 * d0) * 2.0 * n * row_sum
    u2 = -(k1 / d0) * row_sum
    return OctaCoefficients(k0, k1, k2, k4, a1, a2, a3, b1, b2, b3, u1, u2)


def synthesize_u(coeffs: OctaCoefficients, n: int, dtype=np.float64) -> np.ndarray:
    """Assemble the (2n+1) x (2n+1) Gram inverse from the ten scalars.

    Layout: u1 corner, u2 borders, and an interior b1*I + b2*P + b3*J where
    P swaps the two n-wide halves (realized by index placement, not a stored
    permutation matrix).
    """
    k = 2 * n + 1
    u = np.full((k, k), coeffs.b3, dtype=dtype)
    u[0, 0] = coeffs.u1
    u[0, 1:] = coeffs.u2
    u[1:, 0] = coeffs.u2
    idx = np.arange(1, k)
    u[idx, idx] += coeffs.b1
    swapped = np.concatenate([idx[n:], idx[:n]])  # half-block swap
    u[idx, swapped] += coeffs.b2
    return u


def explicit_u(constellation: Constellation, params: KernelParams, dtype=np.float64) -> np.ndarray:
    """Invert the kernel Gram matrix of the constellation directly.

    General-purpose path: works for any point set, costs O(k^3), and serves
    as the oracle the synthesized closed form is checked against.
    """
    c = constellation.materialize_points().astype(dtype, copy=False)
    m = pairwise_sq_dists(c)
    gram = phi_matrix(m, params)
    if constellation.sigma2:
        gram = gram + gram.dtype.type(constellation.sigma2) * np.eye(constellation.k, dtype=gram.dtype)
    try:
        u = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularConstellationError(
            f"constellation Gram matrix is singular: {exc}; "
            "points may be too close together (consider sigma2 > 0)"
        ) from exc
    return ensure_finite(u, "explicit_u result")


def u_matrix(constellation: Constellation, params: KernelParams, dtype=np.float64) -> np.ndarray:
    """Gram inverse by the cheapest valid route for this constellation kind."""
    if constellation.kind == "octahedral":
        coeffs = derive_coefficients(constellation.n, params, constellation.sigma2)
        return synthesize_u(coeffs, constellation.n, dtype=dtype)
    return explicit_u(constellation, params, dtype=dtype)
