"""Kernel function families, pointwise evaluation, and Gram matrix assembly.

Four continuous, uniformly bounded families are provided: Gaussian,
Laplace, rational quadratic, and constant. All of them satisfy
k(x, x) = 1 and 0 < k(x, y) <= 1, so Gram matrices are positive
semidefinite with unit diagonal and the constant family attains the
uniform lower bound k_min = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

FAMILIES = ("gaussian", "laplace", "rational_quadratic", "constant")


@dataclass(frozen=True)
class KernelSpec:
    """A kernel family with its parameters.

    Attributes:
        family: One of "gaussian", "laplace", "rational_quadratic",
            "constant" (case-insensitive on input).
        bandwidth: Length scale h. Must be positive; ignored by the
            constant family.
        dim: Dimension d of the input space.
    """

    family: str
    bandwidth: float = 1.0
    dim: int = 1

    def __post_init__(self) -> None:
        family = str(self.family).lower()
        if family not in FAMILIES:
            raise ValueError(
                f"unknown kernel family {self.family!r}; expected one of {FAMILIES}"
            )
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))
        object.__setattr__(self, "dim", int(self.dim))
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")
        if family != "constant" and not self.bandwidth > 0.0:
            raise ValueError("bandwidth must be positive")

    def to_dict(self) -> dict:
        return {"family": self.family, "bandwidth": self.bandwidth, "dim": self.dim}

    @classmethod
    def from_dict(cls, obj: dict) -> "KernelSpec":
        return cls(
            family=obj["family"],
            bandwidth=float(obj.get("bandwidth", 1.0)),
            dim=int(obj.get("dim", 1)),
        )


def as_points(x: object, dim: int) -> NDArray[np.float64]:
    """Normalizes scalars, vectors, or stacked rows to an (n, dim) array.

    A scalar is accepted only for dim=1; a flat length-dim vector is a
    single point; a 2-d array must have dim columns.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim == 1:
        if dim == 1:
            arr = arr.reshape(-1, 1)
        elif arr.shape[0] == dim:
            arr = arr.reshape(1, dim)
        else:
            raise ValueError(f"point of dimension {arr.shape[0]} passed to a dim={dim} kernel")
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"points must have {dim} coordinates, got shape {arr.shape}")
    return arr


def _profile(spec: KernelSpec, sqdist: NDArray[np.float64]) -> NDArray[np.float64]:
    """Applies the radial profile to squared Euclidean distances."""
    if spec.family == "gaussian":
        return np.exp(-sqdist / (2.0 * spec.bandwidth**2))
    if spec.family == "laplace":
        return np.exp(-np.sqrt(sqdist) / spec.bandwidth)
    if spec.family == "rational_quadratic":
        return 1.0 / (1.0 + sqdist / (2.0 * spec.bandwidth**2))
    return np.ones_like(sqdist)


def _sq_dists(a: NDArray[np.float64], b: NDArray[np.float64]) -> NDArray[np.float64]:
    # Quadratic-form expansion; clamped because cancellation can leave
    # tiny negatives for near-coincident points.
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.maximum(sq, 0.0)


def kernel_eval(spec: KernelSpec, x: object, y: object) -> float:
    """Evaluates k(x, y) for a single pair of points."""
    xa = as_points(x, spec.dim)
    ya = as_points(y, spec.dim)
    if xa.shape[0] != 1 or ya.shape[0] != 1:
        raise ValueError("kernel_eval takes single points; use cross_gram for batches")
    return float(_profile(spec, _sq_dists(xa, ya))[0, 0])


def cross_gram(spec: KernelSpec, a: object, b: object) -> NDArray[np.float64]:
    """Returns the n x m matrix of k(a_i, b_j)."""
    aa = as_points(a, spec.dim)
    bb = as_points(b, spec.dim)
    return _profile(spec, _sq_dists(aa, bb))


def gram(spec: KernelSpec, points: object) -> NDArray[np.float64]:
    """Assembles the Gram matrix of a point set.

    The result is exactly symmetric and has exact unit diagonal (every
    family satisfies k(x, x) = 1).

    Args:
        spec: Kernel to evaluate.
        points: n points as an (n, d) array (flat input allowed for d=1).

    Returns:
        Symmetric n x n array with entries k(points[i], points[j]).

    Raises:
        ValueError: On an empty point set or dimension mismatch.
    """
    pts = as_points(points, spec.dim)
    if pts.shape[0] == 0:
        raise ValueError("gram requires at least one point")
    K = _profile(spec, _sq_dists(pts, pts))
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return K
