"""Robust per-class size priors over vehicle dimensions.

Each prototype class gets a Gaussian (mu, sigma) fitted robustly: the mean
is the geometric median of the dimension vectors and the covariance is the
geometric median of the outer products (d - mu)(d - mu)', taken in the
flattened Frobenius geometry, then symmetrized and eigenvalue-floored so
its inverse exists.
"""

from __future__ import annotations

from dataclasses import dataclass
import json

import numpy as np

__all__ = [
    "SizePrior",
    "PriorTable",
    "geometric_median",
    "fit_prior",
    "UnknownClassError",
    "GENERIC_CLASS",
    "SIGMA_EIGENVALUE_FLOOR",
]

GENERIC_CLASS = "generic-vehicle"
SIGMA_EIGENVALUE_FLOOR = 1e-6  # m^2
TABLE_VERSION = 1


class UnknownClassError(KeyError):
    """Class not in the table and fallback disabled."""


def geometric_median(vs, tol: float = 1e-9, max_iters: int = 1000) -> np.ndarray:
    """Point minimizing the sum of Euclidean distances to vs.

    Weiszfeld iteration with the Vardi-Zhang rule when the iterate lands
    on a data point, started from the coordinate-wise median.
    """
    pts = np.asarray(vs, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.shape[0] == 0:
        raise ValueError("need at least one vector")
    if pts.shape[0] == 1:
        return pts[0].copy()

    y = np.median(pts, axis=0)
    for _ in range(max_iters):
        diff = pts - y
        dist = np.linalg.norm(diff, axis=1)
        at_point = dist < 1e-12
        if at_point.any():
            # Vardi & Zhang (2000): pull toward the weighted mean of the
            # remaining points unless y is already the minimizer.
            others = ~at_point
            if not others.any():
                return y
            w = 1.0 / dist[others]
            T = (pts[others] * w[:, None]).sum(axis=0) / w.sum()
            Rtilde = ((pts[others] - y) * w[:, None]).sum(axis=0)
            r = np.linalg.norm(Rtilde)
            eta = float(at_point.sum())
            if r <= eta:
                return y
            step = min(1.0, eta / r)
            y_new = (1.0 - step) * T + step * y
        else:
            w = 1.0 / dist
            y_new = (pts * w[:, None]).sum(axis=0) / w.sum()
        if np.linalg.norm(y_new - y) < tol:
            return y_new
        y = y_new
    return y


@dataclass(frozen=True)
class SizePrior:
    """Gaussian prior over (d_x, d_y, d_z) for one prototype class."""

    class_name: str
    mu: np.ndarray
    sigma: np.ndarray
    n_samples: int

    def __post_init__(self) -> None:
        mu = np.asarray(self.mu, dtype=float).reshape(3)
        sigma = np.asarray(self.sigma, dtype=float).reshape(3, 3)
        if not np.all(mu > 0):
            raise ValueError(f"prior mean must be positive, got {mu}")
        if np.linalg.norm(sigma - sigma.T) > 1e-12:
            raise ValueError("sigma must be symmetric")
        if np.linalg.eigvalsh(sigma).min() <= 0:
            raise ValueError("sigma must be positive definite")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def sigma_inv(self) -> np.ndarray:
        return np.linalg.inv(self.sigma)

    def chol_inv_factor(self) -> np.ndarray:
        """Lower-triangular L with sigma^-1 = L @ L'."""
        return np.linalg.cholesky(self.sigma_inv)

    def to_dict(self) -> dict:
        return {
            "name": self.class_name,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
            "n_samples": self.n_samples,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SizePrior":
        return cls(
            class_name=doc["name"],
            mu=np.asarray(doc["mu"], dtype=float),
            sigma=np.asarray(doc["sigma"], dtype=float),
            n_samples=int(doc.get("n_samples", 0)),
        )


def _floor_spd(sigma: np.ndarray, floor: float = SIGMA_EIGENVALUE_FLOOR) -> np.ndarray:
    """Symmetrize and clip eigenvalues from below."""
    sym = 0.5 * (sigma + sigma.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.maximum(vals, floor)
    return vecs @ np.diag(vals) @ vecs.T


def fit_prior(class_name: str, dims, tol: float = 1e-9) -> SizePrior:
    """Robust (mu, sigma) from >= 4 dimension samples of one class."""
    d = np.asarray(dims, dtype=float)
    if d.ndim != 2 or d.shape[1] != 3:
        raise ValueError(f"dims must be (n, 3), got {d.shape}")
    if d.shape[0] < 4:
        raise ValueError(f"need at least 4 samples, got {d.shape[0]}")
    mu = geometric_median(d, tol=tol)
    centered = d - mu
    outer = np.einsum("ni,nj->nij", centered, centered).reshape(-1, 9)
    sigma = geometric_median(outer, tol=tol).reshape(3, 3)
    sigma = _floor_spd(sigma)
    return SizePrior(class_name=class_name, mu=mu, sigma=sigma, n_samples=d.shape[0])


class PriorTable:
    """Immutable lookup of per-class priors with a generic fallback.

    The generic-vehicle fallback is the median over the stored classes:
    geometric median of the class means and of the class covariances.
    """

    def __init__(self, priors) -> None:
        self._priors = {p.class_name: p for p in priors}
        if not self._priors:
            raise ValueError("prior table is empty")

    def __len__(self) -> int:
        return len(self._priors)

    def class_names(self) -> list:
        return sorted(self._priors)

    def _generic(self) -> SizePrior:
        if GENERIC_CLASS in self._priors:
            return self._priors[GENERIC_CLASS]
        ps = [self._priors[k] for k in self.class_names()]
        mu = geometric_median([p.mu for p in ps])
        sigma = geometric_median([p.sigma.reshape(9) for p in ps]).reshape(3, 3)
        return SizePrior(
            class_name=GENERIC_CLASS,
            mu=mu,
            sigma=_floor_spd(sigma),
            n_samples=sum(p.n_samples for p in ps),
        )

    def lookup(self, class_name, fallback: bool = True) -> SizePrior:
        if class_name in self._priors:
            return self._priors[class_name]
        if fallback:
            return self._generic()
        raise UnknownClassError(f"unknown prototype class {class_name!r} and fallback disabled")

    def to_dict(self) -> dict:
        return {
            "version": TABLE_VERSION,
            "classes": [self._priors[k].to_dict() for k in self.class_names()],
        }

    def save(self, path: str) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def from_dict(cls, doc: dict) -> "PriorTable":
        return cls([SizePrior.from_dict(c) for c in doc["classes"]])

    @classmethod
    def load(cls, path: str) -> "PriorTable":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    @classmethod
    def default(cls) -> "PriorTable":
        """The bundled synthetic table (not fitted to any real dataset)."""
        from importlib.resources import files

        text = (files("cuboidfit") / "data" / "default_priors.json").read_text()
        return cls.from_dict(json.loads(text))
