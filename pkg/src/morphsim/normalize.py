"""Statistical input/target normalizers for the surrogate's MLPs.

Each MLP role gets one normalizer fit on training data: coordinate channels
are first moved to the receiver's (or element's own) center point, then a
PCA basis reduces the dimension to the smallest count explaining the
requested variance fraction, and finally a per-dimension affine map produces
zero-mean, unit-variance inputs.  Latent vectors never pass through a
normalizer; they are concatenated after the normalized block.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NormalizerUnderdetermined
from .grid import EDGE_FEAT, NODE_FEAT

# Pair vectors are [sender, conduit, receiver, code_sender, code_receiver].
NEN_WIDTH = NODE_FEAT + EDGE_FEAT + NODE_FEAT + 2  # 110
ENE_WIDTH = EDGE_FEAT + NODE_FEAT + EDGE_FEAT + 2  # 134

# Corner vertex triples only: centering shifts local shape coordinates to
# the receiver's origin while the center-point channels keep carrying each
# element's position relative to the fixed end.
_NODE_CORNERS = [0, 3, 6, 9, 12, 15, 18, 21]
_EDGE_CORNERS = [0, 3, 6, 9, 12, 15, 18, 21, 24, 27, 30, 33]


def _shift(starts, base):
    return [s + base for s in starts]


@dataclass(frozen=True)
class RoleLayout:
    """Where coordinate triples and the centering anchor sit in a raw vector."""

    name: str
    width: int
    coord_starts: tuple[int, ...]
    center_start: int | None  # None: no structural centering (targets)


ROLE_LAYOUTS = {
    "nen": RoleLayout(
        name="nen",
        width=NEN_WIDTH,
        coord_starts=tuple(
            _NODE_CORNERS + _shift(_EDGE_CORNERS, NODE_FEAT) + _shift(_NODE_CORNERS, NODE_FEAT + EDGE_FEAT)
        ),
        center_start=NODE_FEAT + EDGE_FEAT + 24,  # receiver node center
    ),
    "ene": RoleLayout(
        name="ene",
        width=ENE_WIDTH,
        coord_starts=tuple(
            _EDGE_CORNERS + _shift(_NODE_CORNERS, EDGE_FEAT) + _shift(_EDGE_CORNERS, EDGE_FEAT + NODE_FEAT)
        ),
        center_start=EDGE_FEAT + NODE_FEAT + 49,  # receiver edge center
    ),
    "node": RoleLayout(
        name="node", width=NODE_FEAT, coord_starts=tuple(_NODE_CORNERS), center_start=24
    ),
    "edge": RoleLayout(
        name="edge", width=EDGE_FEAT, coord_starts=tuple(_EDGE_CORNERS), center_start=49
    ),
    "node_out": RoleLayout(name="node_out", width=NODE_FEAT, coord_starts=(), center_start=None),
    "edge_out": RoleLayout(name="edge_out", width=EDGE_FEAT, coord_starts=(), center_start=None),
}


def center_coords(X: np.ndarray, layout: RoleLayout, inplace: bool = False) -> np.ndarray:
    """Subtract the centering anchor from every coordinate triple."""
    if layout.center_start is None or not layout.coord_starts:
        return X
    out = X if inplace else X.copy()
    c = X[:, layout.center_start : layout.center_start + 3].copy()
    for s in layout.coord_starts:
        out[:, s : s + 3] -= c
    return out


class MomentAccumulator:
    """Streaming mean / second-moment accumulation for PCA fitting."""

    def __init__(self, width: int):
        self.n = 0
        self.s = np.zeros(width)
        self.ss = np.zeros((width, width))

    def add(self, X: np.ndarray) -> None:
        X = np.asarray(X, dtype=np.float64)
        self.n += len(X)
        self.s += X.sum(axis=0)
        self.ss += X.T @ X

    def mean_cov(self) -> tuple[np.ndarray, np.ndarray]:
        mu = self.s / self.n
        cov = self.ss / self.n - np.outer(mu, mu)
        return mu, 0.5 * (cov + cov.T)


@dataclass
class Normalizer:
    """center -> per-dim standardize -> PCA projection -> score standardize.

    Raw dimensions are standardized before the PCA so mixed units
    (millimetres, curvature, codes) contribute comparably to the variance
    budget; the retained scores are rescaled to unit variance again.
    """

    layout: RoleLayout
    mean: np.ndarray  # (width,) raw means
    raw_std: np.ndarray  # (width,) raw standard deviations (constant dims: 1)
    basis: np.ndarray  # (width, retained), orthonormal in the standardized frame
    explained: float
    dim_mean: np.ndarray  # (retained,) score means (zero by construction)
    dim_std: np.ndarray  # (retained,) score standard deviations

    @property
    def retained(self) -> int:
        return self.basis.shape[1]

    @property
    def width(self) -> int:
        return self.basis.shape[0]

    def fused(self, dtype=np.float64) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(M, c, D, e): transform is centered(x) @ M + c, inverse z @ D + e."""
        cache = getattr(self, "_fused", None)
        if cache is None:
            cache = {}
            object.__setattr__(self, "_fused", cache)
        key = np.dtype(dtype).name
        if key not in cache:
            M = (self.basis / self.raw_std[:, None]) / self.dim_std[None, :]
            c = -(self.mean @ M) - self.dim_mean / self.dim_std
            D = (self.dim_std[:, None] * self.basis.T) * self.raw_std[None, :]
            e = (self.dim_mean @ self.basis.T) * self.raw_std + self.mean
            cache[key] = tuple(a.astype(dtype) for a in (M, c, D, e))
        return cache[key]

    def transform(self, X: np.ndarray) -> np.ndarray:
        M, c, _, _ = self.fused(np.asarray(X).dtype if np.asarray(X).dtype == np.float32 else np.float64)
        return center_coords(np.asarray(X), self.layout) @ M + c

    def inverse_transform(self, Z: np.ndarray) -> np.ndarray:
        """Back to the (centered) raw frame; exact on the retained subspace."""
        S = np.asarray(Z) * self.dim_std + self.dim_mean
        return (S @ self.basis.T) * self.raw_std + self.mean

    @staticmethod
    def fit_from_moments(
        layout: RoleLayout, acc: MomentAccumulator, cutoff: float
    ) -> "Normalizer":
        if acc.n < layout.width:
            raise NormalizerUnderdetermined(
                f"{layout.name}: {acc.n} samples for {layout.width} dims"
            )
        mu, cov = acc.mean_cov()
        var = np.clip(np.diag(cov), 0.0, None)
        raw_std = np.sqrt(var)
        raw_std = np.where(raw_std < 1e-9, 1.0, raw_std)
        corr = cov / np.outer(raw_std, raw_std)
        evals, evecs = np.linalg.eigh(0.5 * (corr + corr.T))
        order = np.argsort(evals, kind="stable")[::-1]
        evals = np.clip(evals[order], 0.0, None)
        evecs = evecs[:, order]
        # deterministic sign: largest-magnitude component positive
        flip = evecs[np.argmax(np.abs(evecs), axis=0), np.arange(evecs.shape[1])] < 0
        evecs[:, flip] *= -1.0

        total = evals.sum()
        if cutoff >= 1.0:
            k = layout.width  # no reduction
        elif total <= 0.0:
            k = 1
        else:
            frac = np.cumsum(evals) / total
            k = int(np.searchsorted(frac, cutoff - 1e-12) + 1)
            k = min(k, layout.width)
        basis = evecs[:, :k]
        std = np.sqrt(np.clip(evals[:k], 0.0, None))
        std = np.where(std < 1e-9, 1.0, std)
        explained = float(evals[:k].sum() / total) if total > 0 else 1.0
        return Normalizer(
            layout=layout,
            mean=mu,
            raw_std=raw_std,
            basis=basis,
            explained=explained,
            dim_mean=np.zeros(k),
            dim_std=std,
        )

    def to_arrays(self) -> dict[str, np.ndarray]:
        return {
            "mean": self.mean,
            "raw_std": self.raw_std,
            "basis": self.basis,
            "dim_mean": self.dim_mean,
            "dim_std": self.dim_std,
            "explained": np.array([self.explained]),
        }

    @staticmethod
    def from_arrays(role: str, arrays: dict[str, np.ndarray]) -> "Normalizer":
        return Normalizer(
            layout=ROLE_LAYOUTS[role],
            mean=np.asarray(arrays["mean"], dtype=np.float64),
            raw_std=np.asarray(arrays["raw_std"], dtype=np.float64),
            basis=np.asarray(arrays["basis"], dtype=np.float64),
            explained=float(np.asarray(arrays["explained"]).ravel()[0]),
            dim_mean=np.asarray(arrays["dim_mean"], dtype=np.float64),
            dim_std=np.asarray(arrays["dim_std"], dtype=np.float64),
        )


@dataclass
class NormalizerSet:
    """One normalizer per MLP role plus the shared fit settings."""

    normalizers: dict[str, Normalizer]
    cutoff: float
    meta: dict = field(default_factory=dict)

    def __getitem__(self, role: str) -> Normalizer:
        return self.normalizers[role]

    def retained_dims(self) -> dict[str, int]:
        return {r: n.retained for r, n in self.normalizers.items()}

    def summary(self) -> dict:
        return {
            "cutoff": self.cutoff,
            "retained": self.retained_dims(),
            "raw": {r: n.width for r, n in self.normalizers.items()},
            "explained": {r: n.explained for r, n in self.normalizers.items()},
        }
