"""Data models: distribution parameters and synthetic datasets.

Samples are stored as rank-1 factors ``x_i`` whenever ``A_i = x_i x_i^T``
so that ``A_i w`` costs O(d) instead of O(d^2).  General (possibly
non-symmetric) sample matrices are supported through a dense ``(n, d, d)``
array.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError
from .rng import make_rng

# Unit constants hidden in the O(.) of the Gaussian parameter bounds.
C_M = 1.0
C_V = 1.0
C_GAMMA = 1.0
GAUSSIAN_K = 4.0
GAUSSIAN_A = 1.0
# Tail constant for the signal-plus-noise model; its centered gradients are
# close to Gaussian with standard deviation ~ sigma, so K = 1 bounds the tail.
TOY_K = 1.0
TOY_A = 1.0

_PSD_TOL = 1e-10


def validate_psd(sigma) -> np.ndarray:
    """Return the symmetrized copy of ``sigma`` or raise if it is not PSD."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] == 0:
        raise InvalidInputError(f"sigma must be a non-empty square matrix, got shape {sigma.shape}")
    if not np.all(np.isfinite(sigma)):
        raise InvalidInputError("sigma contains NaN or Inf")
    sym = 0.5 * (sigma + sigma.T)
    if np.linalg.eigvalsh(sym)[0] < -_PSD_TOL:
        raise InvalidInputError("sigma is not positive semidefinite")
    return sym


def _psd_factor(sym: np.ndarray) -> np.ndarray:
    """A matrix L with L L^T = sym (Cholesky, or eigen factor if singular)."""
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(sym)
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


@dataclass(frozen=True)
class ModelParams:
    """Parameters (Sigma, lambda_1, lambda_2, M, V, K, kappa, a, gamma^2) of a sample distribution."""

    dim: int
    sigma: np.ndarray
    lambda1: float
    lambda2: float
    m_bound: float
    v_bound: float
    k_tail: float
    a_tail: float
    gamma_sq: float

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError("dim must be positive")
        if not (self.lambda1 >= self.lambda2 >= 0):
            raise InvalidInputError("need lambda1 >= lambda2 >= 0")
        for name in ("m_bound", "v_bound", "k_tail", "a_tail", "gamma_sq"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive")

    @property
    def gap(self) -> float:
        return self.lambda1 - self.lambda2

    @property
    def kappa(self) -> float:
        # +inf marks the no-gap case; callers that need a gap raise on it.
        if self.lambda1 <= self.lambda2:
            return math.inf
        return self.lambda1 / (self.lambda1 - self.lambda2)

    @property
    def gamma(self) -> float:
        return math.sqrt(self.gamma_sq)


@dataclass(frozen=True)
class SampleMatrix:
    """One observation A_i, optionally with its rank-1 factor x_i (A_i = x_i x_i^T)."""

    data: np.ndarray
    factor: Optional[np.ndarray] = None

    @classmethod
    def from_factor(cls, x) -> "SampleMatrix":
        x = np.array(x, dtype=np.float64)
        return cls(data=np.outer(x, x), factor=x)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def apply(self, w: np.ndarray) -> np.ndarray:
        if self.factor is not None:
            return self.factor * (self.factor @ w)
        return self.data @ w


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Dataset:
    """An immutable, ordered collection of samples sharing one dimension.

    Exactly one of ``factors`` (shape ``(n, d)``) and ``matrices``
    (shape ``(n, d, d)``) is set.
    """

    factors: Optional[np.ndarray] = None
    matrices: Optional[np.ndarray] = None
    seed: int = 0
    _n: int = field(init=False, repr=False)

    def __post_init__(self):
        if (self.factors is None) == (self.matrices is None):
            raise InvalidInputError("provide exactly one of factors or matrices")
        if self.factors is not None:
            f = _readonly(self.factors)
            if f.ndim != 2:
                raise InvalidInputError("factors must have shape (n, d)")
            object.__setattr__(self, "factors", f)
            object.__setattr__(self, "_n", f.shape[0])
        else:
            m = _readonly(self.matrices)
            if m.ndim != 3 or m.shape[1] != m.shape[2]:
                raise InvalidInputError("matrices must have shape (n, d, d)")
            object.__setattr__(self, "matrices", m)
            object.__setattr__(self, "_n", m.shape[0])

    @classmethod
    def from_samples(cls, samples: Sequence[SampleMatrix], seed: int = 0) -> "Dataset":
        if len(samples) == 0:
            raise InvalidInputError("empty sample list")
        d = samples[0].dim
        if any(s.dim != d for s in samples):
            raise InvalidInputError("all samples must share the same dimension")
        if all(s.factor is not None for s in samples):
            return cls(factors=np.stack([s.factor for s in samples]), seed=seed)
        return cls(matrices=np.stack([s.data for s in samples]), seed=seed)

    def __len__(self) -> int:
        return self._n

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        if self.is_rank1 != other.is_rank1 or self.seed != other.seed:
            return False
        mine = self.factors if self.is_rank1 else self.matrices
        theirs = other.factors if other.is_rank1 else other.matrices
        return mine.shape == theirs.shape and bool(np.array_equal(mine, theirs))

    __hash__ = None

    @property
    def is_rank1(self) -> bool:
        return self.factors is not None

    @property
    def dim(self) -> int:
        return (self.factors if self.is_rank1 else self.matrices).shape[1]

    @property
    def samples(self) -> list[SampleMatrix]:
        return [self[i] for i in range(len(self))]

    def __getitem__(self, i: int) -> SampleMatrix:
        if self.is_rank1:
            x = self.factors[i]
            return SampleMatrix(data=np.outer(x, x), factor=x.copy())
        return SampleMatrix(data=self.matrices[i].copy())

    def dense(self) -> np.ndarray:
        """All A_i as an ``(n, d, d)`` array."""
        if self.is_rank1:
            return np.einsum("ni,nj->nij", self.factors, self.factors)
        return self.matrices

    def mean_matrix(self) -> np.ndarray:
        if self.is_rank1:
            return self.factors.T @ self.factors / len(self)
        return self.matrices.mean(axis=0)

    def gradients(self, w: np.ndarray, start: int = 0, stop: Optional[int] = None) -> np.ndarray:
        """Rows ``A_i w`` for ``i`` in ``[start, stop)``."""
        if self.is_rank1:
            x = self.factors[start:stop]
            return x * (x @ w)[:, None]
        return self.matrices[start:stop] @ w

    def take(self, order) -> "Dataset":
        """Dataset re-ordered (or sub-selected) by an index array."""
        order = np.asarray(order)
        if self.is_rank1:
            return Dataset(factors=self.factors[order], seed=self.seed)
        return Dataset(matrices=self.matrices[order], seed=self.seed)


def sample_gaussian_dataset(sigma, n: int, seed: int) -> Dataset:
    """n samples A_i = x_i x_i^T with x_i ~ N(0, sigma)."""
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    sym = validate_psd(sigma)
    factor = _psd_factor(sym)
    z = make_rng(seed, "gaussian").standard_normal((n, sym.shape[0]))
    return Dataset(factors=z @ factor.T, seed=seed)


def sample_toy_dataset(v, sigma_noise_sq: float, n: int, seed: int) -> Dataset:
    """Signal-plus-noise samples x_i = s_i + n_i with s_i = +-v and n_i ~ N(0, sigma^2 I)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise InvalidInputError("v must be a unit vector")
    if sigma_noise_sq < 0:
        raise InvalidInputError("sigma_noise_sq must be non-negative")
    if n < 1:
        raise InvalidInputError("n must be >= 1")
    rng = make_rng(seed, "toy")
    signs = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    noise = rng.standard_normal((n, v.shape[0])) * math.sqrt(sigma_noise_sq)
    return Dataset(factors=signs[:, None] * v[None, :] + noise, seed=seed)


def spiked_sigma(d: int, lambda1: float = 1.0, lambda2: float = 0.5) -> np.ndarray:
    """diag(lambda1, lambda2, ..., lambda2)."""
    diag = np.full(d, float(lambda2))
    diag[0] = lambda1
    return np.diag(diag)


def gaussian_model_params(sigma, n: int) -> ModelParams:
    """Parameters of the Gaussian model A_i = x_i x_i^T, x_i ~ N(0, sigma)."""
    sym = validate_psd(sigma)
    d = sym.shape[0]
    vals = np.linalg.eigvalsh(sym)
    lambda1 = float(max(vals[-1], 0.0))
    lambda2 = float(max(vals[-2], 0.0)) if d > 1 else 0.0
    return ModelParams(
        dim=d,
        sigma=sym,
        lambda1=lambda1,
        lambda2=lambda2,
        m_bound=C_M * d * math.log(max(n, 2)),
        v_bound=C_V * d,
        k_tail=GAUSSIAN_K,
        a_tail=GAUSSIAN_A,
        gamma_sq=C_GAMMA,
    )


def toy_model_params(v, sigma_noise_sq: float, n: int) -> ModelParams:
    """Parameters of the signal-plus-noise model with population covariance v v^T + sigma^2 I."""
    v = np.asarray(v, dtype=np.float64)
    if sigma_noise_sq <= 0:
        raise InvalidInputError("sigma_noise_sq must be positive for a valid parameter set")
    d = v.shape[0]
    s2 = float(sigma_noise_sq)
    lambda1 = 1.0 + s2
    return ModelParams(
        dim=d,
        sigma=np.outer(v, v) + s2 * np.eye(d),
        lambda1=lambda1,
        lambda2=s2,
        m_bound=(1.0 + C_M * d * s2 * math.log(max(n, 2))) / lambda1,
        v_bound=C_V * d * s2,
        k_tail=TOY_K,
        a_tail=TOY_A,
        gamma_sq=s2,
    )


def make_neighboring(dataset: Dataset, index: int, replacement: SampleMatrix) -> Dataset:
    """Copy of ``dataset`` with sample ``index`` replaced."""
    n = len(dataset)
    if not 0 <= index < n:
        raise IndexError(f"index {index} out of range for {n} samples")
    if replacement.dim != dataset.dim:
        raise InvalidInputError("replacement has the wrong dimension")
    if dataset.is_rank1 and replacement.factor is not None:
        f = dataset.factors.copy()
        f[index] = replacement.factor
        return Dataset(factors=f, seed=dataset.seed)
    m = np.array(dataset.dense(), copy=True)
    m[index] = replacement.data
    return Dataset(matrices=m, seed=dataset.seed)
