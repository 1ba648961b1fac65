"""Core data containers: observed data, version structure, model parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, ParameterError


def _locked(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=a.dtype if a.dtype.kind in "if" else None, copy=True)
    out.setflags(write=False)
    return out


def add_intercept(x: np.ndarray) -> np.ndarray:
    """Prepend a column of ones to a covariate matrix."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return np.concatenate(([1.0], x))
    return np.hstack([np.ones((x.shape[0], 1)), x])


@dataclass(frozen=True)
class Dataset:
    """Observed sample: outcomes, dense treatment labels, covariate matrix."""

    outcomes: np.ndarray
    treatments: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.outcomes, dtype=float)
        t = np.asarray(self.treatments)
        x = np.asarray(self.covariates, dtype=float)
        if y.ndim != 1 or t.ndim != 1 or x.ndim != 2:
            raise InputError("outcomes and treatments must be vectors, covariates a matrix")
        n = y.shape[0]
        if n == 0:
            raise InputError("empty dataset")
        if t.shape[0] != n or x.shape[0] != n:
            raise InputError(f"row mismatch: {n} outcomes, {t.shape[0]} treatments, {x.shape[0]} covariate rows")
        if x.shape[1] < 1:
            raise InputError("need at least one covariate column")
        if not np.isfinite(y).all():
            raise InputError("non-finite outcome values")
        if not np.isfinite(x).all():
            raise InputError("non-finite covariate values")
        if not np.issubdtype(t.dtype, np.integer):
            ti = t.astype(int)
            if not np.array_equal(ti, t):
                raise InputError("treatment labels must be integers")
            t = ti
        if t.min() < 0:
            raise InputError("treatment labels must be non-negative")
        j = int(t.max()) + 1
        present = np.bincount(t, minlength=j)
        if (present == 0).any():
            missing = int(np.flatnonzero(present == 0)[0])
            raise InputError(f"treatment labels must be dense 0..{j - 1}; label {missing} never appears")
        object.__setattr__(self, "outcomes", _locked(y))
        object.__setattr__(self, "treatments", _locked(t.astype(np.int64)))
        object.__setattr__(self, "covariates", _locked(x))

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def n_treatments(self) -> int:
        return int(self.treatments.max()) + 1


@dataclass(frozen=True)
class VersionStructure:
    """Number of latent versions per treatment arm."""

    counts: tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if len(counts) == 0:
            raise InputError("need at least one treatment arm")
        if any(c < 1 for c in counts):
            raise InputError(f"version counts must be >= 1, got {counts}")
        object.__setattr__(self, "counts", counts)

    @classmethod
    def parse(cls, text: str) -> "VersionStructure":
        """Parse a comma-separated count list such as "2,2"."""
        try:
            return cls(tuple(int(part) for part in text.split(",")))
        except ValueError as exc:
            raise InputError(f"cannot parse version structure {text!r}") from exc

    @property
    def n_treatments(self) -> int:
        return len(self.counts)

    def __getitem__(self, t: int) -> int:
        return self.counts[t]

    def __iter__(self):
        return iter(self.counts)


@dataclass(frozen=True)
class MixtureParams:
    """Parameters of one treatment arm's mixture: gating coefficients,
    per-version outcome regression coefficients, per-version residual scales."""

    gating_coefs: np.ndarray
    expert_coefs: np.ndarray
    expert_scales: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gating_coefs, dtype=float)
        b = np.asarray(self.expert_coefs, dtype=float)
        s = np.asarray(self.expert_scales, dtype=float)
        if g.ndim != 2 or b.ndim != 2 or s.ndim != 1:
            raise ParameterError("gating/expert coefficients must be matrices, scales a vector")
        if g.shape != b.shape or s.shape[0] != g.shape[0]:
            raise ParameterError(f"inconsistent mixture shapes {g.shape}, {b.shape}, {s.shape}")
        if not (np.isfinite(g).all() and np.isfinite(b).all() and np.isfinite(s).all()):
            raise ParameterError("non-finite mixture parameters")
        if (s <= 0.0).any():
            raise ParameterError("expert scales must be strictly positive")
        object.__setattr__(self, "gating_coefs", _locked(g))
        object.__setattr__(self, "expert_coefs", _locked(b))
        object.__setattr__(self, "expert_scales", _locked(s))

    @property
    def n_versions(self) -> int:
        return self.gating_coefs.shape[0]

    @property
    def dim(self) -> int:
        return self.gating_coefs.shape[1]


@dataclass(frozen=True)
class ModelParams:
    """Fitted model in identified form.

    The treatment-model coefficient matrix has one row per arm with row 0
    pinned to zero; each arm's mixture likewise has its version-0 gating row
    pinned to zero. All design dimensions include the intercept column.
    """

    treatment_coefs: np.ndarray
    mixtures: tuple[MixtureParams, ...]

    def __post_init__(self):
        z = np.asarray(self.treatment_coefs, dtype=float)
        mixtures = tuple(self.mixtures)
        if z.ndim != 2:
            raise ParameterError("treatment coefficients must be a matrix")
        if not np.isfinite(z).all():
            raise ParameterError("non-finite treatment coefficients")
        if z.shape[0] != len(mixtures):
            raise ParameterError(f"{z.shape[0]} treatment rows but {len(mixtures)} mixtures")
        if (z[0] != 0.0).any():
            raise ParameterError("treatment coefficient row 0 must be identically zero")
        for t, mix in enumerate(mixtures):
            if mix.dim != z.shape[1]:
                raise ParameterError(f"mixture {t} has design dim {mix.dim}, treatment model {z.shape[1]}")
            if (mix.gating_coefs[0] != 0.0).any():
                raise ParameterError(f"gating coefficient row 0 of treatment {t} must be identically zero")
        object.__setattr__(self, "treatment_coefs", _locked(z))
        object.__setattr__(self, "mixtures", mixtures)

    @property
    def n_treatments(self) -> int:
        return self.treatment_coefs.shape[0]

    @property
    def versions(self) -> VersionStructure:
        return VersionStructure(tuple(m.n_versions for m in self.mixtures))

    def mixture(self, t: int) -> MixtureParams:
        return self.mixtures[t]


@dataclass(frozen=True)
class PropensityPair:
    """Treatment probability, version probability, and their product for one unit."""

    treatment_prob: float
    version_prob: float

    def __post_init__(self):
        e = float(self.treatment_prob)
        g = float(self.version_prob)
        if not (0.0 < e <= 1.0):
            raise ParameterError(f"treatment probability {e} outside (0, 1]")
        if not (0.0 < g <= 1.0):
            raise ParameterError(f"version probability {g} outside (0, 1]")
        object.__setattr__(self, "treatment_prob", e)
        object.__setattr__(self, "version_prob", g)

    @property
    def joint_prob(self) -> float:
        return self.treatment_prob * self.version_prob


@dataclass(frozen=True)
class TreatmentSlice:
    """Rows of a dataset assigned to one treatment arm, with intercepted design."""

    indices: np.ndarray
    outcomes: np.ndarray
    design: np.ndarray
    n_total: int = field(default=0)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        y = np.asarray(self.outcomes, dtype=float)
        phi = np.ascontiguousarray(self.design, dtype=float)
        if idx.shape[0] != y.shape[0] or phi.shape[0] != y.shape[0]:
            raise InputError("slice arrays must share their leading dimension")
        if idx.shape[0] == 0:
            raise InputError("empty treatment slice")
        if (np.diff(idx) <= 0).any():
            raise InputError("slice indices must be strictly increasing")
        if not np.array_equal(phi[:, 0], np.ones(phi.shape[0])):
            raise InputError("slice design must carry an intercept column")
        object.__setattr__(self, "indices", _locked(idx))
        object.__setattr__(self, "outcomes", _locked(y))
        object.__setattr__(self, "design", _locked(phi))

    @classmethod
    def from_dataset(cls, data: Dataset, t: int) -> "TreatmentSlice":
        idx = np.flatnonzero(data.treatments == t)
        if idx.shape[0] == 0:
            raise InputError(f"no units with treatment label {t}")
        return cls(idx, data.outcomes[idx], add_intercept(data.covariates[idx]), n_total=data.n)

    @property
    def n_units(self) -> int:
        return self.outcomes.shape[0]

    @property
    def dim(self) -> int:
        return self.design.shape[1]
