"""Stationary Matern kernels and their exact state-space (SDE) forms.

A Matern-nu kernel with half-integer nu = p + 1/2 is the covariance of the
first component of a (p+1)-dimensional linear SDE driven by white noise::

    d theta = F theta dt + L d beta,    f(t) = h^T theta(t)

with F in companion form having the single repeated eigenvalue -lambda.
Sums of kernels stack these block-diagonally.
"""

import enum
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.linalg

from lintel import _numeric
from lintel.errors import InvalidSpecError, UnsupportedKernelError


class KernelFamily(str, enum.Enum):
    MATERN12 = "matern12"
    MATERN32 = "matern32"
    MATERN52 = "matern52"
    SUM = "sum"


_LEAF_DIM = {KernelFamily.MATERN12: 1, KernelFamily.MATERN32: 2, KernelFamily.MATERN52: 3}


@dataclass(frozen=True)
class KernelSpec:
    """A parametric stationary covariance function.

    Leaf kernels carry a process variance and a lengthscale. A ``SUM`` node
    carries only its children.
    """

    family: KernelFamily
    variance: float | None = None
    lengthscale: float | None = None
    children: tuple["KernelSpec", ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        object.__setattr__(self, "children", tuple(self.children))
        if self.family is KernelFamily.SUM:
            if len(self.children) < 2:
                raise InvalidSpecError("a sum kernel needs at least two children")
            if self.variance is not None or self.lengthscale is not None:
                raise InvalidSpecError("a sum kernel has no own variance or lengthscale")
            return
        if self.children:
            raise InvalidSpecError(f"{self.family.value} kernel cannot have children")
        for name in ("variance", "lengthscale"):
            value = getattr(self, name)
            if value is None or not math.isfinite(value) or value <= 0:
                raise InvalidSpecError(f"{self.family.value} {name} must be positive, got {value!r}")
            object.__setattr__(self, name, float(value))

    @property
    def is_leaf(self) -> bool:
        return self.family is not KernelFamily.SUM

    def leaves(self) -> Iterator["KernelSpec"]:
        if self.is_leaf:
            yield self
        else:
            for child in self.children:
                yield from child.leaves()

    @property
    def total_variance(self) -> float:
        return sum(leaf.variance for leaf in self.leaves())

    def log_params(self) -> np.ndarray:
        """Leaf hyperparameters as ``[log var_1, log ell_1, log var_2, ...]``."""
        return np.log([v for leaf in self.leaves() for v in (leaf.variance, leaf.lengthscale)])

    def with_log_params(self, theta) -> "KernelSpec":
        """Same structure, leaf hyperparameters replaced from ``log_params`` layout."""
        theta = np.asarray(theta, dtype=float)
        n = 2 * sum(1 for _ in self.leaves())
        if theta.shape != (n,):
            raise InvalidSpecError(f"expected {n} log-parameters, got shape {theta.shape}")
        values = iter(np.exp(theta))
        return self._rebuild(values)

    def _rebuild(self, values) -> "KernelSpec":
        if self.is_leaf:
            return KernelSpec(self.family, float(next(values)), float(next(values)))
        return KernelSpec(KernelFamily.SUM, children=tuple(c._rebuild(values) for c in self.children))

    def scaled(self, variance_factor: float) -> "KernelSpec":
        """Copy with every leaf's process variance multiplied by ``variance_factor``."""
        if self.is_leaf:
            return KernelSpec(self.family, self.variance * variance_factor, self.lengthscale)
        return KernelSpec(KernelFamily.SUM, children=tuple(c.scaled(variance_factor) for c in self.children))

    def to_dict(self) -> dict:
        if self.is_leaf:
            return {"family": self.family.value, "variance": self.variance, "lengthscale": self.lengthscale}
        return {"family": self.family.value, "children": [c.to_dict() for c in self.children]}

    @classmethod
    def from_dict(cls, data: dict) -> "KernelSpec":
        try:
            family = KernelFamily(data["family"])
        except (KeyError, ValueError) as exc:
            raise InvalidSpecError(f"bad or missing kernel family in {data!r}") from exc
        if family is KernelFamily.SUM:
            return cls(family, children=tuple(cls.from_dict(c) for c in data.get("children", ())))
        return cls(family, data.get("variance"), data.get("lengthscale"))


def matern12(variance: float, lengthscale: float) -> KernelSpec:
    return KernelSpec(KernelFamily.MATERN12, variance, lengthscale)


def matern32(variance: float, lengthscale: float) -> KernelSpec:
    return KernelSpec(KernelFamily.MATERN32, variance, lengthscale)


def matern52(variance: float, lengthscale: float) -> KernelSpec:
    return KernelSpec(KernelFamily.MATERN52, variance, lengthscale)


def sum_of(*children: KernelSpec) -> KernelSpec:
    return KernelSpec(KernelFamily.SUM, children=children)


def kernel_eval(spec: KernelSpec, r):
    """Covariance at lag ``r`` (scalar or array, must be nonnegative)."""
    r = np.abs(np.asarray(r, dtype=float))
    if spec.family is KernelFamily.SUM:
        return sum(kernel_eval(c, r) for c in spec.children)
    s2, ell = spec.variance, spec.lengthscale
    if spec.family is KernelFamily.MATERN12:
        return s2 * np.exp(-r / ell)
    if spec.family is KernelFamily.MATERN32:
        z = math.sqrt(3.0) * r / ell
        return s2 * (1.0 + z) * np.exp(-z)
    if spec.family is KernelFamily.MATERN52:
        z = math.sqrt(5.0) * r / ell
        return s2 * (1.0 + z + z * z / 3.0) * np.exp(-z)
    raise UnsupportedKernelError(spec.family)


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """Linear time-invariant SDE whose output ``h^T theta`` has the kernel's law."""

    F: np.ndarray
    L: np.ndarray
    Qc: np.ndarray
    h: np.ndarray
    Pinf: np.ndarray

    def __post_init__(self):
        for name in ("F", "L", "Qc", "h", "Pinf"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float, order="C"))

    @property
    def state_dim(self) -> int:
        return self.F.shape[0]


@dataclass(frozen=True, eq=False)
class DiscreteTransition:
    A: np.ndarray
    Sigma: np.ndarray
    dt: float


def _leaf_state_space(spec: KernelSpec) -> StateSpaceModel:
    s2, ell = spec.variance, spec.lengthscale
    if spec.family is KernelFamily.MATERN12:
        lam = 1.0 / ell
        return StateSpaceModel(
            F=[[-lam]], L=[[1.0]], Qc=[[2.0 * lam * s2]], h=[1.0], Pinf=[[s2]]
        )
    if spec.family is KernelFamily.MATERN32:
        lam = math.sqrt(3.0) / ell
        return StateSpaceModel(
            F=[[0.0, 1.0], [-(lam**2), -2.0 * lam]],
            L=[[0.0], [1.0]],
            Qc=[[4.0 * lam**3 * s2]],
            h=[1.0, 0.0],
            Pinf=[[s2, 0.0], [0.0, lam**2 * s2]],
        )
    if spec.family is KernelFamily.MATERN52:
        lam = math.sqrt(5.0) / ell
        kappa = lam**2 * s2 / 3.0
        return StateSpaceModel(
            F=[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-(lam**3), -3.0 * lam**2, -3.0 * lam]],
            L=[[0.0], [0.0], [1.0]],
            Qc=[[16.0 / 3.0 * lam**5 * s2]],
            h=[1.0, 0.0, 0.0],
            Pinf=[[s2, 0.0, -kappa], [0.0, kappa, 0.0], [-kappa, 0.0, lam**4 * s2]],
        )
    raise UnsupportedKernelError(f"no state-space form for {spec.family!r}")


def to_state_space(spec: KernelSpec) -> StateSpaceModel:
    """Exact SDE representation of a Matern kernel or a sum of Matern kernels."""
    if spec.is_leaf:
        if spec.family not in _LEAF_DIM:
            raise UnsupportedKernelError(f"no state-space form for {spec.family!r}")
        return _leaf_state_space(spec)
    parts = [to_state_space(c) for c in spec.children]
    return StateSpaceModel(
        F=scipy.linalg.block_diag(*(p.F for p in parts)),
        L=scipy.linalg.block_diag(*(p.L for p in parts)),
        Qc=scipy.linalg.block_diag(*(p.Qc for p in parts)),
        h=np.concatenate([p.h for p in parts]),
        Pinf=scipy.linalg.block_diag(*(p.Pinf for p in parts)),
    )


def expm(M) -> np.ndarray:
    """Matrix exponential (scaling and squaring, [6/6] Pade)."""
    return _numeric.expm_pade(np.ascontiguousarray(M, dtype=float))


def discretize(ssm: StateSpaceModel, dt: float) -> DiscreteTransition:
    """Exact discrete-time transition of the SDE over a step of length ``dt``.

    ``Sigma`` uses the stationary identity ``Pinf - A Pinf A^T`` and is
    projected onto the PSD cone.
    """
    if dt < 0:
        raise ValueError(f"dt must be nonnegative, got {dt}")
    A, Sigma = _numeric.transition(ssm.F, ssm.Pinf, float(dt))
    return DiscreteTransition(A=A, Sigma=Sigma, dt=float(dt))


def stationary_covariance(ssm: StateSpaceModel, r: float) -> float:
    """``h^T exp(F r) Pinf h``: the covariance implied by the SDE at lag ``r``."""
    return float(ssm.h @ expm(ssm.F * r) @ ssm.Pinf @ ssm.h)
