"""Finite sample spaces, distributions, pointwise functions, and the function
classes that parameterize the supported divergences.

Every type is immutable after construction and validated eagerly, so the
numerical modules can assume well-formed inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    AsymmetricMetric,
    DimensionMismatch,
    GraphDisconnected,
    HomogeneityViolated,
    MissingGraph,
    MissingMetric,
    SelfLoop,
    SingularGram,
    TriangleInequalityViolated,
    UnsupportedVariant,
    ZeroMassMu,
)

METRIC_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12
GRAM_MIN_EIG = 1e-10


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SampleSpace:
    """Finite ground set with an optional metric and an optional weighted graph.

    Point labels are opaque strings; all numerics operate on indices.  The
    graph is a tuple of ``(i, j, w)`` edges with ``w > 0``; each stored edge
    contributes to the discrete gradient at its source ``i``, so callers who
    want a symmetric neighbourhood list both orientations.
    """

    points: tuple
    metric: Optional[np.ndarray] = None
    graph: Optional[tuple] = None

    def __post_init__(self):
        points = tuple(str(p) for p in self.points)
        if len(points) < 1:
            raise DimensionMismatch("a sample space needs at least one point")
        object.__setattr__(self, "points", points)
        n = len(points)

        if self.metric is not None:
            c = np.array(self.metric, dtype=float)
            if c.shape != (n, n):
                raise DimensionMismatch(
                    f"metric shape {c.shape} does not match {n} points"
                )
            if not np.all(np.isfinite(c)):
                raise ValueError("metric entries must be finite")
            if np.max(np.abs(c - c.T)) > METRIC_TOL:
                raise AsymmetricMetric("metric matrix is not symmetric")
            if np.max(np.abs(np.diag(c))) > METRIC_TOL:
                raise ValueError("metric diagonal must be zero")
            off = ~np.eye(n, dtype=bool)
            if n > 1 and np.min(c[off]) <= 0.0:
                raise ValueError("metric must be strictly positive off the diagonal")
            for k in range(n):
                slack = c - (c[:, k : k + 1] + c[k : k + 1, :])
                bad = np.argwhere(slack > METRIC_TOL)
                if bad.size:
                    i, j = bad[0]
                    raise TriangleInequalityViolated(
                        f"c({i},{j}) > c({i},{k}) + c({k},{j})"
                    )
            object.__setattr__(self, "metric", _frozen_array(c))

        if self.graph is not None:
            edges = []
            for e in self.graph:
                i, j, w = int(e[0]), int(e[1]), float(e[2])
                if not (0 <= i < n and 0 <= j < n):
                    raise DimensionMismatch(f"edge ({i},{j}) out of range")
                if i == j:
                    raise SelfLoop(f"self-loop at point {i}")
                if not (np.isfinite(w) and w > 0.0):
                    raise ValueError(f"edge ({i},{j}) needs a positive weight")
                edges.append((i, j, w))
            object.__setattr__(self, "graph", tuple(edges))

    @property
    def n(self) -> int:
        return len(self.points)


def make_space(points, metric=None, graph=None) -> SampleSpace:
    """Validated constructor for :class:`SampleSpace`."""
    return SampleSpace(tuple(points), metric, graph)


def require_same_space(a, b) -> None:
    sa, sb = a.space, b.space
    if sa is sb:
        return
    if sa.points != sb.points:
        raise DimensionMismatch("objects live on different sample spaces")


def graph_is_connected(space: SampleSpace, active=None) -> bool:
    """Connectivity of the undirected support of the edge list.

    ``active`` optionally masks edges (parallel to ``space.graph``).
    """
    if space.graph is None:
        raise MissingGraph("space has no graph")
    n = space.n
    adj = [[] for _ in range(n)]
    for k, (i, j, _) in enumerate(space.graph):
        if active is not None and not active[k]:
            continue
        adj[i].append(j)
        adj[j].append(i)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return bool(seen.all())


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability vector on a sample space."""

    space: SampleSpace
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != (self.space.n,):
            raise DimensionMismatch(
                f"weight vector has shape {w.shape}, expected ({self.space.n},)"
            )
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.min(w) < 0.0:
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", _frozen_array(w))

    @classmethod
    def uniform(cls, space: SampleSpace) -> "DiscreteDistribution":
        return cls(space, np.full(space.n, 1.0 / space.n))

    @classmethod
    def point_mass(cls, space: SampleSpace, index: int) -> "DiscreteDistribution":
        w = np.zeros(space.n)
        w[index] = 1.0
        return cls(space, w)

    def expect(self, values) -> float:
        v = values.values if isinstance(values, FunctionVec) else np.asarray(values)
        return float(self.weights @ v)


@dataclass(frozen=True, eq=False)
class FunctionVec:
    """Real-valued function on a sample space, stored pointwise."""

    space: SampleSpace
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.space.n,):
            raise DimensionMismatch(
                f"function vector has shape {v.shape}, expected ({self.space.n},)"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("function values must be finite")
        object.__setattr__(self, "values", _frozen_array(v))

    def negated(self) -> "FunctionVec":
        return FunctionVec(self.space, -self.values)


# ---------------------------------------------------------------------------
# function classes


@dataclass(frozen=True, eq=False)
class FunctionClass:
    space: SampleSpace


@dataclass(frozen=True, eq=False)
class Explicit(FunctionClass):
    """A finite, explicitly listed discriminator set."""

    functions: tuple = ()

    def __post_init__(self):
        fns = tuple(self.functions)
        if not fns:
            raise DimensionMismatch("an explicit class needs at least one member")
        for f in fns:
            if not isinstance(f, FunctionVec):
                raise TypeError("explicit members must be FunctionVec instances")
            require_same_space(self, f)
        object.__setattr__(self, "functions", fns)
        matrix = np.stack([f.values for f in fns])
        object.__setattr__(self, "matrix", _frozen_array(matrix))

    matrix: np.ndarray = field(init=False, repr=False, default=None)

    @property
    def size(self) -> int:
        return len(self.functions)


@dataclass(frozen=True, eq=False)
class LipschitzBall(FunctionClass):
    """Functions with metric Lipschitz constant at most one."""

    def __post_init__(self):
        if self.space.metric is None:
            raise MissingMetric("a Lipschitz ball needs a metric on the space")


@dataclass(frozen=True, eq=False)
class SupNormBall(FunctionClass):
    """Functions bounded by one in sup norm."""


@dataclass(frozen=True, eq=False)
class RkhsBall(FunctionClass):
    """Unit ball of the RKHS norm induced by a Gram matrix."""

    gram: np.ndarray = None

    def __post_init__(self):
        k = np.array(self.gram, dtype=float)
        n = self.space.n
        if k.shape != (n, n):
            raise DimensionMismatch(f"Gram matrix shape {k.shape} != ({n},{n})")
        if not np.all(np.isfinite(k)):
            raise ValueError("Gram entries must be finite")
        if np.max(np.abs(k - k.T)) > 1e-10 * (1.0 + np.max(np.abs(k))):
            raise SingularGram("Gram matrix is not symmetric")
        eigvals = np.linalg.eigvalsh(0.5 * (k + k.T))
        if eigvals.min() <= GRAM_MIN_EIG:
            raise SingularGram(
                f"Gram matrix min eigenvalue {eigvals.min():.3e} <= {GRAM_MIN_EIG}"
            )
        object.__setattr__(self, "gram", _frozen_array(0.5 * (k + k.T)))


def _check_mu(cls_name, space, mu, allow_zero_mass):
    if not isinstance(mu, DiscreteDistribution):
        raise TypeError(f"{cls_name} needs a DiscreteDistribution mu")
    if mu.space.points != space.points:
        raise DimensionMismatch("mu lives on a different space")
    if not allow_zero_mass and np.min(mu.weights) <= 0.0:
        raise ZeroMassMu(
            f"{cls_name} requires full-support mu; pass allow_zero_mass=True "
            "to opt into infinite-distance semantics"
        )


@dataclass(frozen=True, eq=False)
class FisherBall(FunctionClass):
    """Functions with mu-weighted second moment at most one."""

    mu: DiscreteDistribution = None
    allow_zero_mass: bool = False

    def __post_init__(self):
        _check_mu("FisherBall", self.space, self.mu, self.allow_zero_mass)


@dataclass(frozen=True, eq=False)
class SobolevBall(FunctionClass):
    """Functions whose mu-weighted discrete gradient energy is at most one."""

    mu: DiscreteDistribution = None
    allow_zero_mass: bool = False

    def __post_init__(self):
        if self.space.graph is None:
            raise MissingGraph("a Sobolev ball needs a graph on the space")
        _check_mu("SobolevBall", self.space, self.mu, self.allow_zero_mass)
        if not graph_is_connected(self.space):
            raise GraphDisconnected("a Sobolev ball needs a connected graph")


@dataclass(frozen=True, eq=False)
class DudleyBall(FunctionClass):
    """Functions with sup norm plus Lipschitz constant at most one."""

    def __post_init__(self):
        if self.space.metric is None:
            raise MissingMetric("a Dudley ball needs a metric on the space")


@dataclass(frozen=True, eq=False)
class ZetaBall(FunctionClass):
    """Sublevel set of a positively homogeneous black-box penalty.

    ``zeta(a * h) == a**degree * zeta(h)`` is spot-checked at construction on
    16 deterministic random pairs.
    """

    zeta: Callable[[np.ndarray], float] = None
    degree: float = 1.0
    convex: bool = False

    def __post_init__(self):
        if not callable(self.zeta):
            raise TypeError("zeta must be callable")
        if not (np.isfinite(self.degree) and self.degree > 0.0):
            raise ValueError("degree must be positive")
        rng = np.random.default_rng(1618)
        for _ in range(16):
            a = float(rng.uniform(0.5, 2.0))
            h = rng.standard_normal(self.space.n)
            lhs = float(self.zeta(a * h))
            rhs = a ** self.degree * float(self.zeta(h))
            if abs(lhs - rhs) > 1e-9 * (1.0 + abs(rhs)):
                raise HomogeneityViolated(
                    f"zeta(a*h) = {lhs!r} but a^k*zeta(h) = {rhs!r}"
                )


STRUCTURED_VARIANTS = (
    LipschitzBall,
    SupNormBall,
    RkhsBall,
    FisherBall,
    SobolevBall,
    DudleyBall,
)


# ---------------------------------------------------------------------------
# structural helpers shared by the penalty and distance modules


def sup_norm(values: np.ndarray) -> float:
    return float(np.max(np.abs(values)))


def lipschitz_constant(space: SampleSpace, values: np.ndarray) -> float:
    """Largest |v_i - v_j| / c(i, j) over point pairs."""
    if space.metric is None:
        raise MissingMetric("Lipschitz constant needs a metric")
    if space.n == 1:
        return 0.0
    diff = np.abs(values[:, None] - values[None, :])
    off = ~np.eye(space.n, dtype=bool)
    return float(np.max(diff[off] / space.metric[off]))


def metric_is_path(space: SampleSpace) -> bool:
    """True when c(i, j) equals the sum of adjacent gaps in index order."""
    c = space.metric
    if c is None or space.n < 3:
        return c is not None
    gaps = np.diag(c, k=1)
    cum = np.concatenate(([0.0], np.cumsum(gaps)))
    approx = np.abs(cum[:, None] - cum[None, :])
    return bool(np.max(np.abs(c - approx)) <= 1e-9 * (1.0 + np.max(c)))


def lipschitz_pairs(space: SampleSpace):
    """Point pairs whose difference quotients determine the Lipschitz constant.

    On a path metric the adjacent pairs suffice; otherwise all pairs.
    """
    if metric_is_path(space):
        return [(i, i + 1) for i in range(space.n - 1)]
    return [(i, j) for i in range(space.n) for j in range(i + 1, space.n)]


def sobolev_matrix(space: SampleSpace, mu: DiscreteDistribution) -> np.ndarray:
    """PSD matrix L with h' L h = sum_i mu_i sum_{(i,j) in graph} w_ij (h_j-h_i)^2."""
    if space.graph is None:
        raise MissingGraph("Sobolev seminorm needs a graph")
    n = space.n
    lap = np.zeros((n, n))
    for i, j, w in space.graph:
        a = mu.weights[i] * w
        lap[i, i] += a
        lap[j, j] += a
        lap[i, j] -= a
        lap[j, i] -= a
    return lap


def sobolev_seminorm(space, mu, values) -> float:
    lap = sobolev_matrix(space, mu)
    return float(np.sqrt(max(values @ lap @ values, 0.0)))


def rkhs_norm(gram: np.ndarray, values: np.ndarray) -> float:
    return float(np.sqrt(max(values @ np.linalg.solve(gram, values), 0.0)))


def class_penalty_value(cls: FunctionClass, values: np.ndarray) -> float:
    """Membership penalty whose unit sublevel set is the class."""
    if isinstance(cls, LipschitzBall):
        return lipschitz_constant(cls.space, values)
    if isinstance(cls, SupNormBall):
        return sup_norm(values)
    if isinstance(cls, RkhsBall):
        return rkhs_norm(cls.gram, values)
    if isinstance(cls, FisherBall):
        return float(np.sqrt(max(cls.mu.weights @ (values**2), 0.0)))
    if isinstance(cls, SobolevBall):
        return sobolev_seminorm(cls.space, cls.mu, values)
    if isinstance(cls, DudleyBall):
        return sup_norm(values) + lipschitz_constant(cls.space, values)
    if isinstance(cls, ZetaBall):
        z = float(cls.zeta(values))
        return z ** (1.0 / cls.degree) if z > 0.0 else 0.0
    raise UnsupportedVariant(f"no membership penalty for {type(cls).__name__}")


# ---------------------------------------------------------------------------
# class-level transforms


@dataclass(frozen=True)
class SymmetrizeResult:
    function_class: FunctionClass
    already_even: bool


def _member_key(values: np.ndarray) -> bytes:
    return (values + 0.0).tobytes()  # fold -0.0 into +0.0


def symmetrize_class(cls: FunctionClass) -> SymmetrizeResult:
    """Close an explicit class under negation (structured balls already are)."""
    if isinstance(cls, Explicit):
        seen = {}
        for f in cls.functions:
            seen.setdefault(_member_key(f.values), f)
        was_even = all(_member_key(-f.values) in seen for f in seen.values())
        members = list(seen.values())
        for f in list(members):
            key = _member_key(-f.values)
            if key not in seen:
                neg = f.negated()
                seen[key] = neg
                members.append(neg)
        return SymmetrizeResult(Explicit(cls.space, tuple(members)), was_even)
    if isinstance(cls, STRUCTURED_VARIANTS):
        return SymmetrizeResult(cls, True)
    raise UnsupportedVariant(
        f"cannot symmetrize {type(cls).__name__}; only explicit sets and the "
        "structured balls are supported"
    )


def class_is_even(cls: FunctionClass, probe_seed: int = 97) -> bool:
    """Whether the class is closed under negation.

    Structured balls are even by construction; explicit sets are checked
    member by member; a zeta ball is probed on random functions.
    """
    if isinstance(cls, STRUCTURED_VARIANTS):
        return True
    if isinstance(cls, Explicit):
        keys = {_member_key(f.values) for f in cls.functions}
        return all(_member_key(-f.values) in keys for f in cls.functions)
    if isinstance(cls, ZetaBall):
        rng = np.random.default_rng(probe_seed)
        for _ in range(16):
            h = rng.standard_normal(cls.space.n)
            a, b = float(cls.zeta(h)), float(cls.zeta(-h))
            if abs(a - b) > 1e-9 * (1.0 + abs(a)):
                return False
        return True
    raise UnsupportedVariant(f"evenness undefined for {type(cls).__name__}")


def discretize_structured_class(
    cls: FunctionClass, budget: int, seed: int
) -> Explicit:
    """Sample `budget` boundary members of a structured class.

    Samples are drawn deterministically from the seed and form nested sets as
    the budget grows: the first ``m`` samples for budget ``m' > m`` coincide
    with the budget-``m`` output.  Every sample has class penalty 1, so the
    resulting explicit set is a subset of the structured class.
    """
    if isinstance(cls, Explicit):
        raise UnsupportedVariant("discretization applies to structured classes")
    if budget < 2:
        raise ValueError("budget must be at least 2")
    n = cls.space.n
    rng = np.random.default_rng(seed)
    samples = []

    if isinstance(cls, SupNormBall):
        # coordinate-extreme sign vectors first: +/- (2 e_i - 1)
        for i in range(n):
            v = -np.ones(n)
            v[i] = 1.0
            samples.append(v)
            samples.append(-v)
        samples = samples[:budget]

    seminorm_like = isinstance(cls, (LipschitzBall, SobolevBall))
    while len(samples) < budget:
        g = rng.standard_normal(n)
        if seminorm_like:
            g = g - g.mean()
        scale = class_penalty_value(cls, g)
        if scale <= 1e-12:
            continue
        samples.append(g / scale)

    fns = tuple(FunctionVec(cls.space, v) for v in samples)
    return Explicit(cls.space, fns)
