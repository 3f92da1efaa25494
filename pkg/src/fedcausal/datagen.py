"""Ground-truth linear non-Gaussian systems, sampling, and client partitioning.

Provides everything the experiments need on the data side: random DAGs
with weighted edges, samplers for x = Bx + e with a choice of noise
families, horizontal/vertical/hybrid splits across clients, and the
exact population cumulant oracle used throughout the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import zeta

from .cumulants import CumulantTable, SampleMatrix
from .errors import AssumptionViolated

# Asymmetry parameter of the asymmetric-Laplace family (difference of two
# exponentials with rates kappa and 1/kappa).
_ALD_KAPPA = 0.5

# Per-family (third cumulant, variance) of the standard (scale=1) form.
_FAMILY_STATS = {
    "uniform": (0.0, 1.0),
    "exponential": (2.0, 1.0),
    "gumbel": (2.0 * zeta(3), math.pi**2 / 6.0),
    "laplace-asymmetric": (
        2.0 / _ALD_KAPPA**3 - 2.0 * _ALD_KAPPA**3,
        1.0 / _ALD_KAPPA**2 + _ALD_KAPPA**2,
    ),
    "gaussian": (0.0, 1.0),
}

NOISE_FAMILIES = tuple(_FAMILY_STATS)


def default_variable_ids(d: int) -> tuple[str, ...]:
    return tuple(f"x{i + 1}" for i in range(d))


@dataclass(frozen=True, eq=False)
class DagSpec:
    """A weighted DAG: strengths[i, j] is the causal effect of x_j on x_i.

    `order` is a topological order over column indices; edges may only
    point from earlier to later positions, so permuting strengths by
    `order` gives a strictly lower triangular matrix.
    """

    d: int
    strengths: np.ndarray
    order: tuple[int, ...]
    variable_ids: tuple[str, ...] = ()

    def __post_init__(self):
        strengths = np.asarray(self.strengths, dtype=np.float64)
        object.__setattr__(self, "strengths", strengths)
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        if not self.variable_ids:
            object.__setattr__(self, "variable_ids", default_variable_ids(self.d))
        else:
            object.__setattr__(
                self, "variable_ids", tuple(str(v) for v in self.variable_ids)
            )
        if strengths.shape != (self.d, self.d):
            raise ValueError("strengths must be d x d")
        if sorted(self.order) != list(range(self.d)):
            raise ValueError("order must be a permutation of 0..d-1")
        if len(self.variable_ids) != self.d:
            raise ValueError("variable_ids length must equal d")
        perm = np.asarray(self.order)
        permuted = strengths[np.ix_(perm, perm)]
        if np.any(np.triu(permuted) != 0.0):
            raise ValueError("strengths must be strictly lower triangular in order")

    def parents(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.strengths[i])

    def sources(self) -> list[int]:
        """Indices of variables with no parents."""
        return [i for i in range(self.d) if not np.any(self.strengths[i])]


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    """Per-variable noise family and scale.

    Families are sampled in a standard centered form and multiplied by
    `scales`, so the third cumulant of variable i's noise is
    scale_i**3 times the standard family's third cumulant.
    """

    families: tuple[str, ...]
    scales: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(
            self, "scales", tuple(float(s) for s in self.scales)
        )
        if len(self.families) != len(self.scales):
            raise ValueError("families and scales must have equal length")
        for fam in self.families:
            if fam not in _FAMILY_STATS:
                raise ValueError(
                    f"unknown noise family {fam!r}; choose from {NOISE_FAMILIES}"
                )
        if any(s <= 0 for s in self.scales):
            raise ValueError("noise scales must be positive")

    @classmethod
    def iid(cls, family: str, d: int, scale: float = 1.0) -> "NoiseSpec":
        return cls(families=(family,) * d, scales=(scale,) * d)

    @property
    def d(self) -> int:
        return len(self.families)

    def third_cumulants(self) -> np.ndarray:
        return np.array(
            [_FAMILY_STATS[f][0] * s**3 for f, s in zip(self.families, self.scales)]
        )

    def variances(self) -> np.ndarray:
        return np.array(
            [_FAMILY_STATS[f][1] * s**2 for f, s in zip(self.families, self.scales)]
        )

    def is_skewed(self) -> np.ndarray:
        """Boolean per variable: does the noise family carry nonzero skew?"""
        return self.third_cumulants() != 0.0


@dataclass(frozen=True, eq=False)
class PartitionSpec:
    """How samples and variables split across K clients.

    Every client gets the rows in its half-open `sample_ranges` entry and
    the columns in its `variable_sets` entry. Validity requires the union
    of variable sets to cover all variables and every unordered variable
    pair to be co-held by at least one client, otherwise some joint
    cumulant would be inestimable.
    """

    k: int
    variable_sets: tuple[tuple[str, ...], ...]
    sample_ranges: tuple[tuple[int, int], ...]
    mode: str

    def __post_init__(self):
        object.__setattr__(
            self,
            "variable_sets",
            tuple(tuple(str(v) for v in vs) for vs in self.variable_sets),
        )
        object.__setattr__(
            self,
            "sample_ranges",
            tuple((int(a), int(b)) for a, b in self.sample_ranges),
        )
        if self.mode not in ("horizontal", "vertical", "hybrid"):
            raise ValueError(f"unknown partition mode {self.mode!r}")
        if len(self.variable_sets) != self.k or len(self.sample_ranges) != self.k:
            raise ValueError("need one variable set and one row range per client")
        for vs in self.variable_sets:
            if len(set(vs)) != len(vs):
                raise ValueError("duplicate variable in one client's set")
        for a, b in self.sample_ranges:
            if b - a < 2:
                raise ValueError("every client needs at least 2 rows")

    def all_variables(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for vs in self.variable_sets:
            for v in vs:
                seen.setdefault(v)
        return tuple(sorted(seen))

    def check_pair_coverage(self) -> None:
        """Raise AssumptionViolated if some variable pair is co-held nowhere."""
        all_vars = self.all_variables()
        sets = [set(vs) for vs in self.variable_sets]
        for a_idx, a in enumerate(all_vars):
            for b in all_vars[a_idx + 1 :]:
                if not any(a in s and b in s for s in sets):
                    raise AssumptionViolated((a, b))


@dataclass(frozen=True, eq=False)
class ClientDataset:
    """One client's view: a SampleMatrix over its variables and rows."""

    client_id: int
    samples: SampleMatrix

    @property
    def n(self) -> int:
        return self.samples.n

    @property
    def variable_ids(self) -> tuple[str, ...]:
        return self.samples.variable_ids


def random_dag(
    d: int,
    edge_prob: float,
    weight_range: tuple[float, float] = (0.3, 1.0),
    seed: int = 0,
) -> DagSpec:
    """Draw a random topological order and include each forward edge with
    probability edge_prob; weights are uniform in +/-[lo, hi].

    The weight range must exclude a neighborhood of zero so that every
    edge is detectable.
    """
    if d < 2:
        raise ValueError("need at least 2 variables")
    if not 0.0 <= edge_prob <= 1.0:
        raise ValueError("edge_prob must be in [0, 1]")
    lo, hi = float(weight_range[0]), float(weight_range[1])
    if not (0.0 < lo <= hi):
        raise ValueError(f"invalid weight range ({lo}, {hi}); need 0 < lo <= hi")
    rng = np.random.default_rng(seed)
    order = tuple(int(v) for v in rng.permutation(d))
    strengths = np.zeros((d, d))
    for ti in range(1, d):
        for tj in range(ti):
            if rng.random() < edge_prob:
                w = rng.uniform(lo, hi)
                if rng.random() < 0.5:
                    w = -w
                strengths[order[ti], order[tj]] = w
    return DagSpec(d=d, strengths=strengths, order=order)


def chain_dag(
    d: int,
    weight_range: tuple[float, float] = (0.5, 1.5),
    seed: int = 0,
    weights: Sequence[float] | None = None,
) -> DagSpec:
    """A chain x1 -> x2 -> ... -> xd with given or random edge weights."""
    if d < 2:
        raise ValueError("need at least 2 variables")
    if weights is None:
        rng = np.random.default_rng(seed)
        lo, hi = float(weight_range[0]), float(weight_range[1])
        if not (0.0 < lo <= hi):
            raise ValueError(f"invalid weight range ({lo}, {hi})")
        mags = rng.uniform(lo, hi, size=d - 1)
        signs = np.where(rng.random(d - 1) < 0.5, -1.0, 1.0)
        weights = mags * signs
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (d - 1,):
        raise ValueError(f"need {d - 1} chain weights")
    strengths = np.zeros((d, d))
    for i in range(1, d):
        strengths[i, i - 1] = weights[i - 1]
    return DagSpec(d=d, strengths=strengths, order=tuple(range(d)))


def mixing_matrix(dag: DagSpec) -> np.ndarray:
    """A = (I - B)^-1, mapping noise to observations.

    Solved by forward substitution in topological order, so rows of
    parentless variables come out as exact unit vectors.
    """
    perm = np.asarray(dag.order)
    bt = dag.strengths[np.ix_(perm, perm)]
    at = solve_triangular(
        np.eye(dag.d) - bt, np.eye(dag.d), lower=True, unit_diagonal=True
    )
    a = np.zeros_like(at)
    a[np.ix_(perm, perm)] = at
    return a


def sample_lingam(
    dag: DagSpec, noise: NoiseSpec, n: int, seed: int = 0
) -> SampleMatrix:
    """Draw n samples from x = Bx + e by substitution in topological order.

    Noise is centered analytically (the standard family mean is
    subtracted before scaling), so the model carries no intercept.
    """
    if noise.d != dag.d:
        raise ValueError("noise spec dimension must match dag")
    if n < 2:
        raise ValueError("need at least 2 samples")
    rng = np.random.default_rng(seed)
    e = np.empty((n, dag.d))
    for i, (family, scale) in enumerate(zip(noise.families, noise.scales)):
        e[:, i] = _sample_noise(rng, family, n) * scale
    x = np.zeros((n, dag.d))
    for v in dag.order:
        x[:, v] = e[:, v] + x @ dag.strengths[v]
    return SampleMatrix(x, dag.variable_ids)


def _sample_noise(rng: np.random.Generator, family: str, n: int) -> np.ndarray:
    if family == "uniform":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=n)
    if family == "exponential":
        return rng.exponential(1.0, size=n) - 1.0
    if family == "gumbel":
        return rng.gumbel(0.0, 1.0, size=n) - np.euler_gamma
    if family == "laplace-asymmetric":
        k = _ALD_KAPPA
        up = rng.exponential(1.0 / k, size=n)
        down = rng.exponential(k, size=n)
        return up - down - (1.0 / k - k)
    if family == "gaussian":
        return rng.standard_normal(n)
    raise ValueError(f"unknown noise family {family!r}")


def partition(samples: SampleMatrix, spec: PartitionSpec) -> list[ClientDataset]:
    """Split a pooled SampleMatrix into per-client datasets.

    Raises AssumptionViolated when some variable pair is co-held by no
    client, since its joint cumulant could never be aggregated.
    """
    if set(spec.all_variables()) != set(samples.variable_ids):
        raise ValueError("partition variables must cover exactly the sample columns")
    spec.check_pair_coverage()
    col_of = {v: i for i, v in enumerate(samples.variable_ids)}
    datasets = []
    for k in range(spec.k):
        start, stop = spec.sample_ranges[k]
        if not (0 <= start < stop <= samples.n):
            raise ValueError(f"row range ({start}, {stop}) outside 0..{samples.n}")
        cols = [col_of[v] for v in spec.variable_sets[k]]
        block = samples.values[start:stop][:, cols]
        datasets.append(
            ClientDataset(
                client_id=k,
                samples=SampleMatrix(block, spec.variable_sets[k]),
            )
        )
    return datasets


def make_partition_spec(
    mode: str,
    variable_ids: Sequence[str],
    n: int,
    k: int,
    seed: int = 0,
    max_tries: int = 200,
) -> PartitionSpec:
    """Construct a valid partition for the requested federation mode.

    horizontal: disjoint contiguous row blocks, every client sees all
    variables. vertical: all clients share all rows but hold random
    variable subsets of size ceil(2d/3). hybrid: disjoint row blocks and
    random variable subsets. Subset draws are rejected until every
    variable pair is co-held somewhere.
    """
    ids = tuple(str(v) for v in variable_ids)
    if k < 1:
        raise ValueError("need at least one client")
    if n < 2 * k:
        raise ValueError("not enough rows for every client to get at least 2")
    bounds = np.linspace(0, n, k + 1).astype(int)
    blocks = tuple((int(bounds[i]), int(bounds[i + 1])) for i in range(k))
    if mode == "horizontal":
        return PartitionSpec(
            k=k,
            variable_sets=(ids,) * k,
            sample_ranges=blocks,
            mode="horizontal",
        )
    if mode not in ("vertical", "hybrid"):
        raise ValueError(f"unknown partition mode {mode!r}")
    ranges = blocks if mode == "hybrid" else ((0, n),) * k
    if k == 1:
        return PartitionSpec(
            k=1, variable_sets=(ids,), sample_ranges=ranges, mode=mode
        )
    rng = np.random.default_rng(seed)
    subset_size = min(len(ids), math.ceil(2 * len(ids) / 3))
    for _ in range(max_tries):
        variable_sets = []
        for _ in range(k):
            chosen = rng.choice(len(ids), size=subset_size, replace=False)
            variable_sets.append(tuple(ids[i] for i in sorted(chosen)))
        spec = PartitionSpec(
            k=k,
            variable_sets=tuple(variable_sets),
            sample_ranges=ranges,
            mode=mode,
        )
        if set(spec.all_variables()) != set(ids):
            continue
        try:
            spec.check_pair_coverage()
        except AssumptionViolated:
            continue
        return spec
    raise RuntimeError(
        f"could not draw a pair-covering {mode} partition in {max_tries} tries"
    )


def population_cumulants(dag: DagSpec, noise_c3) -> CumulantTable:
    """Exact population cumulant table of x = Bx + e.

    Third cumulants are multilinear over the independent noise terms:
    Cum(x_i, x_j, x_k) = sum_l A_il A_jl A_kl * C3(e_l) with
    A = (I - B)^-1. No sampling error.
    """
    noise_c3 = np.asarray(noise_c3, dtype=np.float64)
    if noise_c3.shape != (dag.d,):
        raise ValueError("noise_c3 must have one entry per variable")
    if not np.all(np.isfinite(noise_c3)):
        raise ValueError("noise_c3 must be finite")
    a = mixing_matrix(dag)
    a2 = a * a
    c3 = (a2 * a) @ noise_c3
    # c21[i, j] = sum_l A_il^2 A_jl c3_l
    c21 = (a2 * noise_c3) @ a.T
    return CumulantTable.from_c21(dag.variable_ids, c3, c21)


def delete_variable(dag: DagSpec, index: int) -> DagSpec:
    """Drop one variable's row/column from the system.

    For a parentless variable this yields exactly the residual system the
    cumulant-level elimination step targets.
    """
    keep = [i for i in range(dag.d) if i != index]
    sub = dag.strengths[np.ix_(keep, keep)]
    order = tuple(
        (v if v < index else v - 1) for v in dag.order if v != index
    )
    ids = tuple(dag.variable_ids[i] for i in keep)
    return DagSpec(d=dag.d - 1, strengths=sub, order=order, variable_ids=ids)
