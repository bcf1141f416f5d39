"""Premeasurement, decoherence channels, splitters and cat lifetimes.

States follow the site layout ``[object, apparatus_1..N_A, appended...]``:
:func:`premeasure` puts the object on site 0, and channels that model an
unobserved record (environment, infrared quanta) append sites at the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .branch import (
    Branch,
    BranchState,
    ShapeError,
    coherence,
    label_matrix,
    mixture,
    normalize,
    pairwise_site_overlaps,
    purity,
    reduce,
    trace_distance,
)
from .series import LOGLOG, ScalingSeries

AMPLITUDE_TOL = 1e-10


@dataclass(frozen=True)
class MeasurementSpec:
    outcome_amplitudes: tuple[complex, ...]
    apparatus_sites: int = 1
    pointer_overlap: float = 0.0
    object_dim: int | None = None

    def __post_init__(self):
        c = tuple(complex(v) for v in self.outcome_amplitudes)
        object.__setattr__(self, "outcome_amplitudes", c)
        if not c:
            raise ValueError("need at least one outcome amplitude")
        total = sum(abs(v) ** 2 for v in c)
        if abs(total - 1.0) > AMPLITUDE_TOL:
            raise ValueError(f"sum of |c_k|^2 is {total!r}, expected 1")
        if self.object_dim is None:
            object.__setattr__(self, "object_dim", max(2, len(c)))
        if len(c) > self.object_dim:
            raise ValueError(f"{len(c)} outcomes do not fit an object of dimension {self.object_dim}")
        if self.apparatus_sites < 0:
            raise ValueError("apparatus_sites must be >= 0")
        if not 0.0 <= self.pointer_overlap <= 1.0:
            raise ValueError(f"pointer_overlap must lie in [0, 1], got {self.pointer_overlap}")

    @property
    def apparatus(self) -> tuple[int, ...]:
        return tuple(range(1, 1 + self.apparatus_sites))


@dataclass(frozen=True)
class EnvironmentSpec:
    env_sites: int
    kappa: float

    def __post_init__(self):
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError(f"kappa must lie in [0, 1], got {self.kappa}")
        if self.env_sites < 0:
            raise ValueError("env_sites must be >= 0")


@dataclass(frozen=True)
class DephasingSpec:
    """Gaussian phase diffusion with variance ``2 * gamma * t`` per site.

    ``mode`` is ``"analytic"`` or ``"sampled"``; sampled mode draws
    ``samples`` phases per site from generators keyed on ``(seed, site)``.
    """

    gamma: float
    t: float
    mode: str = "analytic"
    seed: int = 42
    samples: int = 100_000

    def __post_init__(self):
        if self.gamma < 0 or self.t < 0:
            raise ValueError("dephasing rate and time must be non-negative")
        if self.mode not in ("analytic", "sampled"):
            raise ValueError(f"unknown dephasing mode {self.mode!r}")
        if self.mode == "sampled" and self.samples < 2:
            raise ValueError("sampled mode needs at least 2 samples")

    @property
    def factor(self) -> float:
        return math.exp(-self.gamma * self.t)


@dataclass(frozen=True)
class SplitterSpec:
    """A splitter touching ``locality`` sites (``sites`` picks them, default the first ones).

    ``displacement`` is the state written on touched sites of the new branch;
    ``None`` means "orthogonal to what was there".
    """

    locality: int
    displacement: np.ndarray | None = None
    sites: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.locality < 1:
            raise ValueError("locality must be >= 1")
        if self.sites is not None and len(set(self.sites)) != self.locality:
            raise ValueError(f"{len(set(self.sites))} sites given for locality {self.locality}")


def equal_overlap_states(n: int, overlap: float, dim: int | None = None) -> np.ndarray:
    """``n`` real unit vectors with every pairwise overlap equal to ``overlap``.

    Rows of the Cholesky factor of ``(1 - s) I + s J``; for two states this is
    (1, 0) and (s, sqrt(1 - s^2)).
    """
    dim = max(2, n) if dim is None else dim
    if dim < n:
        raise ValueError(f"{n} states need dimension >= {n}")
    out = np.zeros((n, dim), dtype=complex)
    if overlap == 1.0:
        out[:, 0] = 1.0
        return out
    gram = (1.0 - overlap) * np.eye(n) + overlap * np.ones((n, n))
    out[:, :n] = np.linalg.cholesky(gram)
    return out


def _state_from_rows(amplitudes: Sequence[complex], rows: Sequence[np.ndarray], dims) -> BranchState:
    return BranchState(tuple(Branch(c, r) for c, r in zip(amplitudes, rows)), tuple(dims))


def premeasure(spec: MeasurementSpec) -> BranchState:
    """Branch ``k``: amplitude ``c_k``, object in basis state ``k``, pointer ``A_k``."""
    c = spec.outcome_amplitudes
    K = len(c)
    pointers = equal_overlap_states(K, spec.pointer_overlap)
    dims = (spec.object_dim,) + (pointers.shape[1],) * spec.apparatus_sites
    rows = []
    for k in range(K):
        obj = np.zeros(spec.object_dim, dtype=complex)
        obj[k] = 1.0
        rows.append(np.concatenate([obj] + [pointers[k]] * spec.apparatus_sites))
    return _state_from_rows(c, rows, dims)


def append_records(state: BranchState, records: np.ndarray) -> BranchState:
    """Append sites; ``records[k, j]`` is branch ``k``'s vector on new site ``j``."""
    records = np.asarray(records, dtype=complex)
    if records.ndim != 3 or records.shape[0] != state.n_branches:
        raise ShapeError(f"records shape {records.shape} does not match {state.n_branches} branches")
    dims = state.site_dims + (records.shape[2],) * records.shape[1]
    branches = [Branch(b.amplitude, np.concatenate((b.data, records[k].ravel())))
                for k, b in enumerate(state.branches)]
    return BranchState(tuple(branches), dims)


def environment_scatter(state: BranchState, env: EnvironmentSpec) -> BranchState:
    """Each branch imprints its own environment state on ``env_sites`` new sites.

    Distinct branches' environment states overlap by ``kappa`` per site, so
    tracing the environment scales every inter-branch coherence by
    ``kappa ** env_sites``.
    """
    K = state.n_branches
    e = equal_overlap_states(K, env.kappa)
    records = np.repeat(e[:, None, :], env.env_sites, axis=1)
    return append_records(state, records)


@dataclass(frozen=True)
class DephasingReport:
    sites: tuple[int, ...]
    site_factors: np.ndarray        # per dephased site, <record_0|record_1>
    site_stderr: np.ndarray | None  # sampled mode only
    analytic_factor: float          # exp(-gamma t) per site
    total_factor: complex           # product of site_factors


def differing_sites(state: BranchState, tol: float = 1e-12) -> tuple[int, ...]:
    """Sites where at least one pair of branches is not identical."""
    ov = pairwise_site_overlaps(state)
    differs = np.any(np.abs(ov - 1.0) > tol, axis=(0, 1))
    return tuple(int(j) for j in np.flatnonzero(differs))


def sampled_site_factor(gamma_t: float, samples: int, seed: int, site: int) -> tuple[complex, float]:
    """Monte-Carlo mean of ``exp(i phi)``, ``phi ~ Normal(0, 2 gamma t)``, and its stderr."""
    rng = np.random.default_rng([seed, site])
    phi = rng.normal(0.0, math.sqrt(2.0 * gamma_t), size=samples)
    cos = np.cos(phi)
    mean = complex(cos.mean(), np.sin(phi).mean())
    return mean, float(cos.std(ddof=1) / math.sqrt(samples))


def infrared_dephase(state: BranchState, spec: DephasingSpec,
                     sites: Iterable[int] | None = None) -> tuple[BranchState, DephasingReport]:
    """Dephase ``sites`` (default: every site where branches differ).

    Each dephased site gets an appended record site whose two branch states
    overlap by the site's averaged phase factor, so tracing the records
    multiplies the branch coherence by that factor once per site.  Sampled
    mode needs exactly two branches; analytic mode gives every branch pair
    the same factor.
    """
    sites = differing_sites(state) if sites is None else tuple(sorted(set(sites)))
    for j in sites:
        if not 0 <= j < state.site_count:
            raise IndexError(f"site {j} outside 0..{state.site_count - 1}")
    K = state.n_branches
    f = spec.factor
    if spec.gamma == 0 or spec.t == 0 or K == 1 or not sites:
        factors = np.ones(len(sites), dtype=complex)
        return state, DephasingReport(sites, factors, None, f, 1.0 + 0j)
    if spec.mode == "analytic":
        factors = np.full(len(sites), f, dtype=complex)
        e = equal_overlap_states(K, f)
        records = np.repeat(e[:, None, :], len(sites), axis=1)
        stderr = None
    else:
        if K != 2:
            raise ValueError(f"sampled dephasing needs a two-branch state, got {K}")
        gt = spec.gamma * spec.t
        draws = [sampled_site_factor(gt, spec.samples, spec.seed, j) for j in sites]
        factors = np.array([w for w, _ in draws], dtype=complex)
        stderr = np.array([s for _, s in draws])
        records = np.zeros((2, len(sites), 2), dtype=complex)
        records[0, :, 0] = 1.0
        records[1, :, 0] = factors
        records[1, :, 1] = np.sqrt(np.maximum(0.0, 1.0 - np.abs(factors) ** 2))
    out = append_records(state, records)
    return out, DephasingReport(sites, factors, stderr, f, complex(np.prod(factors)))


@dataclass(frozen=True)
class DecoherenceReport:
    coherences: dict[tuple[int, int], float]
    purity: float
    distance_to_mixture: float
    kept_overlaps: dict[tuple[int, int], float]


def decoherence_report(state: BranchState, keep: Iterable[int], spec: MeasurementSpec) -> DecoherenceReport:
    """Coherences, purity and trace distance to ``sum_k |c_k|^2 |kept_k><kept_k|``."""
    keep = tuple(sorted(set(keep)))
    if 0 not in keep:
        raise ValueError("keep must include the object site (0)")
    rho = reduce(state, keep)
    weights = np.abs(np.asarray(spec.outcome_amplitudes)) ** 2
    if weights.size != state.n_branches:
        raise ShapeError(f"{weights.size} outcome amplitudes for {state.n_branches} branches")
    target = mixture(state, keep, weights)
    pairs = list(combinations(range(state.n_branches), 2))
    return DecoherenceReport(
        {p: coherence(rho, *p) for p in pairs},
        purity(rho),
        trace_distance(rho, target),
        {p: rho.kept_overlap(*p) for p in pairs},
    )


def _orthogonal_to(v: np.ndarray) -> np.ndarray:
    """A unit vector orthogonal to ``v`` (Gram-Schmidt on the first basis vector that works)."""
    for i in range(v.size):
        e = np.zeros(v.size, dtype=complex)
        e[i] = 1.0
        w = e - np.vdot(v, e) * v
        n = np.linalg.norm(w)
        if n > 1e-6:
            return w / n
    raise ValueError("no orthogonal direction")


def split(state: BranchState, spec: SplitterSpec) -> BranchState:
    """Copy every branch, rewriting the copy on the ``locality`` touched sites.

    On a single-branch input this gives two equal-amplitude branches that
    agree everywhere except on the touched sites.  Multi-branch inputs are
    split branch by branch, which lets splits be chained.
    """
    sites = tuple(range(spec.locality)) if spec.sites is None else tuple(sorted(set(spec.sites)))
    if spec.locality > state.site_count:
        raise ValueError(f"locality {spec.locality} exceeds site count {state.site_count}")
    for j in sites:
        if not 0 <= j < state.site_count:
            raise IndexError(f"site {j} outside 0..{state.site_count - 1}")
    disp = None
    if spec.displacement is not None:
        disp = np.asarray(spec.displacement, dtype=complex).ravel()
        disp = disp / np.linalg.norm(disp)
    offs = state.offsets
    branches = []
    for b in state.branches:
        copy = np.array(b.data)
        for j in sites:
            lo, hi = offs[j], offs[j + 1]
            if disp is None:
                copy[lo:hi] = _orthogonal_to(b.data[lo:hi])
            else:
                if disp.size != hi - lo:
                    raise ShapeError(f"displacement has dimension {disp.size}, site {j} has {hi - lo}")
                copy[lo:hi] = disp
        amp = b.amplitude / math.sqrt(2.0)
        branches += [Branch(amp, b.data), Branch(amp, copy)]
    return normalize(state.replace_branches(branches))


def branch_distinguishability(state: BranchState, epsilon: float) -> dict[tuple[int, int], int]:
    """Per branch pair, the number of sites whose overlap magnitude is below ``1 - epsilon``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    ov = np.abs(pairwise_site_overlaps(state))
    return {(k, k2): int(np.count_nonzero(ov[k2, k] < 1.0 - epsilon))
            for k, k2 in combinations(range(state.n_branches), 2)}


def cat_state(N: int, d: int = 2) -> BranchState:
    """Equal superposition of all-|0> and all-|1> on ``N`` sites."""
    zero = np.zeros((N, d), dtype=complex)
    one = np.zeros((N, d), dtype=complex)
    zero[:, 0] = 1.0
    one[:, 1] = 1.0
    amp = 1.0 / math.sqrt(2.0)
    return BranchState((Branch(amp, zero.ravel()), Branch(amp, one.ravel())), (d,) * N)


def half_life(N: int, gamma: float) -> float:
    """Time at which an N-site cat's coherence has halved: ln 2 / (gamma N)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return math.log(2.0) / (gamma * N)


def cat_coherence(N: int, gamma: float, t: float) -> float:
    """Body coherence of an N-site cat after analytic dephasing for time ``t``."""
    cat = cat_state(N)
    out, _ = infrared_dephase(cat, DephasingSpec(gamma, t))
    r, _ = label_matrix(out, range(N))
    return float(abs(r[0, 1]))


def cat_lifetime(N_list: Sequence[int], gamma: float, threads: int = 1) -> ScalingSeries:
    """Half-life of cat coherence against N (log-log; the slope should be -1)."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if not N_list:
        raise ValueError("N_list is empty")
    from .parallel import ordered_map

    def point(N):
        t = half_life(int(N), gamma)
        return (int(N), t, math.log(t))

    rows = ordered_map(point, list(N_list), threads)
    return ScalingSeries.build(rows, LOGLOG, expected_slope=-1.0)


def estimate_scale(n_atoms: float, atom_mass_kg: float) -> float:
    """Mass of ``n_atoms`` atoms of mass ``atom_mass_kg``."""
    if n_atoms <= 0 or atom_mass_kg <= 0:
        raise ValueError("atom count and atom mass must be positive")
    return n_atoms * atom_mass_kg
