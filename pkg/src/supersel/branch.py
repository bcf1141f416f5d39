"""Superpositions of product states in branch form.

A state is stored as ``sum_k c_k * (s_k1 x s_k2 x ... x s_kN)``.  Nothing here
ever builds the full tensor-product vector: overlaps, norms and reduced
density matrices are computed from per-site inner products, so the cost is
polynomial in the number of sites and in the number of branches.

Per-site amplitudes of a branch are kept in one flat complex array, with
site boundaries given by the parent state's ``site_dims``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

NORM_TOL = 1e-12
STATE_NORM_TOL = 1e-10
EIG_TOL = 1e-10
DEFAULT_KEPT_DIM_CAP = 4096
_LOG_TINY = float(np.log(np.finfo(float).tiny))


class ShapeError(ValueError):
    """Branches or matrices with incompatible site layouts."""


class DegenerateStateError(ValueError):
    """A state with zero norm (or no branches left after dropping zeros)."""


class CapacityError(RuntimeError):
    """A dense object would exceed the configured size cap."""


@dataclass(frozen=True)
class SiteState:
    """Normalized single-site vector of dimension ``d >= 2``."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size < 2:
            raise ShapeError(f"site dimension must be >= 2, got {amps.size}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"site state not normalized (norm={norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @classmethod
    def normalized(cls, amplitudes) -> "SiteState":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise DegenerateStateError("cannot normalize a zero site vector")
        return cls(amps / norm)

    @classmethod
    def basis(cls, index: int, dim: int) -> "SiteState":
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps)


def _as_vector(site) -> np.ndarray:
    if isinstance(site, SiteState):
        return site.amplitudes
    return SiteState(site).amplitudes


@dataclass(frozen=True)
class Branch:
    """One product term ``amplitude * (s_1 x ... x s_N)``.

    ``data`` is the concatenation of the per-site vectors.  Use
    :meth:`from_sites` unless you already hold a flat array.
    """

    amplitude: complex
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex).reshape(-1)
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "amplitude", complex(self.amplitude))

    @classmethod
    def from_sites(cls, amplitude: complex, sites: Iterable) -> tuple["Branch", tuple[int, ...]]:
        """Build a branch and return it with its per-site dimension table."""
        vectors = [_as_vector(s) for s in sites]
        dims = tuple(v.size for v in vectors)
        data = np.concatenate(vectors) if vectors else np.zeros(0, dtype=complex)
        return cls(amplitude, data), dims

    def with_amplitude(self, amplitude: complex) -> "Branch":
        return Branch(amplitude, self.data)


def _offsets(site_dims: Sequence[int]) -> np.ndarray:
    return np.concatenate(([0], np.cumsum(site_dims, dtype=np.int64)))


@dataclass(frozen=True)
class BranchState:
    """A superposition of product branches over a fixed site layout.

    Zero-amplitude branches are dropped on construction; a state left without
    branches raises :class:`DegenerateStateError`.  The constructor does not
    normalize, use :func:`normalize` for that.
    """

    branches: tuple[Branch, ...]
    site_dims: tuple[int, ...]
    offsets: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.site_dims)
        if any(d < 2 for d in dims):
            raise ShapeError(f"every site dimension must be >= 2, got {dims}")
        total = int(sum(dims))
        kept = []
        for br in self.branches:
            if br.data.size != total:
                raise ShapeError(
                    f"branch has {br.data.size} amplitudes, layout {dims} needs {total}"
                )
            if br.amplitude != 0:
                kept.append(br)
        if not kept:
            raise DegenerateStateError("state has no branch with nonzero amplitude")
        object.__setattr__(self, "branches", tuple(kept))
        object.__setattr__(self, "site_dims", dims)
        offsets = _offsets(dims)
        offsets.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def from_sites(cls, terms: Iterable[tuple[complex, Sequence]]) -> "BranchState":
        """``terms`` is an iterable of ``(amplitude, [site vectors...])``."""
        branches, layout = [], None
        for amp, sites in terms:
            br, dims = Branch.from_sites(amp, sites)
            if layout is None:
                layout = dims
            elif dims != layout:
                raise ShapeError(f"branch layout {dims} differs from {layout}")
            branches.append(br)
        if layout is None:
            raise DegenerateStateError("no branches given")
        return cls(tuple(branches), layout)

    @property
    def site_count(self) -> int:
        return len(self.site_dims)

    @property
    def n_branches(self) -> int:
        return len(self.branches)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([b.amplitude for b in self.branches], dtype=complex)

    def site(self, branch: int, j: int) -> np.ndarray:
        lo, hi = self.offsets[j], self.offsets[j + 1]
        return self.branches[branch].data[lo:hi]

    def site_vectors(self, branch: int) -> list[np.ndarray]:
        data = self.branches[branch].data
        return [data[self.offsets[j]:self.offsets[j + 1]] for j in range(self.site_count)]

    def replace_branches(self, branches: Sequence[Branch]) -> "BranchState":
        return BranchState(tuple(branches), self.site_dims)

    def norm2(self) -> float:
        g = gram_matrix(self)
        c = self.amplitudes
        return float(np.real(np.conj(c) @ g @ c))


def _check_layout(a: Branch, b: Branch):
    if a.data.size != b.data.size:
        raise ShapeError(f"branch sizes differ: {a.data.size} vs {b.data.size}")


def site_overlaps(a: Branch, b: Branch, site_dims: Sequence[int]) -> np.ndarray:
    """Per-site inner products ``<s_b,j | s_a,j>`` (conjugate on ``b``)."""
    _check_layout(a, b)
    offsets = _offsets(site_dims)
    if offsets[-1] != a.data.size:
        raise ShapeError(f"layout {tuple(site_dims)} does not match branch size {a.data.size}")
    if len(site_dims) == 0:
        return np.zeros(0, dtype=complex)
    return np.add.reduceat(np.conj(b.data) * a.data, offsets[:-1])


class Overlap(NamedTuple):
    value: complex
    log_abs: float


def product_overlap(a: Branch, b: Branch, site_dims: Sequence[int]) -> Overlap:
    """``conj(c_b) c_a prod_j <s_b,j|s_a,j>`` with its log-magnitude.

    ``value`` is a running product and may underflow to exactly zero for long
    chains; ``log_abs`` is accumulated as a sum of logs (amplitudes included)
    and is ``-inf`` only when some factor is exactly zero.
    """
    ov = site_overlaps(a, b, site_dims)
    value = np.conj(b.amplitude) * a.amplitude * np.prod(ov)
    mags = np.abs(np.concatenate((ov, [a.amplitude, b.amplitude])))
    if np.any(mags == 0):
        log_abs = -np.inf
    else:
        log_abs = float(np.sum(np.log(mags)))
    # a running product can stall on a subnormal (x * 0.9 rounds back to x)
    if log_abs < _LOG_TINY:
        value = 0j
    return Overlap(complex(value), log_abs)


def pairwise_site_overlaps(state: BranchState) -> np.ndarray:
    """Array ``O[k2, k, j] = <s_k2,j | s_k,j>`` over all branch pairs."""
    n = state.n_branches
    out = np.ones((n, n, state.site_count), dtype=complex)
    if state.site_count == 0:
        return out
    data = np.stack([b.data for b in state.branches])
    for k2 in range(n):
        out[k2] = np.add.reduceat(np.conj(data[k2]) * data, state.offsets[:-1], axis=1)
    return out


def gram_matrix(state: BranchState, sites: Iterable[int] | None = None) -> np.ndarray:
    """``G[k2, k] = prod_{j in sites} <s_k2,j|s_k,j>`` (all sites by default)."""
    ov = pairwise_site_overlaps(state)
    if sites is not None:
        idx = np.fromiter(sites, dtype=np.int64)
        ov = ov[:, :, idx]
    return np.prod(ov, axis=2)


def normalize(state: BranchState) -> BranchState:
    """Rescale amplitudes to unit norm; relative phases are untouched."""
    n2 = state.norm2()
    if not n2 > 0:
        raise DegenerateStateError("state has zero norm")
    scale = 1.0 / np.sqrt(n2)
    return state.replace_branches([b.with_amplitude(b.amplitude * scale) for b in state.branches])


@dataclass(frozen=True)
class ReducedDensityMatrix:
    """Reduced state on ``kept_sites``.

    ``matrix`` lives on the tensor basis of the kept sites.  ``label_matrix``
    is the same operator written on the branch labels,
    ``R[k, k2] = c_k conj(c_k2) prod_{traced} <s_k2|s_k>``, which is the
    density matrix in the basis of kept parts when those are orthonormal;
    ``kept_gram[k2, k]`` holds the kept-part overlaps so callers can check that.
    """

    kept_sites: tuple[int, ...]
    matrix: np.ndarray
    label_matrix: np.ndarray | None = None
    kept_gram: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def kept_overlap(self, k: int, k2: int) -> float:
        if self.kept_gram is None:
            raise ValueError("no branch-label data attached")
        return float(abs(self.kept_gram[k2, k]))


def _check_keep(state: BranchState, keep: Iterable[int]) -> tuple[int, ...]:
    keep = tuple(sorted(set(int(j) for j in keep)))
    for j in keep:
        if not 0 <= j < state.site_count:
            raise IndexError(f"site {j} outside 0..{state.site_count - 1}")
    return keep


def label_matrix(state: BranchState, keep: Iterable[int]) -> tuple[np.ndarray, np.ndarray]:
    """Branch-label reduced matrix and kept-part Gram matrix, no dense tensors.

    The label matrix is divided by the state's norm squared, so it carries
    the same normalization as :func:`reduce`.
    """
    keep = _check_keep(state, keep)
    kept = set(keep)
    traced = [j for j in range(state.site_count) if j not in kept]
    ov = pairwise_site_overlaps(state)
    w = np.prod(ov[:, :, traced], axis=2)          # w[k2, k]
    g_kept = np.prod(ov[:, :, list(keep)], axis=2)  # g_kept[k2, k]
    c = state.amplitudes
    n2 = float(np.real(np.conj(c) @ (w * g_kept) @ c))
    if not n2 > 0:
        raise DegenerateStateError("state has zero norm")
    r = np.outer(c, np.conj(c)) * w.T / n2
    return r, g_kept


def _kept_vector(state: BranchState, k: int, keep: Sequence[int]) -> np.ndarray:
    vec = np.ones(1, dtype=complex)
    for j in keep:
        vec = np.kron(vec, state.site(k, j))
    return vec


def reduce(state: BranchState, keep: Iterable[int], cap: int = DEFAULT_KEPT_DIM_CAP) -> ReducedDensityMatrix:
    """Partial trace onto ``keep``, computed from branch overlaps.

    ``rho = sum_{k,k2} c_k conj(c_k2) (prod_{j not kept} <s_k2,j|s_k,j>)
    |kept_k><kept_k2|``, divided by the norm so the trace is one.
    """
    keep = _check_keep(state, keep)
    dim = 1
    for j in keep:
        dim *= state.site_dims[j]
        if dim > cap:
            raise CapacityError(f"kept dimension exceeds cap {cap}")
    r, g_kept = label_matrix(state, keep)
    vecs = np.stack([_kept_vector(state, k, keep) for k in range(state.n_branches)])
    rho = vecs.T @ r @ np.conj(vecs)
    rho = 0.5 * (rho + rho.conj().T)
    return ReducedDensityMatrix(keep, rho, r, g_kept)


def coherence(rho: ReducedDensityMatrix, k: int, k2: int) -> float:
    """Magnitude of the ``(k, k2)`` entry in the branch-label basis."""
    if rho.label_matrix is None:
        raise ValueError("reduced matrix carries no branch labels")
    n = rho.label_matrix.shape[0]
    if n == 1 and k != k2:
        return 0.0
    if not (0 <= k < n and 0 <= k2 < n):
        raise IndexError(f"branch labels ({k}, {k2}) outside 0..{n - 1}")
    return float(abs(rho.label_matrix[k, k2]))


def branch_coherence(state: BranchState, keep: Iterable[int], k: int = 0, k2: int = 1) -> float:
    """Label-basis coherence without building the kept tensor space."""
    r, _ = label_matrix(state, keep)
    return coherence(ReducedDensityMatrix(tuple(keep), np.zeros((0, 0)), r), k, k2)


def _matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, ReducedDensityMatrix) else np.asarray(rho)


def purity(rho) -> float:
    m = _matrix(rho)
    return float(np.real(np.vdot(m.conj().T, m)))


def trace_distance(rho, sigma) -> float:
    a, b = _matrix(rho), _matrix(sigma)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    ev = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.sum(np.abs(ev)))


def mixture(state: BranchState, keep: Iterable[int], weights: Sequence[float] | None = None) -> ReducedDensityMatrix:
    """``sum_k w_k |kept_k><kept_k|``: the fully decohered branch mixture.

    Weights default to ``|c_k|^2`` of the normalized state.
    """
    keep = _check_keep(state, keep)
    if weights is None:
        c = normalize(state).amplitudes
        weights = np.abs(c) ** 2
    weights = np.asarray(weights, dtype=float)
    if weights.size != state.n_branches:
        raise ShapeError(f"{weights.size} weights for {state.n_branches} branches")
    vecs = np.stack([_kept_vector(state, k, keep) for k in range(state.n_branches)])
    rho = (vecs.T * weights) @ np.conj(vecs)
    return ReducedDensityMatrix(keep, rho, np.diag(weights).astype(complex),
                                gram_matrix(state, keep))
