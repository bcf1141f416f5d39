"""Polynomials in canonical pairs (x_i, p_i) and their commutators with x.

Terms are normal-ordered per site (all x to the left of all p), so a term is a
coefficient times ``prod_i x_i^a_i p_i^b_i``.  Operators on different sites
commute; within a site, reordering uses ``[x, p] = i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from .branch import CapacityError

MAX_EXPONENT = 16
MAX_REALIZED_DIM = 4096

# ((site, x_exp, p_exp), ...) sorted by site; (0, 0) factors are never stored.
Signature = tuple[tuple[int, int, int], ...]


@dataclass(frozen=True)
class OperatorTerm:
    coefficient: complex
    factors: Signature

    @property
    def degree(self) -> int:
        return sum(a + b for _, a, b in self.factors)

    @property
    def momentum_degree(self) -> int:
        return sum(b for _, _, b in self.factors)

    def momentum_signature(self) -> tuple[tuple[int, int], ...]:
        return tuple((s, b) for s, _, b in self.factors if b)


def _clean(factors: Iterable[tuple[int, int, int]]) -> Signature:
    return tuple(sorted((s, a, b) for s, a, b in factors if a or b))


class OperatorPolynomial:
    """Sum of normal-ordered terms with like terms merged.

    Terms are kept in lexicographic order of their factor signature, with
    the identity term (empty signature) first.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[Signature, complex] | Iterable[OperatorTerm] = ()):
        merged: dict[Signature, complex] = {}
        items = terms.items() if isinstance(terms, Mapping) else ((t.factors, t.coefficient) for t in terms)
        for sig, coef in items:
            sig = _clean(sig)
            for s, a, b in sig:
                if s < 1:
                    raise ValueError(f"site labels are 1-based, got {s}")
                if a < 0 or b < 0:
                    raise ValueError("exponents must be non-negative")
            merged[sig] = merged.get(sig, 0j) + complex(coef)
        self._terms = {s: c for s, c in sorted(merged.items()) if c != 0}

    # construction helpers
    @classmethod
    def identity(cls, coefficient: complex = 1.0) -> "OperatorPolynomial":
        return cls({(): coefficient})

    @classmethod
    def x(cls, site: int, power: int = 1) -> "OperatorPolynomial":
        return cls({((site, power, 0),): 1.0})

    @classmethod
    def p(cls, site: int, power: int = 1) -> "OperatorPolynomial":
        return cls({((site, 0, power),): 1.0})

    @property
    def terms(self) -> tuple[OperatorTerm, ...]:
        return tuple(OperatorTerm(c, s) for s, c in self._terms.items())

    def as_dict(self) -> dict[Signature, complex]:
        return dict(self._terms)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted({s for sig in self._terms for s, _, _ in sig}))

    @property
    def degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    @property
    def momentum_degree(self) -> int:
        return max((t.momentum_degree for t in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        if not isinstance(other, OperatorPolynomial):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):
        return hash(tuple(self._terms.items()))

    def allclose(self, other: "OperatorPolynomial", atol: float = 1e-12) -> bool:
        keys = set(self._terms) | set(other._terms)
        return all(abs(self._terms.get(k, 0) - other._terms.get(k, 0)) <= atol for k in keys)

    def __add__(self, other):
        other = _coerce(other)
        merged = dict(self._terms)
        for s, c in other._terms.items():
            merged[s] = merged.get(s, 0j) + c
        return OperatorPolynomial(merged)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        return self + (-_coerce(other))

    def __rsub__(self, other):
        return _coerce(other) - self

    def scale(self, alpha: complex) -> "OperatorPolynomial":
        return OperatorPolynomial({s: alpha * c for s, c in self._terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex)):
            return self.scale(other)
        return multiply(_coerce(other), self)

    def __repr__(self):
        from .grammar import format_operator

        return f"OperatorPolynomial({format_operator(self)!r})"


def _coerce(value) -> OperatorPolynomial:
    if isinstance(value, OperatorPolynomial):
        return value
    if isinstance(value, (int, float, complex)):
        return OperatorPolynomial.identity(value)
    raise TypeError(f"cannot use {type(value).__name__} as an operator")


def reorder_site(a1: int, b1: int, a2: int, b2: int) -> dict[tuple[int, int], complex]:
    """Normal-order ``x^a1 p^b1 x^a2 p^b2`` on one site.

    Uses ``p^b x^c = sum_k k! C(b,k) C(c,k) (-i)^k x^(c-k) p^(b-k)``.
    """
    out: dict[tuple[int, int], complex] = {}
    for k in range(min(b1, a2) + 1):
        coef = factorial(k) * comb(b1, k) * comb(a2, k) * (-1j) ** k
        key = (a1 + a2 - k, b1 + b2 - k)
        out[key] = out.get(key, 0j) + coef
    return out


def _multiply_signatures(s1: Signature, s2: Signature) -> dict[Signature, complex]:
    left = {s: (a, b) for s, a, b in s1}
    right = {s: (a, b) for s, a, b in s2}
    partial: dict[Signature, complex] = {(): 1.0 + 0j}
    for site in sorted(set(left) | set(right)):
        a1, b1 = left.get(site, (0, 0))
        a2, b2 = right.get(site, (0, 0))
        expansion = reorder_site(a1, b1, a2, b2)
        nxt: dict[Signature, complex] = {}
        for sig, c in partial.items():
            for (a, b), c2 in expansion.items():
                key = sig + (((site, a, b),) if a or b else ())
                nxt[key] = nxt.get(key, 0j) + c * c2
        partial = nxt
    return partial


def multiply(left: OperatorPolynomial, right: OperatorPolynomial) -> OperatorPolynomial:
    """Operator product ``left * right``, normal-ordered."""
    merged: dict[Signature, complex] = {}
    for s1, c1 in left.as_dict().items():
        for s2, c2 in right.as_dict().items():
            for sig, c in _multiply_signatures(s1, s2).items():
                merged[sig] = merged.get(sig, 0j) + c1 * c2 * c
    return OperatorPolynomial(merged)


@dataclass(frozen=True)
class ComOperator:
    """Center-of-mass coordinate ``(1/N) sum_i x_i`` of ``N`` particles."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"particle count must be a positive integer, got {self.N}")


def commutator_x(i: int, P: OperatorPolynomial) -> OperatorPolynomial:
    """``[x_i, P]`` term by term: ``[x_i, x_i^a p_i^b] = i b x_i^a p_i^(b-1)``."""
    out: dict[Signature, complex] = {}
    for sig, c in P.as_dict().items():
        new = []
        hit = False
        for s, a, b in sig:
            if s == i and b > 0:
                hit = True
                c = c * 1j * b
                b -= 1
            new.append((s, a, b))
        if hit:
            key = _clean(new)
            out[key] = out.get(key, 0j) + c
    return OperatorPolynomial(out)


def commutator_com(X: ComOperator, P: OperatorPolynomial) -> OperatorPolynomial:
    """``[X, P] = (1/N) sum_{i in support(P)} [x_i, P]``.

    Sites outside the support contribute nothing, so only ``|support|``
    commutators are ever expanded and ``N`` enters as a scalar.
    """
    support = P.support
    if support and support[-1] > X.N:
        raise ValueError(f"operator acts on site {support[-1]} but N = {X.N}")
    total = OperatorPolynomial()
    for i in support:
        total = total + commutator_x(i, P)
    return total.scale(1.0 / X.N)


def term_count_bound(P: OperatorPolynomial) -> tuple[int, int]:
    """Count the additives of ``sum_i [x_i, P]`` against ``m * n``.

    An additive is one coordinate-polynomial coefficient times a momentum
    monomial, so terms that differ only in their x-factors are counted once.
    ``m`` is the support size and ``n`` the momentum degree of ``P``.
    """
    total = OperatorPolynomial()
    for i in P.support:
        total = total + commutator_x(i, P)
    groups = {t.momentum_signature() for t in total.terms}
    return len(groups), len(P.support) * P.momentum_degree


# ---------------------------------------------------------------------------
# truncated matrix realization


@dataclass(frozen=True)
class SiteMatrices:
    d: int
    x_matrix: np.ndarray
    p_matrix: np.ndarray

    def safe_levels(self, degree: int) -> int:
        """Number of low levels on which a product of ``degree`` factors is exact."""
        return max(self.d - degree, 0)


def build_site_matrices(d: int) -> SiteMatrices:
    """Position and momentum in the number basis truncated to ``d`` levels."""
    if not (isinstance(d, (int, np.integer)) and 2 <= d <= 64):
        raise ValueError(f"truncation dimension must be in 2..64, got {d!r}")
    a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), k=1).astype(complex)
    ad = a.conj().T
    x = (a + ad) / np.sqrt(2)
    p = (a - ad) / (1j * np.sqrt(2))
    x.setflags(write=False)
    p.setflags(write=False)
    return SiteMatrices(int(d), x, p)


def _site_power(mats: SiteMatrices, a: int, b: int, cache: dict) -> sp.csr_matrix:
    key = (a, b)
    if key not in cache:
        m = np.linalg.matrix_power(mats.x_matrix, a) @ np.linalg.matrix_power(mats.p_matrix, b)
        cache[key] = sp.csr_matrix(m)
    return cache[key]


def realize(P: OperatorPolynomial, mats: SiteMatrices, sites: Iterable[int] | None = None,
            sparse: bool = False):
    """Matrix of ``P`` on the tensor space of ``sites`` (default: its support).

    Each term becomes a Kronecker product of per-site matrix powers in site
    order; sites a term does not touch get the identity.
    """
    sites = tuple(sorted(set(P.support if sites is None else sites)))
    missing = set(P.support) - set(sites)
    if missing:
        raise ValueError(f"operator acts on sites {sorted(missing)} outside {sites}")
    dim = mats.d ** len(sites)
    if dim > MAX_REALIZED_DIM:
        raise CapacityError(f"realized dimension {dim} exceeds {MAX_REALIZED_DIM}")
    eye = sp.identity(mats.d, dtype=complex, format="csr")
    cache: dict = {}
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for term in P.terms:
        powers = {s: (a, b) for s, a, b in term.factors}
        m = sp.identity(1, dtype=complex, format="csr")
        for s in sites:
            f = _site_power(mats, *powers[s], cache) if s in powers else eye
            m = sp.kron(m, f, format="csr")
        total = total + term.coefficient * m
    return total if sparse else total.toarray()


def embed(op: np.ndarray, site: int, sites: Iterable[int], d: int):
    """Single-site matrix ``op`` placed at ``site`` within ``sites`` (sparse)."""
    m = sp.identity(1, dtype=complex, format="csr")
    for s in sorted(set(sites)):
        m = sp.kron(m, sp.csr_matrix(op) if s == site else sp.identity(d, dtype=complex), format="csr")
    return m


def safe_indices(d: int, n_sites: int, levels: int) -> np.ndarray:
    """Flat tensor indices whose every site sits below ``levels``."""
    if n_sites == 0:
        return np.zeros(1, dtype=np.int64)
    grids = np.meshgrid(*[np.arange(levels)] * n_sites, indexing="ij")
    idx = np.zeros(grids[0].shape, dtype=np.int64)
    for g in grids:
        idx = idx * d + g
    return np.sort(np.ravel(idx))


# ---------------------------------------------------------------------------
# 1/N suppression of [X, P]


@dataclass(frozen=True)
class ProbeSpec:
    """Probe vectors for matrix elements of ``[X, P]``.

    ``kind="random"`` draws ``count`` seeded complex Gaussian vectors on the
    safe subspace; ``kind="basis"`` uses every safe basis state (the value is
    then the largest safe matrix element).  ``vectors`` overrides both.
    """

    kind: str = "random"
    count: int = 4
    seed: int = 42
    vectors: np.ndarray | None = None


def _probe_vectors(probe: ProbeSpec, dim: int, safe: np.ndarray) -> np.ndarray:
    if probe.vectors is not None:
        vecs = np.atleast_2d(np.asarray(probe.vectors, dtype=complex))
        if vecs.shape[1] != dim:
            raise ValueError(f"probe vectors have length {vecs.shape[1]}, expected {dim}")
        outside = np.ones(dim, dtype=bool)
        outside[safe] = False
        if np.any(np.abs(vecs[:, outside]) > 0):
            raise ValueError("probe vector has weight outside the safe subspace")
        return vecs
    if probe.kind == "basis":
        vecs = np.zeros((safe.size, dim), dtype=complex)
        vecs[np.arange(safe.size), safe] = 1.0
        return vecs
    if probe.kind != "random":
        raise ValueError(f"unknown probe kind {probe.kind!r}")
    rng = np.random.default_rng(probe.seed)
    vecs = np.zeros((probe.count, dim), dtype=complex)
    vecs[:, safe] = rng.normal(size=(probe.count, safe.size)) + 1j * rng.normal(size=(probe.count, safe.size))
    return vecs / np.linalg.norm(vecs, axis=1, keepdims=True)


def commutator_scaling(P: OperatorPolynomial, d: int, N_list, probe: ProbeSpec | None = None,
                       threads: int = 1):
    """Largest probe matrix element of ``[X, P]`` for each ``N`` (log-log series).

    Probes live on the levels ``0 .. d-1-degree(P)`` of every support site,
    where the truncated matrices obey the canonical relations exactly.
    """
    from .parallel import ordered_map
    from .series import LOGLOG, ScalingSeries, safe_log

    N_list = [int(n) for n in N_list]
    if not N_list:
        raise ValueError("N_list is empty")
    support = P.support
    if support and min(N_list) < support[-1]:
        raise ValueError(f"every N must be >= {support[-1]} (largest site of the operator)")
    probe = probe or ProbeSpec()
    mats = build_site_matrices(d)
    levels = mats.safe_levels(P.degree)
    if levels < 1:
        raise ValueError(f"d={d} leaves no safe levels for degree {P.degree}")
    dim = d ** len(support)
    safe = safe_indices(d, len(support), levels)
    vecs = _probe_vectors(probe, dim, safe)

    def point(N):
        C = commutator_com(ComOperator(N), P)
        if C.is_zero():
            return (N, 0.0, -np.inf)
        M = realize(C, mats, sites=support, sparse=True)
        elements = np.conj(vecs) @ (M @ vecs.T)
        value = float(np.max(np.abs(elements)))
        return (N, value, safe_log(value))

    rows = ordered_map(point, N_list, threads)
    return ScalingSeries.build(rows, LOGLOG, expected_slope=-1.0)
