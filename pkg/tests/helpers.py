"""Dense reference implementations and random generators for the tests.

Everything here builds full tensor-product objects, which is exactly what the
library avoids; keep N and d small.
"""

from __future__ import annotations

from functools import reduce as _fold

import numpy as np

from supersel.branch import BranchState
from supersel.operators import OperatorPolynomial


def dense_vector(state: BranchState) -> np.ndarray:
    out = 0
    for k, br in enumerate(state.branches):
        vec = _fold(np.kron, state.site_vectors(k), np.ones(1, dtype=complex))
        out = out + br.amplitude * vec
    return out


def dense_partial_trace(psi: np.ndarray, dims, keep) -> np.ndarray:
    """Reduced density matrix of the pure state ``psi`` on the ``keep`` sites."""
    n = len(dims)
    keep = sorted(keep)
    traced = [j for j in range(n) if j not in keep]
    t = psi.reshape(dims).transpose(keep + traced)
    dk = int(np.prod([dims[j] for j in keep])) if keep else 1
    m = t.reshape(dk, -1)
    rho = m @ m.conj().T
    return rho / np.trace(rho).real


def random_state(rng, n_sites, n_branches, dims=None, max_dim=3) -> BranchState:
    dims = dims or tuple(int(rng.integers(2, max_dim + 1)) for _ in range(n_sites))
    terms = []
    for _ in range(n_branches):
        sites = []
        for d in dims:
            v = rng.normal(size=d) + 1j * rng.normal(size=d)
            sites.append(v / np.linalg.norm(v))
        amp = complex(rng.normal(), rng.normal())
        terms.append((amp, sites))
    return BranchState.from_sites(terms)


def naive_term_matrix(factors, sites, mats) -> np.ndarray:
    """Left-to-right product of embedded single-site factors ``[(kind, site, power)]``."""
    d = mats.d
    index = {s: n for n, s in enumerate(sorted(sites))}
    dim = d ** len(index)
    out = np.eye(dim, dtype=complex)
    for kind, site, power in factors:
        op = mats.x_matrix if kind == "x" else mats.p_matrix
        ops = [np.eye(d)] * len(index)
        ops[index[site]] = np.linalg.matrix_power(op, power)
        out = out @ _fold(np.kron, ops, np.ones((1, 1)))
    return out


def random_raw_term(rng, sites, max_factors=4):
    """Unordered factor list, e.g. ``[('p', 1, 1), ('x', 1, 2)]``, with total degree bound."""
    factors, degree = [], 0
    for _ in range(int(rng.integers(0, max_factors + 1))):
        power = int(rng.integers(1, 3))
        if degree + power > max_factors:
            break
        degree += power
        factors.append((str(rng.choice(["x", "p"])), int(rng.choice(sites)), power))
    return factors


def raw_term_text(coef: float, factors) -> str:
    parts = [repr(coef)] + [f"{k}{s}" + (f"^{p}" if p > 1 else "") for k, s, p in factors]
    return "*".join(parts)


def raw_sum_text(raw) -> str:
    """``[(coef, factors), ...]`` as grammar text, signs folded into the operators."""
    text = ""
    for n, (c, f) in enumerate(raw):
        body = raw_term_text(abs(c), f)
        if n == 0:
            text = ("-" if c < 0 else "") + body
        else:
            text += (" - " if c < 0 else " + ") + body
    return text


def random_physical_operator(rng, max_sites=3, max_momentum=4, max_site_label=6,
                             x_degree=2) -> OperatorPolynomial:
    """Random ``sum_r sum_k C_rk(x) p_r^k`` with a shared zeroth coefficient.

    Each term carries momentum on at most one site; the coordinate
    coefficients are random polynomials in the x's of the support.
    """
    m = int(rng.integers(1, max_sites + 1))
    n = int(rng.integers(1, max_momentum + 1))
    sites = sorted(int(s) for s in rng.choice(np.arange(1, max_site_label + 1), size=m, replace=False))

    def coordinate_poly():
        terms = {}
        for _ in range(int(rng.integers(1, 3))):
            powers = {}
            for _ in range(int(rng.integers(0, x_degree + 1))):
                s = int(rng.choice(sites))
                powers[s] = powers.get(s, 0) + 1
            sig = tuple((s, a, 0) for s, a in sorted(powers.items()))
            terms[sig] = complex(rng.normal(), rng.normal())
        return terms

    P = OperatorPolynomial(coordinate_poly())
    for r, s in enumerate(sites):
        top = n if r == 0 else int(rng.integers(1, n + 1))
        for k in range(1, top + 1):
            for sig, c in coordinate_poly().items():
                xs = dict((site, a) for site, a, _ in sig)
                new = tuple(sorted((site, xs.get(site, 0), k if site == s else 0)
                                   for site in set(xs) | {s}))
                P = P + OperatorPolynomial({new: c})
    return P


def _random_decimal(rng) -> str:
    form = int(rng.integers(0, 4))
    if form == 0:
        return str(int(rng.integers(0, 100)))
    if form == 1:
        return f"{rng.integers(0, 100)}.{rng.integers(0, 1000)}"
    if form == 2:
        return repr(float(abs(rng.normal()) * 10 ** int(rng.integers(-6, 6))))
    return f"{rng.integers(1, 10)}e{'-+'[int(rng.integers(0, 2))]}{rng.integers(0, 4)}"


def random_expression_text(rng, max_terms=4, max_site=4) -> str:
    """Random text drawn from the operator grammar, with random spacing and '*' usage."""
    def ws():
        return " " * int(rng.integers(0, 2))

    terms = []
    for _ in range(int(rng.integers(1, max_terms + 1))):
        form = int(rng.integers(0, 5))
        coef = ""
        if form == 1:
            coef = _random_decimal(rng)
        elif form == 2:
            coef = _random_decimal(rng) + ws() + "i"
        elif form == 3:
            sign = "-" if rng.random() < 0.5 else ""
            op = "-" if rng.random() < 0.5 else "+"
            coef = f"({sign}{_random_decimal(rng)}{ws()}{op}{ws()}{_random_decimal(rng)}i)"
        elif form == 4:
            coef = "i"
        factors = []
        for _ in range(int(rng.integers(0 if coef else 1, 4))):
            f = f"{'xp'[int(rng.integers(0, 2))]}{rng.integers(1, max_site + 1)}"
            if rng.random() < 0.4:
                f += f"{ws()}^{ws()}{rng.integers(0, 4)}"
            factors.append(f)
        body = coef
        for n, f in enumerate(factors):
            star = (n > 0 or coef) and rng.random() < 0.7
            body += (ws() + "*" + ws() if star else ws()) + f
        terms.append(body)
    text = ("-" + ws() if rng.random() < 0.3 else "") + terms[0]
    for t in terms[1:]:
        text += ws() + "+-"[int(rng.integers(0, 2))] + ws() + t
    return text
