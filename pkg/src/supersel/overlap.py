"""Orthogonalization of two macroscopically distinct spin configurations.

Two product states of N spin-1/2 sites share the ground-site overlap ``eta``
on N - m sites and carry arbitrary overlaps on m excited sites, so their
inner product is ``c_m * eta^(N - m)`` with ``c_m`` the product of the
excited-site overlaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .branch import Branch, BranchState, product_overlap
from .series import SEMILOG, ScalingSeries


@dataclass(frozen=True)
class FerromagnetSpec:
    N: int
    m: int = 0
    eta: float = 0.5
    excited_overlaps: tuple[complex, ...] | None = None
    seed: int = 42

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.m < 0 or self.m >= self.N:
            raise ValueError(f"need 0 <= m < N, got m={self.m}, N={self.N}")
        if self.excited_overlaps is None:
            object.__setattr__(self, "excited_overlaps", (complex(self.eta),) * self.m)
        ov = tuple(complex(v) for v in self.excited_overlaps)
        if len(ov) != self.m:
            raise ValueError(f"{len(ov)} excited overlaps given for m={self.m}")
        for v in ov:
            if abs(v) > 1.0:
                raise ValueError(f"overlap {v} cannot be realized by unit vectors")
        object.__setattr__(self, "excited_overlaps", ov)

    def with_N(self, N: int) -> "FerromagnetSpec":
        return FerromagnetSpec(N, self.m, self.eta, self.excited_overlaps, self.seed)

    @property
    def c_m(self) -> complex:
        return complex(np.prod(self.excited_overlaps)) if self.m else 1.0 + 0j


def _pair_with_overlap(u: np.ndarray, w: complex) -> np.ndarray:
    """Unit vector ``v`` in C^2 with ``<u|v> = w``."""
    u_perp = np.array([-np.conj(u[1]), np.conj(u[0])])
    return w * u + math.sqrt(max(0.0, 1.0 - abs(w) ** 2)) * u_perp


def build_ferromagnet_pair(spec: FerromagnetSpec) -> tuple[BranchState, BranchState]:
    """Single-branch states whose site-wise overlaps are ``excited_overlaps`` then ``eta``.

    Overlaps are ``<first_j | second_j>``.  Excited sites use seeded random unit
    vectors; ground sites use (1, 0) against (eta, sqrt(1 - eta^2)).
    """
    rng = np.random.default_rng(spec.seed)
    first = np.empty((spec.N, 2), dtype=complex)
    second = np.empty((spec.N, 2), dtype=complex)
    for j, w in enumerate(spec.excited_overlaps):
        u = rng.normal(size=2) + 1j * rng.normal(size=2)
        u /= np.linalg.norm(u)
        first[j] = u
        second[j] = _pair_with_overlap(u, w)
    first[spec.m:] = (1.0, 0.0)
    second[spec.m:] = (spec.eta, math.sqrt(1.0 - spec.eta ** 2))
    dims = (2,) * spec.N
    return (BranchState((Branch(1.0, first.ravel()),), dims),
            BranchState((Branch(1.0, second.ravel()),), dims))


def pair_overlap(spec: FerromagnetSpec):
    """``<first|second>`` as an :class:`~supersel.branch.Overlap`."""
    a, b = build_ferromagnet_pair(spec)
    return product_overlap(b.branches[0], a.branches[0], a.site_dims)


def overlap_curve(template: FerromagnetSpec, N_list: Sequence[int], threads: int = 1) -> ScalingSeries:
    """``(N, |overlap|, log|overlap|)`` rows; the semi-log slope estimates ``log eta``.

    Logs are accumulated site by site, so large N does not underflow.  With
    ``eta == 0`` the series is flagged ``exact_zero`` instead of being fitted.
    """
    if not N_list:
        raise ValueError("N_list is empty")
    from .parallel import ordered_map

    def point(N):
        ov = pair_overlap(template.with_N(int(N)))
        return (int(N), abs(ov.value), ov.log_abs)

    rows = ordered_map(point, list(N_list), threads)
    expected = math.log(template.eta) if template.eta > 0 else None
    return ScalingSeries.build(rows, SEMILOG, expected_slope=expected)
