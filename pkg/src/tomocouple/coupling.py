"""Randomised inner-product test of forward/backprojector coupling.

For a forward operator ``A`` and a candidate adjoint ``B`` the ratio
``r = <B y, x> / <y, A x>`` equals 1 for every ``x, y`` exactly when
``B = A^T``. Drawing ``x`` and ``y`` uniformly on [-1, 1] turns that into a
cheap numerical audit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from tomocouple.core import Geometry, make_rng
from tomocouple.projectors import ALL_KINDS, ProjectorKind, get_projector


@dataclass
class CouplingReport:
    forward_kind: ProjectorKind
    adjoint_kind: ProjectorKind
    ratios: list = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max(abs(r - 1.0) for r in self.ratios)

    @property
    def digits_of_agreement(self) -> float:
        dev = self.max_deviation
        return math.inf if dev == 0.0 else -math.log10(dev)


def _stream_ids(fwd, adj):
    return ALL_KINDS.index(fwd), ALL_KINDS.index(adj)


def ratio_from_operators(forward, adjoint, x, y) -> float:
    """``<adjoint(y), x> / <y, forward(x)>`` with float64 inner products."""
    den = float(np.vdot(y, forward(x)))
    if den == 0.0:
        raise ZeroDivisionError("vanishing denominator in adjoint ratio")
    return float(np.vdot(adjoint(y), x)) / den


def adjoint_ratio(fwd_kind, adj_kind, geometry: Geometry, seed: int) -> float:
    """Adjoint ratio of ``(fwd_kind, adj_kind)`` for uniform random inputs.

    The random stream is derived from ``(seed, fwd, adj)`` so that results do
    not depend on evaluation order. A zero denominator triggers one redraw.
    """
    fwd_kind = ProjectorKind.parse(fwd_kind)
    adj_kind = ProjectorKind.parse(adj_kind)
    A = get_projector(fwd_kind, geometry)
    B = get_projector(adj_kind, geometry)
    rng = make_rng(seed, *_stream_ids(fwd_kind, adj_kind))
    P = geometry.num_cells
    for attempt in range(2):
        x = rng.uniform(-1.0, 1.0, size=(P, P))
        y = rng.uniform(-1.0, 1.0, size=geometry.shape)
        try:
            return ratio_from_operators(A.forward, B.adjoint, x, y)
        except ZeroDivisionError:
            if attempt:
                raise
    raise AssertionError("unreachable")


def coupling_report(fwd_kind, adj_kind, geometry: Geometry, seeds) -> CouplingReport:
    rep = CouplingReport(ProjectorKind.parse(fwd_kind), ProjectorKind.parse(adj_kind))
    for s in seeds:
        rep.ratios.append(adjoint_ratio(rep.forward_kind, rep.adjoint_kind, geometry, s))
    return rep


def coupling_matrix(geometry: Geometry, seeds, kinds=ALL_KINDS) -> dict:
    """All ``(fwd, adj)`` reports over ``kinds``, keyed by kind pair."""
    seeds = list(seeds)
    if len(seeds) < 3:
        raise ValueError("coupling matrix needs at least 3 seeds")
    return {(f, a): coupling_report(f, a, geometry, seeds) for f in kinds for a in kinds}


def diagonal_dominates(matrix: dict) -> bool:
    """True if every matched pair has the most digits in its row and column."""
    kinds = sorted({f for f, _ in matrix}, key=ALL_KINDS.index)
    for k in kinds:
        d = matrix[(k, k)].digits_of_agreement
        for other in kinds:
            if other == k:
                continue
            if matrix[(k, other)].digits_of_agreement >= d:
                return False
            if matrix[(other, k)].digits_of_agreement >= d:
                return False
    return True


def write_csv(matrix: dict, fh) -> None:
    fh.write("fwd,adj,max_abs_r_minus_1,digits\n")
    for (f, a), rep in matrix.items():
        fh.write(f"{f.value},{a.value},{rep.max_deviation:.6e},{rep.digits_of_agreement:.3f}\n")
