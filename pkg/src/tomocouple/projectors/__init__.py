"""Six discretisations of the parallel-beam Radon transform and their adjoints.

==== =========================================================
pd   pixel-driven: linear splat of each pixel onto the detector
rd   ray-driven: Siddon intersection lengths per detector ray
dd   distance-driven: overlap of pixel and cell boundaries
ss   slant stacking: linear interpolation along image lines
wf   gridding, prolate spheroidal kernel, alpha = 2
kb   gridding, Kaiser-Bessel kernel, alpha = 1.5
==== =========================================================

Each :class:`ProjectorPair` maps ``(P, P)`` images to ``(M, N)`` sinograms
with ``P = N``; ``adjoint`` is the exact transpose of ``forward``.
"""

from __future__ import annotations

import enum
import math
from functools import lru_cache

import numpy as np

from tomocouple import _accel
from tomocouple.core import Geometry, check_image, check_sinogram
from tomocouple.projectors import gridding

if _accel.USE_NUMBA:
    from tomocouple.projectors import _kernels_numba as _kernels
else:
    from tomocouple.projectors import _kernels_numpy as _kernels

DENSE_LIMIT = 2**26


class ProjectorKind(str, enum.Enum):
    PD = "pd"
    RD = "rd"
    DD = "dd"
    SS = "ss"
    WF = "wf"
    KB = "kb"

    @classmethod
    def parse(cls, token) -> "ProjectorKind":
        if isinstance(token, cls):
            return token
        try:
            return cls(str(token).strip().lower())
        except ValueError:
            valid = "|".join(k.value for k in cls)
            raise ValueError(f"unknown projector kind {token!r}; expected one of {valid}") from None

    def __str__(self):
        return self.value


ALL_KINDS = tuple(ProjectorKind)


def _slant_vertical(angles):
    # nearly-vertical rays for theta in [0, pi/4] and [3pi/4, pi)
    return (angles <= math.pi / 4) | (angles >= 3 * math.pi / 4)


def _dd_columns(angles):
    return (angles >= math.pi / 4) & (angles < 3 * math.pi / 4)


class ProjectorPair:
    """Forward projector and matched backprojector sharing one geometry.

    Parameters
    ----------
    kind : ProjectorKind or str
        Discretisation, one of ``pd|rd|dd|ss|wf|kb``.
    geometry : Geometry
        Acquisition geometry; the image side equals ``geometry.num_cells``.
    kernels : module, optional
        Kernel backend. Defaults to the one selected by ``TOMOCOUPLE_BACKEND``.
    """

    def __init__(self, kind, geometry: Geometry, kernels=None):
        self.kind = ProjectorKind.parse(kind)
        self.geometry = geometry
        self.size = geometry.num_cells
        self._k = kernels if kernels is not None else _kernels
        angles = geometry.angles
        self._cos = np.cos(angles)
        self._sin = np.sin(angles)
        self._det = np.ascontiguousarray(geometry.detector_positions, dtype=np.float64)
        self._vertical = _slant_vertical(angles)
        self._columns = _dd_columns(angles)
        self._plan = None
        if self.kind is ProjectorKind.WF:
            self._plan = gridding.make_plan(gridding.WF_PARAMS, geometry)
        elif self.kind is ProjectorKind.KB:
            self._plan = gridding.make_plan(gridding.KB_PARAMS, geometry)

    def __repr__(self):
        g = self.geometry
        return f"ProjectorPair({self.kind.value!r}, {g.num_angles}x{g.num_cells})"

    def forward(self, img) -> np.ndarray:
        img = _kernel_input(check_image(img, self.size))
        M, N = self.geometry.shape
        kind = self.kind
        if self._plan is not None:
            return gridding.forward(img, self._plan, N, self._k)
        out = np.zeros((M, N))
        if kind is ProjectorKind.PD:
            self._k.pd_forward(img, self._cos, self._sin, N, out)
        elif kind is ProjectorKind.RD:
            self._k.rd_forward(img, self._cos, self._sin, self._det, out)
        elif kind is ProjectorKind.DD:
            self._k.dd_forward(img, self._cos, self._sin, self._columns, self._det, out)
        else:
            self._k.ss_forward(img, self._cos, self._sin, self._vertical, self._det, out)
        return out

    def adjoint(self, sino) -> np.ndarray:
        sino = _kernel_input(check_sinogram(sino, self.geometry))
        P = self.size
        kind = self.kind
        if self._plan is not None:
            return gridding.adjoint(sino, self._plan, P, self._k)
        out = np.zeros((P, P))
        if kind is ProjectorKind.PD:
            self._k.pd_adjoint(sino, self._cos, self._sin, P, out)
        elif kind is ProjectorKind.RD:
            self._k.rd_adjoint(sino, self._cos, self._sin, self._det, out)
        elif kind is ProjectorKind.DD:
            self._k.dd_adjoint(sino, self._cos, self._sin, self._columns, self._det, out)
        else:
            self._k.ss_adjoint(sino, self._cos, self._sin, self._vertical, self._det, out)
        return out


@lru_cache(maxsize=64)
def get_projector(kind, geometry: Geometry) -> ProjectorPair:
    """Cached :class:`ProjectorPair` for ``(kind, geometry)``."""
    return ProjectorPair(ProjectorKind.parse(kind), geometry)


def _kernel_input(a) -> np.ndarray:
    # compiled kernels share gather/scatter helpers and need writable buffers
    return np.require(a, dtype=np.float64, requirements=["C", "W"])


def _check_dense_size(pair):
    M, N = pair.geometry.shape
    entries = pair.size * pair.size * M * N
    if entries > DENSE_LIMIT:
        raise ValueError(f"dense matrix would have {entries} entries (limit {DENSE_LIMIT})")


def assemble_dense(pair: ProjectorPair) -> np.ndarray:
    """Matrix of ``pair.forward``: column ``j`` is the projection of unit pixel ``j``."""
    _check_dense_size(pair)
    P = pair.size
    cols = []
    e = np.zeros(P * P)
    for j in range(P * P):
        e[j] = 1.0
        cols.append(pair.forward(e.reshape(P, P)).ravel())
        e[j] = 0.0
    return np.stack(cols, axis=1)


def assemble_dense_adjoint(pair: ProjectorPair) -> np.ndarray:
    """Matrix of ``pair.adjoint`` by unit-basis probing (shape ``P*P x M*N``)."""
    _check_dense_size(pair)
    M, N = pair.geometry.shape
    cols = []
    e = np.zeros(M * N)
    for i in range(M * N):
        e[i] = 1.0
        cols.append(pair.adjoint(e.reshape(M, N)).ravel())
        e[i] = 0.0
    return np.stack(cols, axis=1)
