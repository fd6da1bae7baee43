"""Dataset presets, experiment matrices and report generation."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from tomocouple.core import Geometry, make_rng, reconstruction_circle_mask
from tomocouple.fbp import ALL_FILTERS, FilterKind, fbp_reconstruct
from tomocouple.io import read_config, write_pgm, write_raw
from tomocouple.metrics import add_poisson_noise, psnr
from tomocouple.phantom import SHEPP_LOGAN, analytic_sinogram, rasterize
from tomocouple.projectors import ALL_KINDS, ProjectorKind, get_projector
from tomocouple.solvers import (
    ALL_ALGORITHMS,
    AblationCase,
    Algorithm,
    SolverConfig,
    ablation_admm,
    poisson_weights,
    reconstruct,
)

PAPER_SIZE = 256
CSV_COLUMNS = ("dataset", "fwd", "adj", "algo", "filter", "psnr", "final_cost", "diverged", "iters")


# --------------------------------------------------------------------------
# datasets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetPreset:
    """A Shepp-Logan sinogram recipe.

    ``generator`` of ``None`` means the exact analytic sinogram; otherwise the
    rasterised phantom is projected by that kind. ``sigma_fraction`` is the
    Poisson noise level relative to the mean of the well-sampled analytic
    sinogram at the same detector size.
    """

    name: str
    num_angles: int
    num_cells: int
    sigma_fraction: float | None = None
    seed: int = 0
    generator: ProjectorKind | None = None

    @property
    def geometry(self) -> Geometry:
        return Geometry(self.num_angles, self.num_cells)

    @property
    def noisy(self) -> bool:
        return self.sigma_fraction is not None

    def scaled(self, size: int) -> "DatasetPreset":
        """Same recipe on a ``size``-cell detector; view counts scale along,
        rounded up to an even number."""
        if size == self.num_cells:
            return self
        m = 2 * math.ceil(self.num_angles * size / (2.0 * self.num_cells))
        return replace(self, num_angles=m, num_cells=size)


_FULL_VIEWS = 402

PRESETS = {
    p.name: p
    for p in (
        DatasetPreset("sl-full", 402, 256),
        DatasetPreset("sl-under", 50, 256),
        DatasetPreset("sl-noise", 402, 256, 0.03, seed=3),
        DatasetPreset("sl-uconstr", 75, 256, 0.03, seed=4),
        DatasetPreset("fig3-dd", 402, 256, generator=ProjectorKind.DD),
        DatasetPreset("fig3-kb", 402, 256, generator=ProjectorKind.KB),
        DatasetPreset("fig3-pd", 402, 256, generator=ProjectorKind.PD),
        DatasetPreset("fig4a", 100, 256, generator=ProjectorKind.DD),
        DatasetPreset("fig4b", 402, 256, 0.02, seed=5, generator=ProjectorKind.KB),
        DatasetPreset("fig4c", 100, 256, 0.02, seed=6, generator=ProjectorKind.PD),
    )
}


def get_preset(name: str, size: int = PAPER_SIZE) -> DatasetPreset:
    try:
        preset = PRESETS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown dataset {name!r}; expected one of {', '.join(PRESETS)}") from None
    return preset.scaled(size)


@lru_cache(maxsize=8)
def reference_image(size: int) -> np.ndarray:
    img = rasterize(SHEPP_LOGAN, size)
    img.setflags(write=False)
    return img


@lru_cache(maxsize=8)
def full_mean(size: int) -> float:
    """Mean of the well-sampled analytic sinogram on a ``size``-cell detector."""
    views = get_preset("sl-full", size).num_angles
    return float(analytic_sinogram(SHEPP_LOGAN, Geometry(views, size)).mean())


def counts_per_unit(preset: DatasetPreset) -> float:
    """Photon counts per sinogram unit implied by the preset noise level."""
    if not preset.noisy:
        raise ValueError(f"{preset.name} is noiseless")
    return 1.0 / (preset.sigma_fraction**2 * full_mean(preset.num_cells))


@lru_cache(maxsize=16)
def _clean(preset: DatasetPreset) -> np.ndarray:
    g = preset.geometry
    if preset.generator is None:
        s = analytic_sinogram(SHEPP_LOGAN, g)
    else:
        s = get_projector(preset.generator, g).forward(reference_image(preset.num_cells))
    s.setflags(write=False)
    return s


def generate_dataset(preset: DatasetPreset, seed: int | None = None) -> np.ndarray:
    """Sinogram of ``preset``; noisy presets draw from ``(seed or preset.seed)``."""
    s = _clean(preset)
    if not preset.noisy:
        return s.copy()
    rng = make_rng(preset.seed if seed is None else seed, preset.num_angles, preset.num_cells)
    return add_poisson_noise(s, preset.sigma_fraction, rng, reference_mean=full_mean(preset.num_cells))


# --------------------------------------------------------------------------
# solver configuration files
# --------------------------------------------------------------------------

_CONFIG_FIELDS = {
    "iterations": int,
    "tv_weight": float,
    "admm_penalty": float,
    "huber_weight": float,
    "huber_delta": float,
    "inner_cg_iters": int,
    "constraints_enabled": lambda v: str(v).lower() in ("1", "true", "yes"),
    "epsilon": float,
}


def parse_overrides(pairs) -> dict:
    """Typed solver fields from ``key=value`` strings or ``(key, value)`` pairs."""
    out = {}
    for item in pairs:
        key, value = item.split("=", 1) if isinstance(item, str) else item
        key = key.strip()
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"unknown solver option {key!r}")
        out[key] = _CONFIG_FIELDS[key](value)
    return out


def preset_config_values(dataset: str, algorithm) -> dict:
    """Shipped hyperparameters for ``dataset`` as typed solver fields.

    Config keys are ``<algo>.<field>`` or plain ``<field>`` (all algorithms).
    """
    algo = Algorithm.parse(algorithm).value
    name = dataset.lower().split("@")[0]
    path = resources.files("tomocouple").joinpath("configs", f"{name}.cfg")
    if not path.is_file():
        return {}
    raw = read_config(path)
    picked = []
    for key, value in raw.items():
        prefix, _, fld = key.rpartition(".")
        if prefix in ("", algo):
            picked.append((fld, value))
    return parse_overrides(picked)


def solver_config(dataset: str, algorithm, overrides=()) -> SolverConfig:
    values = preset_config_values(dataset, algorithm)
    values.update(dict(overrides))
    return SolverConfig(algorithm=Algorithm.parse(algorithm), **values)


# --------------------------------------------------------------------------
# experiment cells
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentSpec:
    """One cell of an experiment matrix.

    ``algo`` is ``"forward"`` (projector accuracy against the analytic
    sinogram), ``"fbp"``, one of the solver names, or ``"ablation"``. For
    ablation cells ``case`` names the :class:`AblationCase` and ``adj`` the
    uncoupled backprojector of the third case.
    """

    dataset: str
    algo: str
    fwd: str = ""
    adj: str = ""
    filter: str = ""
    case: str = ""
    overrides: tuple = field(default_factory=tuple)
    size: int = PAPER_SIZE

    def __post_init__(self):
        for name in ("fwd", "adj"):
            v = getattr(self, name)
            if v:
                object.__setattr__(self, name, ProjectorKind.parse(v).value)
        if self.filter:
            object.__setattr__(self, "filter", FilterKind.parse(self.filter).value)
        algo = self.algo.lower()
        if algo not in ("forward", "fbp", "ablation"):
            algo = Algorithm.parse(algo).value
        object.__setattr__(self, "algo", algo)
        if self.case:
            object.__setattr__(self, "case", AblationCase(self.case).value)
        object.__setattr__(self, "overrides", tuple(sorted(parse_overrides(self.overrides).items())))
        get_preset(self.dataset, self.size)

    @property
    def key(self) -> str:
        text = "|".join(str(v) for v in (self.dataset, self.size, self.algo, self.fwd, self.adj,
                                         self.filter, self.case, self.overrides))
        return hashlib.sha1(text.encode()).hexdigest()[:16]

    @property
    def label(self) -> str:
        algo = f"admm:{self.case}" if self.algo == "ablation" else self.algo
        return algo


@dataclass
class CellResult:
    spec: ExperimentSpec
    psnr: float = math.nan
    final_cost: float = math.nan
    diverged: bool = False
    iters: int = 0
    error: str = ""
    image: np.ndarray | None = None
    trace: object = None

    def row(self) -> dict:
        s = self.spec
        dataset = s.dataset if s.size == PAPER_SIZE else f"{s.dataset}@{s.size}"
        return {
            "dataset": dataset,
            "fwd": s.fwd,
            "adj": s.adj,
            "algo": s.label,
            "filter": s.filter,
            "psnr": "error" if self.error else f"{self.psnr:.6f}",
            "final_cost": "" if math.isnan(self.final_cost) else f"{self.final_cost:.9e}",
            "diverged": int(self.diverged),
            "iters": self.iters,
        }


def run_cell(spec: ExperimentSpec, seed: int | None = None) -> CellResult:
    """Execute one cell. Exceptions are captured in ``CellResult.error``."""
    res = CellResult(spec)
    try:
        _run_cell(spec, seed, res)
    except Exception as exc:  # a failing cell must not abort the matrix
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def _run_cell(spec, seed, res):
    preset = get_preset(spec.dataset, spec.size)
    ref = reference_image(spec.size)
    mask = reconstruction_circle_mask(spec.size)
    sino = generate_dataset(preset, seed)
    if spec.algo == "forward":
        est = get_projector(spec.fwd, preset.geometry).forward(ref)
        res.psnr = psnr(est, sino)
        return
    if spec.algo == "fbp":
        res.image = fbp_reconstruct(sino, spec.adj, spec.filter or FilterKind.RAMP)
        res.psnr = psnr(res.image, ref, mask)
        return
    if spec.algo == "ablation":
        cfg = solver_config(spec.dataset, Algorithm.ADMM, spec.overrides)
        res.psnr = ablation_admm(sino, spec.case, spec.fwd, cfg, ref, uncoupled_adj=spec.adj or None)
        res.iters = cfg.iterations
        return
    cfg = solver_config(spec.dataset, spec.algo, spec.overrides)
    weights = None
    if cfg.algorithm is Algorithm.PWLS and preset.noisy:
        weights = poisson_weights(sino, counts_per_unit(preset))
    img, trace = reconstruct(sino, spec.fwd, spec.adj, cfg, ref=ref, weights=weights)
    res.image, res.trace = img, trace
    res.final_cost = trace.final_cost
    res.diverged = trace.diverged
    res.iters = len(trace)
    res.psnr = psnr(img, ref, mask)


def _persist(res: CellResult, out_dir: Path):
    key = res.spec.key
    if res.image is not None:
        (out_dir / "images").mkdir(parents=True, exist_ok=True)
        write_raw(out_dir / "images" / f"{key}.raw", res.image, "image")
    if res.trace is not None:
        (out_dir / "traces").mkdir(parents=True, exist_ok=True)
        with open(out_dir / "traces" / f"{key}.csv", "w", encoding="utf-8") as fh:
            res.trace.write_csv(fh)


def _worker(args):
    spec, seed, out_dir = args
    res = run_cell(spec, seed)
    if out_dir is not None:
        _persist(res, Path(out_dir))
    return res


def run_matrix(specs, seed: int | None = None, workers: int = 1, out_dir=None) -> list:
    """Run every spec; results come back in input order.

    Cells are independent, so ``workers > 1`` runs them in a process pool
    without changing any result.
    """
    specs = list(specs)
    jobs = [(s, seed, None if out_dir is None else str(out_dir)) for s in specs]
    if workers > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_worker, jobs))
    return [_worker(j) for j in jobs]


def results_csv(results) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in results:
        w.writerow(r.row())
    return buf.getvalue()


# --------------------------------------------------------------------------
# reporting
# --------------------------------------------------------------------------


def coupling_summary(results) -> tuple[int, int, list]:
    """Rank of the matched adjoint by PSNR within each comparison group.

    Groups share dataset, algorithm, filter and forward kind. Diverged or
    failed cells are left out of the ranking. Returns ``(wins, groups,
    lines)`` counting groups where the matched adjoint ranks first.
    """
    groups = {}
    for r in results:
        s = r.spec
        if s.algo in ("forward", "ablation") or not s.fwd:
            continue
        groups.setdefault((s.dataset, s.size, s.algo, s.filter, s.fwd), []).append(r)
    wins, n, lines = 0, 0, []
    for (dataset, size, algo, filt, fwd), cells in groups.items():
        if not any(c.spec.adj == fwd for c in cells) or len(cells) < 2:
            continue
        ok = [c for c in cells if not c.error and not c.diverged]
        ranked = sorted(ok, key=lambda c: -c.psnr)
        marks = [c.spec.adj for c in cells if c.diverged or c.error]
        order = [c.spec.adj for c in ranked]
        rank = order.index(fwd) + 1 if fwd in order else None
        n += 1
        wins += rank == 1
        tag = f"{dataset}@{size} {algo}{'/' + filt if filt else ''} fwd={fwd}"
        extra = f" diverged/failed: {','.join(marks)}" if marks else ""
        lines.append(f"{tag}: matched rank {rank if rank else '-'} of {len(ranked)} ({' > '.join(order)}){extra}")
    return wins, n, lines


def emit_report(results, out_dir) -> Path:
    """Write the results CSV, coupling summary, convergence CSVs and PGMs.

    Returns the path of the summary file.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "results.csv").write_text(results_csv(results), encoding="utf-8")
        wins, n, lines = coupling_summary(results)
        summary = out / "summary.txt"
        summary.write_text("\n".join([f"coupling dominance: {wins}/{n}"] + lines) + "\n", encoding="utf-8")
        for r in results:
            s = r.spec
            stem = "_".join(x for x in (s.dataset, str(s.size), s.label.replace(":", "-"), s.filter, s.fwd, s.adj) if x)
            if r.trace is not None:
                (out / "convergence").mkdir(exist_ok=True)
                with open(out / "convergence" / f"{stem}.csv", "w", encoding="utf-8") as fh:
                    r.trace.write_csv(fh)
            if r.image is not None:
                (out / "thumbnails").mkdir(exist_ok=True)
                write_pgm(out / "thumbnails" / f"{stem}.pgm", r.image, 0.0, float(reference_image(s.size).max()))
    except OSError as exc:
        raise OSError(f"cannot write report under {out}: {exc}") from exc
    return summary


# --------------------------------------------------------------------------
# named matrices
# --------------------------------------------------------------------------

KINDS = [k.value for k in ALL_KINDS]
FILTERS = [f.value for f in ALL_FILTERS]
ALGOS = [a.value for a in ALL_ALGORITHMS]

# adjoint sets compared by the named matrices
TABLE2_ADJ = ("pd", "kb", "rd", "wf")
TABLE3A_ADJ = ("kb", "dd", "ss", "wf")
TABLE3B_ADJ = ("ss", "dd", "wf", "pd")
FIG7_ADJ = ("pd", "rd", "kb")
TABLE5_FWD = "pd"
TABLE5_UNCOUPLED = ("kb", "rd", "wf")


def _fbp_cells(datasets, size, fwd_of=lambda d: ""):
    return [
        ExperimentSpec(d, "fbp", fwd=fwd_of(d), adj=a, filter=f, size=size)
        for d in datasets
        for f in FILTERS
        for a in KINDS
    ]


def _gen(d):
    g = PRESETS[d].generator
    return g.value if g is not None else ""


def named_matrix(name: str, size: int = PAPER_SIZE) -> list:
    """Experiment cells of a named matrix.

    ======== ===========================================================
    table1   forward accuracy of every kind against the analytic sinogram
    fig2     FBP of analytic full/under/underconstrained data
    fig3     FBP of DD-, KB- and PD-generated data, all adjoints/filters
    fig4a-c  FBP of the undersampled / noisy / underconstrained variants
    convergence  ADMM (RD, DD), PWLS (WF, SS), MLEM and SIRT (PD)
    dominance    every solver x forward x adjoint on sl-full
    table2   ADMM, sl-under, PD forward
    table3   PWLS, sl-under (KB) and sl-noise (SS)
    fig7     MLEM, sl-under, PD forward
    table5   ADMM ablation on sl-uconstr
    ci       a small deterministic smoke matrix at size 64
    ======== ===========================================================
    """
    name = name.lower()
    S = ExperimentSpec
    if name == "table1":
        return [S("sl-full", "forward", fwd=k, size=size) for k in KINDS]
    if name == "fig2":
        return _fbp_cells(("sl-full", "sl-under", "sl-uconstr"), size)
    if name == "fig3":
        return _fbp_cells(("fig3-dd", "fig3-kb", "fig3-pd"), size, _gen)
    if name in ("fig4a", "fig4b", "fig4c"):
        return _fbp_cells((name,), size, _gen)
    if name == "convergence":
        pairs = [("admm", "rd"), ("admm", "dd"), ("pwls", "wf"), ("pwls", "ss"), ("mlem", "pd"), ("sirt", "pd")]
        return [S("sl-full", algo, fwd=f, adj=a, size=size) for algo, f in pairs for a in KINDS]
    if name == "dominance":
        return [S("sl-full", algo, fwd=f, adj=a, size=size) for algo in ALGOS for f in KINDS for a in KINDS]
    if name == "table2":
        return [S("sl-under", "admm", fwd="pd", adj=a, size=size) for a in TABLE2_ADJ]
    if name == "table3":
        return [S("sl-under", "pwls", fwd="kb", adj=a, size=size) for a in TABLE3A_ADJ] + [
            S("sl-noise", "pwls", fwd="ss", adj=a, size=size) for a in TABLE3B_ADJ
        ]
    if name == "fig7":
        return [S("sl-under", "mlem", fwd="pd", adj=a, size=size) for a in FIG7_ADJ]
    if name == "table5":
        cells = [
            S("sl-uconstr", "ablation", fwd=TABLE5_FWD, case=AblationCase.FULL.value, size=size),
            S("sl-uconstr", "ablation", fwd=TABLE5_FWD, case=AblationCase.COUPLED_ONLY.value, size=size),
        ]
        cells += [
            S("sl-uconstr", "ablation", fwd=TABLE5_FWD, adj=a, case=AblationCase.UNCOUPLED.value, size=size)
            for a in TABLE5_UNCOUPLED
        ]
        return cells
    if name == "ci":
        small = 64
        cells = named_matrix("table1", small)
        cells += [S("fig3-dd", "fbp", fwd="dd", adj=a, filter="ramp", size=small) for a in KINDS]
        it = (("iterations", 10),)
        for algo in ALGOS:
            cells += [S("sl-full", algo, fwd="pd", adj=a, overrides=it, size=small) for a in ("pd", "rd", "kb")]
        cells.append(S("sl-uconstr", "ablation", fwd="pd", case=AblationCase.FULL.value, overrides=it, size=small))
        return cells
    raise ValueError(f"unknown matrix {name!r}; expected one of {', '.join(MATRICES)}")


MATRICES = ("table1", "fig2", "fig3", "fig4a", "fig4b", "fig4c", "convergence", "dominance",
            "table2", "table3", "fig7", "table5", "ci")


def table5_cases(results) -> dict:
    """Collapse ablation cells to the three case PSNRs.

    Case 3 is the mean over the uncoupled backprojectors that were run.
    """
    by_case = {}
    for r in results:
        if r.spec.algo == "ablation":
            by_case.setdefault(r.spec.case, []).append(r.psnr)
    return {case: float(np.mean(v)) for case, v in by_case.items()}


# --------------------------------------------------------------------------
# hyperparameter grid search
# --------------------------------------------------------------------------


def grid_search(dataset: str, algorithm, fwd, grid: dict, size: int = PAPER_SIZE, seed=None, workers: int = 1):
    """Matched-pair PSNR over the Cartesian product of ``grid``.

    Returns ``(best_overrides, rows)`` where ``rows`` lists
    ``(overrides, psnr)`` in grid order.
    """
    keys = sorted(grid)
    combos = [tuple(zip(keys, vals)) for vals in itertools.product(*(grid[k] for k in keys))]
    specs = [ExperimentSpec(dataset, algorithm, fwd=fwd, adj=fwd, overrides=c, size=size) for c in combos]
    results = run_matrix(specs, seed=seed, workers=workers)
    rows = [(dict(c), r.psnr if not (r.error or r.diverged) else -math.inf) for c, r in zip(combos, results)]
    best = max(rows, key=lambda t: t[1])[0]
    return best, rows


def default_workers() -> int:
    return max(1, len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1)
