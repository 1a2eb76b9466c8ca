"""Problem generation, on-disk format and train/test splits.

Layout::

    <root>/<split>/<category>/manifest.txt
    <root>/<split>/<category>/<problem-id>/{K.mtx, f.mtx, u.mtx, meta.txt}

``meta.txt`` holds ``key = value`` lines, including SHA-256 checksums of
the three matrix files.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import GENERATOR_VERSION, mmio
from .fem import DofMap, assemble_load_vector, assemble_stiffness
from .loads import ElementaryAction, action_from_params, action_to_member_loads, sample_action
from .rng import derive_seed, substream
from .solvers.cholesky import cholesky
from .solvers.report import relative_residual
from .sparse import SparseSpd
from .structgen import (
    MAX_RESAMPLES,
    BeamParams,
    FrameModel,
    GenerationError,
    GridSpec,
    carve_structure,
    count_free_nodes,
    generate_structure,
)

CATEGORIES = ("small", "medium", "large")
SPLITS = ("train", "test")

# Published statistics: maximum free dofs and the accepted band for the mean.
DOF_LIMITS = {"small": 5166, "medium": 14718, "large": 31770}
DOF_MEAN_BANDS = {"small": (1900, 2350), "medium": (6300, 7700), "large": (14000, 17000)}

GENERATION_RESIDUAL = 1e-10
TRAIN_MULTIPLICITY = (2, 5)
DEFAULT_PROBLEMS_PER_SPLIT = 50


@dataclass(frozen=True)
class GridRanges:
    """Inclusive integer ranges for the number of cells along each axis."""

    nx: tuple[int, int]
    ny: tuple[int, int]
    nz: tuple[int, int]


# Chosen by Monte Carlo search (``search_grid_ranges``) over candidate ranges
# so that 1000-sample dof statistics land in DOF_MEAN_BANDS.
GRID_RANGES = {
    "small": GridRanges(nx=(6, 10), ny=(6, 10), nz=(4, 7)),
    "medium": GridRanges(nx=(10, 15), ny=(10, 15), nz=(6, 10)),
    "large": GridRanges(nx=(15, 22), ny=(15, 22), nz=(6, 11)),
}


class DatasetError(ValueError):
    """Malformed, inconsistent or corrupted dataset files."""


def _check_category(category: str) -> None:
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}; choose from {CATEGORIES}")


def calibrate_grid_ranges(category: str) -> GridRanges:
    _check_category(category)
    return GRID_RANGES[category]


def max_free_nodes(category: str) -> int:
    return DOF_LIMITS[category] // 6


def sample_grid_spec(category: str, seed: int, ranges: GridRanges | None = None) -> GridSpec:
    ranges = ranges or calibrate_grid_ranges(category)
    rng = substream(seed, "grid")
    nx, ny, nz = (int(rng.integers(lo, hi, endpoint=True)) for lo, hi in (ranges.nx, ranges.ny, ranges.nz))
    return GridSpec(nx, ny, nz, seed)


def dry_run_dofs(category: str, samples: int = 1000, base_seed: int = 0, ranges: GridRanges | None = None) -> np.ndarray:
    """Free-dof counts of ``samples`` structures, without assembling anything."""
    _check_category(category)
    out = np.empty(samples, dtype=np.int64)
    for i in range(samples):
        spec = sample_grid_spec(category, derive_seed(base_seed, "dry-run", i), ranges)
        grid = carve_structure(spec, max_free_nodes(category))
        out[i] = 6 * count_free_nodes(grid.occupied)
    return out


def search_grid_ranges(category: str, candidates, samples: int = 200, base_seed: int = 0):
    """Score candidate ``GridRanges`` by their dry-run dof statistics.

    Returns ``(ranges, mean, max)`` tuples whose mean lies in the category
    band, closest to the band centre first.
    """
    lo, hi = DOF_MEAN_BANDS[category]
    centre = 0.5 * (lo + hi)
    scored = []
    for ranges in candidates:
        try:
            d = dry_run_dofs(category, samples, base_seed, ranges)
        except GenerationError:
            continue
        if lo <= d.mean() <= hi:
            scored.append((ranges, float(d.mean()), int(d.max())))
    return sorted(scored, key=lambda t: abs(t[1] - centre))


# --------------------------------------------------------------------------
# Problems


@dataclass
class ProblemMeta:
    seed: int
    action_seed: int
    category: str
    grid: tuple[int, int, int]
    n: int
    nnz: int
    action: ElementaryAction
    beam: BeamParams
    generator_version: str = GENERATOR_VERSION
    checksums: dict = field(default_factory=dict)

    def to_text(self, include_checksums: bool = True) -> str:
        lines = [
            f"generator_version = {self.generator_version}",
            f"category = {self.category}",
            f"seed = {self.seed}",
            f"action_seed = {self.action_seed}",
            f"grid = {self.grid[0]} {self.grid[1]} {self.grid[2]}",
            f"n = {self.n}",
            f"nnz = {self.nnz}",
            f"action = {self.action.kind}",
        ]
        lines += [f"action.{k} = {_fmt(v)}" for k, v in self.action.params().items()]
        for name in ("width", "height", "young_modulus", "density", "poisson_ratio", "shear_correction"):
            lines.append(f"beam.{name} = {_fmt(getattr(self.beam, name))}")
        if include_checksums:
            lines += [f"sha256.{k} = {v}" for k, v in sorted(self.checksums.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, name: str = "meta.txt") -> "ProblemMeta":
        kv = {}
        for ln, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            if "=" not in line:
                raise DatasetError(f"{name}:{ln}: expected 'key = value'")
            k, v = line.split("=", 1)
            kv[k.strip()] = v.strip()
        try:
            action_params = {k[7:]: v for k, v in kv.items() if k.startswith("action.")}
            return cls(
                seed=int(kv["seed"]),
                action_seed=int(kv["action_seed"]),
                category=kv["category"],
                grid=tuple(int(t) for t in kv["grid"].split()),
                n=int(kv["n"]),
                nnz=int(kv["nnz"]),
                action=action_from_params(kv["action"], action_params),
                beam=BeamParams(**{k[5:]: float(v) for k, v in kv.items() if k.startswith("beam.")}),
                generator_version=kv["generator_version"],
                checksums={k[7:]: v for k, v in kv.items() if k.startswith("sha256.")},
            )
        except (KeyError, ValueError, TypeError) as e:
            raise DatasetError(f"{name}: bad or missing field ({e})") from None

    def __eq__(self, other):
        if not isinstance(other, ProblemMeta):
            return NotImplemented
        # checksums are derived from the files, not part of the identity
        return self.to_text(False) == other.to_text(False)


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


@dataclass(eq=False)
class Problem:
    K: SparseSpd
    f: np.ndarray
    u: np.ndarray
    meta: ProblemMeta

    def __post_init__(self):
        if not (self.K.n == len(self.f) == len(self.u)):
            raise DatasetError("K, f and u dimensions disagree")

    @property
    def residual(self) -> float:
        return relative_residual(self.K, self.u, self.f)

    def __eq__(self, other):
        if not isinstance(other, Problem):
            return NotImplemented
        return (
            self.K == other.K
            and np.array_equal(self.f, other.f)
            and np.array_equal(self.u, other.u)
            and self.meta == other.meta
        )


def generate_structure_for(category: str, seed: int) -> FrameModel:
    _check_category(category)
    spec = sample_grid_spec(category, seed)
    return generate_structure(spec, max_free_nodes=max_free_nodes(category))


def sample_nonempty_action(frame: FrameModel, action_seed: int):
    """Draw actions until one loads at least one member."""
    for attempt in range(MAX_RESAMPLES):
        action = sample_action(action_seed, attempt)
        loads = action_to_member_loads(frame, action)
        if loads:
            return action, loads
    raise GenerationError("no applicable elementary action found")


def problems_for_structure(category: str, seed: int, action_seeds) -> list[Problem]:
    """Problems sharing one structure (one factorization, several load cases)."""
    frame = generate_structure_for(category, seed)
    K, dofmap = assemble_stiffness(frame)
    factor = cholesky(K, "amd")
    spec = frame.grid.spec
    out = []
    for a_seed in action_seeds:
        action, loads = sample_nonempty_action(frame, a_seed)
        f = assemble_load_vector(frame, dofmap, loads)
        u = factor.solve(f)
        res = relative_residual(K, u, f)
        if not res <= GENERATION_RESIDUAL:
            raise GenerationError(f"reference residual {res:.2e} exceeds {GENERATION_RESIDUAL:g}")
        meta = ProblemMeta(
            seed=int(seed),
            action_seed=int(a_seed),
            category=category,
            grid=spec.shape,
            n=K.n,
            nnz=K.nnz,
            action=action,
            beam=frame.params,
        )
        out.append(Problem(K, f, u, meta))
    return out


def generate_problem(category: str, seed: int, action_seed: int | None = None) -> Problem:
    return problems_for_structure(category, seed, [seed if action_seed is None else action_seed])[0]


def rebuild_frame(meta: ProblemMeta) -> tuple[FrameModel, DofMap, list]:
    """Regenerate the structure and member loads a stored problem came from."""
    frame = generate_structure_for(meta.category, meta.seed)
    _, dofmap = assemble_stiffness(frame)
    return frame, dofmap, action_to_member_loads(frame, meta.action)


# --------------------------------------------------------------------------
# Files

FILES = ("K.mtx", "f.mtx", "u.mtx")


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def export_problem(p: Problem, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    blobs = {
        "K": mmio.format_sparse(p.K).encode("ascii"),
        "f": mmio.format_vector(p.f).encode("ascii"),
        "u": mmio.format_vector(p.u).encode("ascii"),
    }
    for key, blob in blobs.items():
        (d / f"{key}.mtx").write_bytes(blob)
    meta = replace(p.meta, checksums={k: _sha256(b) for k, b in blobs.items()})
    (d / "meta.txt").write_text(meta.to_text(), encoding="ascii", newline="\n")
    return d


def import_problem(directory, verify_checksums: bool = True) -> Problem:
    d = Path(directory)
    if not d.is_dir():
        raise DatasetError(f"{d}: not a problem directory")
    try:
        meta = ProblemMeta.from_text((d / "meta.txt").read_text(encoding="ascii"))
    except FileNotFoundError:
        raise DatasetError(f"{d / 'meta.txt'}: missing") from None
    parsed = {}
    for key in ("K", "f", "u"):
        path = d / f"{key}.mtx"
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            raise DatasetError(f"{path}: missing") from None
        try:
            parsed[key] = mmio.parse(raw.decode("ascii"), path.name)
        except (mmio.MatrixMarketError, UnicodeDecodeError) as e:
            raise DatasetError(f"{path}: {e}") from None
        if verify_checksums and meta.checksums.get(key) != _sha256(raw):
            raise DatasetError(f"{path}: checksum mismatch")
    K, f, u = parsed["K"], parsed["f"], parsed["u"]
    if not isinstance(K, SparseSpd):
        raise DatasetError(f"{d / 'K.mtx'}: expected a sparse coordinate matrix")
    for key, vec in (("f", f), ("u", u)):
        if not isinstance(vec, np.ndarray) or len(vec) != K.n:
            got = len(vec) if isinstance(vec, np.ndarray) else "matrix"
            raise DatasetError(f"{d / (key + '.mtx')}: dimension mismatch: expected {K.n} entries, got {got}")
    if K.n != meta.n or K.nnz != meta.nnz:
        raise DatasetError(f"{d / 'K.mtx'}: dimension mismatch with meta.txt (n={K.n}, nnz={K.nnz})")
    return Problem(K, f, u, meta)


# --------------------------------------------------------------------------
# Splits


@dataclass
class SplitManifest:
    split: str
    category: str
    base_seed: int
    entries: list[tuple[str, int, int]]  # (problem id, structure seed, action seed)
    generator_version: str = GENERATOR_VERSION

    @property
    def count(self) -> int:
        return len(self.entries)

    @property
    def structure_seeds(self) -> list[int]:
        return list(dict.fromkeys(s for _, s, _ in self.entries))

    def multiplicity(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for _, s, _ in self.entries:
            out[s] = out.get(s, 0) + 1
        return out

    def to_text(self) -> str:
        lines = [
            f"split = {self.split}",
            f"category = {self.category}",
            f"count = {self.count}",
            f"structures = {len(self.structure_seeds)}",
            f"base_seed = {self.base_seed}",
            f"generator_version = {self.generator_version}",
            "# problem_id structure_seed action_seed",
        ]
        lines += [f"{pid} {s} {a}" for pid, s, a in self.entries]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, name: str = "manifest.txt") -> "SplitManifest":
        kv, entries = {}, []
        for ln, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            if "=" in line:
                k, v = line.split("=", 1)
                kv[k.strip()] = v.strip()
                continue
            parts = line.split()
            if len(parts) != 3:
                raise DatasetError(f"{name}:{ln}: expected 'problem_id structure_seed action_seed'")
            entries.append((parts[0], int(parts[1]), int(parts[2])))
        try:
            m = cls(kv["split"], kv["category"], int(kv["base_seed"]), entries, kv["generator_version"])
            declared = int(kv["count"])
        except (KeyError, ValueError) as e:
            raise DatasetError(f"{name}: bad or missing field ({e})") from None
        if declared != len(entries):
            raise DatasetError(f"{name}: count = {declared} but {len(entries)} entries listed")
        return m

    def validate(self) -> list[str]:
        """Uniqueness rules of the split; returns a list of violations."""
        problems = []
        if len({pid for pid, _, _ in self.entries}) != self.count:
            problems.append("duplicate problem ids")
        if self.split == "test" and len(self.structure_seeds) != self.count:
            problems.append("test split reuses a structure seed")
        pairs = [(s, a) for _, s, a in self.entries]
        if len(set(pairs)) != len(pairs):
            problems.append("a (structure seed, action seed) pair repeats")
        return problems


def plan_split(split: str, category: str, count: int, base_seed: int, multiplicity: int | None = None) -> SplitManifest:
    """Seeds of every problem in a split, without generating anything."""
    if split not in SPLITS:
        raise ValueError(f"unknown split {split!r}; choose from {SPLITS}")
    _check_category(category)
    if count < 1:
        raise ValueError("count must be >= 1")
    entries = []
    s_index = 0
    while len(entries) < count:
        s = derive_seed(base_seed, f"{split}/{category}/structure", s_index)
        s_index += 1
        if split == "test":
            k = 1
        elif multiplicity is not None:
            k = int(multiplicity)
        else:
            k = int(substream(s, "multiplicity").integers(TRAIN_MULTIPLICITY[0], TRAIN_MULTIPLICITY[1], endpoint=True))
        k = min(k, count - len(entries))
        for j in range(k):
            a = s if split == "test" else derive_seed(s, "action", j)
            entries.append((f"{len(entries):06d}", s, a))
    return SplitManifest(split, category, base_seed, entries)


def _generate_group(args):
    category, seed, items, out_dir = args
    problems = problems_for_structure(category, seed, [a for _, a in items])
    stats = []
    for (pid, _), p in zip(items, problems):
        if out_dir is not None:
            export_problem(p, Path(out_dir) / pid)
        stats.append((pid, p.K.n, p.K.nnz))
    return stats


def build_split(
    split: str,
    category: str,
    count: int = DEFAULT_PROBLEMS_PER_SPLIT,
    base_seed: int = 0,
    root=None,
    multiplicity: int | None = None,
    jobs: int = 1,
) -> tuple[SplitManifest, list[tuple[str, int, int]]]:
    """Generate a split. Returns the manifest and ``(id, n, nnz)`` per problem.

    With ``root`` set, problems and the manifest are written under
    ``root/<split>/<category>/``.
    """
    manifest = plan_split(split, category, count, base_seed, multiplicity)
    out_dir = None
    if root is not None:
        out_dir = Path(root) / split / category
        out_dir.mkdir(parents=True, exist_ok=True)
    groups: dict[int, list] = {}
    for pid, s, a in manifest.entries:
        groups.setdefault(s, []).append((pid, a))
    tasks = [(category, s, items, out_dir) for s, items in groups.items()]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_generate_group, tasks))
    else:
        results = [_generate_group(t) for t in tasks]
    stats = sorted(x for group in results for x in group)
    if out_dir is not None:
        (out_dir / "manifest.txt").write_text(manifest.to_text(), encoding="ascii", newline="\n")
    return manifest, stats


def read_manifest(directory) -> SplitManifest:
    path = Path(directory) / "manifest.txt"
    try:
        return SplitManifest.from_text(path.read_text(encoding="ascii"), str(path))
    except FileNotFoundError:
        raise DatasetError(f"{path}: missing") from None


def find_problem_dirs(root) -> list[Path]:
    """Every directory under ``root`` (inclusive) holding a meta.txt, sorted."""
    root = Path(root)
    return sorted(p.parent for p in root.rglob("meta.txt"))


def find_split_dirs(root) -> list[Path]:
    return sorted(p.parent for p in Path(root).rglob("manifest.txt"))


def dataset_checksums(root) -> dict[str, str]:
    """SHA-256 of every file under ``root``, keyed by relative path."""
    root = Path(root)
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in files:
            path = Path(dirpath) / name
            out[str(path.relative_to(root))] = _sha256(path.read_bytes())
    return dict(sorted(out.items()))
