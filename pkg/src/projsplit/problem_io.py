"""Reading and writing LASSO problem files.

A problem is either one dense CSV whose rows are ``q_1, ..., q_d, b`` or a
pair ``Q.csv`` / ``b.csv``. Generated problems also carry ``manifest.json``
with the shape, seed, lambda and partition sizes. Values are written with
17 significant digits so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .lasso import contiguous_partition, default_lambda, random_instance

PROBLEM_FILE = "problem.csv"
MANIFEST_FILE = "manifest.json"
FLOAT_FMT = "%.17g"


class ProblemFormatError(ValueError):
    """Malformed problem file. ``line`` is 1-based (0 when not line-specific)."""

    def __init__(self, path, line: int, msg: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line else self.path
        super().__init__(f"{where}: {msg}")


def _read_rows(path: Path) -> np.ndarray:
    rows: list[list[float]] = []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                bad = next(c for c in row if not _is_float(c))
                raise ProblemFormatError(path, lineno, f"non-numeric field {bad!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise ProblemFormatError(path, lineno, "non-finite value")
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ProblemFormatError(
                    path, lineno, f"expected {width} fields, found {len(vals)}"
                )
            rows.append(vals)
    if not rows:
        raise ProblemFormatError(path, 0, "empty file")
    return np.array(rows, dtype=np.float64)


def _is_float(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_problem(path) -> tuple[np.ndarray, np.ndarray]:
    """Load ``(Q, b)`` from a problem CSV, a directory, or a manifest.

    A directory (or a ``manifest.json`` inside one) is read as ``problem.csv``
    if present, otherwise as the pair ``Q.csv`` and ``b.csv``.
    """
    path = Path(path)
    if path.name == MANIFEST_FILE:
        path = path.parent
    if path.is_dir():
        if (path / PROBLEM_FILE).exists():
            return load_problem(path / PROBLEM_FILE)
        return load_pair(path / "Q.csv", path / "b.csv")
    if not path.exists():
        raise FileNotFoundError(path)
    data = _read_rows(path)
    if data.shape[1] < 2:
        raise ProblemFormatError(path, 1, "need at least one column of Q plus b")
    return data[:, :-1].copy(), data[:, -1].copy()


def load_pair(q_path, b_path) -> tuple[np.ndarray, np.ndarray]:
    Q = _read_rows(Path(q_path))
    bm = _read_rows(Path(b_path))
    if bm.shape[1] != 1 and bm.shape[0] == 1:
        bm = bm.T
    if bm.shape[1] != 1:
        raise ProblemFormatError(b_path, 1, "b must be a single column or row")
    if bm.shape[0] != Q.shape[0]:
        raise ProblemFormatError(
            b_path, 0, f"b has {bm.shape[0]} entries but Q has {Q.shape[0]} rows"
        )
    return Q, bm[:, 0].copy()


def save_problem(path, Q, b) -> Path:
    path = Path(path)
    data = np.column_stack([np.asarray(Q, dtype=np.float64), np.asarray(b, dtype=np.float64)])
    np.savetxt(path, data, delimiter=",", fmt=FLOAT_FMT)
    return path


@dataclass(frozen=True)
class Manifest:
    m: int
    d: int
    r: int
    seed: int
    generator: str
    lam: float
    partition_sizes: list[int]
    problem_file: str = PROBLEM_FILE

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def read(cls, path) -> "Manifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_FILE
        return cls(**json.loads(path.read_text()))


def gen_problem(m: int, d: int, r: int, seed: int, outdir=None):
    """Generate a seeded random instance; optionally write it with a manifest.

    Returns ``(Q, b, manifest)``.
    """
    if not (m >= r >= 1 and d >= 1):
        raise ValueError(f"invalid shape: need m >= r >= 1 and d >= 1, got m={m}, d={d}, r={r}")
    Q, b = random_instance(m, d, seed)
    cells = contiguous_partition(m, r)
    man = Manifest(
        m, d, r, seed,
        "numpy.random.default_rng(seed): Q standard normal, b uniform on {0, 1}",
        default_lambda(Q, b),
        [len(c) for c in cells],
    )
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        save_problem(outdir / PROBLEM_FILE, Q, b)
        (outdir / MANIFEST_FILE).write_text(man.to_json() + "\n")
    return Q, b, man


def parse_gen_spec(text: str, default_seed: int = 0) -> tuple[int, int, int, int]:
    """``"m,d,r,seed"`` (or ``"m,d,r"`` with ``default_seed``) -> four ints."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) == 3:
        parts.append(str(default_seed))
    if len(parts) != 4:
        raise ValueError(f"generator spec must be m,d,r[,seed], got {text!r}")
    try:
        m, d, r, seed = (int(p) for p in parts)
    except ValueError:
        raise ValueError(f"generator spec must be integers, got {text!r}") from None
    return m, d, r, seed
