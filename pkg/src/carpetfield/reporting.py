"""Deterministic result tables and run manifests.

Every reported real is rendered with 17 significant digits so a rerun with
the same seed reproduces artifacts byte for byte.  The one deliberate
exception is the trailing runtime_ms column of study tables: it is kept for
operators but stripped before digesting, so replay comparisons and manifest
digests ignore wall-clock noise.
"""

import hashlib
import io
import json
from dataclasses import dataclass, field, asdict

import numpy as np

CSV_COLUMNS = ("study", "spec", "n_level", "quantity", "value",
               "stderr", "flags", "seed", "runtime_ms")


def fmt17(x):
    """Shortest faithful decimal for table cells: 17 significant digits
    for floats, plain digits for integers, empty for missing."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return "nan"
    return "%.17g" % x


def json_ready(obj):
    """Recursively convert numpy containers for json.dumps."""
    if isinstance(obj, dict):
        return {str(k): json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dump_json(obj, path=None):
    text = json.dumps(json_ready(obj), indent=2, sort_keys=True,
                      allow_nan=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def sha256_text(text):
    return hashlib.sha256(text.encode()).hexdigest()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class StudyRow:
    study: str
    spec: str
    n_level: int
    quantity: str
    value: float
    stderr: float = None
    flags: str = ""
    seed: int = None
    runtime_ms: float = None

    def cells(self):
        return (self.study, self.spec, str(self.n_level), self.quantity,
                fmt17(self.value), fmt17(self.stderr), self.flags,
                fmt17(self.seed), fmt17(self.runtime_ms))


@dataclass
class StudyReport:
    name: str
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, **kw):
        self.rows.append(StudyRow(study=self.name, **kw))

    def to_csv(self, include_runtime=True):
        out = io.StringIO()
        cols = CSV_COLUMNS if include_runtime else CSV_COLUMNS[:-1]
        out.write(",".join(cols) + "\n")
        for row in self.rows:
            cells = row.cells()
            if not include_runtime:
                cells = cells[:-1]
            out.write(",".join(cells) + "\n")
        return out.getvalue()

    def digest(self):
        # runtime-free digest; see module docstring
        return sha256_text(self.to_csv(include_runtime=False))

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_csv())
        return self.digest()

    def find(self, quantity, spec=None, n_level=None):
        hits = [r for r in self.rows
                if r.quantity == quantity
                and (spec is None or r.spec == spec)
                and (n_level is None or r.n_level == n_level)]
        return hits


@dataclass
class RunManifest:
    """Reproducibility record written beside every artifact set.

    Holds the resolved inputs (command, config digest, master seed) and a
    digest per artifact, never timestamps, so two runs with identical
    inputs produce identical manifests.
    """
    command: str
    spec_id: str
    master_seed: int = None
    config_digest: str = None
    parameters: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)   # name -> sha256
    versions: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.versions:
            import scipy
            from . import __version__
            self.versions = {"carpetfield": __version__,
                             "numpy": np.__version__,
                             "scipy": scipy.__version__}

    def record(self, name, digest):
        self.artifacts[name] = digest

    def write(self, path):
        return dump_json(asdict(self), path)
