"""INI configuration for the command-line tools.

Four sections, all optional except [carpet]:

    [carpet]   pattern = sc2d | menger3d | full_cube, or an explicit
               dimension / length_scale / cells triple; label; the
               allow_full_cube escape hatch.
    [solver]   pad, dense_cap, splu_cap, residual_tol, max_unknowns,
               max_cells.
    [mcmc]     n_burnin, n_steps, thinning, sweep_order, n_chains.
    [study]    n_min, n_max, k_coarse, tilt_alpha, tilt_shift,
               n_importance, eps_list, trials, master_seed.

Values are Python literals (tuples for cells, floats, booleans).  Parsing
collects every problem before failing, so one round trip reports all of an
invalid file's mistakes, each tagged section.key.
"""

import ast
import configparser
from dataclasses import dataclass, field

from .carpet import CarpetSpec, full_cube, menger_sponge, standard_carpet
from .errors import ConfigError, InputError
from .field import ChainConfig

_PATTERNS = {"sc2d": standard_carpet, "menger3d": menger_sponge,
             "full_cube": full_cube}


def _int(lo=None, hi=None):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValueError("expected an integer")
        if lo is not None and v < lo:
            raise ValueError(f"must be >= {lo}")
        if hi is not None and v > hi:
            raise ValueError(f"must be <= {hi}")
        return v
    return check


def _real(lo=None, strict=False):
    def check(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValueError("expected a number")
        v = float(v)
        if lo is not None and (v <= lo if strict else v < lo):
            raise ValueError(f"must be {'>' if strict else '>='} {lo}")
        return v
    return check


def _bool(v):
    if not isinstance(v, bool):
        raise ValueError("expected true or false")
    return v


def _string(options=None):
    def check(v):
        if not isinstance(v, str):
            raise ValueError("expected a string")
        if options and v not in options:
            raise ValueError(f"must be one of {sorted(options)}")
        return v
    return check


def _cells(v):
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError("expected a nonempty list of coordinate tuples")
    out = []
    for entry in v:
        if not isinstance(entry, (list, tuple)) or \
                not all(isinstance(c, int) and not isinstance(c, bool)
                        for c in entry):
            raise ValueError(f"bad cell {entry!r}: integer tuples only")
        out.append(tuple(entry))
    return out


def _eps_list(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = (v,)
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError("expected a radius or list of radii")
    out = []
    for e in v:
        if isinstance(e, bool) or not isinstance(e, (int, float)) or e <= 0:
            raise ValueError("radii must be positive numbers")
        out.append(float(e))
    return tuple(out)


_SCHEMA = {
    "carpet": {
        "pattern": _string(set(_PATTERNS)),
        "dimension": _int(2),
        "length_scale": _int(3),
        "cells": _cells,
        "label": _string(),
        "allow_full_cube": _bool,
    },
    "solver": {
        "pad": _int(1),
        "dense_cap": _int(1),
        "splu_cap": _int(1),
        "residual_tol": _real(0.0, strict=True),
        "max_unknowns": _int(1),
        "max_cells": _int(1),
    },
    "mcmc": {
        "n_burnin": _int(0),
        "n_steps": _int(1),
        "thinning": _int(1),
        "sweep_order": _string({"checkerboard", "lexicographic", "random"}),
        "n_chains": _int(1),
    },
    "study": {
        "n_min": _int(0),
        "n_max": _int(0),
        "k_coarse": _int(1),
        "tilt_alpha": _real(0.0, strict=True),
        "tilt_shift": _real(0.0),
        "n_importance": _int(2),
        "eps_list": _eps_list,
        "trials": _int(1),
        "master_seed": _int(0),
    },
}


@dataclass
class ConfigDocument:
    spec: CarpetSpec
    solver: dict = field(default_factory=dict)
    mcmc: dict = field(default_factory=dict)
    study: dict = field(default_factory=dict)
    source: str = ""

    def chain_config(self, master_seed=None):
        seed = self.master_seed if master_seed is None else master_seed
        return ChainConfig(master_seed=seed, **self.mcmc)

    @property
    def master_seed(self):
        return self.study.get("master_seed", 0)

    def study_plan(self, **overrides):
        from .studies import StudyPlan
        kw = {k: v for k, v in self.study.items()
              if k not in ("trials", "master_seed")}
        kw["master_seed"] = self.master_seed
        kw["chain"] = self.chain_config()
        if "pad" in self.solver:
            kw["pad"] = self.solver["pad"]
        if "max_cells" in self.solver:
            kw["max_cells"] = self.solver["max_cells"]
        kw.update(overrides)
        return StudyPlan(spec=self.spec, **kw)

    def operator_options(self):
        keys = ("dense_cap", "splu_cap", "residual_tol", "max_unknowns")
        return {k: self.solver[k] for k in keys if k in self.solver}


def _parse_sections(parser, errors):
    values = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            errors.append(f"{section}: unknown section")
            continue
        schema = _SCHEMA[section]
        out = {}
        for key, raw in parser.items(section):
            if key not in schema:
                errors.append(f"{section}.{key}: unknown key")
                continue
            try:
                value = ast.literal_eval(raw)
            except (ValueError, SyntaxError):
                value = raw.strip()
            try:
                out[key] = schema[key](value)
            except ValueError as exc:
                errors.append(f"{section}.{key}: {exc}")
        values[section] = out
    return values


def _build_spec(carpet, errors):
    pattern = carpet.get("pattern")
    explicit = {"dimension", "length_scale", "cells"} & set(carpet)
    if pattern and explicit:
        errors.append("carpet: give either pattern or explicit cells, "
                      "not both")
        return None
    if pattern:
        return _PATTERNS[pattern]()
    if explicit != {"dimension", "length_scale", "cells"}:
        missing = {"dimension", "length_scale", "cells"} - explicit
        errors.append(
            "carpet: missing " + ", ".join(sorted(missing))
            + " (or use pattern = ...)")
        return None
    d, ell = carpet["dimension"], carpet["length_scale"]
    seen = set()
    ok = True
    for cell in carpet["cells"]:
        if len(cell) != d:
            errors.append(f"carpet.cells: {cell} is not {d}-dimensional")
            ok = False
        elif not all(0 <= c < ell for c in cell):
            errors.append(
                f"carpet.cells: {cell} outside range 0..{ell - 1}")
            ok = False
        elif cell in seen:
            errors.append(f"carpet.cells: duplicate entry {cell}")
            ok = False
        seen.add(cell)
    if not ok:
        return None
    try:
        return CarpetSpec(d, ell, tuple(carpet["cells"]),
                          allow_full_cube=carpet.get(
                              "allow_full_cube", False),
                          label=carpet.get("label", ""))
    except InputError as exc:
        errors.append(f"carpet: {exc}")
        return None


def parse_config(path):
    """Read and validate an INI file; raises ConfigError listing every
    problem found, not just the first."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"])
    except configparser.Error as exc:
        raise ConfigError([f"parse failure: {exc}"])

    errors = []
    values = _parse_sections(parser, errors)
    if "carpet" not in values:
        errors.append("carpet: section required")
        spec = None
    else:
        spec = _build_spec(values["carpet"], errors)

    mcmc = values.get("mcmc", {})
    study = values.get("study", {})
    if {"n_min", "n_max"} <= set(study) and study["n_min"] > study["n_max"]:
        errors.append("study.n_min: exceeds n_max")
    if errors:
        raise ConfigError(errors)
    try:
        ChainConfig(**mcmc)
    except (InputError, TypeError) as exc:   # belt and braces
        raise ConfigError([f"mcmc: {exc}"])
    return ConfigDocument(spec=spec, solver=values.get("solver", {}),
                          mcmc=mcmc, study=study, source=str(path))
