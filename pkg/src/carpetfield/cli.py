"""Command line driver.

Eight subcommands cover the library surface: ``validate`` (axiom checks),
``build`` (graph export), ``green`` (kernel entries), ``resistance``
(crosswire scaling), ``capacity``, ``sample`` (exact field draws),
``wall`` (hard-wall Gibbs run), ``study`` (the full report suite).

Artifacts are text only (CSV and JSON, reals at 17 significant digits) and
every run directory gets a manifest listing a sha256 per file, so a rerun
with the same config and seed can be compared byte for byte.  Exit status:
0 success, 2 bad input or failed validation, 3 resource cap, 4 structural
or numeric failure.
"""

import argparse
import os
import sys
from dataclasses import asdict

import numpy as np

from . import __version__
from .carpet import (diagonal_cross, dimensions, four_corners, full_cube,
                     menger_sponge, standard_carpet, validate_gsc)
from .config import ConfigDocument, parse_config
from .errors import (CarpetError, InputError, NumericError, ResourceCapError,
                     StructuralError)
from .field import chain_rng, gibbs_hard_wall, sample_gff_matrix
from .graphs import build_inner_graph, build_outer_graph
from .green import DirichletOperator, estimate_rho
from .reporting import RunManifest, dump_json, fmt17, sha256_file, sha256_text
from .studies import capacity_sequence, run_all

_PATTERNS = {"sc2d": standard_carpet, "menger3d": menger_sponge,
             "full_cube": full_cube, "four_corners": four_corners,
             "diagonal_cross": diagonal_cross}


def _resolve(args):
    """Config document from --config or --pattern (the fixtures skip
    validation here; `validate` is the command that judges them)."""
    if args.config and args.pattern:
        raise InputError("give --config or --pattern, not both")
    if args.config:
        doc = parse_config(args.config)
        doc_digest = sha256_file(args.config)
        return doc, doc_digest
    if args.pattern:
        spec = _PATTERNS[args.pattern]()
        return ConfigDocument(spec=spec, source=f"pattern:{args.pattern}"), \
            None
    raise InputError("a carpet is required: --config FILE or --pattern NAME")


class _Emitter:
    def __init__(self, out_dir, manifest):
        self.out_dir = out_dir
        self.manifest = manifest
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)

    def text(self, name, content):
        if not self.out_dir:
            return None
        path = os.path.join(self.out_dir, name)
        with open(path, "w") as fh:
            fh.write(content)
        digest = sha256_text(content)
        self.manifest.record(name, digest)
        return path

    def json(self, name, obj):
        return self.text(name, dump_json(obj))

    def report(self, report):
        name = report.name + ".csv"
        self.text(name, report.to_csv())
        # manifest digest excludes the runtime column
        self.manifest.record(name, report.digest())

    def finish(self):
        if self.out_dir:
            path = os.path.join(self.out_dir, "manifest.json")
            self.manifest.write(path)


def _csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            c if isinstance(c, str) else fmt17(c) for c in row))
    return "\n".join(lines) + "\n"


def _parse_pairs(text):
    pairs = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise InputError(f"bad pair {chunk!r}; expected 'x,y'")
        pairs.append((int(parts[0]), int(parts[1])))
    if not pairs:
        raise InputError("no pairs given")
    return np.asarray(pairs, dtype=np.int64)


# ---------------------------------------------------------------------------
# subcommands

def cmd_validate(doc, args, emit):
    report = validate_gsc(doc.spec, deep=args.deep)
    print(report.summary())
    emit.json("validation.json", {
        "spec": doc.spec.spec_id,
        "passed": report.passed,
        "checks": [asdict(c) for c in report.checks],
        "calibration": report.calibration,
    })
    return 0 if report.passed else 2


def cmd_build(doc, args, emit):
    build = build_inner_graph if args.graph == "inner" else build_outer_graph
    graph = build(doc.spec, args.level, max_cells=doc.solver.get("max_cells"))
    d = graph.dimension
    head = ["vertex"] + [f"x{i}" for i in range(d)] + ["degree_ambient"]
    rows = [(i, *graph.coords[i], graph.degree_ambient[i])
            for i in range(graph.n_vertices)]
    emit.text("vertices.csv", _csv(head, rows))
    emit.text("edges.csv", _csv(("u", "v"), graph.edges))
    emit.json("graph.json", {
        "spec": doc.spec.spec_id, "kind": graph.kind, "level": graph.level,
        "n_vertices": graph.n_vertices, "n_edges": len(graph.edges),
        "coordinate_denominator": graph.denominator,
    })
    print(f"{graph.kind} graph level {graph.level}: "
          f"{graph.n_vertices} vertices, {len(graph.edges)} edges")
    return 0


def cmd_green(doc, args, emit):
    graph = build_outer_graph(doc.spec, args.level,
                              max_cells=doc.solver.get("max_cells"))
    op = DirichletOperator(graph, **doc.operator_options())
    if args.pairs:
        pairs = _parse_pairs(args.pairs)
        bad = (pairs < 0) | (pairs >= op.n)
        if bad.any():
            raise InputError("pair index out of range")
        values = op.green_entries(pairs)
        rows = [(int(x), int(y), v) for (x, y), v in zip(pairs, values)]
    else:
        source = args.source if args.source is not None else 0
        if not 0 <= source < op.n:
            raise InputError("source index out of range")
        col = op.green_column(source)
        rows = [(source, y, col[y]) for y in range(op.n)]
    emit.text("green.csv", _csv(("x", "y", "green"), rows))
    print(f"{len(rows)} Green entries written ({op.backend} backend)")
    return 0


def cmd_resistance(doc, args, emit):
    scale = estimate_rho(doc.spec, n_max=args.n_max,
                         max_cells=doc.solver.get("max_cells"))
    rows = []
    for i, n in enumerate(scale.levels):
        ratio = scale.ratios[i - 1] if i else None
        rows.append((n, scale.resistances[i], ratio))
    emit.text("resistance.csv",
              _csv(("n_level", "resistance", "ratio_to_previous"), rows))
    emit.json("dimensions.json", asdict(dimensions(doc.spec, scale.rho_hat)))
    print(f"rho_hat = {scale.rho_hat:.6f} from level {scale.levels[-1]}")
    return 0


def cmd_capacity(doc, args, emit):
    plan = doc.study_plan(n_min=args.n_min, n_max=args.n_max,
                          master_seed=_seed(doc, args))
    report = capacity_sequence(plan)
    emit.report(report)
    _print_report(report)
    return 0


def cmd_sample(doc, args, emit):
    graph = build_outer_graph(doc.spec, args.level,
                              max_cells=doc.solver.get("max_cells"))
    op = DirichletOperator(graph, **doc.operator_options())
    rng = chain_rng(_seed(doc, args), 1)
    values = sample_gff_matrix(op, rng, args.count)
    rows = [(s, v, values[s, v])
            for s in range(args.count) for v in range(op.n)]
    emit.text("samples.csv", _csv(("sample", "vertex", "value"), rows))
    print(f"{args.count} exact samples on {op.n} vertices")
    return 0


def cmd_wall(doc, args, emit):
    graph = build_outer_graph(doc.spec, args.level,
                              max_cells=doc.solver.get("max_cells"))
    op = DirichletOperator(graph, **doc.operator_options())
    config = doc.chain_config(master_seed=_seed(doc, args))
    samples, stats = gibbs_hard_wall(op, np.arange(op.n), config)
    rows = [(s.chain, s.sweep, v, s.values[v])
            for s in samples for v in range(op.n)]
    emit.text("wall_samples.csv",
              _csv(("chain", "sweep", "vertex", "value"), rows))
    emit.json("wall_stats.json", {
        "n_chains": stats.n_chains, "n_sweeps": stats.n_sweeps,
        "sweep_order": stats.sweep_order, "master_seed": stats.master_seed,
        "observables": {k: asdict(v) for k, v in stats.observables.items()},
    })
    st = stats.observables["mean_height"]
    print(f"mean wall height {st.mean:.6f} +- {st.stderr:.6f} "
          f"(iat {st.iat:.1f}, worst chain z {st.agreement_z:.2f})")
    return 0


def cmd_study(doc, args, emit):
    plan = doc.study_plan(master_seed=_seed(doc, args))
    trials = doc.study.get("trials", 1000)
    for report in run_all(plan, trials=trials):
        emit.report(report)
        _print_report(report)
    return 0


def _seed(doc, args):
    return args.seed if args.seed is not None else doc.master_seed


def _print_report(report):
    for row in report.rows:
        err = f" +- {fmt17(row.stderr)}" if row.stderr is not None else ""
        flag = f"  [{row.flags}]" if row.flags else ""
        print(f"{report.name}  {row.spec}  N={row.n_level}  "
              f"{row.quantity} = {fmt17(row.value)}{err}{flag}")


_COMMANDS = {
    "validate": cmd_validate, "build": cmd_build, "green": cmd_green,
    "resistance": cmd_resistance, "capacity": cmd_capacity,
    "sample": cmd_sample, "wall": cmd_wall, "study": cmd_study,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="carpetfield",
        description="Carpet lattice graphs, Green functions and "
                    "hard-wall Gaussian fields.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="INI config file")
        sp.add_argument("--pattern", choices=sorted(_PATTERNS),
                        help="built-in cell pattern instead of a config")
        sp.add_argument("--out", help="artifact directory")
        sp.add_argument("--seed", type=int, help="master seed override")
        sp.add_argument("--deterministic", action="store_true",
                        help="accepted for interface stability; runs are "
                             "always single-threaded and deterministic")

    p = sub.add_parser("validate", help="check the four cell-pattern axioms")
    common(p)
    p.add_argument("--deep", action="store_true",
                   help="re-check the diagonality axiom at level 2")

    p = sub.add_parser("build", help="export a lattice graph")
    common(p)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--graph", choices=("outer", "inner"), default="outer")

    p = sub.add_parser("green", help="killed Green function entries")
    common(p)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--pairs", help="semicolon list of x,y index pairs")
    p.add_argument("--source", type=int,
                   help="emit the full column of this vertex")

    p = sub.add_parser("resistance", help="crosswire resistance scaling")
    common(p)
    p.add_argument("--n-max", type=int, default=3)

    p = sub.add_parser("capacity", help="renormalized capacity sequence")
    common(p)
    p.add_argument("--n-min", type=int, default=0)
    p.add_argument("--n-max", type=int, default=2)

    p = sub.add_parser("sample", help="exact field samples")
    common(p)
    p.add_argument("--level", type=int, required=True)
    p.add_argument("--count", type=int, default=10)

    p = sub.add_parser("wall", help="hard-wall Gibbs chains")
    common(p)
    p.add_argument("--level", type=int, required=True)

    p = sub.add_parser("study", help="run the full study suite")
    common(p)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        doc, doc_digest = _resolve(args)
        manifest = RunManifest(
            command=" ".join(argv if argv is not None else sys.argv[1:]),
            spec_id=doc.spec.spec_id if doc.spec else "",
            master_seed=_seed(doc, args),
            config_digest=doc_digest,
            parameters={k: v for k, v in vars(args).items()
                        if k not in ("config", "pattern", "out")
                        and v is not None})
        emit = _Emitter(args.out, manifest)
        status = _COMMANDS[args.command](doc, args, emit)
        emit.finish()
        return status
    except InputError as exc:       # includes ConfigError
        for line in getattr(exc, "errors", [str(exc)]):
            print(f"error: {line}", file=sys.stderr)
        return 2
    except ResourceCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    except (StructuralError, NumericError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 4
    except CarpetError as exc:      # anything else from the taxonomy
        print(f"failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
