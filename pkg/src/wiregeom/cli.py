"""Command-line entry point.

Every subcommand loads a model (built-in name or JSON file), runs one
analysis and writes a report.  Text reports are JSON documents that embed
the run configuration; tabular results are also available as CSV.
Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .berry import ChargeError, SlicingInapplicable, local_charges, slice_scan, stability_experiment
from .bloch import BudgetError, HamiltonianFamily, band_structure
from .model import BUILTIN_NAMES, ModelError, QuotientGraphModel, builtin, load_model
from .nctorus import (
    FluxSpec,
    butterfly,
    classify,
    classify_diamond,
    classify_honeycomb,
    diamond_flux,
    fullness_report,
    honeycomb_flux,
    parse_fraction,
)
from .singularity import analyze

__all__ = ["RunConfig", "main", "run"]

DOMAIN_ERRORS = (ModelError, SlicingInapplicable, ChargeError, BudgetError, ValueError)


@dataclass
class RunConfig:
    """Everything needed to reproduce a run."""

    command: str
    model: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: str | None = None
    format: str = "text"

    def to_dict(self) -> dict:
        return asdict(self)


class UsageError(Exception):
    """Arguments parse but do not fit together."""


def _model(source: str) -> QuotientGraphModel:
    if source in BUILTIN_NAMES:
        return builtin(source)
    path = Path(source)
    if not path.exists():
        raise ModelError(f"model {source!r} is neither a built-in ({', '.join(BUILTIN_NAMES)}) nor a file")
    return load_model(path.read_text(encoding="utf-8"))


def _fractions(text: str) -> list:
    return [parse_fraction(x) for x in text.split(",") if x.strip()]


def _positive(kind: Callable):
    def conv(text: str):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def _report(cfg: RunConfig, body: dict) -> str:
    return json.dumps({"config": cfg.to_dict(), "result": body}, indent=2, default=str) + "\n"


def _need_text(cfg: RunConfig) -> None:
    if cfg.format != "text":
        raise UsageError(f"{cfg.command} has no CSV form; use --format text")


# -- subcommands ---------------------------------------------------------------


def _bands(a, cfg):
    table = band_structure(HamiltonianFamily.of(_model(a.model)), a.grid)
    if cfg.format == "csv":
        return table.to_csv()
    return _report(cfg, {"k": table.k.tolist(), "bands": table.bands.tolist()})


def _scan(a, cfg):
    rep = analyze(HamiltonianFamily.of(_model(a.model)), a.grid, a.coarse_tol)
    if cfg.format == "csv":
        lines = ["component,isolated,stratum,gap," + ",".join(f"k{i + 1}" for i in range(len(rep.points[0].k)))
                 if rep.points else "component,isolated,stratum,gap"]
        for p in rep.points:
            lines.append(",".join([str(p.component), str(int(p.isolated)), p.stratum.label, f"{p.gap:.3e}"]
                                  + [f"{x:.17g}" for x in p.k]))
        return "\n".join(lines) + "\n"
    return _report(cfg, rep.to_dict())


def _chern(a, cfg):
    scan = slice_scan(HamiltonianFamily.of(_model(a.model)), a.axis, a.slices, a.M)
    return scan.to_csv() if cfg.format == "csv" else _report(cfg, scan.to_dict())


def _charges(a, cfg):
    _need_text(cfg)
    fam = HamiltonianFamily.of(_model(a.model))
    rep = analyze(fam, a.grid)
    return _report(cfg, local_charges(fam, rep, a.axis, a.M).to_dict())


def _stability(a, cfg):
    _need_text(cfg)
    fam = HamiltonianFamily.of(_model(a.model))
    res = stability_experiment(fam, a.epsilon, a.seed, grid=a.grid, M=a.M,
                               complex_weights=a.complex, radius=a.radius)
    return _report(cfg, res.to_dict())


def _butterfly(a, cfg):
    model = _model(a.model)
    direction = _fractions(a.direction) if a.direction else [1] * (model.dim * (model.dim - 1) // 2)
    rows = butterfly(model, direction, a.max_q, twists=a.twists, gap_floor=a.gap_floor)
    if cfg.format == "csv":
        lines = ["p,q,eigenvalue"]
        for r in rows:
            lines += [f"{r.p},{r.q},{e:.12g}" for e in r.eigenvalues]
        return "\n".join(lines) + "\n"
    return _report(cfg, {"rows": [{"p": r.p, "q": r.q, "flux": str(r.flux), "gap_count": r.gap_count,
                                   "gaps": r.gaps} for r in rows]})


def _flux_for(model_name: str, a) -> FluxSpec:
    if a.flux is not None:
        return FluxSpec.from_upper(_model(a.model).dim, _fractions(a.flux))
    if a.phi is None:
        raise UsageError("give --flux (lattice entries) or --phi (geometric parameters)")
    phis = _fractions(a.phi)
    if model_name == "honeycomb" and len(phis) == 1:
        return honeycomb_flux(phis[0])
    if model_name == "D" and len(phis) == 3:
        return diamond_flux(phis)
    raise UsageError("--phi takes one value for honeycomb or three for D; use --flux for G")


def _nc_classify(a, cfg):
    _need_text(cfg)
    if a.phi is not None and a.flux is None:
        phis = _fractions(a.phi)
        if a.model == "honeycomb" and len(phis) == 1:
            return _report(cfg, classify_honeycomb(phis[0]).to_dict())
        if a.model == "D" and len(phis) == 3:
            return _report(cfg, classify_diamond(phis).to_dict())
    return _report(cfg, classify(a.model, _flux_for(a.model, a)).to_dict())


def _nc_burnside(a, cfg):
    _need_text(cfg)
    model = _model(a.model)
    flux = _flux_for(a.model, a)
    try:
        cls = classify(a.model, flux)
    except ValueError:
        cls = None
    seeds = tuple(range(a.seed, a.seed + a.samples))
    return _report(cfg, fullness_report(model, flux, seeds=seeds, classification=cls).to_dict())


def _validate(a, cfg):
    _need_text(cfg)
    m = _model(a.model)
    return _report(cfg, {"valid": True, "name": m.name, "dim": m.dim, "vertices": m.num_vertices,
                         "edges": m.num_edges, "first_betti": m.num_edges - m.num_vertices + 1})


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wiregeom", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, func, help_):
        s = sub.add_parser(name, help=help_, description=help_)
        s.add_argument("--model", required=True,
                       help=f"built-in name ({', '.join(BUILTIN_NAMES)}) or path to a model JSON file")
        s.add_argument("--seed", type=int, default=0, help="seed for randomized steps (default 0)")
        s.add_argument("--threads", type=_positive(int), default=None,
                       help="worker threads for batched eigensolves (default: all cores)")
        s.add_argument("--format", choices=("text", "csv"), default="text", help="report format")
        s.add_argument("--output", "-o", default=None, help="write here instead of stdout")
        s.set_defaults(func=func)
        return s

    s = cmd("bands", _bands, "Bloch bands on a uniform k-grid (zero magnetic field).")
    s.add_argument("--grid", type=_positive(int), default=16, help="points per axis")

    s = cmd("scan", _scan, "Locate, refine and classify band degeneracies; Morse/Dirac test each crossing.")
    s.add_argument("--grid", type=_positive(int), default=32, help="coarse grid points per axis")
    s.add_argument("--coarse-tol", type=_positive(float), default=None,
                   help="gap threshold for candidates (default 0.3 * width / bands)")

    s = cmd("chern", _chern, "Per-band Chern numbers on coordinate slices and the jumps between them.")
    s.add_argument("--axis", type=int, default=0, help="slicing coordinate (0-based)")
    s.add_argument("--slices", type=_positive(int), default=16, help="number of slices S")
    s.add_argument("--M", type=_positive(int), default=24, help="plaquette grid per slice axis")

    s = cmd("charges", _charges, "Local monopole charge of every isolated degenerate point.")
    s.add_argument("--axis", type=int, default=None, help="slicing coordinate (default: first separating)")
    s.add_argument("--grid", type=_positive(int), default=32, help="scan grid")
    s.add_argument("--M", type=_positive(int), default=24, help="plaquette grid per slice axis")

    s = cmd("stability", _stability, "Perturb edge weights and track degenerate points and their charges.")
    s.add_argument("--epsilon", type=_positive(float), default=None,
                   help="perturbation size, absolute (default 0.01 * spectral width)")
    s.add_argument("--complex", action="store_true", help="complex weight perturbation")
    s.add_argument("--grid", type=_positive(int), default=32, help="scan grid")
    s.add_argument("--M", type=_positive(int), default=24, help="plaquette grid per slice axis")
    s.add_argument("--radius", type=_positive(float), default=0.3, help="matching radius")

    s = cmd("butterfly", _butterfly, "Spectra and gap counts along a ray of rational magnetic flux.")
    s.add_argument("--direction", default=None,
                   help="lattice flux direction, comma-separated rationals (default all ones)")
    s.add_argument("--max-q", type=_positive(int), default=8, help="largest flux denominator")
    s.add_argument("--twists", type=_positive(int), default=8, help="twist samples per axis")
    s.add_argument("--gap-floor", type=_positive(float), default=1e-3,
                   help="minimal gap, relative to spectral width")

    for name, func, help_ in (
        ("nc-classify", _nc_classify, "Analytic full-versus-proper verdict for the magnetic algebra."),
        ("nc-burnside", _nc_burnside, "Numerical fullness check of the magnetic algebra at seeded twists."),
    ):
        s = cmd(name, func, help_)
        s.add_argument("--flux", default=None, help="lattice flux theta_12,theta_13,... as exact rationals")
        s.add_argument("--phi", default=None,
                       help="geometric parameters: one rational for honeycomb, three for D")
        if name == "nc-burnside":
            s.add_argument("--samples", type=_positive(int), default=3, help="twist seeds for the majority")

    cmd("validate", _validate, "Check a model file and print its summary.")
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if a.threads is not None:
        import numba

        numba.set_num_threads(min(a.threads, numba.config.NUMBA_NUM_THREADS))
    params = {k: v for k, v in vars(a).items()
              if k not in ("command", "model", "seed", "output", "format", "func", "threads")}
    cfg = RunConfig(a.command, a.model, params, a.seed, a.output, a.format)
    try:
        text = a.func(a, cfg)
    except UsageError as exc:
        print(f"wiregeom {a.command}: usage error: {exc}", file=sys.stderr)
        return 2
    except DOMAIN_ERRORS as exc:
        print(f"wiregeom {a.command}: {exc}", file=sys.stderr)
        return 1
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
