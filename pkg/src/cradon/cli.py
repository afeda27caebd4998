"""Command-line entry point: ``cradon run|fixtures|calibrate``.

Exit codes: 0 all checks pass, 1 a check fails or a numerical error
occurs, 2 the experiment's hypothesis is violated, 64 invalid config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import config as cf
from . import container
from . import harness as hs
from .numerics import sphere_grid

EXIT_PASS, EXIT_FAIL, EXIT_VIOLATED, EXIT_CONFIG = 0, 1, 2, 64
log = logging.getLogger("cradon")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- experiment dispatch


def _merge(name: str, parts) -> hs.ExperimentReport:
    rep = hs.ExperimentReport(name)
    for label, sub in parts:
        rep.wall_ms += sub.wall_ms
        for c in sub.checks:
            c.name = f"{label}: {c.name}"
        rep.checks.extend(sub.checks)
        rep.provenance[label] = sub.provenance
    return rep.finalize()


def _run_invert(p, cfg, out_dir):
    functions = [(f.name, cf.build_function(f.fn)) for f in p.functions]
    rep = hs.check_roundtrip(functions, p.sphere.build(), p.sgrid.build(), p.volume.build(), p.radius, p.tol, p.refine)
    if out_dir is not None and (p.dump_sinogram or p.dump_volume):
        from .transform import forward_sinogram, invert

        name, phi = functions[0]
        S = forward_sinogram(phi, p.sphere.build(), p.sgrid.build())
        if p.dump_sinogram:
            container.write(out_dir / f"{cfg.name}.{name}.crdn", S)
        if p.dump_volume:
            container.write(out_dir / f"{cfg.name}.{name}.crvl", invert(S, p.volume.build()))
    return rep


def _run_duality(p, cfg):
    from .xfunctions import Constant

    grids = p.grids.build()
    parts = []
    for i, pair in enumerate(p.pairs):
        f = cf.build_x(pair.f) if pair.f is not None else Constant(0.0)
        parts.append((f"pair {i}", hs.check_duality(cf.build_function(pair.phi), f, grids, p.tol, p.method)))
    return _merge("duality", parts)


def _run_lemma1(p, cfg):
    grids = p.grids.build()
    probes = hs.probe_points(p.probes.count, p.probes.radius, cfg.seed)
    parts = []
    for i, pair in enumerate(p.pairs):
        r = hs.check_lemma1(cf.build_function(pair.phi), cf.build_x(pair.psi), probes, grids, p.tol, cfg.seed, p.method)
        parts.append((f"pair {i}", r))
    return _merge("lemma1", parts)


def _run_dual_bound(p, cfg):
    probes = np.array([cf.point(z) for z in p.probes])
    attain = {}
    if p.attain:
        if p.h.kind != "indicator":
            raise ConfigError("params.attain: attainment is only defined for the indicator kernel")
        for i in p.attain:
            if i >= len(probes):
                raise ConfigError(f"params.attain: probe index {i} out of range")
            attain[i] = hs.indicator_measure(probes[i], p.h.radius)
    return hs.check_dual_bound(cf.build_x(p.h), p.R, probes, p.sphere.build(), p.tol, attain, p.attain_tol)


def _run_support_forward(p, cfg):
    T = cf.build_distribution(p.distribution)
    K = cf.build_set(p.set)
    return hs.support_forward(T, K, p.margin, p.m, p.sphere.build(), p.sgrid.build(), p.n_test, cfg.seed, p.tol)


def _run_support_converse(p, cfg):
    T = cf.build_distribution(p.distribution)
    K = cf.build_set(p.set)
    inside = cf.build_distribution(p.inside) if p.inside is not None else None
    return hs.support_converse(
        T, K, cf.point(p.witness), inside, tuple(p.ms), p.directions.build(), p.sphere.build(), p.sgrid.build(), p.resolution, p.ratio_tol, p.tol
    )


def _run_bridge(p, cfg):
    import math

    closed = (lambda t: math.pi**1.5 * math.exp(-t * t)) if p.closed_form == "gaussian" else None
    probes = None if p.probes is None else [(b.node, b.t) for b in p.probes]
    return hs.check_real_radon_bridge(cf.build_function(p.function), probes, p.sphere.build(), p.sgrid.build(), p.tol, closed, seed=cfg.seed)


def run_experiment(cfg: cf.ExperimentConfig, out_dir: Path | None = None) -> hs.ExperimentReport:
    """Execute a validated config and return its report (config echoed in)."""
    p = cfg.params
    kind = cfg.experiment
    if kind == "transform":
        rep = hs.check_forward(p.quad.build(), p.s_radius, p.tol, seed=cfg.seed)
    elif kind == "invert":
        rep = _run_invert(p, cfg, out_dir)
    elif kind == "calibrate":
        rep = hs.check_calibration(tuple(p.radii), p.sgrid.build(), p.sphere.build(), p.tol, p.refine_tol)
    elif kind == "duality":
        rep = _run_duality(p, cfg)
    elif kind == "lemma1":
        rep = _run_lemma1(p, cfg)
    elif kind == "dual-bound":
        rep = _run_dual_bound(p, cfg)
    elif kind == "support-forward":
        rep = _run_support_forward(p, cfg)
    elif kind == "support-converse":
        rep = _run_support_converse(p, cfg)
    elif kind == "real-bridge":
        rep = _run_bridge(p, cfg)
    else:
        rep = hs.check_geometry(p.resolution, p.delta, p.directions.build())
    rep.experiment = cfg.name
    rep.config = cfg.echo()
    return rep


# ---------------------------------------------------------------- config loading


def _format_validation(err: cf.ConfigInvalid) -> str:
    return "invalid config:\n" + "\n".join(f"  field {loc}: {msg}" for loc, msg in err.problems)


def load(path, overrides=()) -> cf.ExperimentConfig:
    """Read, override and validate a config; raises ConfigError with a diagnostic."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    try:
        for o in overrides:
            cf.apply_override(data, o)
        return cf.load_config(data)
    except cf.ConfigInvalid as exc:
        raise ConfigError(f"{path}: {_format_validation(exc)}") from exc
    except (ValueError, IndexError, KeyError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def fixtures_dir() -> Path:
    return Path(str(resources.files("cradon") / "fixtures"))


def list_fixtures(directory=None):
    """[(name, description, error or None)] for every *.json in the fixture directory."""
    directory = Path(directory) if directory is not None else fixtures_dir()
    out = []
    if not directory.is_dir():
        return out
    for f in sorted(directory.glob("*.json")):
        try:
            cfg = load(f)
            out.append((f.stem, cfg.description or cfg.experiment, None))
        except ConfigError as exc:
            out.append((f.stem, "", str(exc).splitlines()[-1].strip()))
    return out


def resolve_config(arg: str) -> Path:
    """A path, or the name of a shipped fixture."""
    p = Path(arg)
    if p.exists():
        return p
    cand = fixtures_dir() / (arg if arg.endswith(".json") else arg + ".json")
    return cand if cand.exists() else p


# ---------------------------------------------------------------- commands


def cmd_run(args) -> int:
    try:
        cfg = load(resolve_config(args.config), args.override or ())
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        rep = run_experiment(cfg, out_dir)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # report the failing operation, exit 1
        op = exc.__traceback__
        while op.tb_next is not None:
            op = op.tb_next
        where = op.tb_frame.f_code.co_name
        print(f"error in {where}: {type(exc).__name__}: {exc}", file=sys.stderr)
        log.debug("traceback", exc_info=True)
        return EXIT_FAIL
    (out_dir / f"{cfg.name}.json").write_text(rep.to_json(), encoding="utf-8")
    (out_dir / f"{cfg.name}.csv").write_text(rep.to_csv(), encoding="utf-8")
    for c in rep.checks:
        log.info("%s %s: measured %s, reference %s, tol %s", "PASS" if c.passed else "FAIL", c.name, c.measured, c.reference, c.tol)
    print(f"{cfg.name}: {rep.status} ({sum(c.passed for c in rep.checks)}/{len(rep.checks)} checks, {rep.wall_ms:.0f} ms)")
    if rep.status == hs.VIOLATED:
        return EXIT_VIOLATED
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_fixtures(args) -> int:
    for name, desc, err in list_fixtures(args.dir):
        if err is None:
            print(f"{name:34s} {desc}")
        else:
            print(f"{name:34s} [invalid] {err}")
    return EXIT_PASS


def cmd_calibrate(args) -> int:
    from .numerics import SGrid
    from .transform import calibrate_cn

    if args.res < 9 or args.res % 2 == 0:
        print("--res must be odd and >= 9", file=sys.stderr)
        return EXIT_CONFIG
    r = calibrate_cn(SGrid(0j, 1.5, args.res), sphere_grid(16, 16, section=True), radius=args.radius)
    print(f"c_hat = {r.c_hat:.10g}  analytic 1/(2 pi^3) = {r.analytic:.10g}  relative deviation = {r.rel_dev:.3g}")
    return EXIT_PASS if r.rel_dev <= 1e-3 else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cradon", description="Complex Radon transform experiments in C^2.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config (path or fixture name)")
    run.add_argument("config")
    run.add_argument("--out", default=".", help="directory for the report JSON/CSV and dumps")
    run.add_argument("--override", action="append", metavar="KEY=VALUE", help="set a dotted config key (repeatable)")
    run.add_argument("-v", "--verbose", action="store_true")
    run.set_defaults(func=cmd_run)
    fx = sub.add_parser("fixtures", help="list shipped example configs")
    fx.add_argument("--dir", default=None, help=argparse.SUPPRESS)
    fx.set_defaults(func=cmd_fixtures, verbose=False)
    cal = sub.add_parser("calibrate", help="calibrate the inversion constant")
    cal.add_argument("--res", type=int, default=129, help="s-grid nodes per axis (odd)")
    cal.add_argument("--radius", type=float, default=0.0, help="evaluation radius |z|")
    cal.set_defaults(func=cmd_calibrate, verbose=False)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
