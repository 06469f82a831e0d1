"""Command-line driver: ``gsmant solve | compress | compose | verify``.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 a
verification threshold was not met.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .array import ArrayElement, ArrayLayout, build_system, compose_direct, compose_iterative
from .errors import GsmantError, ValidationError
from .gsm import (DEFAULT_IOTA, EIGEN, SINGULAR, CompressedGsm, Gsm, check_invariants, compress,
                  gain_pattern, farfield, reconstruction_error)
from .io import (RunConfig, load_config, load_config_mesh, load_layout, read_gsm, read_header,
                 write_compressed, write_farfield_csv, write_gsm, write_touchstone)
from .mom import ELECTRIC, MAGNETIC, AssemblyOptions
from .pipeline import ElementModel

log = logging.getLogger("gsmant")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_VERIFY = 0, 2, 3, 4


# ----------------------------------------------------------------------------
# solve

def _model(cfg: RunConfig) -> ElementModel:
    mesh = load_config_mesh(cfg)
    ports = {p.port: (p.spec, p.modes) for p in cfg.ports}
    return ElementModel(mesh, ports, cfg.center, AssemblyOptions(rule_degree=cfg.rule_degree))


_WORKER: dict = {}


def _worker_init(cfg: RunConfig):
    _WORKER["model"] = _model(cfg)
    _WORKER["cfg"] = cfg


def _solve_point(args) -> tuple[int, Gsm]:
    i, f, formulation, l_max = args
    return i, _WORKER["model"].gsm(f, formulation, l_max)


def _farfield_table(g: Gsm, path: Path) -> None:
    theta = np.radians(np.arange(0.0, 180.5, 1.0))
    th = np.concatenate([theta, theta])
    ph = np.concatenate([np.zeros_like(theta), np.full_like(theta, math.pi / 2)])
    v = np.zeros(g.n_ports, complex)
    v[0] = 1.0
    E = farfield(g, v)(th, ph)
    write_farfield_csv(path, th, ph, E, gain_pattern(g, v, th, ph))


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    if args.magnetic:
        cfg.formulation = MAGNETIC
    elif args.electric:
        cfg.formulation = ELECTRIC
    if args.l_max is not None:
        cfg.l_max = args.l_max
    if cfg.l_max is not None and cfg.l_max < 1:
        raise ValidationError("l_max must be >= 1")
    out = Path(args.out) if args.out else cfg.output_dir
    t0 = time.perf_counter()
    model = _model(cfg)
    out.mkdir(parents=True, exist_ok=True)
    log.info("config %s: mesh %s, %d triangles, %d unknowns (%d electric, %d magnetic), "
             "enclosing radius %.6g m", cfg.source_hash, cfg.mesh_path.name, model.mesh.n_triangles,
             model.rwg.n_electric + model.rwg.n_magnetic, model.rwg.n_electric,
             model.rwg.n_magnetic, model.radius)
    freqs = cfg.frequencies
    tasks = [(i, float(f), cfg.formulation, cfg.l_max) for i, f in enumerate(freqs)]
    if args.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(args.jobs, initializer=_worker_init, initargs=(cfg,)) as pool:
            results = dict(pool.map(_solve_point, tasks))
    else:
        _WORKER.update(model=model, cfg=cfg)
        results = dict(map(_solve_point, tasks))
    info = {"config_hash": cfg.source_hash, "unknowns": model.rwg.n_electric + model.rwg.n_magnetic, "version": __version__}
    gammas = []
    for i, f, *_ in tasks:
        g = results[i]
        path = out / f"{cfg.prefix}_{i:03d}.gsm"
        write_gsm(g, path, info)
        gammas.append(g.Gamma)
        if args.farfield:
            _farfield_table(g, out / f"{cfg.prefix}_{i:03d}_farfield.csv")
        log.info("wrote %s (J=%d, M_p=%d)", path.name, g.basis.J, g.n_ports)
    n = gammas[0].shape[0]
    if all(G.shape == (n, n) for G in gammas):
        write_touchstone(out / f"{cfg.prefix}.s{n}p", freqs, gammas, results[0].port_labels)
    else:
        log.warning("propagating mode count changes over the sweep; Touchstone file skipped")
    log.info("solved %d frequencies in %.2fs", len(tasks), time.perf_counter() - t0)
    return EXIT_OK


# ----------------------------------------------------------------------------
# compress

def cmd_compress(args) -> int:
    g = read_gsm(args.gsm)
    if not isinstance(g, Gsm):
        raise ValidationError(f"{args.gsm} is already compressed")
    cg = compress(g, args.iota, args.kind)
    err = reconstruction_error(g, cg, args.trials, args.seed)
    out = Path(args.out) if args.out else Path(args.gsm).with_suffix(".cgsm")
    write_compressed(cg, out, {"err": err, "seed": args.seed, "trials": args.trials,
                               "source": Path(args.gsm).name})
    print(f"N = {cg.N} of {cg.dim}  iota = {cg.iota:.3e}  kind = {cg.kind}")
    print(f"Err = {err:.3e}  memory saving = {100 * cg.memory_saving:.2f}%")
    log.info("wrote %s", out)
    return EXIT_OK


# ----------------------------------------------------------------------------
# compose

def cmd_compose(args) -> int:
    lay = load_layout(args.layout)
    method = "direct" if args.direct else "iterative" if args.iterative else lay.method
    tol = args.tol if args.tol is not None else lay.tol
    n_freq = len(lay.elements[0].files)
    freqs, mats, labels = [], [], []
    for i in range(n_freq):
        els = []
        for e in lay.elements:
            g = read_gsm(e.files[i])
            radius = e.radius if e.radius is not None else getattr(g, "radius", None)
            if not radius:
                raise ValidationError(f"element {e.name}: no enclosing radius in file or layout")
            els.append(ArrayElement(g, e.center, radius, e.name))
        system = build_system(ArrayLayout(els))
        t0 = time.perf_counter()
        if method == "direct":
            Gamma = compose_direct(system)
            extra = ""
        else:
            res = compose_iterative(system, np.eye(system.n_ports), tol, lay.max_iter)
            Gamma, extra = res.w, f", {res.iterations} iterations"
        f = els[0].gsm.frequency
        log.info("f=%.6g Hz: %d elements, %d ports, %d waves, %s %.2fs%s", f, len(els), system.n_ports,
                 system.n_waves, method, time.perf_counter() - t0, extra)
        freqs.append(f)
        mats.append(Gamma)
        if not labels:
            labels = [f"{e.name}/{lab}" for e in els for lab in e.gsm.port_labels]
    out = Path(args.out) if args.out else Path(args.layout).with_suffix(f".s{mats[0].shape[0]}p")
    write_touchstone(out, freqs, mats, labels)
    log.info("wrote %s", out)
    return EXIT_OK


# ----------------------------------------------------------------------------
# verify

def _full_report(g: Gsm, args) -> list[tuple[str, float, bool]]:
    rep = check_invariants(g)
    ok = rep.passed(args.unitarity_tol, args.reciprocity_tol, args.passivity_tol, args.circle_tol)
    rows = [("unitarity defect", rep.unitarity, ok["unitarity"]),
            ("reciprocity defect", rep.reciprocity, ok["reciprocity"]),
            ("passivity margin", rep.passivity_margin, ok["passivity"]),
            ("spectral-circle defect", rep.circle_defect, ok["circle"])]
    return rows


def _compressed_report(cg: CompressedGsm, args) -> list[tuple[str, float, bool]]:
    t = cg.values
    if cg.kind == EIGEN:
        circle = float(np.max(np.abs(np.abs(t + 0.5) - 0.5), initial=0.0))
        rows = [("spectral-circle defect (retained)", circle, circle < args.circle_tol)]
    else:
        rows = [("largest singular value", float(np.abs(t).max()), float(np.abs(t).max()) <= 1 + args.passivity_tol)]
    if args.reference:
        ref = read_gsm(args.reference)
        if not isinstance(ref, Gsm):
            raise ValidationError("--reference must be a full GSM file")
        err = reconstruction_error(ref, cg, args.trials, args.seed)
    else:
        err = read_header(args.gsm).get("info", {}).get("err")
        if err is None:
            raise ValidationError("compressed file carries no error record; pass --reference")
    rows.append(("reconstruction Err", float(err), float(err) < args.err_tol))
    return rows


_VERIFY_DEFAULTS = {"unitarity_tol": 1e-2, "reciprocity_tol": 1e-12, "passivity_tol": 1e-6,
                    "circle_tol": 1e-6, "err_tol": 1e-3}


def _thresholds(args) -> None:
    """Fill unset tolerances from the ``[verify]`` section of ``--config``, then defaults."""
    section = {}
    if args.config:
        cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            cp.read_string(Path(args.config).read_text(), source=args.config)
        except configparser.Error as exc:
            raise ValidationError(f"{args.config}: {exc}") from exc
        if cp.has_section("verify"):
            section = cp["verify"]
    for key, default in _VERIFY_DEFAULTS.items():
        if getattr(args, key) is None:
            try:
                setattr(args, key, float(section.get(key, default)))
            except ValueError as exc:
                raise ValidationError(f"[verify] {key}: {exc}") from exc


def cmd_verify(args) -> int:
    _thresholds(args)
    g = read_gsm(args.gsm)
    if isinstance(g, Gsm):
        rows = _full_report(g, args)
        print(f"{args.gsm}: full GSM, {g.n_ports} ports, J = {g.basis.J}, f = {g.frequency:.6g} Hz")
    else:
        rows = _compressed_report(g, args)
        print(f"{args.gsm}: compressed GSM, N = {g.N} of {g.dim}, iota = {g.iota:.3e}")
    for name, value, ok in rows:
        print(f"  {name:36s} {value: .3e}  {'pass' if ok else 'FAIL'}")
    passed = all(ok for *_, ok in rows)
    print("PASS" if passed else "FAIL")
    return EXIT_OK if passed else EXIT_VERIFY


# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gsmant", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    p.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="element GSM per sweep frequency")
    s.add_argument("config")
    f = s.add_mutually_exclusive_group()
    f.add_argument("--magnetic", action="store_true", help="magnetic-current port formulation")
    f.add_argument("--electric", action="store_true", help="electric-current port formulation")
    s.add_argument("--l-max", type=int, help="spherical truncation (default: from enclosing radius)")
    s.add_argument("--out", help="output directory (overrides the config)")
    s.add_argument("--jobs", type=int, default=1, help="worker processes for the sweep")
    s.add_argument("--farfield", action="store_true", help="also write far-field CSV cuts")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("compress", help="spectral compression of a GSM file")
    c.add_argument("gsm")
    c.add_argument("--iota", type=float, default=DEFAULT_IOTA)
    c.add_argument("--kind", choices=(EIGEN, SINGULAR), default=EIGEN)
    c.add_argument("--seed", type=int, default=0, help="seed for the error trials")
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--out")
    c.set_defaults(func=cmd_compress)

    a = sub.add_parser("compose", help="array S-parameters from element GSMs")
    a.add_argument("layout")
    m = a.add_mutually_exclusive_group()
    m.add_argument("--direct", action="store_true")
    m.add_argument("--iterative", action="store_true")
    a.add_argument("--tol", type=float)
    a.add_argument("--out", help="Touchstone output path")
    a.set_defaults(func=cmd_compose)

    v = sub.add_parser("verify", help="invariant report for a GSM file")
    v.add_argument("gsm")
    v.add_argument("--reference", help="full GSM for the reconstruction error of a compressed file")
    v.add_argument("--config", help="file whose [verify] section sets the thresholds")
    for key, default in _VERIFY_DEFAULTS.items():
        v.add_argument("--" + key.replace("_", "-"), type=float, help=f"default {default:g}")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--trials", type=int, default=100)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr,
                        force=True)
    try:
        if getattr(args, "jobs", 1) < 1:
            raise ValidationError("--jobs must be >= 1")
        return args.func(args)
    except GsmantError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code if exc.exit_code in (EXIT_VALIDATION, EXIT_NUMERICAL) else 1
    except ValueError as exc:
        log.error("invalid input: %s", exc)
        return EXIT_VALIDATION
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
