"""Command line front end: ``rq <subcommand> [options]``."""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import tomli

from . import ball as ballmod
from . import diagrams, phase, records, sampler, smallcanc, spectra
from .errors import CapacityError, InputError, RQError
from .groups import DirectWithFinite, Finite, free_rank, parse_group

log = logging.getLogger("rqlab")

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_NUMERIC, EXIT_INTERNAL = 0, 2, 3, 4, 5


def _density(text) -> Fraction:
    try:
        return Fraction(str(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"bad density {text!r}") from exc


def _int_list(text):
    return tuple(int(x) for x in str(text).split(",") if x.strip())


def _density_list(text):
    return tuple(_density(x) for x in str(text).split(",") if x.strip())


def _common(p):
    g = p.add_argument_group("global")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="master seed (default 0)")
    g.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads (default 1)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    g.add_argument("--csv", default=argparse.SUPPRESS, help="also write plot data here")
    g.add_argument("--budget-samples", type=int, default=argparse.SUPPRESS,
                   help="maximum relators per experiment (default 1e7)")
    g.add_argument("--budget-nodes", type=int, default=argparse.SUPPRESS,
                   help="maximum Cayley ball size (default 5e6)")
    g.add_argument("--budget-enum", type=int, default=argparse.SUPPRESS,
                   help="maximum letter slots for exact diagram counts (default 40)")
    g.add_argument("--config", default=argparse.SUPPRESS, help="TOML file with defaults for these options")


def _measure_args(p, need_ell=True):
    p.add_argument("--measure", choices=sampler.KINDS, default=argparse.SUPPRESS)
    p.add_argument("--m", type=int, default=argparse.SUPPRESS, help="generator count")
    p.add_argument("--group", default=argparse.SUPPRESS, help="group expression, e.g. free(2)")
    p.add_argument("--ell", type=int, default=argparse.SUPPRESS)
    p.add_argument("--L", type=int, default=argparse.SUPPRESS, help="annulus half-width")
    p.add_argument("--density", type=_density, default=argparse.SUPPRESS)
    p.add_argument("--count-override", type=int, default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rq", description="Random quotients in the density model.")
    _common(ap)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a relator set")
    _common(p)
    _measure_args(p)
    p.add_argument("--stratum", action="store_true", help="realise one prefix stratum only")

    p = sub.add_parser("spectra", help="growth / cogrowth / spectral radius")
    _common(p)
    p.add_argument("--group", default=argparse.SUPPRESS)
    p.add_argument("--quantity", choices=("theta", "eta", "g", "lambda"), default=argparse.SUPPRESS)
    p.add_argument("--method", choices=("dp", "ball", "mc", "closed"), default=argparse.SUPPRESS)
    p.add_argument("--t", type=int, default=argparse.SUPPRESS, help="horizon (dp, mc)")
    p.add_argument("--rho", type=int, default=argparse.SUPPRESS, help="ball radius")
    p.add_argument("--trials", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("collapse", help="sample and run the collapse pipeline")
    _common(p)
    _measure_args(p)
    p.add_argument("--trials", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("sweep", help="phase sweep over an (ell, d) grid")
    _common(p)
    p.add_argument("--measure", choices=sampler.KINDS, default=argparse.SUPPRESS)
    p.add_argument("--m", type=int, default=argparse.SUPPRESS)
    p.add_argument("--group", default=argparse.SUPPRESS)
    p.add_argument("--ells", type=_int_list, default=argparse.SUPPRESS)
    p.add_argument("--densities", type=_density_list, default=argparse.SUPPRESS)
    p.add_argument("--trials", type=int, default=argparse.SUPPRESS)
    p.add_argument("--L", type=int, default=argparse.SUPPRESS)
    p.add_argument("--count-override", type=int, default=argparse.SUPPRESS)

    p = sub.add_parser("sc-check", help="longest piece / C'(1/6) test")
    _common(p)
    p.add_argument("--file", default=argparse.SUPPRESS, help="relator file written by 'rq sample'")
    _measure_args(p)
    p.add_argument("--threshold-only", action="store_true", help="test the 1/6 threshold only")
    p.add_argument("--stratum", action="store_true", help="sample one prefix stratum only")

    p = sub.add_parser("davkd", help="diagram analysis and enumeration")
    _common(p)
    dsub = p.add_subparsers(dest="action", required=True)
    q = dsub.add_parser("analyze")
    _common(q)
    q.add_argument("--file", required=True)
    q.add_argument("--density", type=_density, default=Fraction(1, 4))
    q.add_argument("--m", type=int, default=2)
    q = dsub.add_parser("enumerate")
    _common(q)
    q.add_argument("--K", type=int, required=True)
    q.add_argument("--ell", type=int, required=True)
    q.add_argument("--check-lemma", action="store_true")
    q.add_argument("--densities", type=_density_list, default=(Fraction(0), Fraction(1, 4), Fraction(1, 2)))

    p = sub.add_parser("ball", help="Cayley ball statistics")
    _common(p)
    p.add_argument("--group", default=argparse.SUPPRESS)
    p.add_argument("--rho", type=int, default=argparse.SUPPRESS)
    return ap


DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "out": None,
    "csv": None,
    "budget_samples": sampler.DEFAULT_SAMPLE_BUDGET,
    "budget_nodes": ballmod.DEFAULT_NODE_BUDGET,
    "budget_enum": 40,
    "measure": None,  # reduced, or cyclic for sc-check
    "m": 2,
    "group": None,
    "ell": None,
    "L": 0,
    "density": None,
    "count_override": None,
    "quantity": "theta",
    "method": "dp",
    "t": 2000,
    "rho": 6,
    "trials": 1,
    "ells": None,
    "densities": None,
    "file": None,
}

CONFIG_KEYS = set(DEFAULTS) | {"command"}


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {path}") from exc
    except tomli.TOMLDecodeError as exc:
        raise InputError(f"config file {path} is not valid TOML: {exc}") from exc
    data = {k.replace("-", "_"): v for k, v in data.items()}
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    if "density" in data:
        data["density"] = _density(data["density"])
    if "densities" in data:
        data["densities"] = tuple(_density(x) for x in data["densities"])
    if "ells" in data:
        data["ells"] = tuple(int(x) for x in data["ells"])
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags."""
    cfg = dict(DEFAULTS)
    given = vars(args)
    if given.get("config"):
        cfg.update(load_config(given["config"]))
    for k, v in given.items():
        if k not in ("config",):
            cfg[k] = v
    if cfg.get("command") is None:
        raise InputError("no command given")
    if cfg["measure"] is None:
        cfg["measure"] = "cyclic" if cfg["command"] == "sc-check" else "reduced"
    elif cfg["measure"] not in sampler.KINDS:
        raise InputError(f"unknown measure {cfg['measure']!r}")
    return cfg


def _echo(cfg: dict) -> dict:
    """Config as echoed into records (output paths and thread count excluded)."""
    return {k: (str(v) if isinstance(v, Fraction) else (list(v) if isinstance(v, tuple) else v))
            for k, v in sorted(cfg.items()) if k not in ("out", "csv", "threads", "config")}


def _need(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise InputError(f"--{k.replace('_', '-')} is required for '{cfg['command']}'")


def _model_for(cfg):
    expr = cfg.get("group") or f"free({cfg['m']})"
    model = parse_group(expr)
    cfg["m"] = model.alphabet.m
    return model


def _spec_for(cfg, model=None):
    _need(cfg, "ell")
    m = model.alphabet.m if model is not None else cfg["m"]
    return sampler.MeasureSpec(cfg["measure"], m, cfg["ell"], cfg["L"])


def _ball_for(cfg, model, spec):
    if spec.kind != "geodesic":
        return None
    return ballmod.cayley_ball(model, spec.ell + spec.L, node_budget=cfg["budget_nodes"])


# --- commands ---------------------------------------------------------------


def cmd_sample(cfg, out):
    model = _model_for(cfg)
    spec = _spec_for(cfg, model)
    _need_density(cfg)
    rng = sampler.RngStream(cfg["seed"])
    if cfg.get("stratum"):
        rs = sampler.sample_stratum(spec, cfg["density"], rng, budget=cfg["budget_samples"])
    else:
        ball = _ball_for(cfg, model, spec)
        rs = sampler.sample_relator_set(spec, cfg["density"] or 0, rng, ball=ball,
                                        count_override=cfg["count_override"], budget=cfg["budget_samples"])
    text = rs.to_text(model.alphabet)
    if cfg["out"] in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(cfg["out"], "w", encoding="utf-8") as fh:
            fh.write(text)
    log.info("wrote %d relators", len(rs))
    return EXIT_OK


def _need_density(cfg):
    if cfg.get("density") is None and cfg.get("count_override") is None:
        raise InputError("give --density or --count-override")


def _closed_form(model, quantity):
    n = model.alphabet.size
    k = free_rank(model)
    if k is not None:
        lam = spectra.lambda_free(k)
    elif (isinstance(model, DirectWithFinite) and free_rank(model.inner) is not None
          and isinstance(model.finite, Finite) and model.finite.order == 2
          and model.finite.alphabet.m == 1):
        lam = spectra.kesten_z2_product(free_rank(model.inner))
    else:
        raise InputError(f"no closed form known for {model.expr}")
    if quantity == "lambda":
        return lam
    theta = spectra.theta_from_lambda(lam, n)
    if quantity == "theta":
        return theta
    if quantity == "eta":
        return spectra.eta_from_theta(theta, model.alphabet.m)
    if quantity == "g":
        if k is None:
            raise InputError("closed-form growth only for free groups")
        return math.log(2 * k - 1) / math.log(2 * k) if k > 1 else 0.0
    raise InputError(quantity)


def cmd_spectra(cfg, writer):
    model = _model_for(cfg)
    q, method = cfg["quantity"], cfg["method"]
    n = model.alphabet.size
    m = model.alphabet.m
    est = None
    if method == "closed":
        est = spectra.SpectralEstimate(q, _closed_form(model, q), "closed", base=n)
    elif method == "dp":
        est = spectra.theta_dp(model, cfg["t"])
        theta = est.value
        if q == "lambda":
            est = spectra.SpectralEstimate("lambda", spectra.lambda_from_theta(theta, n), "dp",
                                           base=n, horizon=est.horizon)
        elif q == "eta":
            est = spectra.SpectralEstimate("eta", spectra.eta_from_theta(theta, m), "conversion",
                                           base=2 * m - 1, horizon=est.horizon)
        elif q == "g":
            raise InputError("growth comes from --method ball or closed")
    elif method == "ball":
        b = ballmod.cayley_ball(model, cfg["rho"], node_budget=cfg["budget_nodes"])
        if q == "g":
            est = spectra.growth_estimate(b)
        else:
            lam = spectra.spectral_radius_ball(b)
            if q == "lambda":
                est = lam
            else:
                theta = spectra.theta_from_lambda(lam.value, n)
                value = theta if q == "theta" else spectra.eta_from_theta(theta, m)
                est = spectra.SpectralEstimate(q, value, "ball", base=n if q == "theta" else 2 * m - 1,
                                               horizon=cfg["rho"], extra={"lower_bound": True})
    elif method == "mc":
        rng = sampler.RngStream(cfg["seed"])
        trials = cfg["trials"] if cfg["trials"] > 1 else 100_000
        if q == "eta":
            est = spectra.cogrowth_mc_reduced(model, cfg["t"], trials, rng)
        elif q in ("theta", "lambda"):
            p = spectra.return_prob_mc(model, cfg["t"], trials, rng)
            if p.value == 0:
                raise spectra.InsufficientSignal(f"no returns in {trials} walks of length {cfg['t']}")
            theta = 1 + math.log(p.value) / (cfg["t"] * math.log(n))
            value = theta if q == "theta" else spectra.lambda_from_theta(theta, n)
            se = p.stderr / (p.value * cfg["t"] * math.log(n))
            est = spectra.SpectralEstimate(q, value, "mc", base=n, horizon=cfg["t"], stderr=se,
                                           extra={"hits": p.extra["hits"], "trials": trials})
        else:
            raise InputError("growth has no Monte Carlo method")
    payload = {"kind": "spectra", "group": model.expr}
    payload.update(est.to_dict())
    kind = {"theta": "plain", "eta": "reduced", "g": "geodesic"}.get(q)
    if kind is not None:
        payload["critical_density"] = spectra.critical_density(kind, est.value)
    writer.write(payload)
    if cfg["csv"] and q == "theta" and "series" in payload:
        _write(cfg["csv"], records.emit_plot_data([payload], records.SERIES_AXES))
    return EXIT_OK


def cmd_collapse(cfg, writer):
    model = _model_for(cfg)
    spec = _spec_for(cfg, model)
    _need_density(cfg)
    ball = _ball_for(cfg, model, spec)
    for k in range(cfg["trials"]):
        rng = sampler.RngStream(cfg["seed"], (spec.ell, k))
        _, rep, counters = phase.collapse_trial(model, spec, cfg["density"] or 0, rng, ball,
                                                 cfg["count_override"], cfg["budget_samples"])
        payload = {"kind": "collapse", "trial": k, "stream": [spec.ell, k], "seed": cfg["seed"]}
        payload.update(rep.to_dict())
        payload.update(counters)
        writer.write(payload)
    return EXIT_OK


def cmd_sweep(cfg, writer):
    _need(cfg, "ells", "densities")
    sc = phase.SweepConfig(
        measure=cfg["measure"], m=cfg["m"], group=cfg["group"], ells=tuple(cfg["ells"]),
        densities=tuple(cfg["densities"]), trials=cfg["trials"], seed=cfg["seed"], L=cfg["L"],
        budget=cfg["budget_samples"], count_override=cfg["count_override"], ball_budget=cfg["budget_nodes"],
    )
    out = []

    def emit(rec):
        writer.write(rec)
        out.append(rec)

    if cfg["threads"] > 1:
        _sweep_parallel(sc, emit, cfg["threads"])
    else:
        phase.phase_sweep(sc, on_record=emit)
    if cfg["csv"]:
        _write(cfg["csv"], records.emit_plot_data(out, records.SWEEP_AXES))
    return EXIT_OK


def _sweep_parallel(sc, on_record, threads):
    """Cells run on a pool; records are emitted in cell order."""
    from dataclasses import replace

    jobs = [replace(sc, ells=(ell,), densities=(d,)) for ell in sc.ells for d in sc.densities]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for recs in pool.map(phase.phase_sweep, jobs):
            for r in recs:
                on_record(r)


def _read_relators(path, alphabet):
    try:
        with open(path, encoding="utf-8") as fh:
            return sampler.RelatorSet.from_text(fh.read(), alphabet)
    except FileNotFoundError as exc:
        raise InputError(f"relator file not found: {path}") from exc


def cmd_sc_check(cfg, writer):
    model = _model_for(cfg)
    if cfg.get("file"):
        rs = _read_relators(cfg["file"], model.alphabet)
    else:
        spec = _spec_for(cfg, model)
        _need_density(cfg)
        rng = sampler.RngStream(cfg["seed"])
        if cfg.get("stratum"):
            rs = sampler.sample_stratum(spec, cfg["density"], rng, budget=min(cfg["budget_samples"], 20_000))
        else:
            rs = sampler.sample_relator_set(spec, cfg["density"] or 0, rng,
                                            count_override=cfg["count_override"], budget=cfg["budget_samples"])
    rep = smallcanc.small_cancellation_check(rs.words, exact=not cfg.get("threshold_only"))
    payload = {"kind": "sc-check", "stratum": rs.stratum}
    payload.update(rep.to_dict())
    writer.write(payload)
    return EXIT_OK


def cmd_davkd(cfg, writer):
    if cfg["action"] == "analyze":
        try:
            with open(cfg["file"], encoding="utf-8") as fh:
                D = diagrams.Davkd.from_text(fh.read())
        except FileNotFoundError as exc:
            raise InputError(f"diagram file not found: {cfg['file']}") from exc
        d = cfg["density"]
        G = diagrams.build_gamma(D)
        rep = diagrams.gamma_dims(G, d)
        iso = diagrams.iso_check(D, d, rep)
        payload = {"kind": "davkd-analyze", "faces": D.n_faces, "ell": D.ell,
                   "pairings": len(D.pairings), "planar": D.planar, "reduced": diagrams.reduction_check(D),
                   "gamma_edges": len(G.edges), "gamma_loops": len(G.loops())}
        payload.update(rep.to_dict())
        payload.update({k: (str(v) if isinstance(v, Fraction) else v) for k, v in iso.items()})
        if len(G.parts) * D.ell <= cfg["budget_enum"]:
            payload["count_fulfilling_reduced"] = diagrams.count_fulfilling_reduced(D, cfg["m"], cfg["budget_enum"])
        writer.write(payload)
        return EXIT_OK
    K, ell = cfg["K"], cfg["ell"]
    n = identity_bad = lemma_bad = 0
    for D in diagrams.enumerate_davkd(K, ell):
        n += 1
        G = diagrams.build_gamma(D)
        identity_bad += D.boundary_length() + 2 * len(G.edges) != D.n_faces * ell
        if cfg["check_lemma"]:
            for d in cfg["densities"]:
                lemma_bad += not diagrams.iso_check(D, d)["lemma_holds"]
    payload = {"kind": "davkd-enumerate", "K": K, "ell": ell, "count": n,
               "count_bound": diagrams.count_bound_N(K, ell), "identity_violations": identity_bad}
    if cfg["check_lemma"]:
        payload["lemma_violations"] = lemma_bad
        payload["densities"] = [str(d) for d in cfg["densities"]]
    writer.write(payload)
    return EXIT_OK


def cmd_ball(cfg, writer):
    model = _model_for(cfg)
    b = ballmod.cayley_ball(model, cfg["rho"], node_budget=cfg["budget_nodes"])
    g = spectra.growth_estimate(b)
    writer.write({"kind": "ball", "group": model.expr, "rho": cfg["rho"], "nodes": len(b),
                  "complete": b.complete, "sphere_sizes": b.sphere_sizes(), "growth": g.value})
    return EXIT_OK


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


COMMANDS = {
    "spectra": cmd_spectra,
    "collapse": cmd_collapse,
    "sweep": cmd_sweep,
    "sc-check": cmd_sc_check,
    "davkd": cmd_davkd,
    "ball": cmd_ball,
}


def run(argv=None) -> int:
    level = os.environ.get("RQ_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    cfg = resolve(args)
    if cfg["command"] == "sample":
        return cmd_sample(cfg, None)
    writer = records.RecordWriter(cfg["out"], _echo(cfg))
    try:
        return COMMANDS[cfg["command"]](cfg, writer)
    finally:
        writer.close()


def main(argv=None) -> int:
    try:
        code = run(argv)
    except RQError as exc:
        print(f"rq: error: {exc}", file=sys.stderr)
        code = exc.exit_code
    except KeyboardInterrupt:
        code = 130
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the internal-error code
        logging.getLogger("rqlab").exception("internal error")
        print(f"rq: internal error: {exc}", file=sys.stderr)
        code = EXIT_INTERNAL
    return code


if __name__ == "__main__":
    sys.exit(main())
