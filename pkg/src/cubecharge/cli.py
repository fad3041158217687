"""Command-line surface.

Ten subcommands drive the library: transform, young, young1d, hk,
divcheck, bm, fbs, chargeability, holder, geometry.  A JSON config file
supplies option values that explicit flags override.  Exit codes: 0
success, 2 bad input, 3 numerical or file failure.  Stochastic commands
require --seed; identical invocations write identical bytes.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .charges import from_faber_coeffs, to_faber_coeffs
from .dyadic import CubeIndex, DyadicFigure, figure_geometry, unit_figure
from .errors import NumericalError, ValidationError
from .exprs import compile_expr, differentiate, eval_ast, parse_expr
from .fileio import (read_charge, read_coeffs, read_field, read_figure,
                     write_artifact, write_charge, write_coeffs, write_csv,
                     write_field)
from .gauge import divergence_check, dyadic_henstock, hk_integrate_1d
from .holder import holder_estimate
from .stochastic import (HurstVector, brownian_ensemble,
                         chargeability_diagnostic, levy_ciesielski,
                         sample_fbs)
from .young import young_1d_fields, young_integral

# per-command option defaults; None means "the library decides"
_DEFAULTS = {
    "transform": {"out": None, "roundtrip": False},
    "young": {"beta": 0.75, "gamma": 0.75, "tagrule": "lower",
              "out": None, "report": None},
    "young1d": {"beta": None, "gamma": None, "out": None, "report": None},
    "hk": {"expr": None, "dim": 1, "tol": 1e-6, "budget": None,
           "tagrule": "center", "figure": None, "out": None},
    "divcheck": {"component": None, "figure": "unit", "depth": None,
                 "order": 4, "tol": 1e-8, "out": None},
    "bm": {"depth": 10, "seed": None, "ensemble": 1, "out": None},
    "fbs": {"hurst": None, "depth": 6, "seed": None, "ensemble": 1,
            "out": None, "check_variance": False},
    "chargeability": {"q": 8.0, "gens": None, "hurst": None,
                      "report": None, "curve": None},
    "holder": {"gamma": 0.5, "report": None, "curve": None},
    "geometry": {"figure": "unit", "dim": 2, "out": None},
}


def _build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", help="JSON file with option defaults")
    shared.add_argument("--threads", type=int, default=None,
                        help="worker thread cap for ensemble sampling")

    p = argparse.ArgumentParser(prog="cubecharge",
                                description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("transform", parents=[shared],
                       help="charge <-> coefficient transforms")
    t.add_argument("input")
    t.add_argument("--out")
    t.add_argument("--roundtrip", action="store_true", default=None)

    y = sub.add_parser("young", parents=[shared],
                       help="Young integral of samples against a charge")
    y.add_argument("field")
    y.add_argument("charge")
    y.add_argument("--beta", type=float)
    y.add_argument("--gamma", type=float)
    y.add_argument("--tagrule", choices=("lower", "center"))
    y.add_argument("--out", help="result charge JSON")
    y.add_argument("--report", help="sewing report JSON")

    y1 = sub.add_parser("young1d", parents=[shared],
                        help="1D coefficient-pairing integral")
    y1.add_argument("f")
    y1.add_argument("g")
    y1.add_argument("--beta", type=float)
    y1.add_argument("--gamma", type=float)
    y1.add_argument("--out", help="partial-sum CSV")
    y1.add_argument("--report", help="result JSON")

    h = sub.add_parser("hk", parents=[shared],
                       help="adaptive gauge integration of an expression")
    h.add_argument("--expr", help="integrand, e.g. 'sin(pi*x)'")
    h.add_argument("--dim", type=int)
    h.add_argument("--tol", type=float)
    h.add_argument("--budget", type=int)
    h.add_argument("--tagrule", choices=("lower", "center"))
    h.add_argument("--figure", help="unit, lshape, or a figure JSON path")
    h.add_argument("--out", help="result JSON")

    dv = sub.add_parser("divcheck", parents=[shared],
                        help="divergence theorem harness")
    dv.add_argument("--component", action="append",
                    help="one field component per axis, repeated")
    dv.add_argument("--figure", help="unit, lshape, or a figure JSON path")
    dv.add_argument("--depth", type=int)
    dv.add_argument("--order", type=int)
    dv.add_argument("--tol", type=float)
    dv.add_argument("--out", help="result JSON")

    b = sub.add_parser("bm", parents=[shared],
                       help="Brownian path samples")
    b.add_argument("--depth", type=int)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--ensemble", type=int)
    b.add_argument("--out", required=True)

    fb = sub.add_parser("fbs", parents=[shared],
                        help="fractional Brownian sheet samples")
    fb.add_argument("--H", dest="hurst", help="comma list, e.g. 0.8,0.6")
    fb.add_argument("--depth", type=int)
    fb.add_argument("--seed", type=int, required=True)
    fb.add_argument("--ensemble", type=int)
    fb.add_argument("--out")
    fb.add_argument("--check-variance", dest="check_variance",
                    action="store_true", default=None,
                    help="test increment variances against the product "
                             "law instead of writing fields")

    ch = sub.add_parser("chargeability", parents=[shared],
                        help="increment moment-scaling diagnostic")
    ch.add_argument("fields", help="directory of sampled field files")
    ch.add_argument("--q", type=float)
    ch.add_argument("--gens", help="comma list of generations to fit")
    ch.add_argument("--hurst", help="comma list for the model row")
    ch.add_argument("--report", help="report JSON")
    ch.add_argument("--curve", help="(generation, log2 moment) CSV")

    ho = sub.add_parser("holder", parents=[shared],
                        help="coefficient-decay roughness estimate")
    ho.add_argument("field")
    ho.add_argument("--gamma", type=float)
    ho.add_argument("--report", help="estimate JSON")
    ho.add_argument("--curve", help="(generation, log2 max) CSV")

    g = sub.add_parser("geometry", parents=[shared],
                       help="figure volume, boundary, shape coefficients")
    g.add_argument("--figure", help="unit, lshape, or a figure JSON path")
    g.add_argument("--dim", type=int)
    g.add_argument("--out", help="result JSON")
    return p


def _resolve(args):
    """Merge flags over config-file values over hard defaults."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            try:
                cfg = json.load(fh)
            except ValueError:
                raise ValidationError("%s is not valid JSON" % args.config)
        if not isinstance(cfg, dict):
            raise ValidationError("config file must hold a JSON object")
    out = {"command": args.command}
    for key, hard in _DEFAULTS[args.command].items():
        val = getattr(args, key, None)
        if val is None:
            val = cfg.get(key, hard)
        out[key] = val
    for key in ("threads",):
        val = getattr(args, key, None)
        out[key] = val if val is not None else cfg.get(key, 1)
    for key, val in vars(args).items():
        if key not in out and key not in ("config",) and val is not None:
            out[key] = val
    return out


def _figure(spec, dim):
    if spec in (None, "unit"):
        return unit_figure(dim)
    if spec == "lshape":
        if dim != 2:
            raise ValidationError("the lshape preset is two-dimensional")
        return DyadicFigure([CubeIndex(2, 1, (0, 0)), CubeIndex(2, 1, (0, 1)),
                             CubeIndex(2, 1, (1, 0))])
    return read_figure(spec)


def _hurst_list(text):
    if text is None:
        raise ValidationError("--H is required")
    if isinstance(text, (list, tuple)):
        return HurstVector(tuple(float(h) for h in text))
    try:
        return HurstVector(tuple(float(tok) for tok in text.split(",")))
    except ValueError:
        raise ValidationError("bad Hurst list %r" % text)


def _member_paths(out, count):
    if count == 1:
        return [out]
    stem, ext = os.path.splitext(out)
    return ["%s_%04d%s" % (stem, i, ext) for i in range(count)]


def _cmd_transform(rc):
    with open(rc["input"]) as fh:
        try:
            kind = json.load(fh).get("kind")
        except ValueError:
            raise ValidationError("%s is not valid JSON" % rc["input"])
    if rc["roundtrip"]:
        cc = read_charge(rc["input"])
        back = from_faber_coeffs(to_faber_coeffs(cc))
        scale = max(float(np.abs(g).max()) for g in cc.gens) or 1.0
        err = max(float(np.abs(a - b).max())
                  for a, b in zip(back.gens, cc.gens))
        print("roundtrip max error %.3e (relative %.3e)" % (err, err / scale))
        if rc["out"]:
            write_artifact({"roundtrip_error": err,
                            "relative_error": err / scale}, rc, rc["out"])
        if err / scale > 1e-10:
            raise NumericalError("round trip failed: %r" % (err / scale))
        return 0
    if not rc["out"]:
        raise ValidationError("--out is required without --roundtrip")
    if kind == "charge":
        write_coeffs(to_faber_coeffs(read_charge(rc["input"])), rc["out"])
        print("wrote coefficients to %s" % rc["out"])
    elif kind == "coeffs":
        write_charge(from_faber_coeffs(read_coeffs(rc["input"])), rc["out"])
        print("wrote charge to %s" % rc["out"])
    else:
        raise ValidationError("input is neither a charge nor coefficients")
    return 0


def _cmd_young(rc):
    f = read_field(rc["field"])
    cc = read_charge(rc["charge"])
    rep = young_integral(f, cc, rc["beta"], rc["gamma"], rc["tagrule"])
    print("residual exponent %.4f (target >= %.4f), kappa %.4f"
          % (rep.residual_exponent, 1.0 + rep.epsilon, rep.kappa_hat))
    if rc["out"]:
        write_charge(rep.result, rc["out"])
    if rc["report"]:
        write_artifact({
            "residuals": [float(r) for r in rep.residuals],
            "residual_exponent": rep.residual_exponent,
            "kappa_hat": rep.kappa_hat,
            "C": rep.C,
            "epsilon": rep.epsilon,
        }, rc, rc["report"])
    return 0


def _cmd_young1d(rc):
    f = read_field(rc["f"])
    g = read_field(rc["g"])
    res, g0 = young_1d_fields(f, g, beta=rc["beta"], gamma=rc["gamma"])
    print("value %.6f (g(0) = %r subtracted)" % (res.value, g0))
    if rc["out"]:
        rows = [(n - 1, float(v)) for n, v in enumerate(res.partial_sums)]
        write_csv(rc["out"], ["generation", "partial_sum"], rows)
    if rc["report"]:
        write_artifact({"value": res.value, "g0": g0,
                        "partial_sums": [float(v) for v in res.partial_sums]},
                       rc, rc["report"])
    return 0


def _integral_payload(r):
    return {"value": r.value, "count": r.count, "finest_mesh": r.finest_mesh,
            "converged": r.converged, "notes": list(r.notes),
            "history": [float(v) for v in r.history]}


def _cmd_hk(rc):
    if not rc["expr"]:
        raise ValidationError("--expr is required")
    dim = int(rc["dim"])
    fn = compile_expr(rc["expr"], dim)
    kw = {} if rc["budget"] is None else {"budget": int(rc["budget"])}
    if dim == 1 and rc["figure"] in (None, "unit"):
        res = hk_integrate_1d(fn, tol=rc["tol"], **kw)
    else:
        fig = _figure(rc["figure"], dim)
        res = dyadic_henstock(fn, tol=rc["tol"], tagrule=rc["tagrule"],
                              figure=fig, **kw)
    print("value %.9f converged %s count %d"
          % (res.value, res.converged, res.count))
    if rc["out"]:
        write_artifact(_integral_payload(res), rc, rc["out"])
    return 0


def _cmd_divcheck(rc):
    comps = rc["component"]
    if not comps:
        raise ValidationError("pass one --component per axis")
    dim = len(comps)
    asts = [parse_expr(src, dim) for src in comps]
    fns = [compile_expr(src, dim) for src in comps]
    div_asts = [differentiate(ast, axis) for axis, ast in enumerate(asts)]

    def div(*xs):
        total = eval_ast(div_asts[0], xs)
        for node in div_asts[1:]:
            total = total + eval_ast(node, xs)
        return total

    fig = _figure(rc["figure"], dim)
    chk = divergence_check(fns, div, fig, tol=rc["tol"],
                           depth=rc["depth"], order=rc["order"])
    print("volume integral %.9f boundary flux %.9f gap %.3e"
          % (chk.lhs, chk.rhs, chk.gap))
    if rc["out"]:
        write_artifact({"lhs": chk.lhs, "rhs": chk.rhs, "gap": chk.gap,
                        "volume": _integral_payload(chk.volume_integral)},
                       rc, rc["out"])
    return 0


def _write_members(fields, rc, hurst_list):
    paths = _member_paths(rc["out"], len(fields))
    for field, path in zip(fields, paths):
        write_field(field, path)
    write_artifact({"H": hurst_list, "N": fields[0].resolution,
                    "seed": rc["seed"], "ensemble": len(fields),
                    "files": [os.path.basename(p) for p in paths]},
                   rc, rc["out"] + ".meta.json")
    print("wrote %d field(s) to %s" % (len(fields), rc["out"]))


def _cmd_bm(rc):
    fields = brownian_ensemble(int(rc["depth"]), rc["seed"],
                               int(rc["ensemble"]), rc["threads"])
    _write_members(fields, rc, [0.5])
    return 0


def _variance_check(hv, rc):
    """Empirical rectangle-increment variances against the product law."""
    count = int(rc["ensemble"])
    if count < 100:
        count = 2000
    depth = int(rc["depth"])
    fields = sample_fbs(hv, depth, rc["seed"], count, rc["threads"])
    stack = np.stack([f.values for f in fields])
    rng = np.random.Generator(np.random.Philox(key=[rc["seed"], 2 ** 63]))
    side = 2 ** depth
    worst = 0.0
    for _ in range(20):
        lo = rng.integers(0, side, size=hv.dim)
        hi = np.array([rng.integers(l + 1, side + 1) for l in lo])
        inc = np.zeros(count)
        for corner in range(2 ** hv.dim):
            pick = [int(hi[i]) if corner >> i & 1 else int(lo[i])
                    for i in range(hv.dim)]
            sign = (-1.0) ** (hv.dim - bin(corner).count("1"))
            inc += sign * stack[(slice(None),) + tuple(pick)]
        want = float(np.prod([((hi[i] - lo[i]) / side) ** (2 * h)
                              for i, h in enumerate(hv.components)]))
        z = abs(inc.var() - want) / (want * np.sqrt(2.0 / (count - 1)))
        worst = max(worst, z)
    print("variance check: worst deviation %.2f standard errors "
          "over 20 rectangles" % worst)
    if worst >= 4.0:
        raise NumericalError(
            "increment variance off by %.2f standard errors" % worst)
    return 0


def _cmd_fbs(rc):
    hv = _hurst_list(rc["hurst"])
    if rc["check_variance"]:
        return _variance_check(hv, rc)
    if not rc["out"]:
        raise ValidationError("--out is required when writing fields")
    fields = sample_fbs(hv, int(rc["depth"]), rc["seed"],
                        int(rc["ensemble"]), rc["threads"])
    _write_members(fields, rc, list(hv.components))
    return 0


def _cmd_chargeability(rc):
    names = sorted(n for n in os.listdir(rc["fields"])
                   if n.endswith(".csv") or n.endswith(".bin"))
    if not names:
        raise ValidationError("no field files in %s" % rc["fields"])
    ensemble = [read_field(os.path.join(rc["fields"], n)) for n in names]
    gens = None
    if rc["gens"]:
        gens = [int(tok) for tok in str(rc["gens"]).split(",")]
    hurst = _hurst_list(rc["hurst"]) if rc["hurst"] else None
    rep = chargeability_diagnostic(ensemble, q=rc["q"], n_range=gens,
                                   hurst=hurst)
    print("verdict %s (ratio %.4f vs threshold %.4f)"
          % (rep.verdict, rep.moment_ratio, rep.threshold))
    if rc["report"]:
        write_artifact({
            "q": rep.q,
            "generations": list(rep.gens),
            "moments": [float(m) for m in rep.moments],
            "excess_exponent": rep.excess_exponent,
            "moment_ratio": rep.moment_ratio,
            "threshold": rep.threshold,
            "threshold_passed": rep.threshold_passed,
            "gamma_sup": rep.gamma_sup,
            "verdict": rep.verdict,
            "note": rep.note,
            "model_excess": None if np.isnan(rep.model_excess)
            else rep.model_excess,
            "gaussian_moment_constant":
                None if np.isnan(rep.gaussian_moment_constant)
                else rep.gaussian_moment_constant,
            "q_sweep": [list(row) for row in rep.q_sweep],
        }, rc, rc["report"])
    if rc["curve"]:
        rows = [(n, float(np.log2(m)))
                for n, m in zip(rep.gens, rep.moments)]
        write_csv(rc["curve"], ["generation", "log2_moment"], rows)
    return 0


def _cmd_holder(rc):
    f = read_field(rc["field"])
    est = holder_estimate(f, rc["gamma"])
    print("gamma_hat %.4f (raw %.4f, corrected %.4f), coefficient norm %.4f"
          % (est.gamma_hat, est.gamma_hat_raw, est.gamma_hat_corrected,
             est.coeff_norm))
    if est.gamma_hat < 0.0 or est.gamma_hat > 1.0:
        print("warning: fitted exponent outside (0, 1); data is rougher or "
              "smoother than the model")
    if rc["report"]:
        write_artifact({
            "gamma": est.gamma,
            "coeff_norm": est.coeff_norm,
            "grid_seminorm": est.grid_seminorm,
            "bound_ratio": est.bound_ratio,
            "gamma_hat": est.gamma_hat,
            "gamma_hat_raw": est.gamma_hat_raw,
            "gamma_hat_corrected": est.gamma_hat_corrected,
        }, rc, rc["report"])
    if rc["curve"]:
        rows = [(n, float(v)) for n, v in enumerate(est.coeff_log2_maxima)]
        write_csv(rc["curve"], ["generation", "log2_max_coeff"], rows)
    return 0


def _cmd_geometry(rc):
    fig = _figure(rc["figure"], int(rc["dim"]))
    geo = figure_geometry(fig)
    print("volume %r perimeter %r diameter %r reg %r isop %r"
          % (geo.volume, geo.perimeter, geo.diameter, geo.reg, geo.isop))
    if rc["out"]:
        write_artifact({"volume": geo.volume, "perimeter": geo.perimeter,
                        "diameter": geo.diameter, "reg": geo.reg,
                        "isop": geo.isop}, rc, rc["out"])
    return 0


_HANDLERS = {
    "transform": _cmd_transform,
    "young": _cmd_young,
    "young1d": _cmd_young1d,
    "hk": _cmd_hk,
    "divcheck": _cmd_divcheck,
    "bm": _cmd_bm,
    "fbs": _cmd_fbs,
    "chargeability": _cmd_chargeability,
    "holder": _cmd_holder,
    "geometry": _cmd_geometry,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        rc = _resolve(args)
        return _HANDLERS[args.command](rc)
    except ValidationError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 2
    except (NumericalError, OSError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
