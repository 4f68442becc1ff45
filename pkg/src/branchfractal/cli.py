"""Command line entry point: generate, estimate-dim, diagnose and plot.

Exit status is 0 on success, 1 for usage or validation errors and 2 for
runtime failures (rejection guard, resource limits, I/O).
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import io
from .agora import AgoraConfig, generate_discrete
from .branching import generate_tree
from .diagnostics import run_identity
from .dimension import estimate_dimension
from .errors import ParameterError
from .profiles import ProcessParams, SpatialProfile, compute_cd, params_from_rho

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _ratio(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a ratio: {text!r}") from None
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="branchfractal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="simulate a point set")
    g.add_argument("--model", choices=["ct", "smooth", "hard"], default="ct")
    g.add_argument("--dim", type=int, default=2)
    shape = g.add_mutually_exclusive_group()
    shape.add_argument("--alpha", type=float, help="target dimension")
    shape.add_argument("--alpha-ratio", type=_ratio, help="target dimension as an exact ratio, e.g. 10/9")
    shape.add_argument("--rho", type=float, help="growth exponent (alpha = dim * rho)")
    g.add_argument("--theta", type=float,
                   help="innovation; for ct it fixes rho = c_d / theta when alpha and rho are absent")
    g.add_argument("--profile", default="gaussian", choices=[p.value for p in SpatialProfile])
    g.add_argument("--n", type=int, default=10_000, help="vertex budget (ct) or points beyond the root")
    g.add_argument("--max-time", type=float, help="time horizon for ct")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count-radius", choices=["proposal", "inverse-n"], default="proposal",
                   help="hard model: radius used to count neighbours")
    g.add_argument("--max-rejections", type=int, default=10**6)
    g.add_argument("--out", default="points.csv")
    g.add_argument("--manifest", help="re-run the settings recorded in this manifest")

    e = sub.add_parser("estimate-dim", help="box-count or correlation-sum dimension of a point file")
    e.add_argument("--input", required=True)
    e.add_argument("--method", choices=["boxcount", "corrsum"], default="boxcount")
    e.add_argument("--eps-min", type=float)
    e.add_argument("--eps-max", type=float)
    e.add_argument("--eps-steps", type=int, default=12)
    e.add_argument("--shift", type=float, default=0.0, help="box grid offset in units of eps")
    e.add_argument("--seed", type=int, default=0, help="pair subsample seed")
    e.add_argument("--json-out")
    e.add_argument("--svg-out")

    d = sub.add_parser("diagnose", help="Monte Carlo check of a tree identity")
    d.add_argument("--identity", required=True, choices=["moment", "martingale", "levelcount", "growth"])
    d.add_argument("--rho", type=float, default=1.0)
    d.add_argument("--replicas", type=int)
    d.add_argument("--levels", type=int, default=3)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--json-out")

    p = sub.add_parser("plot", help="SVG scatter of a planar point file")
    p.add_argument("--input", required=True)
    p.add_argument("--svg-out", required=True)
    p.add_argument("--edges", action="store_true")
    return parser


def _manifest_path(out: Path) -> Path:
    return out.with_name(out.stem + ".manifest.json")


def _generate_settings(args) -> dict:
    if args.manifest:
        data = io.read_manifest(args.manifest)
        settings = dict(data["params"])
        settings["model"] = data["model"]
        settings["seed"] = data["seed"]
        return settings
    alpha = args.alpha_ratio if args.alpha_ratio is not None else args.alpha
    if args.model == "ct":
        if alpha is not None:
            rho = Fraction(alpha) / args.dim if isinstance(alpha, Fraction) else alpha / args.dim
        elif args.rho is not None:
            rho = args.rho
        elif args.theta is not None:
            if not args.theta > 0:
                raise ParameterError("theta must be positive")
            rho = compute_cd(args.profile, args.dim) / args.theta
        else:
            raise ParameterError("ct needs one of --alpha, --alpha-ratio, --rho or --theta")
        params = params_from_rho(args.dim, rho, args.profile, seed=args.seed)
        if args.theta is not None and abs(params.theta - args.theta) > 1e-12 * params.theta:
            raise ParameterError(f"--theta {args.theta} contradicts the implied theta {params.theta!r}")
        settings = {"model": "ct", **params.to_dict(), "n": args.n, "max_time": args.max_time}
    else:
        if alpha is None and args.rho is not None:
            alpha = args.rho * args.dim
        if alpha is None:
            raise ParameterError(f"{args.model} needs --alpha, --alpha-ratio or --rho")
        cfg = AgoraConfig(d=args.dim, alpha=float(alpha), theta=1.0 if args.theta is None else args.theta,
                          n_points=args.n, model=args.model, seed=args.seed,
                          max_rejections_per_point=args.max_rejections, count_radius=args.count_radius)
        settings = cfg.to_dict()
    return settings


def _run_generate(settings: dict, out: Path):
    if settings["model"] == "ct":
        params = ProcessParams.from_dict(settings)
        tree, _ = generate_tree(params, settings["n"], settings.get("max_time"),
                                np.random.default_rng(params.seed))
        io.write_points_csv(tree, out)
        return tree
    cfg = AgoraConfig.from_dict(settings)
    tree = generate_discrete(cfg)
    io.write_points_csv(tree, out, extra_meta={"config": cfg.to_dict()})
    return tree


def cmd_generate(args) -> int:
    started = datetime.now(timezone.utc)
    settings = _generate_settings(args)
    out = Path(args.out)
    tree = _run_generate(settings, out)
    params = {k: v for k, v in settings.items() if k not in ("model", "seed")}
    manifest = _manifest_path(out)
    extra = {}
    if args.manifest:
        recorded = io.read_manifest(args.manifest)["outputs"]
        digest = io.sha256_file(out)
        extra["reproduces"] = str(args.manifest)
        extra["reproduced_identically"] = digest in recorded.values()
    io.write_manifest(manifest, settings["model"], params, settings["seed"], [out], started, extra)
    print(f"wrote {len(tree)} points to {out} (manifest {manifest})")
    if args.manifest and not extra["reproduced_identically"]:
        print("error: output digest differs from the manifest", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_estimate(args) -> int:
    started = datetime.now(timezone.utc)
    tree = io.read_points_csv(args.input)
    pts = tree.chi if hasattr(tree, "chi") else tree.points
    eps = None
    if args.eps_min is not None or args.eps_max is not None:
        if args.eps_min is None or args.eps_max is None:
            raise ParameterError("--eps-min and --eps-max go together")
        if not 0 < args.eps_min < args.eps_max:
            raise ParameterError("need 0 < eps-min < eps-max")
        if args.eps_steps < 4:
            raise ParameterError("--eps-steps must be at least 4")
        eps = np.geomspace(args.eps_max, args.eps_min, args.eps_steps)
    fit = estimate_dimension(pts, args.method, eps_values=eps, seed=args.seed, shift=args.shift)
    report = fit.to_dict()
    report["input"] = str(args.input)
    text = json.dumps(report, indent=2)
    outputs = []
    if args.json_out:
        Path(args.json_out).write_text(text + "\n")
        outputs.append(Path(args.json_out))
    else:
        print(text)
    if args.svg_out:
        outputs.append(io.emit_loglog_svg(fit, args.svg_out))
    if outputs:
        settings = {"input": str(args.input), "input_sha256": io.sha256_file(args.input),
                    "method": args.method, "eps_min": args.eps_min, "eps_max": args.eps_max,
                    "eps_steps": args.eps_steps, "shift": args.shift}
        io.write_manifest(_manifest_path(outputs[0]), "estimate-dim", settings, args.seed, outputs, started)
        print(f"slope {fit.slope:.4f} +/- {fit.stderr:.4f}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    started = datetime.now(timezone.utc)
    replicas = args.replicas if args.replicas is not None else (50 if args.identity == "growth" else 5000)
    if replicas < 2:
        raise ParameterError("--replicas must be at least 2")
    if args.levels < 1:
        raise ParameterError("--levels must be positive")
    results = run_identity(args.identity, rho=args.rho, replicas=replicas, levels=args.levels, seed=args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.identity:<28} theory {r.theoretical:.6g}  "
              f"empirical {r.empirical:.6g}  se {r.stderr:.3g}")
    if args.json_out:
        out = Path(args.json_out)
        report = {"identity": args.identity, "rho": args.rho, "replicas": replicas, "levels": args.levels,
                  "seed": args.seed, "results": [r.to_dict() for r in results]}
        out.write_text(json.dumps(report, indent=2) + "\n")
        io.write_manifest(_manifest_path(out), "diagnose",
                          {"identity": args.identity, "rho": args.rho, "replicas": replicas,
                           "levels": args.levels}, args.seed, [out], started)
    return EXIT_OK


def cmd_plot(args) -> int:
    tree = io.read_points_csv(args.input)
    pts = tree.chi if hasattr(tree, "chi") else tree.points
    parents = tree.parent if hasattr(tree, "chi") else tree.parents
    io.emit_scatter_svg(pts, args.svg_out, parents=parents, edges=args.edges)
    print(f"wrote {args.svg_out}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "estimate-dim": cmd_estimate, "diagnose": cmd_diagnose,
            "plot": cmd_plot}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    try:
        return COMMANDS[args.command](args)
    except ValueError as exc:
        # parameter, schema, fit and plot errors all derive from ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RuntimeError, OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
