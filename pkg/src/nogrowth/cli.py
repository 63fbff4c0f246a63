"""Command line entry point: ``python3 -m nogrowth <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

from . import lab
from .canopy import VertexAddr
from .errors import NoGrowthError
from .girthgraph import generate
from .overlay import OverlayGraph, witness_lower, witness_upper
from .product import UT3, PVertex, u_witness_lower, u_witness_upper


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file")
    for key in lab._KEYS:
        flag = "--" + key.replace("_", "-")
        if key == "mode":
            p.add_argument(flag, dest=key, choices=sorted(lab._MODE_DEFAULTS))
        else:
            p.add_argument(flag, dest=key, metavar=key.upper())


def _config(args) -> lab.ExperimentConfig:
    text = Path(args.config).read_text() if args.config else None
    flags = {k: getattr(args, k) for k in lab._KEYS if getattr(args, k, None) is not None}
    return lab.ExperimentConfig.from_sources(text, overrides=flags)


def cmd_build(args) -> int:
    cfg = _config(args)
    m = lab.run_experiment(cfg, raise_on_fail=False)
    out = Path(cfg.out)
    print(f"wrote {out / 'manifest.json'}")
    for name, status in m["checks"].items():
        print(f"  {status:4}  {name}")
    if m["failed"]:
        print("failed: " + ", ".join(m["failed"]), file=sys.stderr)
        return 1
    return 0


def cmd_measure(args) -> int:
    cfg = _config(args)
    g = lab.build_graph(cfg)
    ck, extra = lab.Checks(), {}
    cfg.checks = ("profiles",)
    profiles = lab.run_checks(cfg, g, ck, extra)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "profiles.csv").write_text(lab.profiles_csv(g, profiles, cfg.d))
    window = (args.window_lo, args.window_hi or cfg.profile_radius)
    est = lab.growth_estimates(profiles, window)
    print(f"upper {est.upper:.12g} at {est.upper_at}")
    print(f"lower {est.lower:.12g} at {est.lower_at}")
    return 0


def _root(g, text):
    if isinstance(g, OverlayGraph):
        return g.t.to_heap(VertexAddr.parse(text))
    return g.from_pvertex(PVertex.parse(text))


def cmd_witness(args) -> int:
    cfg = _config(args)
    g = lab.build_graph(cfg)
    if isinstance(g, UT3):
        raise NoGrowthError("witnesses run on W_I, W_star_J or U")
    o = _root(g, args.root)
    if isinstance(g, OverlayGraph):
        w = witness_lower(g, o, args.m) if args.kind == "lower" else witness_upper(g, o, args.m)
        rec = {"root": args.root, "m": w.m, "L": w.L, "cluster_size": w.cluster_size,
               "ball": w.ball, "exponent": w.exponent, "r": w.r,
               "contaminated": w.contaminated, "checks": w.checks}
    else:
        w = (u_witness_lower if args.kind == "lower" else u_witness_upper)(g, o, args.m)
        rec = {"root": args.root, "m": w.m, "length": w.length, "cluster_size": w.cluster_size,
               "ball": w.ball, "exponent": w.exponent, "contaminated": w.contaminated,
               "checks": w.checks}
    print(json.dumps(rec, indent=2, default=str))
    return 0 if all(v is True or not isinstance(v, bool) for k, v in w.checks.items()
                    if k != "vacuous") else 1


def cmd_mtp(args) -> int:
    spec = lab.TRANSPORTS[args.transport]
    if args.ensemble == "canopy":
        sampler = lab.canopy_sampler(args.canopy_depth)
    elif args.ensemble == "control":
        sampler = lab.leaf_sampler(args.canopy_depth)
    else:
        cfg = _config(args)
        g = lab.build_graph(cfg)
        if not isinstance(g, OverlayGraph):
            raise NoGrowthError("the graph ensembles are W_I and W_star_J (--mode I or J)")
        sampler = lab.overlay_sampler(g)
    res = lab.mtp_test(sampler, spec, args.samples, int(args.seed or 0))
    print(f"transport {res.transport}: out {res.mean_out:.12g}  in {res.mean_in:.12g}  "
          f"stderr {res.stderr:.12g}  accepted {res.accepted}  rejected {res.rejected}")
    print("pass" if res.verdict else "fail")
    return 0 if res.verdict else 1


def cmd_girth_bench(args) -> int:
    rows = []
    for n in args.n:
        for d in args.d:
            t0 = time.perf_counter()
            g = generate(n, d, seed=args.seed)
            rows.append([n, d, g.target, g.achieved_girth, g.attempts - 1,
                         f"{time.perf_counter() - t0:.4f}"])
    w = csv.writer(open(args.out, "w", newline="") if args.out else sys.stdout,
                   lineterminator="\n")
    w.writerow(["n", "d", "target", "achieved", "retries", "seconds"])
    w.writerows(rows)
    return 0


def cmd_report(args) -> int:
    out = Path(args.dir)
    m = json.loads((out / "manifest.json").read_text())
    cfg = m["config"]
    print(f"mode {cfg['mode']}  d={cfg['d']}  levels={cfg['levels']}  depth={cfg['depth']}  "
          f"seed={m['seed']}")
    print(f"content hash {m['content_hash']}")
    with open(out / "checks.csv") as fh:
        for row in csv.DictReader(fh):
            print(f"  {row['status']:4}  {row['name']}  {row['detail']}")
    with open(out / "profiles.csv") as fh:
        rows = [r for r in csv.DictReader(fh) if r["contaminated"] == "0" and r["exponent"]]
    if rows:
        ex = [float(r["exponent"]) for r in rows]
        print(f"profiles: {len(rows)} clean rows, exponent range {min(ex):.6g} .. {max(ex):.6g}")
    for k, v in m["timings"].items():
        print(f"  {k}: {v:.2f}s")
    return 1 if m["failed"] else 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nogrowth", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a graph, run its checks, write outputs")
    _add_config_flags(b)
    b.set_defaults(func=cmd_build)

    m = sub.add_parser("measure", help="ball profiles and growth estimates")
    _add_config_flags(m)
    m.add_argument("--window-lo", type=int, default=1)
    m.add_argument("--window-hi", type=int)
    m.set_defaults(func=cmd_measure)

    w = sub.add_parser("witness", help="growth witness from one root")
    _add_config_flags(w)
    w.add_argument("--root", required=True, help="address g:N/bits, or a|b for U")
    w.add_argument("--m", type=int, default=1)
    w.add_argument("--kind", choices=("lower", "upper"), default="lower")
    w.set_defaults(func=cmd_witness)

    t = sub.add_parser("mtp", help="mass-transport sampling test")
    _add_config_flags(t)
    t.add_argument("--ensemble", choices=("canopy", "control", "graph"), default="canopy")
    t.add_argument("--transport", choices=sorted(lab.TRANSPORTS), default="parent")
    t.add_argument("--samples", type=int, default=10_000)
    t.add_argument("--canopy-depth", type=int, default=40)
    t.set_defaults(func=cmd_mtp)

    g = sub.add_parser("girth-bench", help="time the girth generator")
    g.add_argument("--n", type=int, nargs="+", default=[64, 256, 1024])
    g.add_argument("--d", type=int, nargs="+", default=[3])
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_girth_bench)

    r = sub.add_parser("report", help="summarize an output directory")
    r.add_argument("dir")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except NoGrowthError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
