"""Command line interface.

``rcmlab <experiment> [flags]`` runs an experiment; ``rcmlab exact ...``
exposes the enumeration oracle and ``rcmlab observable ...`` the
parafermionic observable.  ``--config FILE`` reads ``key=value`` lines;
explicit flags win over the file.
"""

from __future__ import annotations

import argparse
import sys

from .errors import RcmError
from .harness import EXPERIMENTS, config_from_mapping, read_config_file, run_experiment

_EXP_FLAGS = ("q", "p", "sizes", "bc", "sweeps", "burnin", "batches", "seed", "out", "method", "alpha", "R",
              "ks", "h", "samples")


def _experiment_parser(sub, name):
    sp = sub.add_parser(name, help=f"run the {name} experiment")
    sp.add_argument("--config")
    sp.add_argument("--q", type=float)
    sp.add_argument("--p", type=float)
    sp.add_argument("--sizes")
    sp.add_argument("--bc", choices=["free", "wired", "dobrushin", "mixed"])
    sp.add_argument("--sweeps", type=int)
    sp.add_argument("--burnin", type=int)
    sp.add_argument("--batches", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out")
    sp.add_argument("--method", choices=["heatbath", "cm", "sw"])
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--R", type=int)
    sp.add_argument("--ks")
    sp.add_argument("--h", type=int)
    sp.add_argument("--samples", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rcmlab", description="random-cluster model laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        _experiment_parser(sub, name)

    ex = sub.add_parser("exact", help="exact enumeration on small graphs")
    exs = ex.add_subparsers(dest="sub", required=True)
    for name, hlp in (("partition", "log Z"), ("prob", "probability of events"), ("duality", "duality check"),
                      ("coupling", "FK-Potts coupling check")):
        sp = exs.add_parser(name, help=hlp)
        sp.add_argument("--graph", default="box:1", help="box:n | rect:x0,x1,y0,y1 | slit:n | cover:n,h | k2")
        sp.add_argument("--q", type=float, default=2.0)
        sp.add_argument("--p", type=float)
        sp.add_argument("--bc", default="free", choices=["free", "wired", "mixed"])
        if name == "prob":
            sp.add_argument("events", nargs="+")

    ob = sub.add_parser("observable", help="parafermionic observable on a Dobrushin domain")
    ob.add_argument("--domain", default="r:1", help="r:n | square | rect:x0,x1,y0,y1:x,y;x,y...")
    ob.add_argument("--q", type=float, default=2.0)
    ob.add_argument("--mode", default="exact", choices=["exact", "mc"])
    ob.add_argument("--variant", default="Fhat", choices=["F", "Fhat"])
    ob.add_argument("--sweeps", type=int, default=100000)
    ob.add_argument("--seed", type=int, default=0)
    ob.add_argument("--contour", help="file with one 'x y' point per line")
    ob.add_argument("--out")
    return ap


def _domain(spec: str):
    from .dobrushin import r_domain, rectangle_domain, square_domain

    kind, _, rest = spec.partition(":")
    if kind == "r":
        return r_domain(int(rest))
    if kind == "square":
        return square_domain()
    if kind == "rect":
        box, _, path = rest.partition(":")
        x0, x1, y0, y1 = (int(v) for v in box.split(","))
        wired = [tuple(int(c) for c in pt.split(",")) for pt in path.split(";")]
        return rectangle_domain(x0, x1, y0, y1, wired)
    raise ValueError(f"unknown domain {spec!r}")


def _run_exact(args) -> int:
    from . import exact
    from .lattice import BoundaryPartition, build_dual, parse_graph_spec
    from .model import ModelParams, p_critical

    g = parse_graph_spec(args.graph)
    params = ModelParams(p_critical(args.q) if args.p is None else args.p, args.q)
    xi = {"free": BoundaryPartition.free, "wired": BoundaryPartition.wired,
          "mixed": BoundaryPartition.mixed}[args.bc](g)
    if args.sub == "partition":
        print(f"logZ={exact.histogram(g, xi).log_partition(params):.17g}")
    elif args.sub == "prob":
        for ev in args.events:
            print(f"{ev},{exact.event_probability(g, params, xi, ev):.17g}")
    elif args.sub == "duality":
        import numpy as np

        dual, _ = build_dual(g)
        P = exact.configuration_probabilities(g, params, BoundaryPartition.free(g))
        Pd = exact.configuration_probabilities(dual, params.dual(), BoundaryPartition.wired(dual))
        full = (1 << g.n_edges) - 1
        err = float(np.max(np.abs(P - Pd[full - np.arange(1 << g.n_edges)])))
        print(f"max_error={err:.3g}")
    elif args.sub == "coupling":
        res = exact.coupling_check(g, int(args.q), params.p, xi)
        print(f"max_discrepancy={res['max']:.3g}")
    return 0


def _run_observable(args) -> int:
    from .loops import contour_integral, observable_field

    d = _domain(args.domain)
    fh, f = observable_field(d, args.q, args.mode, with_F=True, sweeps=args.sweeps, seed=args.seed)
    fld = fh if args.variant == "Fhat" else f
    if args.out:
        fld.to_csv(args.out)
    if args.contour:
        pts = []
        with open(args.contour) as fp:
            for line in fp:
                line = line.split("#", 1)[0].split()
                if line:
                    pts.append(complex(float(line[0]), float(line[1])))
        z = contour_integral(f, pts)
        print(f"contour_integral={z.real:.6g}{z.imag:+.6g}j")
    if not args.out and not args.contour:
        for k, z in enumerate(fld.values):
            print(f"{k},{z.real:.12g},{z.imag:.12g}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "exact":
            return _run_exact(args)
        if args.command == "observable":
            return _run_observable(args)
        values = read_config_file(args.config) if args.config else {}
        for k in _EXP_FLAGS:
            v = getattr(args, k, None)
            if v is not None:
                values[k] = v
        values["experiment"] = args.command
        cfg = config_from_mapping(values)
        rep = run_experiment(cfg)
        if not cfg.out:
            for r in rep.rows:
                print(",".join(str(x) for x in r))
        return 0
    except RcmError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
