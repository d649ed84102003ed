"""Experiment configuration, orchestration and CSV reports."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from . import __version__
from .errors import InvalidQ, InvalidRange, TooLarge, UnknownExperiment
from .lattice import BoundaryPartition, FiniteGraph, build_box, build_cover_box, build_rectangle
from .mc import ChainState, Estimate, bernoulli_onearm, estimate
from .model import ModelParams, p_critical

EXPERIMENTS = ("decay_free", "crossing_free", "annulus", "crossing_uniform", "spiral_decay", "susceptibility")
MAX_HEATBATH_N = 128
MAX_CLUSTER_N = 256


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment run.

    ``p`` defaults to ``p_c(q)``.  ``sizes`` is the size schedule; for
    ``spiral_decay`` the first size is the box, ``ks`` the sheet offsets
    and ``h`` the sheet cutoff of the cover (default ``4n``).  ``alpha`` is
    the rectangle aspect ratio and ``R`` the outer scale of the annulus
    experiment.  ``samples`` is the number of
    independent explorations used by ``decay_free`` at ``q = 1``.
    """

    experiment: str
    q: float = 2.0
    p: float | None = None
    sizes: tuple = (4, 8)
    bc: str = "free"
    sweeps: int = 10000
    burn_in: int | None = None
    batches: int = 32
    seed: int = 0
    out: str | None = None
    method: str = "cm"
    alpha: float = 1.0
    R: int = 4
    ks: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    h: int | None = None
    samples: int = 1000000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise UnknownExperiment(self.experiment)
        sizes = tuple(int(n) for n in self.sizes)
        if not sizes or any(n <= 0 for n in sizes) or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise InvalidRange("sizes must be positive and increasing")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        if self.q < 1:
            raise InvalidQ("Monte Carlo experiments need q >= 1")
        cap = MAX_HEATBATH_N if self.method == "heatbath" else MAX_CLUSTER_N
        if max(sizes) > cap:
            raise InvalidRange(f"sizes above {cap} are outside the desk-scale budget")

    @property
    def p_value(self) -> float:
        return p_critical(self.q) if self.p is None else float(self.p)

    def canonical(self) -> str:
        d = asdict(self)
        d.pop("out")
        d["p"] = self.p_value
        return json.dumps(d, sort_keys=True, default=list)

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


@dataclass
class Report:
    """Rows ``(experiment, n, quantity, mean, std_err, seed)`` with metadata."""

    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)


REPORT_COLUMNS = ("experiment", "n", "quantity", "mean", "std_err", "seed")


def emit_report(rows: Sequence, path, meta: dict | None = None) -> None:
    """Write rows as CSV preceded by ``# key=value`` metadata lines."""
    meta = dict(meta or {})
    meta.setdefault("version", __version__)
    with open(path, "w", newline="") as fh:
        for k in sorted(meta):
            fh.write(f"# {k}={meta[k]}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in rows:
            exp, n, qty, mean, se, seed = r
            w.writerow([exp, int(n), qty, repr(float(mean)), repr(float(se)), int(seed)])


def read_report(path) -> Report:
    meta, body = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("# "):
                k, _, v = line[2:].rstrip("\n").partition("=")
                meta[k] = v
            else:
                body.append(line)
    rd = csv.reader(body)
    next(rd, None)
    rows = [(e, int(n), qty, float(m), float(s), int(sd)) for e, n, qty, m, s, sd in rd]
    return Report(rows, meta)


# ---------------------------------------------------------------------------
# experiments


def _partition(g: FiniteGraph, bc: str) -> BoundaryPartition:
    if bc == "free":
        return BoundaryPartition.free(g)
    if bc == "wired":
        return BoundaryPartition.wired(g)
    if bc == "mixed":
        return BoundaryPartition.mixed(g)
    if bc == "dobrushin":
        # bottom side wired, the rest of the boundary free
        y0 = min(c[1] for c in g.coords)
        return BoundaryPartition.dobrushin(g, [c for c in g.coords if c[1] == y0])
    raise InvalidRange(f"boundary condition {bc!r} is not available")


def _mc(cfg: ExperimentConfig, g: FiniteGraph, xi: BoundaryPartition, events: list, chain: int) -> list[Estimate]:
    st = ChainState(g, xi, ModelParams(cfg.p_value, cfg.q), seed=cfg.seed, chain=chain, method=cfg.method)
    return estimate(st, list(events), cfg.sweeps, cfg.burn_in, cfg.batches, cfg.method)


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Run one experiment and return its report (written to ``cfg.out`` if set)."""
    fn = {
        "decay_free": _decay_free,
        "crossing_free": _crossing_free,
        "annulus": _annulus,
        "crossing_uniform": _crossing_uniform,
        "spiral_decay": _spiral_decay,
        "susceptibility": _susceptibility_exp,
    }[cfg.experiment]
    rows = fn(cfg)
    meta = {"version": __version__, "config_hash": cfg.config_hash(), "config": cfg.canonical()}
    rep = Report(rows, meta)
    if cfg.out:
        emit_report(rows, cfg.out, meta)
    return rep


def _decay_free(cfg):
    rows = []
    for i, n in enumerate(cfg.sizes):
        if cfg.q == 1:
            # independent percolation: exact i.i.d. explorations (only Lambda_n matters)
            hits, s = bernoulli_onearm(n, cfg.p_value, cfg.samples, cfg.seed, i)
            m = hits / s
            rows.append((cfg.experiment, n, f"onearm:{n}", m, math.sqrt(m * (1 - m) / s), cfg.seed))
            continue
        g = build_box(2 * n)
        (e,) = _mc(cfg, g, _partition(g, "free"), [f"onearm:{n}"], i)
        rows.append((cfg.experiment, n, e.event_id, e.mean, e.std_error, cfg.seed))
    return rows


def _rect_event(kind, x0, y0, x1, y1):
    return f"{kind}:{x0},{y0}:{x1},{y1}"


def _crossing_free(cfg):
    rows = []
    for i, n in enumerate(cfg.sizes):
        w = int(round(cfg.alpha * n))
        g = build_rectangle(0, w, 0, n)
        (e,) = _mc(cfg, g, _partition(g, "free"), [_rect_event("Ch", 0, 0, w, n)], i)
        rows.append((cfg.experiment, n, e.event_id, e.mean, e.std_error, cfg.seed))
    return rows


def _annulus(cfg):
    rows = []
    for i, n in enumerate(cfg.sizes):
        g = build_box(max(cfg.R, 2) * n)
        (e,) = _mc(cfg, g, _partition(g, cfg.bc), [f"annulus:0,0:{n}"], i)
        rows.append((cfg.experiment, n, e.event_id, e.mean, e.std_error, cfg.seed))
    return rows


def _crossing_uniform(cfg):
    rows = []
    for i, n in enumerate(cfg.sizes):
        w = int(round(cfg.alpha * n))
        g = build_rectangle(-n, w + n, -n, 2 * n)
        (e,) = _mc(cfg, g, _partition(g, cfg.bc), [_rect_event("Ch", 0, 0, w, n)], i)
        rows.append((cfg.experiment, n, e.event_id, e.mean, e.std_error, cfg.seed))
    return rows


def _spiral_decay(cfg):
    n = cfg.sizes[0]
    h = cfg.h if cfg.h is not None else 4 * n
    if max(cfg.ks) > h:
        raise InvalidRange(f"sheet offsets up to {max(cfg.ks)} need h >= {max(cfg.ks)}")
    g = build_cover_box(n, h)
    events = [f"conn:0,0,0:0,0,{-k}" for k in cfg.ks]
    ests = _mc(cfg, g, BoundaryPartition.free(g), events, 0)
    return [(cfg.experiment, k, e.event_id, e.mean, e.std_error, cfg.seed) for k, e in zip(cfg.ks, ests)]


def _susceptibility_exp(cfg):
    rows = []
    for i, n in enumerate(cfg.sizes):
        g = build_box(n)
        (e,) = _mc(cfg, g, _partition(g, cfg.bc), ["clustersize:0,0"], i)
        rows.append((cfg.experiment, n, e.event_id, e.mean, e.std_error, cfg.seed))
    return rows


def susceptibility(n: int, q: float, p: float | None = None, xi: str = "free", mode: str = "exact",
                   sweeps: int = 10000, seed: int = 0, method: str = "cm"):
    """Truncated susceptibility ``sum_{x in Lambda_n} phi[0 <-> x]`` on ``Lambda_n``.

    Exact mode returns a float; Monte Carlo mode returns an :class:`Estimate`.
    """
    from . import exact

    g = build_box(n)
    bc = _partition(g, xi)
    params = ModelParams(p_critical(q) if p is None else p, q)
    if mode == "exact":
        if g.n_edges > exact.MAX_EDGES:
            raise TooLarge(f"{g.n_edges} edges exceed the enumeration budget")
        return math.fsum(exact.two_point(g, params, bc, (0, 0), c) for c in g.coords)
    st = ChainState(g, bc, params, seed=seed, method=method)
    return estimate(st, "clustersize:0,0", sweeps, None, 32, method)


def loglinear_fit(ns: Sequence[float], probs: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares line through ``(n, log p)``: returns ``(slope, intercept, R^2)``."""
    x = np.asarray(ns, dtype=float)
    y = np.log(np.asarray(probs, dtype=float))
    A = np.vstack([x, np.ones_like(x)]).T
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (a * x + b)
    r2 = 1 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
    return float(a), float(b), r2


def config_from_mapping(d: dict) -> ExperimentConfig:
    """Build a config from string values (config files and CLI flags)."""
    names = {f.name for f in fields(ExperimentConfig)}
    kw = {}
    for k, v in d.items():
        k = k.replace("-", "_")
        if k == "burnin":
            k = "burn_in"
        if k not in names or v is None:
            continue
        if k in ("sizes", "ks"):
            v = tuple(int(x) for x in str(v).split(",") if x.strip()) if isinstance(v, str) else tuple(v)
        elif k in ("q", "alpha") or (k == "p" and v is not None):
            v = float(v)
        elif k in ("sweeps", "batches", "seed", "R", "samples") or (k in ("burn_in", "h") and v is not None):
            v = int(v)
        kw[k] = v
    return ExperimentConfig(**kw)


def read_config_file(path) -> dict:
    """Flat ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            k, sep, v = line.partition("=")
            if not sep:
                raise ValueError(f"malformed config line {line!r}")
            out[k.strip()] = v.strip()
    return out
