"""Experiment runner.

Each subcommand reads a JSON config, validates all of it before computing
anything and writes a CSV table. The table starts with ``#``-prefixed JSON
lines echoing the fully resolved config, so no default is silent.

Exit codes: 0 success, 2 config error, 3 a numerical check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from . import __version__
from .boundary_value import (
    ExtendedLattice,
    cocycle_defect,
    dirac_residual,
    equivalence_defect,
    evolve,
    gaussian_packet,
)
from .dilation import (
    BlockMatrix2,
    POISSON_STATE,
    picard_propagator,
    poisson_expectation_mc,
    product_chain_compression,
    tensor_chain_compression,
    vacuum_expectation_dyson,
)
from .guichardet import Chain, ProductVector, fock_pseudo_norm_sq, poisson_law_mass
from .intensity import IntensityProfile
from .minkowski_clock import D, FUTURE, dag, lorentz_boost
from .object_space import (
    HamiltonianSchedule,
    generator,
    hemigroup_defect,
    max_entry,
    reference_propagator,
    unitarity_defect,
)

EXPERIMENTS = ("compare", "dyson-converge", "mc-sweep", "bvp-equivalence", "invariants")

EXIT_OK, EXIT_CONFIG, EXIT_CHECK = 0, 2, 3

Number = Union[float, int]
MatrixSpec = Union[Number, list]


class IntensitySpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant", "tabulated"] = "constant"
    data: Union[float, dict] = 1.0

    def build(self) -> IntensityProfile:
        return IntensityProfile.from_json(self.model_dump())


class ScheduleSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["constant", "harmonic", "separable", "piecewise_constant"] = "constant"
    H0: Optional[MatrixSpec] = None
    H1: Optional[MatrixSpec] = None
    omega: Optional[float] = None
    H: Optional[MatrixSpec] = None
    intensity: Optional[IntensitySpec] = None
    breaks: Optional[list[float]] = None
    matrices: Optional[list[MatrixSpec]] = None

    @model_validator(mode="after")
    def _required(self):
        need = {
            "constant": ("H0",),
            "harmonic": ("H0", "H1", "omega"),
            "separable": ("H", "intensity"),
            "piecewise_constant": ("breaks", "matrices"),
        }[self.kind]
        missing = [k for k in need if getattr(self, k) is None]
        if missing:
            raise ValueError(f"schedule kind {self.kind!r} needs {', '.join(missing)}")
        return self

    def build(self) -> HamiltonianSchedule:
        return HamiltonianSchedule.from_json(self.model_dump(exclude_none=True))


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    experiment: Optional[Literal[EXPERIMENTS]] = None
    schedule: ScheduleSpec = Field(default_factory=lambda: ScheduleSpec(kind="constant", H0=1.0))
    intensity: IntensitySpec = Field(default_factory=IntensitySpec)
    t: float = Field(1.0, gt=0)
    order: int = Field(12, ge=0, le=40)
    orders: list[int] = Field(default_factory=lambda: list(range(13)))
    nodes: int = Field(10, ge=1, le=40)
    ref_steps: int = Field(10_000, ge=10)
    picard_steps: int = Field(2048, ge=2)
    samples: int = Field(100_000, ge=1)
    sample_counts: list[int] = Field(default_factory=lambda: [1_000, 10_000, 100_000])
    nus: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0])
    batches: int = Field(20, ge=2)
    rate_multiplier: float = Field(2.0, gt=0)
    seed: int = Field(0, ge=0, lt=2**64)
    spacings: list[float] = Field(default_factory=lambda: [2.0**-k for k in range(4, 9)])
    chain: list[float] = Field(default_factory=lambda: [0.25, 0.625])
    wrong_order: bool = False
    cocycle_split: float = Field(0.5, ge=0)
    packet_center: float = Field(0.5, gt=0)
    packet_width: float = Field(0.1, gt=0)
    mc_sigma: float = Field(5.0, gt=0)
    out: Optional[str] = None

    @field_validator("orders")
    @classmethod
    def _orders(cls, v):
        if not v or any(n < 0 for n in v):
            raise ValueError("orders must be a non-empty list of non-negative integers")
        return v

    @field_validator("sample_counts")
    @classmethod
    def _counts(cls, v):
        if not v or any(s < 1 for s in v):
            raise ValueError("sample_counts must be positive")
        return v

    @field_validator("nus", "spacings")
    @classmethod
    def _positive(cls, v):
        if not v or any(not (x > 0 and math.isfinite(x)) for x in v):
            raise ValueError("values must be positive and finite")
        return v

    @field_validator("chain")
    @classmethod
    def _chain(cls, v):
        if len(v) > 2 or any(x < 0 for x in v) or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("chain must hold at most 2 increasing non-negative times")
        return v

    @field_validator("nus")
    @classmethod
    def _nu_floor(cls, v):
        if any(x < 1e-6 for x in v):
            raise ValueError("intensities must be at least 1e-6")
        return v


class ConfigError(Exception):
    pass


def _format_validation(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "\n".join(lines)


def load_config(path: Optional[str], experiment: str, overrides: dict) -> tuple[ExperimentConfig, HamiltonianSchedule, IntensityProfile]:
    """Parse, validate and build every object the experiment needs."""
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("<root>: config must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        cfg = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from exc
    if cfg.experiment is not None and cfg.experiment != experiment:
        raise ConfigError(f"experiment: config is for {cfg.experiment!r}, not {experiment!r}")
    cfg = cfg.model_copy(update={"experiment": experiment})
    try:
        schedule = cfg.schedule.build()
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"schedule: {exc}") from exc
    try:
        intensity = cfg.intensity.build()
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"intensity: {exc}") from exc
    if cfg.t > schedule.horizon:
        raise ConfigError(f"t: exceeds the schedule horizon {schedule.horizon}")
    if experiment == "bvp-equivalence":
        for i, h in enumerate(cfg.spacings):
            for name, val in (("t", cfg.t), ("cocycle_split", cfg.cocycle_split)):
                k = val / h
                if abs(k - round(k)) > 1e-9:
                    raise ConfigError(f"spacings.{i}: {name}={val} is not a multiple of {h}")
        if any(x >= cfg.t for x in cfg.chain):
            raise ConfigError("chain: points must lie in [0, t)")
        if cfg.cocycle_split > cfg.t:
            raise ConfigError("cocycle_split: must not exceed t")
    return cfg, schedule, intensity


# -- rows ---------------------------------------------------------------------

class Table:
    """Result rows plus the pass/fail checks made along the way."""

    columns = ("experiment", "params", "metric", "value", "error")

    def __init__(self, experiment: str):
        self.experiment = experiment
        self.rows: list[tuple] = []
        self.failures: list[str] = []

    def add(self, params: dict, metric: str, value: float, error: float | None = None):
        p = ";".join(f"{k}={_fmt(v)}" for k, v in params.items())
        self.rows.append((self.experiment, p, metric, _fmt(value), "" if error is None else _fmt(error)))

    def check(self, ok: bool, message: str):
        if not ok:
            self.failures.append(message)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _tail_bound(x: float, order: int) -> float:
    """``sum_{n > order} x^n / n!``, the Dyson truncation bound."""
    term = x ** (order + 1) / math.factorial(order + 1)
    tail, n = 0.0, order + 1
    while term > 1e-17 * tail and n < order + 400:
        tail += term
        n += 1
        term *= x / n
    return tail


def _within_sigma(est, ref, sigma: float) -> bool:
    diff = np.abs(est.matrix - ref)
    return bool(np.all(diff <= sigma * est.mc_stderr + 1e-14))


# -- experiments ----------------------------------------------------------------

def run_compare(cfg, schedule, intensity, threads=1, timing=False) -> Table:
    tab = Table("compare")
    clock = {}

    def timed(name, fn):
        t0 = time.perf_counter()
        out = fn()
        clock[name] = time.perf_counter() - t0
        return out

    ref = timed("reference", lambda: reference_propagator(schedule, 0.0, cfg.t, cfg.ref_steps).matrix)
    dy = timed("dyson", lambda: vacuum_expectation_dyson(schedule, cfg.t, cfg.order, cfg.nodes))
    pc = timed("picard", lambda: picard_propagator(schedule, cfg.t, cfg.order, cfg.picard_steps))
    mc = timed("poisson_mc", lambda: poisson_expectation_mc(
        schedule, intensity, cfg.t, cfg.samples, cfg.seed, cfg.batches, threads, cfg.rate_multiplier
    ))
    base = {"t": cfg.t}
    bound = _tail_bound(schedule.norm_bound() * cfg.t, cfg.order)
    tab.add({**base, "N": cfg.order}, "dyson_defect", max_entry(dy.matrix - ref), bound)
    tab.add({**base, "N": cfg.order}, "picard_defect", max_entry(pc.matrix - ref), bound)
    tab.add({**base, "S": cfg.samples, "seed": cfg.seed}, "mc_defect", max_entry(mc.matrix - ref), float(mc.mc_stderr.max()))
    tab.add({**base, "S": cfg.samples, "seed": cfg.seed}, "mc_stderr", float(mc.mc_stderr.max()))
    if timing:
        for name, secs in clock.items():
            tab.add({"method": name}, "wall_time_s", secs)
    tab.check(max_entry(dy.matrix - ref) <= bound + 1e-8, "dyson defect exceeds the truncation bound")
    tab.check(_within_sigma(mc, ref, cfg.mc_sigma), f"mc estimate outside {cfg.mc_sigma} sigma")
    return tab


def run_dyson_converge(cfg, schedule, intensity, threads=1, timing=False) -> Table:
    tab = Table("dyson-converge")
    ref = reference_propagator(schedule, 0.0, cfg.t, cfg.ref_steps).matrix
    x = schedule.norm_bound() * cfg.t
    prev = None
    for N in sorted(set(cfg.orders)):
        t0 = time.perf_counter()
        est = vacuum_expectation_dyson(schedule, cfg.t, N, cfg.nodes)
        secs = time.perf_counter() - t0
        defect = max_entry(est.matrix - ref)
        bound = _tail_bound(x, N)
        tab.add({"t": cfg.t, "N": N, "nodes": cfg.nodes}, "dyson_defect", defect, bound)
        if timing:
            tab.add({"N": N}, "wall_time_s", secs)
        tab.check(defect <= bound + 1e-8, f"N={N}: defect above truncation bound")
        if prev is not None and N >= x:
            tab.check(defect <= prev + 1e-10, f"N={N}: defect increased")
        prev = defect
    return tab


def _slope(xs, ys) -> float:
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def run_mc_sweep(cfg, schedule, intensity, threads=1, timing=False) -> Table:
    tab = Table("mc-sweep")
    ref = reference_propagator(schedule, 0.0, cfg.t, cfg.ref_steps).matrix
    errs = []
    counts = sorted(set(cfg.sample_counts))
    for S in counts:
        t0 = time.perf_counter()
        est = poisson_expectation_mc(schedule, intensity, cfg.t, S, cfg.seed, cfg.batches, threads, cfg.rate_multiplier)
        secs = time.perf_counter() - t0
        se = float(est.mc_stderr.max())
        errs.append(se)
        tab.add({"S": S, "nu": "config", "seed": cfg.seed}, "mc_defect", max_entry(est.matrix - ref), se)
        if timing:
            tab.add({"S": S}, "wall_time_s", secs)
        tab.check(_within_sigma(est, ref, cfg.mc_sigma), f"S={S}: outside {cfg.mc_sigma} sigma")
    if len(counts) >= 2 and all(e > 0 for e in errs):
        slope = _slope(counts, errs)
        tab.add({"S_min": counts[0], "S_max": counts[-1]}, "stderr_slope", slope)
        tab.check(abs(slope + 0.5) <= 0.1, f"stderr slope {slope:.3f} not -0.5 +- 0.1")
    for nu in cfg.nus:
        est = poisson_expectation_mc(
            schedule, IntensityProfile.constant(nu), cfg.t, cfg.samples, cfg.seed, cfg.batches, threads, cfg.rate_multiplier
        )
        tab.add({"S": cfg.samples, "nu": nu, "seed": cfg.seed}, "mc_defect", max_entry(est.matrix - ref), float(est.mc_stderr.max()))
        tab.check(_within_sigma(est, ref, cfg.mc_sigma), f"nu={nu}: outside {cfg.mc_sigma} sigma")
    return tab


def run_bvp_equivalence(cfg, schedule, intensity, threads=1, timing=False) -> Table:
    tab = Table("bvp-equivalence")
    chain = Chain(tuple(cfg.chain))
    r = cfg.t - cfg.cocycle_split
    series = {"equivalence_defect": [], "cocycle_defect": [], "dirac_residual": []}
    for h in sorted(set(cfg.spacings), reverse=True):
        t0 = time.perf_counter()
        eq = equivalence_defect(schedule, chain, cfg.t, h, wrong_order=cfg.wrong_order)
        co = cocycle_defect(schedule, r, cfg.cocycle_split, h, cfg.ref_steps)
        lat = ExtendedLattice(h, _dirac_extent(cfg, h))
        packet = gaussian_packet(lat, cfg.packet_center, cfg.packet_width, np.eye(schedule.dim)[0])
        dr = dirac_residual(evolve(packet, schedule, 0.0, int(round(cfg.t / h))))
        secs = time.perf_counter() - t0
        params = {"spacing": h, "chain": " ".join(map(_fmt, cfg.chain)), "wrong_order": cfg.wrong_order}
        for name, val in (("equivalence_defect", eq), ("cocycle_defect", co), ("dirac_residual", dr)):
            tab.add(params, name, val)
            series[name].append(val)
        if timing:
            tab.add({"spacing": h}, "wall_time_s", secs)
    for name, vals in series.items():
        if name == "equivalence_defect" and (cfg.wrong_order or not cfg.chain):
            continue
        if name == "cocycle_defect" and r == 0:
            continue
        if max(vals) <= 1e-12:
            # exact at every spacing (e.g. constant H): nothing to converge
            continue
        for a, b in zip(vals, vals[1:]):
            ratio = a / b if b > 0 else math.inf
            tab.add({"metric": name}, "halving_ratio", ratio)
            tab.check(1.7 <= ratio <= 2.3, f"{name}: halving ratio {ratio:.3f} outside [1.7, 2.3]")
    return tab


def _dirac_extent(cfg, h) -> float:
    need = max(cfg.t, cfg.packet_center + 12 * cfg.packet_width) + 2 * h
    return math.ceil(need / h) * h


def run_invariants(cfg, schedule, intensity, threads=1, timing=False) -> Table:
    tab = Table("invariants")
    rng = np.random.default_rng(cfg.seed)
    d = schedule.dim

    def row(name, value, tol):
        tab.add({"tol": tol}, name, value)
        tab.check(value <= tol, f"{name}={value:.3e} above {tol:.0e}")

    m = rng.standard_normal((2 * d, 2 * d)) + 1j * rng.standard_normal((2 * d, 2 * d))
    row("dag_involution", max_entry(dag(dag(m)) - m), 1e-12)
    row("increment_nilpotent", max_entry(D @ D), 1e-12)
    xs = np.linspace(0.0, cfg.t, 7)
    row("sigma_pseudo_unitarity", max(BlockMatrix2.sigma(generator(schedule, x)).pseudo_unitarity_defect() for x in xs), 1e-12)
    row("boost_pseudo_unitarity", max(max_entry(dag(lorentz_boost(l)) @ lorentz_boost(l) - np.eye(2)) for l in (0.25, 1.0, 3.0)), 1e-12)
    row("vacuum_norm", abs(fock_pseudo_norm_sq(ProductVector.constant(FUTURE), cfg.t) - 1.0), 1e-12)
    row("poisson_law_mass", abs(poisson_law_mass(intensity, cfg.t) - 1.0), 1e-10)
    row(
        "vacuum_compression",
        max(max_entry(BlockMatrix2.sigma(generator(schedule, x)).compress(FUTURE, FUTURE) - generator(schedule, x)) for x in xs),
        1e-12,
    )
    nu = intensity(xs)
    row(
        "poisson_compression",
        max(
            max_entry(BlockMatrix2.boosted(generator(schedule, x), v).compress(POISSON_STATE, POISSON_STATE) - (np.eye(d) + generator(schedule, x) / (2 * v)))
            for x, v in zip(xs, nu)
        ),
        1e-12,
    )
    worst = 0.0
    for n in range(5):
        c = Chain(tuple(np.sort(rng.uniform(0, cfg.t, n))))
        worst = max(worst, max_entry(tensor_chain_compression(schedule, c, cfg.t) - product_chain_compression(schedule, c, cfg.t)))
    row("chain_compression", worst, 1e-12)
    V = reference_propagator(schedule, 0.0, cfg.t, cfg.ref_steps).matrix
    row("unitarity", unitarity_defect(V), 1e-8)
    row("hemigroup", hemigroup_defect(schedule, 0.3 * cfg.t, 0.55 * cfg.t, cfg.t, cfg.ref_steps), 1e-8)
    return tab


RUNNERS = {
    "compare": run_compare,
    "dyson-converge": run_dyson_converge,
    "mc-sweep": run_mc_sweep,
    "bvp-equivalence": run_bvp_equivalence,
    "invariants": run_invariants,
}


def render(cfg: ExperimentConfig, tab: Table) -> str:
    buf = io.StringIO()
    header = {"package": "stochclock", "version": __version__, "config": cfg.model_dump(mode="json")}
    for line in json.dumps(header, sort_keys=True, indent=1).splitlines():
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(Table.columns)
    w.writerows(tab.rows)
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stochclock", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file (defaults are used if omitted)")
        p.add_argument("--out", help="output CSV path (stdout if omitted)")
        p.add_argument("--seed", type=int, help="overrides the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo batches")
        p.add_argument("--timing", action="store_true", help="add wall-time rows (output is then not reproducible)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("--threads: must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg, schedule, intensity = load_config(args.config, args.experiment, {"seed": args.seed, "out": args.out})
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    tab = RUNNERS[args.experiment](cfg, schedule, intensity, threads=args.threads, timing=args.timing)
    text = render(cfg, tab)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    for msg in tab.failures:
        print(f"check failed: {msg}", file=sys.stderr)
    return EXIT_CHECK if tab.failures else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
