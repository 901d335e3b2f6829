"""Command line driver: analytic tables, parameter sweeps, simulation campaigns.

Usage::

    cachebpec analytic --K 10 --N 100 --M 0 --delta 0.6
    cachebpec simulate --K 3 --N 3 --M 1 --delta 0.3 --F 100000 --replicas 10
    cachebpec sweep-fig3 --K 3
    cachebpec sweep-fig4
    cachebpec region --K 3 --N 3 --M 1 --delta 0.3 --rates 0.4,0.4,0.4

Parameters may also come from a JSON file (``--config``); flags override it.
Output is CSV on stdout or ``--out``; the bytes depend only on the
configuration and seed.  Exit status: 0 success, 1 usage error, 2 when the
decode failure rate exceeds ``--max-fail``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import statistics
import sys
from dataclasses import dataclass, field

import numpy as np

from . import analytics
from .experiment import run_replica
from .placement import MAX_USERS, SystemParams

MODES = ("analytic", "simulate", "sweep-fig3", "sweep-fig4", "region")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DECODE = 2


class UsageError(Exception):
    pass


def fmt(x) -> str:
    """Fixed CSV formatting for numbers; infinities become ``inf``."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.10g}"


def _grid(start: float, stop: float, n: int) -> list[float]:
    return [round(float(v), 12) for v in np.linspace(start, stop, n)]


@dataclass
class RunConfig:
    mode: str
    K: int = 3
    N: int = 3
    M: float = 1.0
    delta: float = 0.3
    F: int = 10_000
    P: int = 8
    replicas: int = 1
    seed: int = 0
    out: str | None = None
    M_grid: list[float] | None = None
    p_grid: list[float] | None = None
    delta_grid: list[float] | None = None
    rates: list[float] | None = None
    nofb: bool = False
    decode: bool = True
    max_fail: float = 0.1
    explicit: set = field(default_factory=set)

    def params(self) -> SystemParams:
        try:
            return SystemParams(self.K, self.N, self.M, self.F, self.delta, P=self.P, seed=self.seed)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def validate(self) -> None:
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.replicas < 1:
            raise UsageError("replicas must be at least 1")
        for name in ("M_grid", "p_grid", "delta_grid"):
            g = getattr(self, name)
            if g is not None and not g:
                raise UsageError(f"{name} must be nonempty")
        if self.delta_grid and any(not 0 <= d < 1 for d in self.delta_grid):
            raise UsageError("delta grid values must lie in [0, 1)")
        if self.p_grid and any(not 0 <= p <= 1 for p in self.p_grid):
            raise UsageError("p grid values must lie in [0, 1]")
        if not 0 <= self.max_fail <= 1:
            raise UsageError("max-fail must lie in [0, 1]")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text!r}")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cachebpec", description=__doc__.split("\n\n")[0])
    ap.add_argument("mode_pos", nargs="?", choices=MODES, metavar="mode",
                    help="|".join(MODES))
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--config", help="JSON file with RunConfig fields")
    ap.add_argument("--K", type=int)
    ap.add_argument("--N", type=int)
    ap.add_argument("--M", type=float)
    ap.add_argument("--delta", type=float)
    ap.add_argument("--F", type=int)
    ap.add_argument("--P", type=int, help="payload bytes per packet")
    ap.add_argument("--replicas", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out")
    ap.add_argument("--M-grid", dest="M_grid", type=_float_list)
    ap.add_argument("--p-grid", dest="p_grid", type=_float_list)
    ap.add_argument("--delta-grid", dest="delta_grid", type=_float_list)
    ap.add_argument("--rates", type=_float_list)
    ap.add_argument("--nofb", action=argparse.BooleanOptionalAction, default=None,
                    help="also run the no-feedback baseline on matched seeds")
    ap.add_argument("--decode", action=argparse.BooleanOptionalAction, default=None)
    ap.add_argument("--max-fail", dest="max_fail", type=float)
    return ap


_FIELDS = ("K", "N", "M", "delta", "F", "P", "replicas", "seed", "out", "M_grid",
           "p_grid", "delta_grid", "rates", "nofb", "decode", "max_fail")


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values: dict = {}
    if ns.config:
        try:
            with open(ns.config, encoding="utf-8") as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {ns.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config must be a JSON object")
        unknown = set(loaded) - set(_FIELDS) - {"mode"}
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        values.update(loaded)
    for name in _FIELDS:
        v = getattr(ns, name)
        if v is not None:
            values[name] = v
    mode = ns.mode_pos or ns.mode or values.pop("mode", None)
    values.pop("mode", None)
    if mode is None:
        raise UsageError("no mode given")
    cfg = RunConfig(mode=mode, explicit=set(values))
    for name, v in values.items():
        setattr(cfg, name, v)
    cfg.validate()
    return cfg


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def cmd_analytic(cfg: RunConfig) -> str:
    cfg.params()
    Ms = cfg.M_grid or [cfg.M]
    deltas = cfg.delta_grid or [cfg.delta]
    rows = []
    for M in Ms:
        if not 0 <= M <= cfg.N:
            raise UsageError(f"M={M} outside [0, N]")
        p = M / cfg.N
        for d in deltas:
            t = analytics.t_tot(cfg.K, p, d)
            rows.append((cfg.K, cfg.N, M, d, analytics.symmetric_rate(cfg.K, p, d), t,
                         analytics.t_tot_nofb(cfg.K, p, d)))
    header = ("K", "N", "M", "delta", "R_sym", "T_tot_per_F", "T_tot_nofb_per_F")
    return _csv(header, rows)


def cmd_sweep_fig3(cfg: RunConfig) -> str:
    K = cfg.K if "K" in cfg.explicit else 3
    if not 2 <= K <= MAX_USERS:
        raise UsageError(f"K must lie in [2, {MAX_USERS}]")
    ps = cfg.p_grid or _grid(0.0, 1.0, 21)
    deltas = cfg.delta_grid or _grid(0.0, 0.9, 19)
    rows = [(p, d, analytics.symmetric_rate(K, p, d)) for d in deltas for p in ps]
    return _csv(("p", "delta", "R_sym"), rows)


def cmd_sweep_fig4(cfg: RunConfig) -> str:
    K = cfg.K if "K" in cfg.explicit else 10
    N = cfg.N if "N" in cfg.explicit else 100
    if not 2 <= K <= MAX_USERS or N < 1:
        raise UsageError(f"need 2 <= K <= {MAX_USERS} and N >= 1")
    Ms = cfg.M_grid or [float(m) for m in range(0, N + 1, 5)]
    deltas = cfg.delta_grid or [0.0, 0.2, 0.6]
    rows = []
    for d in deltas:
        for M in Ms:
            if not 0 <= M <= N:
                raise UsageError(f"M={M} outside [0, N]")
            p = M / N
            rows.append((M, d, analytics.t_tot(K, p, d), analytics.t_tot_nofb(K, p, d)))
    return _csv(("M", "delta", "T_fb_per_F", "T_nofb_per_F"), rows)


@dataclass
class SimulationOutcome:
    csv: str
    decode_attempts: int
    decode_failures: int

    @property
    def failure_rate(self) -> float:
        return self.decode_failures / self.decode_attempts if self.decode_attempts else 0.0


def cmd_simulate(cfg: RunConfig) -> SimulationOutcome:
    params = cfg.params()
    if params.N < params.K:
        raise UsageError("simulation requires N >= K")
    results = [run_replica(params, r, decode=cfg.decode, nofb=cfg.nofb) for r in range(cfg.replicas)]
    results.sort(key=lambda r: r.replica)
    F = params.F
    header = ("replica", "scheme", "T_hat", "T_hat_per_F", "T_pred_per_F", "rel_error",
              "decode_ok", "decode_fail")
    rows = []
    attempts = failures = 0
    per_scheme: dict[str, list[tuple[float, float]]] = {"fb": [], "nofb": []}
    for res in results:
        ok, fail = (res.decode_ok, res.decode_fail) if cfg.decode else ("", "")
        if cfg.decode:
            attempts += len(res.decodes)
            failures += res.decode_fail
        rep = res.fb
        rows.append((res.replica, "fb", rep.T_hat, rep.T_hat / F, rep.T_pred / F,
                     rep.rel_error, ok, fail))
        per_scheme["fb"].append((rep.T_hat / F, rep.rel_error))
        if res.nofb is not None:
            nb = res.nofb
            rows.append((res.replica, "nofb", nb.T_hat, nb.T_hat / F, nb.T_pred / F,
                         nb.rel_error, "", ""))
            per_scheme["nofb"].append((nb.T_hat / F, nb.rel_error))
    preds = {"fb": results[0].fb.T_pred / F}
    if results[0].nofb is not None:
        preds["nofb"] = results[0].nofb.T_pred / F
    for scheme, vals in per_scheme.items():
        if not vals:
            continue
        xs = [v for v, _ in vals]
        mean = statistics.fmean(xs)
        std = statistics.stdev(xs) if len(xs) > 1 else 0.0
        pred = preds[scheme]
        err = abs(mean - pred) / pred if pred else (0.0 if mean == 0 else math.inf)
        rows.append(("mean", scheme, "", mean, pred, err, "", ""))
        rows.append(("std", scheme, "", std, "", "", "", ""))
    return SimulationOutcome(_csv(header, rows), attempts, failures)


def cmd_region(cfg: RunConfig) -> str:
    if not cfg.rates:
        raise UsageError("region needs --rates r1,...,rK")
    if len(cfg.rates) != cfg.K:
        raise UsageError(f"expected {cfg.K} rates, got {len(cfg.rates)}")
    if any(r < 0 for r in cfg.rates):
        raise UsageError("rates must be nonnegative")
    p = cfg.params().p
    v = analytics.is_achievable(cfg.rates, cfg.K, p, cfg.delta)
    perm = " ".join(str(k) for k in v.permutation)
    return _csv(("achievable", "binding_permutation", "weighted_sum", "slack"),
                [(v.achievable, perm, v.lhs, v.slack)])


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        if cfg.mode == "simulate":
            outcome = cmd_simulate(cfg)
            _emit(outcome.csv, cfg.out)
            if outcome.failure_rate > cfg.max_fail:
                print(f"decode failure rate {outcome.failure_rate:.4f} exceeds "
                      f"{cfg.max_fail}", file=sys.stderr)
                return EXIT_DECODE
            return EXIT_OK
        handler = {
            "analytic": cmd_analytic,
            "sweep-fig3": cmd_sweep_fig3,
            "sweep-fig4": cmd_sweep_fig4,
            "region": cmd_region,
        }[cfg.mode]
        _emit(handler(cfg), cfg.out)
        return EXIT_OK
    except UsageError as exc:
        print(f"cachebpec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
