"""Reproducible experiment runner.

Config files are line-based `section.key = value` UTF-8 text ('#' comments);
every key is validated against a whitelist before any compute, and unknown
keys are hard errors. Every output CSV carries a `# schema=<name>/v1` header
comment and is accompanied by a .manifest file (config hash, code version,
seed, wall time) sufficient to re-run it exactly. Exit codes: 2 config error,
3 capacity error, 4 signal-starved acceptance data, 1 assertion failure.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .engine import SimulationPlan, iter_snapshot_batches, resolve_threads
from .model import ModelParams
from .oracle import CapacityError

__all__ = ["main", "ExperimentConfig", "ConfigError", "load_config"]


class ConfigError(Exception):
    pass


_SCHEMA = {
    "model": {"N", "N_list", "K", "j", "u0", "u0_value", "u0_a", "u0_b"},
    "run": {"t_end", "snapshot_times", "M", "master_seed", "threads", "batch_size", "max_events"},
    "study": {
        "kind",
        "pattern",
        "x_pattern",
        "y_pattern",
        "t",
        "s",
        "gaps",
        "m_pilot",
        "m_cap",
        "m_override",
        "test_functions",
        "registry",
        "time_pairs",
        "sites",
        "times",
        "centering_mode",
        "t_grid",
        "n_particles",
        "boundary_weight",
    },
}

_REQUIRED = {"model.K", "model.j"}


class ExperimentConfig:
    """Validated flat view of a parsed config."""

    def __init__(self, entries: dict):
        for full_key in entries:
            section, _, key = full_key.partition(".")
            if section not in _SCHEMA or key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key: {full_key}")
        for req in _REQUIRED:
            if req not in entries:
                raise ConfigError(f"missing config key: {req}")
        self.entries = entries

    def get(self, key, default=None, cast=str):
        if key not in self.entries:
            if default is None:
                raise ConfigError(f"missing config key: {key}")
            return default
        raw = self.entries[key]
        try:
            if cast is bool:
                return raw.lower() in ("1", "true", "yes")
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc

    def get_list(self, key, cast=float, default=None):
        if key not in self.entries:
            if default is None:
                raise ConfigError(f"missing config key: {key}")
            return default
        return [cast(tok) for tok in self.entries[key].split(",") if tok.strip()]

    def n_values(self):
        if "model.N_list" in self.entries:
            return self.get_list("model.N_list", int)
        return [self.get("model.N", cast=int)]

    def u0(self):
        preset = self.get("model.u0", default="linear")
        if preset == "constant":
            c = self.get("model.u0_value", cast=float)
            if not 0 <= c <= 1:
                raise ConfigError("u0_value must be in [0,1]")
            return lambda u: c
        if preset == "linear":
            a = self.get("model.u0_a", default=0.25, cast=float)
            b = self.get("model.u0_b", default=0.25, cast=float)
            for edge in (-1.0, 1.0):
                if not 0 <= a + b * edge <= 1:
                    raise ConfigError("linear profile leaves [0,1]")
            return lambda u: a + b * u
        raise ConfigError(f"unknown u0 preset {preset!r}")

    def params(self, n=None) -> ModelParams:
        n = n if n is not None else self.get("model.N", cast=int)
        return ModelParams(n=n, k_window=self.get("model.K", cast=int), j_rate=self.get("model.j", cast=float))

    def digest(self) -> str:
        canon = "\n".join(f"{k} = {self.entries[k]}" for k in sorted(self.entries))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def load_config(path) -> ExperimentConfig:
    entries = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'section.key = value'")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if "." not in key:
            raise ConfigError(f"{path}:{lineno}: key {key!r} has no section")
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key}")
        entries[key] = value
    return ExperimentConfig(entries)


def _write_csv(path: Path, schema: str, header: str, rows):
    with open(path, "w") as fh:
        fh.write(f"# schema={schema}/v1\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


def _write_manifest(path: Path, cfg: ExperimentConfig, seed, wall, argv):
    with open(path, "w") as fh:
        fh.write(f"config_sha256 = {cfg.digest()}\n")
        fh.write(f"code_version = stirringlab {__version__}\n")
        fh.write(f"master_seed = {seed}\n")
        fh.write(f"wall_seconds = {wall:.3f}\n")
        fh.write(f"command = {' '.join(argv)}\n")
        fh.write(f"timestamp = {time.strftime('%Y-%m-%dT%H:%M:%S')}\n")


def _plan(cfg: ExperimentConfig, params) -> SimulationPlan:
    return SimulationPlan(
        params,
        t_end=cfg.get("run.t_end", cast=float),
        snapshot_times=tuple(cfg.get_list("run.snapshot_times")),
        master_seed=cfg.get("run.master_seed", default=20260810, cast=int),
        n_replicates=cfg.get("run.M", cast=int),
        max_events=cfg.get("run.max_events", default=10_000_000_000, cast=int),
    )


def _cmd_simulate(cfg, out, argv):
    params = cfg.params()
    plan = _plan(cfg, params)
    threads = cfg.get("run.threads", default=0, cast=int)
    t0 = time.time()
    rows = []
    for rep_start, occ, _ev in iter_snapshot_batches(plan, u0=cfg.u0(), threads=threads):
        for i in range(occ.shape[0]):
            for k, t in enumerate(plan.snapshot_times):
                rows.append((rep_start + i, t, "".join("1" if v else "0" for v in occ[i, k])))
    path = out / "snapshots.csv"
    _write_csv(path, "snapshots", "replicate_id,time,config", rows)
    _write_manifest(path.with_suffix(".manifest"), cfg, plan.master_seed, time.time() - t0, argv)
    return 0


def _cmd_profile(cfg, out, argv, integrator="imex"):
    from .profile import solve_rho_eps

    t0 = time.time()
    t_grid = sorted({0.0, *cfg.get_list("run.snapshot_times", default=[cfg.get("run.t_end", cast=float)])})
    rows = []
    for n in cfg.n_values():
        params = cfg.params(n)
        grid = solve_rho_eps(params, cfg.u0(), t_grid, integrator=integrator)
        for ti, t in enumerate(grid.t_grid):
            for xi, x in enumerate(params.sites()):
                rows.append((t, x, repr(float(grid.values[ti, xi]))))
    path = out / "profile.csv"
    _write_csv(path, "profile", "t,x,rho_eps", rows)
    _write_manifest(path.with_suffix(".manifest"), cfg, "-", time.time() - t0, argv)
    return 0


def _cmd_hydro(cfg, out, argv, solver="robin"):
    from .macro import solve_integral_form, solve_robin

    t0 = time.time()
    t_grid = sorted({0.0, *cfg.get_list("study.t_grid", default=[0.5])})
    fn = solve_robin if solver == "robin" else solve_integral_form
    sol = fn(cfg.u0(), cfg.get("model.K", cast=int), cfg.get("model.j", cast=float), t_grid=t_grid)
    rows = []
    for ti, t in enumerate(sol.t_grid):
        for ui, u in enumerate(sol.mesh):
            rows.append((t, repr(float(u)), repr(float(sol.values[ti, ui]))))
    path = out / f"macro_{solver}.csv"
    _write_csv(path, "macro", "t,u,rho", rows)
    _write_manifest(path.with_suffix(".manifest"), cfg, "-", time.time() - t0, argv)
    return 0


def _cmd_vstudy(cfg, out, argv):
    from .correlations import VQuery, parse_site_pattern, scaling_study

    t0 = time.time()
    pattern = cfg.get("study.pattern")
    t = cfg.get("study.t", cast=float)
    s = cfg.get("study.s", default=-1.0, cast=float)
    y_pattern = cfg.get("study.y_pattern", default="")

    def make_query(n):
        sites = parse_site_pattern(pattern, n)
        if y_pattern:
            return VQuery(sites=sites, t=t, sites_s=parse_site_pattern(y_pattern, n), s=s)
        return VQuery(sites=sites, t=t)

    report = scaling_study(
        make_query,
        cfg.n_values(),
        cfg.get("model.K", cast=int),
        cfg.get("model.j", cast=float),
        cfg.u0(),
        t_end=cfg.get("run.t_end", cast=float),
        master_seed=cfg.get("run.master_seed", default=20260810, cast=int),
        m_pilot=cfg.get("study.m_pilot", default=40_000, cast=int),
        m_cap=cfg.get("study.m_cap", default=4_000_000, cast=int),
        m_override=cfg.get("study.m_override", default=0, cast=int) or None,
        threads=cfg.get("run.threads", default=0, cast=int),
    )
    path = out / "vstudy.csv"
    _write_csv(path, "scaling", "N,epsilon,value,stderr,samples,starved", report.csv_rows())
    _write_csv(
        out / "vstudy_summary.csv",
        "scaling-summary",
        "slope,slope_ci,band_lo,band_hi,passed,budget",
        [(report.slope, report.slope_ci, report.band[0], report.band[1], int(report.passed), report.budget_note.replace(",", ";"))],
    )
    _write_manifest(path.with_suffix(".manifest"), cfg, cfg.get("run.master_seed", default=20260810, cast=int), time.time() - t0, argv)
    return 0 if report.passed else 1


def _cmd_stdecay(cfg, out, argv):
    from .correlations import spacetime_decay_study

    t0 = time.time()
    rows_out = []
    rows, monotone = spacetime_decay_study(
        cfg.get("study.y_pattern"),
        cfg.get("study.s", cast=float),
        cfg.get("study.x_pattern"),
        cfg.get_list("study.gaps"),
        n=cfg.get("model.N", cast=int),
        k_window=cfg.get("model.K", cast=int),
        j_rate=cfg.get("model.j", cast=float),
        u0=cfg.u0(),
        master_seed=cfg.get("run.master_seed", default=20260810, cast=int),
        m=cfg.get("run.M", cast=int),
        threads=cfg.get("run.threads", default=0, cast=int),
    )
    for g, est in rows:
        rows_out.append((g, est.mean, est.stderr, est.samples))
    path = out / "stdecay.csv"
    _write_csv(path, "stdecay", "gap,value,stderr,samples", rows_out)
    _write_csv(out / "stdecay_summary.csv", "stdecay-summary", "monotone_beyond_first", [(int(monotone),)])
    _write_manifest(path.with_suffix(".manifest"), cfg, cfg.get("run.master_seed", default=20260810, cast=int), time.time() - t0, argv)
    return 0


def _cmd_gradstudy(cfg, out, argv):
    from .correlations import gradient_v_study, parse_site_pattern

    t0 = time.time()
    pattern = cfg.get("study.pattern")
    report = gradient_v_study(
        lambda n: parse_site_pattern(pattern, n),
        t=cfg.get("study.t", cast=float),
        n_list=cfg.n_values(),
        k_window=cfg.get("model.K", cast=int),
        j_rate=cfg.get("model.j", cast=float),
        u0=cfg.u0(),
        master_seed=cfg.get("run.master_seed", default=20260810, cast=int),
        m=cfg.get("run.M", cast=int),
        threads=cfg.get("run.threads", default=0, cast=int),
    )
    path = out / "gradstudy.csv"
    _write_csv(path, "scaling", "N,epsilon,value,stderr,samples,starved", report.csv_rows())
    _write_manifest(path.with_suffix(".manifest"), cfg, cfg.get("run.master_seed", default=20260810, cast=int), time.time() - t0, argv)
    return 0


def _cmd_field(cfg, out, argv):
    from .fluctuations import FieldFunctional, empirical_field_covariance, field_samples, ou_covariance_oracle
    from .macro import solve_robin
    from .profile import solve_rho_eps
    from .testfunctions import load_registry

    t0 = time.time()
    params = cfg.params()
    plan = _plan(cfg, params)
    u0 = cfg.u0()
    names = cfg.get_list("study.test_functions", cast=str, default=["cos2plus"])
    registry_path = cfg.get("study.registry", default="")
    t_grid = sorted({0.0, *plan.snapshot_times})
    macro_grid = np.round(np.linspace(0.0, plan.t_end, max(21, int(plan.t_end / 0.01) + 1)), 12)
    sol = solve_robin(u0, params.k_window, params.j_rate, t_grid=sorted({*macro_grid, *t_grid}))
    tfs = load_registry(names, sol, registry_path or None)
    grid = solve_rho_eps(params, u0, t_grid)
    pairs_spec = cfg.get_list("study.time_pairs", cast=str, default=[f"{plan.snapshot_times[-1]}:{plan.snapshot_times[-1]}"])
    w = cfg.get("study.boundary_weight", default=0.5, cast=float)

    sites_u = params.epsilon * params.sites()
    funcs = []
    cols = {}
    for name, tf in tfs.items():
        for t in plan.snapshot_times:
            cols[(name, t)] = len(funcs)
            funcs.append(FieldFunctional(tf.value(sites_u, t), t, plan, grid, label=name))
    samples = field_samples(plan, u0, funcs, threads=cfg.get("run.threads", default=0, cast=int))
    pairs, oracles = [], []
    for ps in pairs_spec:
        t_str, s_str = ps.split(":")
        t, s = float(t_str), float(s_str)
        for name, tf in tfs.items():
            pairs.append((name, t, name, s, cols[(name, t)], cols[(name, s)]))
            val, _rep = ou_covariance_oracle(
                tf.value(sol.mesh, t), t, tf.value(sol.mesh, s), s, sol, u0, boundary_weight=w
            )
            oracles.append(val)
    rows = empirical_field_covariance(samples, pairs, oracles)
    path = out / "field.csv"
    _write_csv(
        path,
        "field-cov",
        "H_id,t,G_id,s,empirical,stderr,oracle,zscore",
        [(r.h_id, r.t, r.g_id, r.s, r.empirical, r.stderr, r.oracle, r.zscore) for r in rows],
    )
    _write_manifest(path.with_suffix(".manifest"), cfg, plan.master_seed, time.time() - t0, argv)
    return 0


def _cmd_oracle(cfg, out, argv):
    from .oracle import build_generator, exact_moment, product_measure
    from .profile import solve_rho_eps

    t0 = time.time()
    params = cfg.params()
    u0 = cfg.u0()
    gen = build_generator(params)
    pi0 = product_measure(params, [u0(params.epsilon * x) for x in params.sites()])
    times = cfg.get_list("study.times", default=[0.5])
    sites = [int(s) for s in cfg.get_list("study.sites", cast=float, default=[params.n - 1, params.n])]
    mode = cfg.get("study.centering_mode", default="rho_eps")
    grid = solve_rho_eps(params, u0, sorted({0.0, *times}))
    rows = []
    for t in times:
        if mode == "rho_eps":
            centering = [grid.value(x, t) for x in sites]
        elif mode == "none":
            centering = [0.0] * len(sites)
        else:
            raise ConfigError(f"unknown centering_mode {mode!r}")
        val = exact_moment(gen, pi0, t, sites, centering)
        rows.append((len(sites), params.k_window, params.j_rate, t, ";".join(map(str, sites)), mode, repr(val)))
    path = out / "golden.csv"
    _write_csv(path, "golden", "n_sites,K,j,t,sites,centering_mode,value", rows)
    _write_manifest(path.with_suffix(".manifest"), cfg, "-", time.time() - t0, argv)
    return 0


def _cmd_kernels(cfg, out, argv):
    from .walks import check_kernel_bounds, reflected_kernel

    t0 = time.time()
    rows = []
    n_list = cfg.n_values()
    t_list = cfg.get_list("study.times", default=[0.05, 0.1, 0.5, 1.0])
    for n in n_list:
        for t in t_list:
            tab = reflected_kernel(t, n)
            for x in range(-n, n + 1):
                for y in range(-n, n + 1):
                    rows.append((t, x, y, repr(tab.value(x, y))))
    path = out / "kernels.csv"
    _write_csv(path, "kernel", "t,x,y,p", rows)
    reports, _ok = check_kernel_bounds(n_list, t_list)
    _write_csv(
        out / "kernel_bounds.csv",
        "kernel-bounds",
        "kind,N,t,max_ratio,argmax_x,argmax_y",
        [(r.kind, r.n, r.t, r.max_ratio, r.argmax_x, r.argmax_y) for r in reports],
    )
    _write_manifest(path.with_suffix(".manifest"), cfg, "-", time.time() - t0, argv)
    return 0


def _cmd_accept(args, out, argv):
    from . import accept

    results = accept.run_suite(only=args.only, threads=args.threads, out_dir=out)
    worst = 0
    for r in results:
        print(accept.format_line(r))
        if r.starved:
            worst = max(worst, 4)
        elif not r.passed:
            worst = max(worst, 1)
    print(f"acceptance: {sum(r.passed for r in results)}/{len(results)} passed")
    return worst


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = argparse.ArgumentParser(prog="stirringlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "profile", "hydro", "vstudy", "stdecay", "gradstudy", "field", "oracle", "kernels"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default=".")
        if name == "profile":
            sp.add_argument("--integrator", choices=("imex", "rk4"), default="imex")
        if name == "hydro":
            sp.add_argument("--solver", choices=("robin", "integral"), default="robin")
    sa = sub.add_parser("accept")
    sa.add_argument("--suite", choices=("primary",), default="primary")
    sa.add_argument("--only", default="", help="comma list of criterion numbers")
    sa.add_argument("--threads", type=int, default=0)
    sa.add_argument("--out", default=".")
    args = parser.parse_args(argv)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if "STIRRINGLAB_THREADS" in os.environ:
        resolve_threads(0)
    try:
        if args.command == "accept":
            return _cmd_accept(args, out, ["stirringlab", *argv])
        cfg = load_config(args.config)
        if "run.threads" in cfg.entries:
            resolve_threads(cfg.get("run.threads", cast=int))
        handler = {
            "simulate": _cmd_simulate,
            "vstudy": _cmd_vstudy,
            "stdecay": _cmd_stdecay,
            "gradstudy": _cmd_gradstudy,
            "field": _cmd_field,
            "oracle": _cmd_oracle,
            "kernels": _cmd_kernels,
        }.get(args.command)
        if args.command == "profile":
            return _cmd_profile(cfg, out, ["stirringlab", *argv], integrator=args.integrator)
        if args.command == "hydro":
            return _cmd_hydro(cfg, out, ["stirringlab", *argv], solver=args.solver)
        return handler(cfg, out, ["stirringlab", *argv])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 3
    except AssertionError as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
