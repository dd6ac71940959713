"""Acceptance suite: one function per criterion, each returning a result row.

Every criterion runs at the tolerances pinned by the project contract; the
driver prints one PASS/FAIL line per criterion. Statistical criteria use
frozen master seeds (no reruns, no tuning); signal-starved data is reported
as starved, not failed, and maps to exit code 4 in the CLI.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import scipy.stats

from .engine import SimulationPlan, estimate_moments, iter_snapshot_batches, run_dynkin
from .model import ModelParams
from . import correlations as corr
from . import fluctuations as fl
from . import macro, oracle, profile, walks

BASE_SEED = 20260810


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    starved: bool = False
    seconds: float = 0.0


def format_line(r: CriterionResult) -> str:
    tag = "PASS" if r.passed else ("STARVED" if r.starved else "FAIL")
    return f"[{tag}] {r.number:2d}. {r.name}: {r.detail} ({r.seconds:.1f}s)"


def _timed(number, name, fn, threads):
    t0 = time.time()
    passed, detail, starved = fn(threads)
    return CriterionResult(number, name, passed, detail, starved, time.time() - t0)


def crit_1_oracle_equivalence(threads=0):
    """N=2 K=2 j=1 u0=1/2: chi^2 of the 32-state empirical law vs exp(tQ), and
    single-site means within 3 SE, at t in {0.1, 0.5}, M=1e5."""
    p = ModelParams(n=2, k_window=2, j_rate=1.0)
    gen = oracle.build_generator(p)
    pi0 = oracle.product_measure(p, np.full(p.n_sites, 0.5))
    m_tot = 100_000
    plan = SimulationPlan(p, 0.5, (0.1, 0.5), master_seed=BASE_SEED + 1, n_replicates=m_tot)
    counts = {0: np.zeros(32), 1: np.zeros(32)}
    sums = {0: np.zeros(p.n_sites), 1: np.zeros(p.n_sites)}
    for _rs, occ, _ev in iter_snapshot_batches(plan, u0=lambda u: 0.5, threads=threads):
        for k in (0, 1):
            states = (occ[:, k, :].astype(np.int64) << np.arange(p.n_sites)).sum(axis=1)
            counts[k] += np.bincount(states, minlength=32)
            sums[k] += occ[:, k, :].sum(axis=0)
    worst_p = 1.0
    worst_z = 0.0
    for k, t in ((0, 0.1), (1, 0.5)):
        pi_t = oracle.exact_distribution(gen, pi0, t)
        _chi2, pval = scipy.stats.chisquare(counts[k], pi_t * m_tot)
        worst_p = min(worst_p, pval)
        means, _ = oracle.two_point_matrix(gen, pi_t)
        emp = sums[k] / m_tot
        se = np.sqrt(np.maximum(emp * (1 - emp), 1e-12) / m_tot)
        worst_z = max(worst_z, float(np.abs((emp - means) / se).max()))
    ok = worst_p > 1e-3 and worst_z <= 3.0
    return ok, f"min chi2 p={worst_p:.4f} (>1e-3), max site-mean |z|={worst_z:.2f} (<=3)", False


def crit_2_kolmogorov(threads=0):
    """Finite-differenced oracle means satisfy the forward equation, residual < 1e-3."""
    p = ModelParams(n=2, k_window=2, j_rate=1.0)
    gen = oracle.build_generator(p)
    pi0 = oracle.product_measure(p, np.full(p.n_sites, 0.5))
    t, d = 0.3, 2e-3

    def means_at(tt):
        m, _ = oracle.two_point_matrix(gen, oracle.exact_distribution(gen, pi0, tt))
        return m

    lhs = (-means_at(t + 2 * d) + 8 * means_at(t + d) - 8 * means_at(t - d) + means_at(t - 2 * d)) / (12 * d)
    pi_t = oracle.exact_distribution(gen, pi0, t)
    rho = means_at(t)
    from .engine import discrete_laplacian

    rhs = 0.5 * discrete_laplacian(rho) / p.epsilon**2
    for x in p.i_plus:
        rhs[p.idx(x)] += 0.5 * p.j_rate / p.epsilon * oracle.d_plus_expectation(gen, pi_t, x)
    for x in p.i_minus:
        rhs[p.idx(x)] -= 0.5 * p.j_rate / p.epsilon * oracle.d_minus_expectation(gen, pi_t, x)
    res = float(np.abs(lhs - rhs).max())
    return res < 1e-3, f"max |d/dt rho - L rho| = {res:.2e} (<1e-3)", False


def crit_3_hydro_convergence(threads=0):
    """sup_x |rho_eps - rho(eps x)| at t=0.5 strictly decreasing over N in
    {16,32,64,128} with e(128)/e(16) < 0.35."""
    from scipy.interpolate import CubicSpline

    u0 = lambda u: 0.25 * (1 + u)
    sol = macro.solve_robin(u0, 2, 1.0, t_grid=[0.0, 0.5])
    spline = CubicSpline(sol.mesh, sol.values[1])
    errs = []
    for n in (16, 32, 64, 128):
        p = ModelParams(n=n, k_window=2, j_rate=1.0)
        grid = profile.solve_rho_eps(p, u0, [0.0, 0.5])
        errs.append(float(np.abs(grid.values[1] - spline(p.epsilon * p.sites())).max()))
    dec = all(errs[i + 1] < errs[i] for i in range(3))
    ratio = errs[-1] / errs[0]
    ok = dec and ratio < 0.35
    return ok, f"e(N)={['%.5f' % e for e in errs]}, decreasing={dec}, e(128)/e(16)={ratio:.3f} (<0.35)", False


def crit_4_cross_solver(threads=0):
    """solve_robin vs solve_integral_form sup difference <= 1e-4 for t <= 1."""
    u0 = lambda u: 0.25 * (1 + u)
    tg = [0.0, 0.25, 0.5, 1.0]
    a = macro.solve_robin(u0, 2, 1.0, t_grid=tg)
    b = macro.solve_integral_form(u0, 2, 1.0, t_grid=tg)
    d = float(np.abs(a.values - b.values).max())
    return d <= 1e-4, f"sup|robin - integral| = {d:.2e} (<=1e-4)", False


def crit_5_v2_scaling(threads=0):
    """Boundary pair (N-1,N), K=2 j=1 t=0.5, N in {16,32,64}, budgeted M:
    fitted log-log slope in [0.6, 1.4]."""
    report = corr.scaling_study(
        lambda n: corr.VQuery(sites=(n - 1, n), t=0.5),
        [16, 32, 64],
        k_window=2,
        j_rate=1.0,
        u0=lambda u: 0.25 * (1 + u),
        t_end=0.5,
        master_seed=BASE_SEED + 5,
        threads=threads,
    )
    starved = any(r.starved for r in report.rows)
    vals = "; ".join(f"N={r.n}: {r.value:+.5f}±{r.stderr:.5f}{' (starved)' if r.starved else ''}" for r in report.rows)
    detail = f"slope={report.slope:.3f}±{report.slope_ci:.3f} in [0.6,1.4]; {vals}; {report.budget_note}"
    return report.passed and not starved, detail, starved


def crit_6_gradient_bound(threads=0):
    """Deterministic: slope of log sup_x |rho_eps(x)-rho_eps(x+1)| vs log eps
    in [0.6, 1.1] over N in {16,...,128} at t=0.5."""
    u0 = lambda u: 0.25 * (1 + u)
    ns = [16, 32, 64, 128]
    sups = []
    for n in ns:
        p = ModelParams(n=n, k_window=2, j_rate=1.0)
        grid = profile.solve_rho_eps(p, u0, [0.0, 0.5])
        sups.append(float(profile.discrete_gradient_stats(grid)[1]))
    slope = float(np.polyfit(np.log([1.0 / n for n in ns]), np.log(sups), 1)[0])
    ok = 0.6 <= slope <= 1.1
    return ok, f"slope={slope:.3f} in [0.6,1.1]; sup-grads={['%.5f' % s for s in sups]}", False


def crit_7_spacetime_plateau(threads=0):
    """(m,n)=(1,1) boundary sites, gap r-s=1.0 (s=0.25): plateau scales with
    slope >= 0.6 over N in {16,32,64}; tiny-N two-time estimator matches the
    oracle within 3 SE."""
    s, gap = 0.25, 1.0
    report = corr.scaling_study(
        lambda n: corr.VQuery(sites=(n,), t=s + gap, sites_s=(n,), s=s),
        [16, 32, 64],
        k_window=2,
        j_rate=1.0,
        u0=lambda u: 0.25 * (1 + u),
        t_end=s + gap,
        master_seed=BASE_SEED + 7,
        m_override=1_000_000,
        threads=threads,
    )
    starved = any(r.starved for r in report.rows)
    slope_ok = not math.isnan(report.slope) and report.slope >= 0.6

    # tiny-N oracle cross-check of the two-time estimator
    p = ModelParams(n=3, k_window=2, j_rate=1.0)
    u0 = lambda u: 0.25 * (1 + u)
    grid = profile.solve_rho_eps(p, u0, [0.0, s, s + gap])
    plan = SimulationPlan(p, s + gap, (s, s + gap), master_seed=BASE_SEED + 70, n_replicates=200_000)
    q = corr.VQuery(sites=(p.n,), t=s + gap, sites_s=(p.n,), s=s)
    est = corr.estimate_v(q, plan, u0, grid, threads=threads)
    gen = oracle.build_generator(p)
    pi0 = oracle.product_measure(p, np.array([u0(p.epsilon * x) for x in p.sites()]))
    ex = oracle.exact_two_time_moment(
        gen, pi0, s, s + gap, [p.n], [grid.value(p.n, s)], [p.n], [grid.value(p.n, s + gap)]
    )
    z = (est.mean - ex) / est.stderr
    vals = "; ".join(f"N={r.n}: {r.value:+.5f}±{r.stderr:.5f}{' (starved)' if r.starved else ''}" for r in report.rows)
    ok = slope_ok and abs(z) <= 3.0 and not starved
    detail = f"plateau slope={report.slope:.3f}±{report.slope_ci:.3f} (>=0.6); {vals}; tiny-N oracle z={z:+.2f} (<=3)"
    return ok, detail, starved


def crit_8_dynkin(threads=0):
    """Tiny N, M=1e4: E[M_t(H)] and E[M_t^2 - int Gamma] within 3 SE of 0 for
    two preset test functions."""
    p = ModelParams(n=4, k_window=2, j_rate=1.0)
    sites_u = p.epsilon * p.sites()
    presets = {
        "cos2": np.cos(np.pi * (sites_u + 1) / 2) ** 2,
        "linear": 0.5 + 0.25 * sites_u,
    }
    worst = 0.0
    for name, h in presets.items():
        plan = SimulationPlan(p, 0.5, (0.0, 0.5), master_seed=BASE_SEED + 8, n_replicates=10_000)
        res = run_dynkin(plan, lambda u: 0.25 * (1 + u), h, threads=threads)
        m_t, pieces = fl.dynkin_residual(res, 1)
        zm = abs(m_t.mean()) / (m_t.std(ddof=1) / math.sqrt(m_t.size))
        qv = m_t**2 - pieces["qv_integral"]
        zq = abs(qv.mean()) / (qv.std(ddof=1) / math.sqrt(qv.size))
        worst = max(worst, zm, zq)
        # pathwise maximal-jump invariant
        if res["max_jump"].max() > 2 * math.sqrt(p.epsilon) * np.abs(h).max() + 1e-12:
            return False, f"maximal jump bound violated for {name}", False
    return worst <= 3.0, f"max |z| over (E[M], E[M^2-intGamma]) x 2 presets = {worst:.2f} (<=3)", False


def crit_9_ou_covariance(threads=0):
    """N=50 K=2 j=1 u0=(1+u)/4, S-member H, t=s=0.5, M=1e4:
    |empirical Var - oracle| <= max(3 SE, 12% of oracle)."""
    n, k, j, t = 50, 2, 1.0, 0.5
    u0 = lambda u: 0.25 * (1 + u)
    p = ModelParams(n=n, k_window=k, j_rate=j)
    tg = np.round(np.linspace(0.0, t, 101), 12)
    sol = macro.solve_robin(u0, k, j, t_grid=tg)
    from .testfunctions import load_registry

    tf = load_registry(["cos2plus"], sol)["cos2plus"]
    ok_member, _rows = macro.check_test_function(tf, sol, t_grid=[0.0, 0.25, 0.5], tol=1e-6)
    grid = profile.solve_rho_eps(p, u0, [0.0, t])
    plan = SimulationPlan(p, t, (t,), master_seed=BASE_SEED + 9, n_replicates=10_000)
    h_sites = tf.value(p.epsilon * p.sites(), t)
    f = fl.FieldFunctional(h_sites, t, plan, grid)
    y = fl.field_samples(plan, u0, [f], threads=threads)
    rows = fl.empirical_field_covariance(y, [("H", t, "H", t, 0, 0)])
    emp, se = rows[0].empirical, rows[0].stderr
    orc, rep = fl.ou_covariance_oracle(tf.value(sol.mesh, t), t, tf.value(sol.mesh, t), t, sol, u0)
    tol = max(3 * se, 0.12 * abs(orc))
    ok = ok_member and abs(emp - orc) <= tol
    detail = (
        f"empirical Var={emp:.5f}±{se:.5f}, oracle={orc:.5f} "
        f"(quadrature settled to {rep['rel_change']:.1e}), |diff|={abs(emp - orc):.5f} <= {tol:.5f}"
    )
    return ok, detail, False


def crit_10_kernel_suite(threads=0):
    """Spectral vs image-sum kernels to 1e-8; Liggett slack >= -1e-10 for
    n=2,3 on 2N+1 <= 9; ratio bounds <= 3.0 on the CI grid."""
    worst_pair = 0.0
    for n, t in ((3, 0.05), (4, 0.2), (4, 1.0)):
        spec_tab = walks.reflected_kernel(t, n)
        img_tab, _tail = walks.reflected_kernel_images(t, n)
        worst_pair = max(worst_pair, float(np.abs(spec_tab.p - img_tab.p).max()))
    lig = [walks.check_liggett(3, 0.2, 2), walks.check_liggett(4, 0.1, 3), walks.check_liggett(4, 0.05, 1)]
    lig_ok = all(r.holds for r in lig)
    min_slack = min(r.min_slack for r in lig)
    reports, bounds_ok = walks.check_kernel_bounds([8, 16, 25, 50], [0.05, 0.1, 0.5, 1.0])
    max_ratio = max(r.max_ratio for r in reports if r.in_window)
    ok = worst_pair <= 1e-8 and lig_ok and bounds_ok
    detail = (
        f"spectral vs images max diff={worst_pair:.1e} (<=1e-8); Liggett min slack={min_slack:.1e} "
        f"(>=-1e-10); max in-window ratio={max_ratio:.2f} (<= {walks.FROZEN_RATIO_BOUND})"
    )
    return ok, detail, False


def crit_11_reproducibility(threads=0):
    """Identical seeds, thread counts 1 vs 2: bit-identical moment estimates."""
    p = ModelParams(n=8, k_window=2, j_rate=1.0)
    u0 = lambda u: 0.25 * (1 + u)
    grid = profile.solve_rho_eps(p, u0, [0.0, 0.3])
    results = []
    for th in (1, 2):
        plan = SimulationPlan(p, 0.3, (0.3,), master_seed=BASE_SEED + 11, n_replicates=20_000)
        q = corr.VQuery(sites=(p.n - 1, p.n), t=0.3)
        est = corr.estimate_v(q, plan, u0, grid, threads=th)
        occ_f = lambda occ: occ[:, 0, p.idx(0)].astype(float)
        occ_f.functional_id = "eta(0)"
        est2 = estimate_moments(plan, [occ_f], u0=u0, threads=th)[0]
        results.append((est.mean, est.stderr, est2.mean, est2.stderr))
    same = results[0] == results[1]
    return same, f"threads 1 vs 2: estimates {'bit-identical' if same else f'differ: {results}'}", False


_CRITERIA = [
    (1, "oracle-equivalence", crit_1_oracle_equivalence),
    (2, "kolmogorov-consistency", crit_2_kolmogorov),
    (3, "hydrodynamic-convergence", crit_3_hydro_convergence),
    (4, "cross-solver-agreement", crit_4_cross_solver),
    (5, "v2-scaling", crit_5_v2_scaling),
    (6, "gradient-bound-scaling", crit_6_gradient_bound),
    (7, "spacetime-plateau", crit_7_spacetime_plateau),
    (8, "dynkin-martingale", crit_8_dynkin),
    (9, "ou-covariance", crit_9_ou_covariance),
    (10, "kernel-suite", crit_10_kernel_suite),
    (11, "reproducibility", crit_11_reproducibility),
]


def run_suite(only="", threads=0, out_dir=None):
    wanted = {int(x) for x in only.split(",") if x.strip()} if only else None
    results = []
    for number, name, fn in _CRITERIA:
        if wanted and number not in wanted:
            continue
        results.append(_timed(number, name, fn, threads))
    if out_dir is not None:
        with open(f"{out_dir}/acceptance.csv", "w") as fh:
            fh.write("# schema=acceptance/v1\n")
            fh.write("number,name,passed,starved,seconds,detail\n")
            for r in results:
                fh.write(f"{r.number},{r.name},{int(r.passed)},{int(r.starved)},{r.seconds:.1f},\"{r.detail}\"\n")
    return results
