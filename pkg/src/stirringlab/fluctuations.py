"""Density fluctuation field, pathwise Dynkin martingale, and the limiting
Gaussian covariance oracle.

The field pairs sqrt(eps)-scaled centered occupations with a test function;
centering uses the deterministic auxiliary profile (the expectation profile
is not available in closed form; the substitution bias is the degree-1
v-function, vanishing like eps^(1-2zeta), i.e. O(sqrt(eps)) at field level,
and is measured against the tiny-lattice oracle in the tests).

The covariance oracle evaluates
    sigma(psi_0^H, psi_0^G) + int_0^s <psi_r^H, psi_r^G>_{rho_r} dr,
with psi_r = U(r, t)H the backward linearized evolution family and the inner
product carrying chi(rho_r) against the gradients plus boundary terms with
weight 1/2 * Dtilde_+-(rho(+-1,r)) (the weight that the generator's
carre-du-champ actually produces in the limit; weight 1.0 is kept as an
option for sensitivity runs). All spatial integrals default to [-1,1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import SimulationPlan, iter_snapshot_batches, run_dynkin
from .macro import MacroSolution, backward_family, dtilde_minus, dtilde_plus, _simpson_weights
from .profile import DiscreteProfileGrid

__all__ = [
    "field_value",
    "FieldFunctional",
    "field_samples",
    "dynkin_residual",
    "CovarianceRow",
    "empirical_field_covariance",
    "ou_covariance_oracle",
    "chi",
]


def chi(u):
    """Static compressibility of the exclusion occupation: u(1-u)."""
    return np.asarray(u) * (1.0 - np.asarray(u))


def field_value(config_occ: np.ndarray, h_sites: np.ndarray, centering_slice: np.ndarray, epsilon: float) -> float:
    """sqrt(eps) sum_x H(eps x) (eta(x) - rho_eps(x,t))."""
    return math.sqrt(epsilon) * float(np.dot(h_sites, config_occ - centering_slice))


class FieldFunctional:
    """Engine functional: the fluctuation field of one test function at one time."""

    def __init__(self, h_sites: np.ndarray, t: float, plan: SimulationPlan, centering: DiscreteProfileGrid, label: str = "H"):
        if t not in plan.snapshot_times:
            raise ValueError(f"time {t} not on the snapshot grid")
        self.k = plan.snapshot_times.index(t)
        self.h = np.asarray(h_sites, dtype=float)
        self.c = centering.at_time(t)
        self.sqrt_eps = math.sqrt(plan.params.epsilon)
        self.functional_id = f"Y_{label}@t={t}"

    def __call__(self, occ: np.ndarray) -> np.ndarray:
        return self.sqrt_eps * ((occ[:, self.k, :] - self.c) @ self.h)


def field_samples(plan: SimulationPlan, u0, functionals, threads: int = 0) -> np.ndarray:
    """Per-replicate values for a list of field functionals, shape (M, n_func)."""
    out = np.empty((plan.n_replicates, len(functionals)))
    for rep_start, occ, _ev in iter_snapshot_batches(plan, u0=u0, threads=threads):
        for c, f in enumerate(functionals):
            out[rep_start : rep_start + occ.shape[0], c] = f(occ)
    return out


def dynkin_residual(dynkin_result: dict, snap_index: int):
    """(M_t, pieces) from a run_dynkin payload at one snapshot index.

    M_t = Z_t - Z_0 - int_0^t (L_eps Z_s) ds for the raw field of a
    time-independent test function (the d_s part vanishes); also returns the
    quadratic-variation integral for the second martingale check. Requires
    the dense accumulators; plain snapshot trajectories raise.
    """
    if dynkin_result is None or "ig" not in dynkin_result:
        raise ValueError("dense mode required: rerun with run_dynkin to get pathwise accumulators")
    z = dynkin_result["z"]
    m_t = z[:, snap_index] - z[:, 0] - dynkin_result["ig"][:, snap_index]
    return m_t, {
        "z_t": z[:, snap_index],
        "z_0": z[:, 0],
        "generator_integral": dynkin_result["ig"][:, snap_index],
        "qv_integral": dynkin_result["igam"][:, snap_index],
        "max_jump": dynkin_result["max_jump"],
    }


@dataclass(frozen=True)
class CovarianceRow:
    h_id: str
    t: float
    g_id: str
    s: float
    empirical: float
    stderr: float
    oracle: float
    zscore: float


def empirical_field_covariance(samples: np.ndarray, pairs, oracles=None):
    """Unbiased covariances of field samples with jackknife standard errors.

    samples: (M, n_func); pairs: list of (label_i, t_i, label_j, s_j, col_i, col_j).
    """
    m = samples.shape[0]
    if m < 100:
        raise ValueError("refusing covariance with M < 100: SE unreliable")
    rows = []
    for idx, (hid, t, gid, s, ci, cj) in enumerate(pairs):
        a = samples[:, ci]
        b = samples[:, cj]
        am, bm = a.mean(), b.mean()
        cov = float(((a - am) * (b - bm)).sum() / (m - 1))
        # leave-one-out covariances, vectorized
        sa, sb, sab = a.sum(), b.sum(), (a * b).sum()
        loo_mean_a = (sa - a) / (m - 1)
        loo_mean_b = (sb - b) / (m - 1)
        loo_cov = (sab - a * b - (m - 1) * loo_mean_a * loo_mean_b) / (m - 2)
        se = float(np.sqrt((m - 1) / m * ((loo_cov - loo_cov.mean()) ** 2).sum()))
        oracle = float(oracles[idx]) if oracles is not None else float("nan")
        z = (cov - oracle) / se if oracles is not None and se > 0 else float("nan")
        rows.append(CovarianceRow(hid, t, gid, s, cov, se, oracle, z))
    return rows


def _inner_product_series(psi_h, psi_g, r_grid, macro: MacroSolution, boundary_weight: float, domain: str):
    """<psi_h(r), psi_g(r)>_{rho_r} on the r grid."""
    mesh = macro.mesh
    h = macro.h
    w = _simpson_weights(mesh.size, h)
    lo = 0
    if domain == "unit":
        lo = mesh.size // 2  # sensitivity option: integrate over [0,1] as written
        w = _simpson_weights(mesh.size - lo, h)
    out = np.empty(r_grid.size)
    tr_m = macro.boundary_trace(-1)
    tr_p = macro.boundary_trace(+1)
    for i, r in enumerate(r_grid):
        rho = _macro_slice(macro, r)
        dh = np.gradient(psi_h[i], h, edge_order=2)
        dg = np.gradient(psi_g[i], h, edge_order=2)
        bulk = float((chi(rho[lo:]) * dh[lo:] * dg[lo:]) @ w)
        rp = float(np.clip(tr_p(r), 0.0, 1.0))
        rm = float(np.clip(tr_m(r), 0.0, 1.0))
        bdry = boundary_weight * (
            dtilde_plus(rp, macro.k, macro.j) * psi_h[i][-1] * psi_g[i][-1]
            + dtilde_minus(rm, macro.k, macro.j) * psi_h[i][0] * psi_g[i][0]
        )
        out[i] = bulk + bdry
    return out


def _macro_slice(macro: MacroSolution, r: float) -> np.ndarray:
    tg = macro.t_grid
    i = int(np.searchsorted(tg, r))
    if i >= tg.size:
        return macro.values[-1]
    if i == 0 or abs(tg[i] - r) < 1e-12:
        return macro.values[i]
    w = (r - tg[i - 1]) / (tg[i] - tg[i - 1])
    return (1 - w) * macro.values[i - 1] + w * macro.values[i]


def _one_sided_derivative(vals: np.ndarray, h: float, side: int) -> float:
    """Fourth-order five-point one-sided derivative at the first/last node."""
    if side < 0:
        f = vals[:5]
        return float((-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h))
    f = vals[-5:]
    return float((25 * f[4] - 48 * f[3] + 36 * f[2] - 16 * f[1] + 3 * f[0]) / (12 * h))


def _require_member(h_vals, at_time, macro: MacroSolution, label: str, tol: float = 1e-3):
    """Boundary-condition residuals of a mesh-sampled function at one time."""
    from .macro import dtilde_minus_prime, dtilde_plus_prime

    rho = _macro_slice(macro, at_time)
    scale = max(1.0, float(np.abs(h_vals).max()))
    rm = _one_sided_derivative(h_vals, macro.h, -1) - dtilde_minus_prime(float(rho[0]), macro.k, macro.j) * h_vals[0]
    rp = _one_sided_derivative(h_vals, macro.h, +1) - dtilde_plus_prime(float(rho[-1]), macro.k, macro.j) * h_vals[-1]
    if max(abs(rm), abs(rp)) > tol * scale:
        raise ValueError(
            f"test function {label} violates the boundary conditions at t={at_time}: "
            f"residuals ({rm:.2e}, {rp:.2e}); the limit theorem is stated on the Robin test space"
        )


def ou_covariance_oracle(
    h_vals: np.ndarray,
    t: float,
    g_vals: np.ndarray,
    s: float,
    macro: MacroSolution,
    u0,
    boundary_weight: float = 0.5,
    coefficient_clock: str = "backward",
    domain: str = "full",
    nodes_per_unit_time: int = 64,
    refine_rel_tol: float = 0.003,
    check_membership: bool = True,
):
    """Limit covariance E[Y_t(H) Y_s(G)] = sigma(psi_0, phi_0) + int_0^s <psi_r, phi_r> dr.

    psi_r / phi_r are the linearized solutions carrying H at time t and G at
    time s back to time r. coefficient_clock='backward' anchors the Robin
    coefficient at the running time r (what the martingale closure needs);
    'forward' reads it at t-r / s-r (the literal semigroup definition).
    Returns (value, report) where report records the quadrature refinement;
    the value is accepted only if doubling the r nodes moves it by less than
    refine_rel_tol relatively.
    """
    if s > t:
        raise ValueError("need s <= t")
    if check_membership:
        _require_member(np.asarray(h_vals, dtype=float), t, macro, "H")
        _require_member(np.asarray(g_vals, dtype=float), s, macro, "G")
    mesh = macro.mesh
    w_mesh = _simpson_weights(mesh.size, macro.h)
    lo = mesh.size // 2 if domain == "unit" else 0
    w_sig = _simpson_weights(mesh.size - lo, macro.h)

    def surfaces(h_end, t_end, r_nodes):
        n_march = max(64, 4 * (r_nodes.size - 1))
        if coefficient_clock == "backward":
            r_grid, surf = backward_family(h_end, t_end, macro, n_steps=n_march)
        else:
            from .macro import semigroup_T

            sg = np.linspace(0.0, t_end, n_march + 1)
            fwd = semigroup_T(h_end, sg, macro)
            r_grid, surf = t_end - sg[::-1], fwd[::-1]
        # interpolate the surface onto the requested r nodes
        out = np.empty((r_nodes.size, mesh.size))
        for i, r in enumerate(r_nodes):
            k = np.searchsorted(r_grid, r)
            if k >= r_grid.size:
                out[i] = surf[-1]
            elif k == 0 or abs(r_grid[k] - r) < 1e-12:
                out[i] = surf[k]
            else:
                lam = (r - r_grid[k - 1]) / (r_grid[k] - r_grid[k - 1])
                out[i] = (1 - lam) * surf[k - 1] + lam * surf[k]
        return out

    u0_vals = np.clip(np.asarray([float(u0(u)) for u in mesh]), 0.0, 1.0)

    def evaluate(n_nodes):
        r_grid = np.linspace(0.0, s, n_nodes + 1)
        psi = surfaces(np.asarray(h_vals, dtype=float), t, r_grid)
        phi = surfaces(np.asarray(g_vals, dtype=float), s, r_grid)
        sig = float((chi(u0_vals[lo:]) * psi[0][lo:] * phi[0][lo:]) @ w_sig)
        if s == 0:
            return sig
        series = _inner_product_series(psi, phi, r_grid, macro, boundary_weight, domain)
        w_r = _simpson_weights(n_nodes + 1, s / n_nodes)
        return sig + float(series @ w_r)

    n0 = max(8, int(math.ceil(nodes_per_unit_time * max(s, 1e-9) / 2)) * 2)
    v1 = evaluate(n0)
    v2 = evaluate(2 * n0)
    rel = abs(v2 - v1) / max(abs(v2), 1e-300)
    if rel > refine_rel_tol:
        v3 = evaluate(4 * n0)
        rel = abs(v3 - v2) / max(abs(v3), 1e-300)
        if rel > refine_rel_tol:
            raise RuntimeError(f"oracle quadrature did not settle: rel change {rel:.2e}")
        v1, v2 = v2, v3
    report = {"nodes": n0, "value_coarse": v1, "value": v2, "rel_change": rel}
    return v2, report
