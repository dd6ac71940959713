"""Brute-force ground truth on tiny lattices.

Builds the full 2^(2N+1)-state rate matrix of the accelerated generator
L_eps = eps^-2 (L_0 + eps L_b- + eps L_b+) directly from the generator
formulas (independently of the engine's event catalog, so the two can be
cross-checked), and computes exact transient distributions, moments of
centered occupation products and two-time moments. Capped at 2N+1 <= 15
so every oracle run stays in the seconds range.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .model import Configuration, ModelParams

__all__ = [
    "GeneratorMatrix",
    "CapacityError",
    "build_generator",
    "exact_distribution",
    "exact_moment",
    "exact_two_time_moment",
    "stationary_distribution",
    "product_measure",
    "site_bit_table",
    "d_plus_expectation",
    "d_minus_expectation",
]

MAX_SITES = 15  # hard cap: dim = 2^(2N+1) <= 2^15

# uniformization switches to dense expm beyond this pulse count (huge t)
_UNIFORMIZATION_PULSE_CAP = 1_000_000
_DENSE_DIM_CAP = 4096


class CapacityError(Exception):
    """State space too large for the exact oracle."""


@dataclass(frozen=True)
class GeneratorMatrix:
    """Sparse rate matrix Q of L_eps over all 2^(2N+1) occupancy states.

    State s encodes the configuration by bits: bit i of s = eta(-N + i).
    Q[s, s'] is the jump rate s -> s'; the diagonal is minus the row sum.
    """

    params: ModelParams
    q: scipy.sparse.csr_matrix

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    def state_of(self, config: Configuration) -> int:
        bits = np.asarray(config.occ, dtype=np.int64)
        return int((bits << np.arange(bits.size)).sum())

    def config_of(self, state: int) -> Configuration:
        L = self.params.n_sites
        return Configuration((state >> np.arange(L)) & 1)


def site_bit_table(params: ModelParams) -> np.ndarray:
    """bits[i, s] = eta(-N+i) in state s; shape (2N+1, 2^(2N+1)), int8."""
    L = params.n_sites
    states = np.arange(1 << L, dtype=np.int64)
    return ((states[None, :] >> np.arange(L)[:, None]) & 1).astype(np.int8)


def build_generator(params: ModelParams) -> GeneratorMatrix:
    """Assemble Q from the stirring and boundary generators.

    Exchange of bond (x, x+1) at rate N^2/2 contributes only when the swap
    changes the state; flips at x in I+- contribute rate j*N/2 when the
    scan-product D+-eta(x) equals 1.
    """
    L = params.n_sites
    if L > MAX_SITES:
        raise CapacityError(f"2N+1 = {L} exceeds oracle cap {MAX_SITES}")
    dim = 1 << L
    bits = site_bit_table(params)  # (L, dim)
    states = np.arange(dim, dtype=np.int64)

    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    # stirring: eta^(x,x+1) at rate eps^-2 * 1/2 when occupancies differ
    for i in range(L - 1):
        differ = bits[i] != bits[i + 1]
        src = states[differ]
        dst = src ^ (1 << i) ^ (1 << (i + 1))
        rows.extend(src)
        cols.extend(dst)
        vals.extend(np.full(src.size, params.bond_rate))

    # boundary flips at rate eps^-2 * eps * j/2 when D+-eta = 1
    if params.j_rate > 0:
        n, K = params.n, params.k_window
        for x in params.i_plus:
            i = x + n
            dplus = (1 - bits[i]).astype(np.int64)
            for i2 in range(i + 1, L):
                dplus *= bits[i2]
            src = states[dplus == 1]
            rows.extend(src)
            cols.extend(src ^ (1 << i))
            vals.extend(np.full(src.size, params.boundary_rate))
        for x in params.i_minus:
            i = x + n
            dminus = bits[i].astype(np.int64)
            for i2 in range(i):
                dminus *= 1 - bits[i2]
            src = states[dminus == 1]
            rows.extend(src)
            cols.extend(src ^ (1 << i))
            vals.extend(np.full(src.size, params.boundary_rate))

    q = scipy.sparse.coo_matrix(
        (np.asarray(vals, dtype=float), (np.asarray(rows), np.asarray(cols))),
        shape=(dim, dim),
    ).tocsr()
    q = q - scipy.sparse.diags(np.asarray(q.sum(axis=1)).ravel())
    return GeneratorMatrix(params, q.tocsr())


def product_measure(params: ModelParams, site_probs) -> np.ndarray:
    """Distribution vector of the product Bernoulli measure with P(eta(x)=1)=p_x."""
    p = np.asarray(site_probs, dtype=float)
    if p.size != params.n_sites:
        raise ValueError("need one probability per site")
    if (p < 0).any() or (p > 1).any():
        raise ValueError("site probabilities must lie in [0,1]")
    bits = site_bit_table(params)
    pi = np.ones(1 << params.n_sites)
    for i in range(params.n_sites):
        pi *= np.where(bits[i] == 1, p[i], 1.0 - p[i])
    return pi


def exact_distribution(gen: GeneratorMatrix, pi0: np.ndarray, t: float, rel_tol: float = 1e-12) -> np.ndarray:
    """pi0 exp(tQ) by uniformization with a rigorous Poisson-tail truncation.

    Falls back to dense expm when the pulse count lam*t is impractically
    large (only possible for small state spaces, e.g. the t=1e6 stationarity
    checks).
    """
    if t < 0:
        raise ValueError("time must be >= 0")
    pi0 = np.asarray(pi0, dtype=float)
    if abs(pi0.sum() - 1.0) > 1e-9:
        raise ValueError("initial distribution must sum to 1")
    if t == 0:
        return pi0.copy()
    q = gen.q
    lam = float(-q.diagonal().min())
    if lam == 0.0:
        return pi0.copy()
    pulses = lam * t
    if pulses > _UNIFORMIZATION_PULSE_CAP:
        if gen.dim > _DENSE_DIM_CAP:
            raise CapacityError("t too large for uniformization and dim too large for dense expm")
        return pi0 @ scipy.linalg.expm(q.toarray() * t)

    p_trans = scipy.sparse.identity(gen.dim, format="csr") + q.multiply(1.0 / lam)
    # sum_k e^-lam*t (lam*t)^k / k! * pi0 P^k, truncated when the remaining
    # Poisson tail mass drops below rel_tol (the tail bounds the error in l1)
    out = np.zeros_like(pi0)
    vec = pi0.copy()
    log_w = -pulses  # log of Poisson(pulses) pmf at k=0
    k = 0
    cum = 0.0
    while True:
        w = np.exp(log_w)
        out += w * vec
        cum += w
        if 1.0 - cum < rel_tol and k > pulses:
            break
        k += 1
        if k > pulses + 60 * np.sqrt(pulses) + 60:
            break
        log_w += np.log(pulses) - np.log(k)
        vec = vec @ p_trans
    return out / out.sum()


def stationary_distribution(gen: GeneratorMatrix) -> np.ndarray:
    """Null left eigenvector of Q (unique when j > 0: the chain is irreducible)."""
    lam = float(-gen.q.diagonal().min())
    p_trans = (scipy.sparse.identity(gen.dim, format="csr") + gen.q.multiply(1.0 / lam)).T
    w, v = scipy.sparse.linalg.eigs(p_trans.astype(float), k=1, sigma=1.0 + 1e-9)
    pi = np.real(v[:, 0])
    pi = np.abs(pi)
    return pi / pi.sum()


def _centered_product(gen: GeneratorMatrix, sites, centering) -> np.ndarray:
    sites = list(sites)
    if len(set(sites)) != len(sites):
        raise ValueError("sites must be distinct")
    centering = list(centering)
    if len(centering) != len(sites):
        raise ValueError("one centering value per site")
    bits = site_bit_table(gen.params)
    f = np.ones(gen.dim)
    for x, c in zip(sites, centering):
        f *= bits[gen.params.idx(x)] - c
    return f


def exact_moment(gen: GeneratorMatrix, pi0: np.ndarray, t: float, sites, centering) -> float:
    """E[prod_i (eta_t(x_i) - c_i)] exactly; empty site set returns 1."""
    if len(list(sites)) == 0:
        return 1.0
    pi_t = exact_distribution(gen, pi0, t)
    return float(pi_t @ _centered_product(gen, sites, centering))


def exact_two_time_moment(
    gen: GeneratorMatrix,
    pi0: np.ndarray,
    s: float,
    r: float,
    sites_s,
    centering_s,
    sites_r,
    centering_r,
) -> float:
    """E[prod_j (eta_s(y_j)-c_j) prod_i (eta_r(x_i)-c_i)] for s <= r.

    Conditional propagation: the time-r product is evolved backwards as a
    function over states, then paired with the time-s distribution.
    """
    if not 0 <= s <= r:
        raise ValueError("need 0 <= s <= r")
    pi_s = exact_distribution(gen, pi0, s)
    f_r = _centered_product(gen, sites_r, centering_r)
    w = _evolve_function(gen, f_r, r - s)
    g_s = _centered_product(gen, sites_s, centering_s)
    return float(pi_s @ (g_s * w))


def _evolve_function(gen: GeneratorMatrix, f: np.ndarray, t: float, rel_tol: float = 1e-12) -> np.ndarray:
    """exp(tQ) f (function-side evolution, same uniformization scheme)."""
    if t == 0:
        return f.copy()
    q = gen.q
    lam = float(-q.diagonal().min())
    if lam == 0.0:
        return f.copy()
    pulses = lam * t
    if pulses > _UNIFORMIZATION_PULSE_CAP:
        if gen.dim > _DENSE_DIM_CAP:
            raise CapacityError("t too large for uniformization and dim too large for dense expm")
        return scipy.linalg.expm(q.toarray() * t) @ f
    p_trans = scipy.sparse.identity(gen.dim, format="csr") + q.multiply(1.0 / lam)
    out = np.zeros_like(f)
    vec = f.copy()
    log_w = -pulses
    k = 0
    cum = 0.0
    while True:
        w = np.exp(log_w)
        out += w * vec
        cum += w
        if 1.0 - cum < rel_tol and k > pulses:
            break
        k += 1
        if k > pulses + 60 * np.sqrt(pulses) + 60:
            break
        log_w += np.log(pulses) - np.log(k)
        vec = p_trans @ vec
    return out


def two_point_matrix(gen: GeneratorMatrix, pi_t: np.ndarray):
    """(means, raw second moments E[eta(x)eta(y)]) under a state distribution."""
    bits = site_bit_table(gen.params).astype(float)
    weighted = bits * pi_t[None, :]
    means = weighted.sum(axis=1)
    second = weighted @ bits.T
    return means, second


def d_plus_expectation(gen: GeneratorMatrix, pi_t: np.ndarray, x: int) -> float:
    """E[D+eta(x)] under the state distribution pi_t."""
    p = gen.params
    if x not in p.i_plus:
        raise ValueError(f"site {x} not in I+")
    bits = site_bit_table(p)
    i = p.idx(x)
    f = (1.0 - bits[i]).astype(float)
    for i2 in range(i + 1, p.n_sites):
        f *= bits[i2]
    return float(pi_t @ f)


def d_minus_expectation(gen: GeneratorMatrix, pi_t: np.ndarray, x: int) -> float:
    """E[D-eta(x)] under the state distribution pi_t."""
    p = gen.params
    if x not in p.i_minus:
        raise ValueError(f"site {x} not in I-")
    bits = site_bit_table(p)
    i = p.idx(x)
    f = bits[i].astype(float)
    for i2 in range(i):
        f *= 1.0 - bits[i2]
    return float(pi_t @ f)
