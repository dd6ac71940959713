"""Numba event loops for the exact CTMC engine.

One xoshiro256++ stream per replicate, keyed from (master_seed, replicate_id)
through a splitmix64 chain, so every replicate is bit-reproducible regardless
of batch size or thread count. Exchanges restrict to discordant bonds by
default (law-preserving: concordant swaps are the identity); a debug flag
re-enables the full bond catalog.
"""

import os

import numpy as np

# the sandbox TBB is too old for numba; pick the omp layer up front so the
# fallback probe does not emit warnings into CLI output
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

from numba import njit, prange

U64 = np.uint64
_INV_2_53 = 2.0**-53


@njit(cache=True, inline="always")
def _splitmix64(z):
    z = z + U64(0x9E3779B97F4A7C15)
    z = (z ^ (z >> U64(30))) * U64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> U64(27))) * U64(0x94D049BB133111EB)
    return z ^ (z >> U64(31))


@njit(cache=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (U64(64) - k))


@njit(cache=True, inline="always")
def _stream_state(master_seed, replicate_id):
    # stated mixing: z0 = splitmix64(master); z1 = splitmix64(z0 ^ id);
    # the four state words are the next four splitmix64 outputs
    s = np.empty(4, dtype=np.uint64)
    z = _splitmix64(master_seed)
    z = _splitmix64(z ^ replicate_id)
    for i in range(4):
        z = _splitmix64(z)
        s[i] = z
    if (s[0] | s[1] | s[2] | s[3]) == U64(0):
        s[0] = U64(0x9E3779B97F4A7C15)
    return s


@njit(cache=True, inline="always")
def _next_u64(s):
    result = _rotl(s[0] + s[3], U64(23)) + s[0]
    t = s[1] << U64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], U64(45))
    return result


@njit(cache=True, inline="always")
def _uniform(s):
    # [0, 1)
    return float(_next_u64(s) >> U64(11)) * _INV_2_53


@njit(cache=True, inline="always")
def _update_bond(occ, b, disc_list, disc_pos, n_disc):
    """Sync bond b's membership in the discordant set; returns new set size."""
    want = occ[b] != occ[b + 1]
    have = disc_pos[b] >= 0
    if want and not have:
        disc_pos[b] = n_disc
        disc_list[n_disc] = b
        n_disc += 1
    elif have and not want:
        p = disc_pos[b]
        last = disc_list[n_disc - 1]
        disc_list[p] = last
        disc_pos[last] = p
        disc_pos[b] = -1
        n_disc -= 1
    return n_disc


@njit(cache=True, parallel=True)
def run_snapshot_batch(
    master_seed,
    rep_start,
    n_reps,
    init_probs,
    init_occ,
    use_init_occ,
    n_lat,
    k_window,
    j_rate,
    snap_times,
    skip_concordant,
    max_events,
    out_occ,
    out_events,
    out_status,
):
    """Evolve replicates [rep_start, rep_start+n_reps); record occupancies at snap_times.

    out_occ: int8[n_reps, n_snaps, 2N+1]; out_status: 0 ok, 1 event budget hit.
    """
    L = 2 * n_lat + 1
    nb = L - 1
    n_snaps = snap_times.size
    bond_rate = 0.5 * n_lat * n_lat
    brate = 0.5 * j_rate * n_lat
    for rep in prange(n_reps):
        s = _stream_state(U64(master_seed), U64(rep_start + rep))
        occ = np.empty(L, np.int8)
        if use_init_occ:
            for i in range(L):
                occ[i] = init_occ[i]
        else:
            for i in range(L):
                occ[i] = 1 if _uniform(s) < init_probs[i] else 0
        disc_list = np.empty(nb, np.int32)
        disc_pos = np.full(nb, -1, np.int32)
        n_disc = 0
        for b in range(nb):
            if occ[b] != occ[b + 1]:
                disc_pos[b] = n_disc
                disc_list[n_disc] = b
                n_disc += 1
        t = 0.0
        si = 0
        ev = 0
        status = np.int8(0)
        while si < n_snaps:
            ysite = -1
            zsite = -1
            if j_rate > 0.0:
                for i in range(L - 1, L - 1 - k_window, -1):
                    if occ[i] == 0:
                        ysite = i
                        break
                for i in range(k_window):
                    if occ[i] == 1:
                        zsite = i
                        break
            if skip_concordant:
                ex_rate = n_disc * bond_rate
            else:
                ex_rate = nb * bond_rate
            total = ex_rate
            if ysite >= 0:
                total += brate
            if zsite >= 0:
                total += brate
            if total <= 0.0:
                while si < n_snaps:
                    for i in range(L):
                        out_occ[rep, si, i] = occ[i]
                    si += 1
                break
            dt = -np.log(1.0 - _uniform(s)) / total
            tn = t + dt
            while si < n_snaps and snap_times[si] <= tn:
                for i in range(L):
                    out_occ[rep, si, i] = occ[i]
                si += 1
            if si >= n_snaps:
                break
            t = tn
            ev += 1
            if ev > max_events:
                status = np.int8(1)
                break
            u2 = _uniform(s) * total
            if u2 < ex_rate:
                if skip_concordant:
                    k = int(_uniform(s) * n_disc)
                    if k >= n_disc:
                        k = n_disc - 1
                    b = disc_list[k]
                else:
                    b = int(_uniform(s) * nb)
                    if b >= nb:
                        b = nb - 1
                if occ[b] != occ[b + 1]:
                    tmp = occ[b]
                    occ[b] = occ[b + 1]
                    occ[b + 1] = tmp
                    if b > 0:
                        n_disc = _update_bond(occ, b - 1, disc_list, disc_pos, n_disc)
                    if b + 1 < nb:
                        n_disc = _update_bond(occ, b + 1, disc_list, disc_pos, n_disc)
            elif ysite >= 0 and u2 < ex_rate + brate:
                occ[ysite] = 1
                if ysite > 0:
                    n_disc = _update_bond(occ, ysite - 1, disc_list, disc_pos, n_disc)
                if ysite < nb:
                    n_disc = _update_bond(occ, ysite, disc_list, disc_pos, n_disc)
            elif zsite >= 0:
                occ[zsite] = 0
                if zsite > 0:
                    n_disc = _update_bond(occ, zsite - 1, disc_list, disc_pos, n_disc)
                if zsite < nb:
                    n_disc = _update_bond(occ, zsite, disc_list, disc_pos, n_disc)
        out_events[rep] = ev
        out_status[rep] = status


@njit(cache=True, parallel=True)
def run_dynkin_batch(
    master_seed,
    rep_start,
    n_reps,
    init_probs,
    n_lat,
    k_window,
    j_rate,
    snap_times,
    h_vals,
    lap_h,
    gradsq_h,
    max_events,
    out_z,
    out_ig,
    out_igam,
    out_maxjump,
    out_events,
    out_status,
):
    """Pathwise Dynkin accumulators for a time-independent test function.

    Between events the generator action g = sqrt(eps) sum lap_h*eta
    + j/(2 sqrt(eps)) (H(y)D+ - H(z)D-) and the carre-du-champ
    Gamma = eps/2 sum_bonds gradsq_h (eta(x)-eta(x+1))^2 + j/2 (H(y)^2 D+ + H(z)^2 D-)
    are constant, so the time integrals are accumulated exactly event by event.
    Records at each snapshot time: raw field Z, int_0^t g ds, int_0^t Gamma ds.
    """
    L = 2 * n_lat + 1
    nb = L - 1
    n_snaps = snap_times.size
    bond_rate = 0.5 * n_lat * n_lat
    brate = 0.5 * j_rate * n_lat
    eps = 1.0 / n_lat
    sqrt_eps = np.sqrt(eps)
    for rep in prange(n_reps):
        s = _stream_state(U64(master_seed), U64(rep_start + rep))
        occ = np.empty(L, np.int8)
        for i in range(L):
            occ[i] = 1 if _uniform(s) < init_probs[i] else 0
        disc_list = np.empty(nb, np.int32)
        disc_pos = np.full(nb, -1, np.int32)
        n_disc = 0
        s_grad = 0.0
        for b in range(nb):
            if occ[b] != occ[b + 1]:
                disc_pos[b] = n_disc
                disc_list[n_disc] = b
                n_disc += 1
                s_grad += gradsq_h[b]
        s_h = 0.0
        s_lap = 0.0
        for i in range(L):
            if occ[i] == 1:
                s_h += h_vals[i]
                s_lap += lap_h[i]
        t = 0.0
        ig = 0.0
        igam = 0.0
        maxjump = 0.0
        si = 0
        ev = 0
        status = np.int8(0)
        while si < n_snaps:
            ysite = -1
            zsite = -1
            if j_rate > 0.0:
                for i in range(L - 1, L - 1 - k_window, -1):
                    if occ[i] == 0:
                        ysite = i
                        break
                for i in range(k_window):
                    if occ[i] == 1:
                        zsite = i
                        break
            ex_rate = n_disc * bond_rate
            total = ex_rate
            g_bound = 0.0
            gam_bound = 0.0
            if ysite >= 0:
                total += brate
                g_bound += h_vals[ysite]
                gam_bound += h_vals[ysite] * h_vals[ysite]
            if zsite >= 0:
                total += brate
                g_bound -= h_vals[zsite]
                gam_bound += h_vals[zsite] * h_vals[zsite]
            g_now = sqrt_eps * s_lap + 0.5 * j_rate / sqrt_eps * g_bound
            gam_now = 0.5 * eps * s_grad + 0.5 * j_rate * gam_bound
            if total <= 0.0:
                while si < n_snaps:
                    ts = snap_times[si]
                    out_z[rep, si] = sqrt_eps * s_h
                    out_ig[rep, si] = ig + (ts - t) * g_now
                    out_igam[rep, si] = igam + (ts - t) * gam_now
                    si += 1
                break
            dt = -np.log(1.0 - _uniform(s)) / total
            tn = t + dt
            while si < n_snaps and snap_times[si] <= tn:
                ts = snap_times[si]
                out_z[rep, si] = sqrt_eps * s_h
                out_ig[rep, si] = ig + (ts - t) * g_now
                out_igam[rep, si] = igam + (ts - t) * gam_now
                si += 1
            if si >= n_snaps:
                break
            ig += dt * g_now
            igam += dt * gam_now
            t = tn
            ev += 1
            if ev > max_events:
                status = np.int8(1)
                break
            u2 = _uniform(s) * total
            if u2 < ex_rate:
                k = int(_uniform(s) * n_disc)
                if k >= n_disc:
                    k = n_disc - 1
                b = disc_list[k]
                delta = float(occ[b + 1] - occ[b])
                tmp = occ[b]
                occ[b] = occ[b + 1]
                occ[b + 1] = tmp
                dz = delta * (h_vals[b] - h_vals[b + 1])
                s_h += dz
                s_lap += delta * (lap_h[b] - lap_h[b + 1])
                jump = abs(dz) * sqrt_eps
                if jump > maxjump:
                    maxjump = jump
                if b > 0:
                    had = disc_pos[b - 1] >= 0
                    n_disc = _update_bond(occ, b - 1, disc_list, disc_pos, n_disc)
                    if (disc_pos[b - 1] >= 0) != had:
                        s_grad += gradsq_h[b - 1] if disc_pos[b - 1] >= 0 else -gradsq_h[b - 1]
                if b + 1 < nb:
                    had = disc_pos[b + 1] >= 0
                    n_disc = _update_bond(occ, b + 1, disc_list, disc_pos, n_disc)
                    if (disc_pos[b + 1] >= 0) != had:
                        s_grad += gradsq_h[b + 1] if disc_pos[b + 1] >= 0 else -gradsq_h[b + 1]
            else:
                if ysite >= 0 and u2 < ex_rate + brate:
                    site = ysite
                    occ[site] = 1
                    s_h += h_vals[site]
                    s_lap += lap_h[site]
                elif zsite >= 0:
                    site = zsite
                    occ[site] = 0
                    s_h -= h_vals[site]
                    s_lap -= lap_h[site]
                else:
                    site = -1
                if site >= 0:
                    jump = abs(h_vals[site]) * sqrt_eps
                    if jump > maxjump:
                        maxjump = jump
                    if site > 0:
                        had = disc_pos[site - 1] >= 0
                        n_disc = _update_bond(occ, site - 1, disc_list, disc_pos, n_disc)
                        if (disc_pos[site - 1] >= 0) != had:
                            s_grad += gradsq_h[site - 1] if disc_pos[site - 1] >= 0 else -gradsq_h[site - 1]
                    if site < nb:
                        had = disc_pos[site] >= 0
                        n_disc = _update_bond(occ, site, disc_list, disc_pos, n_disc)
                        if (disc_pos[site] >= 0) != had:
                            s_grad += gradsq_h[site] if disc_pos[site] >= 0 else -gradsq_h[site]
        out_maxjump[rep] = maxjump
        out_events[rep] = ev
        out_status[rep] = status
