"""Exact continuous-time simulation of the accelerated process on the macroscopic clock.

Trajectories are exact Gillespie: exponential holding times with the total
rate of the event catalog, events chosen proportionally. Replicates are
embarrassingly parallel; every replicate owns a counter-keyed RNG stream
derived from (master_seed, replicate_id), and moment reducers merge fixed-size
batches in replicate order, so all results are bit-identical for any thread
count (stronger than the <= 1 ulp*M contract).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
import numba

from . import _kernels
from .model import Configuration, ModelParams

__all__ = [
    "SimulationPlan",
    "TrajectoryRecord",
    "MomentEstimate",
    "EventBudgetError",
    "sample_initial",
    "resolve_threads",
    "simulate",
    "iter_snapshot_batches",
    "run_dynkin",
    "estimate_moments",
    "stream_id",
]

DEFAULT_EVENT_CAP = 10_000_000_000
DEFAULT_BATCH = 4096


class EventBudgetError(RuntimeError):
    """A trajectory exceeded the configured per-trajectory event cap."""


@dataclass(frozen=True)
class SimulationPlan:
    params: ModelParams
    t_end: float
    snapshot_times: tuple
    master_seed: int
    n_replicates: int
    max_events: int = DEFAULT_EVENT_CAP
    skip_concordant: bool = True

    def __post_init__(self):
        st = tuple(float(t) for t in self.snapshot_times)
        if list(st) != sorted(set(st)):
            raise ValueError("snapshot_times must be sorted and unique")
        if st and (st[0] < 0 or st[-1] > self.t_end):
            raise ValueError("snapshot_times must lie within [0, t_end]")
        if self.n_replicates < 1:
            raise ValueError("need at least one replicate")
        object.__setattr__(self, "snapshot_times", st)
        object.__setattr__(self, "master_seed", int(self.master_seed) & 0xFFFFFFFFFFFFFFFF)


@dataclass
class TrajectoryRecord:
    replicate_id: int
    snapshots: list  # [(time, Configuration)]
    event_count: int
    rng_stream_id: int
    dynkin: dict | None = None


@dataclass(frozen=True)
class MomentEstimate:
    functional_id: str
    mean: float
    stderr: float
    samples: int


def stream_id(master_seed: int, replicate_id: int) -> int:
    """The documented stream key: splitmix64(splitmix64(master) ^ replicate_id)."""

    def mix(z):
        z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        return z ^ (z >> 31)

    return mix(mix(master_seed & 0xFFFFFFFFFFFFFFFF) ^ (replicate_id & 0xFFFFFFFFFFFFFFFF))


def resolve_threads(threads: int = 0) -> int:
    """threads=0 means auto: STIRRINGLAB_THREADS env var, else all cores."""
    if threads == 0:
        env = os.environ.get("STIRRINGLAB_THREADS", "").strip()
        threads = int(env) if env else numba.config.NUMBA_DEFAULT_NUM_THREADS
    threads = max(1, min(threads, numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(threads)
    return threads


def _site_probs(params: ModelParams, u0) -> np.ndarray:
    probs = np.array([float(u0(params.epsilon * x)) for x in params.sites()], dtype=float)
    if (probs < 0).any() or (probs > 1).any():
        raise ValueError("initial profile must map into [0, 1]")
    return probs


def sample_initial(params: ModelParams, u0, rng: np.random.Generator) -> Configuration:
    """Product measure: site x occupied independently with probability u0(eps*x)."""
    probs = _site_probs(params, u0)
    return Configuration((rng.random(params.n_sites) < probs).astype(np.int8))


def iter_snapshot_batches(
    plan: SimulationPlan,
    u0=None,
    initial: Configuration | None = None,
    batch_size: int = DEFAULT_BATCH,
    threads: int = 0,
):
    """Yield (rep_start, occ[batch, n_snaps, 2N+1], events[batch]) batch by batch.

    Batch boundaries depend only on the plan, never on the thread count.
    """
    if (u0 is None) == (initial is None):
        raise ValueError("pass exactly one of u0 / initial")
    resolve_threads(threads)
    p = plan.params
    snap = np.asarray(plan.snapshot_times, dtype=float)
    if snap.size == 0:
        raise ValueError("plan has no snapshot times")
    if initial is not None:
        probs = np.zeros(p.n_sites)
        init_occ = np.ascontiguousarray(initial.occ, dtype=np.int8)
        use_init = True
    else:
        probs = _site_probs(p, u0)
        init_occ = np.zeros(p.n_sites, dtype=np.int8)
        use_init = False
    done = 0
    while done < plan.n_replicates:
        b = min(batch_size, plan.n_replicates - done)
        out_occ = np.empty((b, snap.size, p.n_sites), dtype=np.int8)
        out_events = np.empty(b, dtype=np.int64)
        out_status = np.empty(b, dtype=np.int8)
        _kernels.run_snapshot_batch(
            plan.master_seed,
            done,
            b,
            probs,
            init_occ,
            use_init,
            p.n,
            p.k_window,
            p.j_rate,
            snap,
            plan.skip_concordant,
            plan.max_events,
            out_occ,
            out_events,
            out_status,
        )
        if out_status.any():
            bad = done + int(np.argmax(out_status))
            raise EventBudgetError(
                f"replicate {bad} exceeded the event cap {plan.max_events}; "
                f"raise max_events or shorten the horizon"
            )
        yield done, out_occ, out_events
        done += b


def simulate(plan: SimulationPlan, u0=None, initial=None, observer=None, batch_size=DEFAULT_BATCH, threads=0):
    """Stream TrajectoryRecord per replicate (snapshot mode).

    observer, when given, is called as observer(rep_start, occ_batch, events)
    on every raw batch before records are materialized.
    """
    for rep_start, occ, events in iter_snapshot_batches(plan, u0, initial, batch_size, threads):
        if observer is not None:
            observer(rep_start, occ, events)
        for i in range(occ.shape[0]):
            rid = rep_start + i
            snaps = [(t, Configuration(occ[i, k])) for k, t in enumerate(plan.snapshot_times)]
            yield TrajectoryRecord(rid, snaps, int(events[i]), stream_id(plan.master_seed, rid))


def run_dynkin(plan: SimulationPlan, u0, h_sites: np.ndarray, batch_size: int = DEFAULT_BATCH, threads: int = 0):
    """Pathwise Dynkin accumulators for a spatial test function sampled on the lattice.

    Returns dict of arrays over all replicates: z[M,S] (raw field), ig[M,S]
    (integral of the generator action), igam[M,S] (integral of the quadratic
    variation density), max_jump[M], events[M]. Dense-snapshot mode in the
    sense of the spec: the quadrature is event-exact at O(1) memory.
    """
    resolve_threads(threads)
    p = plan.params
    snap = np.asarray(plan.snapshot_times, dtype=float)
    h = np.ascontiguousarray(h_sites, dtype=float)
    if h.size != p.n_sites:
        raise ValueError("test function must be sampled at all 2N+1 sites")
    # generator action on the raw field: eps^-2 L_0 Z = sqrt(eps) sum (1/2 Delta_eps H) eta
    lap_h = 0.5 * discrete_laplacian(h) / p.epsilon**2
    gradsq = ((h[1:] - h[:-1]) / p.epsilon) ** 2
    probs = _site_probs(p, u0)
    M = plan.n_replicates
    z = np.empty((M, snap.size))
    ig = np.empty((M, snap.size))
    igam = np.empty((M, snap.size))
    maxjump = np.empty(M)
    events = np.empty(M, dtype=np.int64)
    done = 0
    while done < M:
        b = min(batch_size, M - done)
        status = np.empty(b, dtype=np.int8)
        _kernels.run_dynkin_batch(
            plan.master_seed,
            done,
            b,
            probs,
            p.n,
            p.k_window,
            p.j_rate,
            snap,
            h,
            lap_h,
            gradsq,
            plan.max_events,
            z[done : done + b],
            ig[done : done + b],
            igam[done : done + b],
            maxjump[done : done + b],
            events[done : done + b],
            status,
        )
        if status.any():
            raise EventBudgetError(f"event cap {plan.max_events} exceeded")
        done += b
    return {"z": z, "ig": ig, "igam": igam, "max_jump": maxjump, "events": events, "times": snap}


def discrete_laplacian(v: np.ndarray) -> np.ndarray:
    """Reflecting discrete Laplacian: centered inside, one-sided rows at +-N."""
    out = np.empty_like(np.asarray(v, dtype=float))
    out[1:-1] = v[2:] + v[:-2] - 2.0 * v[1:-1]
    out[0] = v[1] - v[0]
    out[-1] = v[-2] - v[-1]
    return out


@dataclass
class _Accumulator:
    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def merge_batch(self, values: np.ndarray):
        nb = values.size
        if nb == 0:
            return
        mb = float(values.mean())
        m2b = float(((values - mb) ** 2).sum())
        delta = mb - self.mean
        tot = self.count + nb
        self.mean += delta * nb / tot
        self.m2 += m2b + delta * delta * self.count * nb / tot
        self.count = tot

    def estimate(self, functional_id: str) -> MomentEstimate:
        if self.count == 0:
            raise ValueError("no samples accumulated")
        se = math.sqrt(self.m2 / (self.count - 1) / self.count) if self.count > 1 else float("inf")
        return MomentEstimate(functional_id, self.mean, se, self.count)


def estimate_moments(plan, functionals, u0=None, initial=None, batch_size=DEFAULT_BATCH, threads=0):
    """Streaming Monte Carlo means with standard errors (no trajectory retention).

    Each functional maps an occupancy batch occ[B, n_snaps, 2N+1] to one value
    per replicate and carries a functional_id. Accumulation merges batches in
    replicate order (Chan's algorithm), so results do not depend on threads.
    """
    if plan.n_replicates == 0:
        raise ValueError("M=0: nothing to estimate")
    funcs = list(functionals)
    accs = [_Accumulator() for _ in funcs]
    for _rep_start, occ, _events in iter_snapshot_batches(plan, u0, initial, batch_size, threads):
        for f, acc in zip(funcs, accs):
            acc.merge_batch(np.asarray(f(occ), dtype=float))
    return [acc.estimate(getattr(f, "functional_id", f"f{i}")) for i, (f, acc) in enumerate(zip(funcs, accs))]
