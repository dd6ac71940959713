"""Lattice, configurations, boundary operators and the event catalog.

The process lives on the signed lattice {-N, ..., N}. Neighboring occupation
variables exchange at rate N^2/2 per bond; a particle is injected at the first
empty site of the right window I+ = [N-K+1, N] (scanning from N leftwards) at
rate j*N/2, and removed at the first occupied site of the left window
I- = [-N, -N+K-1] (scanning from -N rightwards) at the same rate. Everything
else in the package derives its dynamics from the catalog built here.

All public interfaces speak signed site coordinates; internal arrays are
0-based with index x + N.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelParams",
    "Configuration",
    "Exchange",
    "BirthRight",
    "DeathLeft",
    "d_plus",
    "d_minus",
    "birth_site",
    "death_site",
    "event_rates",
    "apply_event",
]


@dataclass(frozen=True)
class ModelParams:
    """Static parameters: lattice half-width N, window size K, boundary rate j."""

    n: int
    k_window: int
    j_rate: float

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("lattice half-width N must be >= 1")
        if not 1 <= self.k_window <= self.n:
            raise ValueError(f"window size K={self.k_window} must satisfy 1 <= K <= N={self.n}")
        if 2 * self.k_window > 2 * self.n + 1:
            raise ValueError("boundary windows overlap: need 2K <= 2N+1")
        if self.j_rate < 0:
            raise ValueError("boundary rate j must be >= 0")

    @property
    def epsilon(self) -> float:
        return 1.0 / self.n

    @property
    def n_sites(self) -> int:
        return 2 * self.n + 1

    @property
    def i_plus(self) -> range:
        """Right injection window I+ = [N-K+1, N], signed coordinates."""
        return range(self.n - self.k_window + 1, self.n + 1)

    @property
    def i_minus(self) -> range:
        """Left removal window I- = [-N, -N+K-1], signed coordinates."""
        return range(-self.n, -self.n + self.k_window)

    @property
    def bond_rate(self) -> float:
        """Exchange rate per bond on the macroscopic clock, N^2/2."""
        return 0.5 * self.n**2

    @property
    def boundary_rate(self) -> float:
        """Birth/death attempt rate on the macroscopic clock, j*N/2."""
        return 0.5 * self.j_rate * self.n

    def idx(self, x: int) -> int:
        """Signed site -> array index."""
        if not -self.n <= x <= self.n:
            raise ValueError(f"site {x} outside lattice [-{self.n}, {self.n}]")
        return x + self.n

    def sites(self) -> np.ndarray:
        return np.arange(-self.n, self.n + 1)


@dataclass(frozen=True)
class Configuration:
    """Occupancy vector eta in {0,1}^(2N+1), index order site -N ... N."""

    occ: np.ndarray

    def __post_init__(self):
        occ = np.ascontiguousarray(self.occ, dtype=np.int8)
        if occ.ndim != 1:
            raise ValueError("occupancy must be a 1d vector")
        if occ.size % 2 == 0:
            raise ValueError("occupancy length must be odd (2N+1)")
        if not np.isin(occ, (0, 1)).all():
            raise ValueError("occupancy values must be 0 or 1")
        object.__setattr__(self, "occ", occ)

    @property
    def n(self) -> int:
        return (self.occ.size - 1) // 2

    def value(self, x: int) -> int:
        return int(self.occ[x + self.n])

    def particle_count(self) -> int:
        return int(self.occ.sum())

    def to_string(self) -> str:
        """Text form: '0'/'1' characters, leftmost = site -N."""
        return "".join("1" if v else "0" for v in self.occ)

    @classmethod
    def from_string(cls, s: str) -> "Configuration":
        if set(s) - {"0", "1"}:
            raise ValueError("configuration string must contain only 0/1")
        return cls(np.frombuffer(s.encode(), dtype=np.uint8) - ord("0"))


@dataclass(frozen=True)
class Exchange:
    """Swap eta(x) and eta(x+1) across bond x, -N <= x <= N-1."""

    x: int


@dataclass(frozen=True)
class BirthRight:
    """Set eta(y)=1 at the unique y in I+ with D+eta(y)=1."""

    y: int


@dataclass(frozen=True)
class DeathLeft:
    """Set eta(z)=0 at the unique z in I- with D-eta(z)=1."""

    z: int


def d_plus(config: Configuration, params: ModelParams, x: int):
    """D+eta(x) = (1-eta(x)) eta(x+1) ... eta(N) for x in I+.

    For x = N the trailing product is empty, so the value is 1-eta(N).
    Also accepts a real-valued profile in place of a configuration (the
    discrete-profile equation applies the same product formula to rho).
    """
    if x not in params.i_plus:
        raise ValueError(f"site {x} not in I+ = [{params.n - params.k_window + 1}, {params.n}]")
    vals = config.occ if isinstance(config, Configuration) else np.asarray(config)
    i = x + params.n
    out = (1.0 - vals[i]) * np.prod(vals[i + 1:].astype(float))
    return int(out) if isinstance(config, Configuration) else float(out)


def d_minus(config: Configuration, params: ModelParams, x: int):
    """D-eta(x) = eta(x) (1-eta(x-1)) ... (1-eta(-N)) for x in I-.

    For x = -N the trailing product is empty, so the value is eta(-N).
    """
    if x not in params.i_minus:
        raise ValueError(f"site {x} not in I- = [{-params.n}, {-params.n + params.k_window - 1}]")
    vals = config.occ if isinstance(config, Configuration) else np.asarray(config)
    i = x + params.n
    out = vals[i] * np.prod(1.0 - vals[:i].astype(float))
    return int(out) if isinstance(config, Configuration) else float(out)


def birth_site(config: Configuration, params: ModelParams):
    """The unique y in I+ with D+eta(y)=1: first empty site scanning N -> left.

    Returns None when the window is fully occupied (birth aborted).
    """
    occ, n = config.occ, params.n
    for y in range(params.n, params.n - params.k_window, -1):
        if occ[y + n] == 0:
            return y
    return None


def death_site(config: Configuration, params: ModelParams):
    """The unique z in I- with D-eta(z)=1: first occupied site scanning -N -> right.

    Returns None when the window is fully empty (death aborted).
    """
    occ, n = config.occ, params.n
    for z in range(-params.n, -params.n + params.k_window):
        if occ[z + n] == 1:
            return z
    return None


def event_rates(config: Configuration, params: ModelParams, skip_concordant: bool = True):
    """Event catalog with rates in 1/macroscopic-time.

    Each discordant bond x yields Exchange(x) at rate N^2/2; with
    skip_concordant=False concordant bonds are listed too (their swaps are
    no-ops in law, included only for debugging). The unique window sites with
    D+eta=1 / D-eta=1, when they exist, yield BirthRight / DeathLeft at rate
    j*N/2.
    """
    if config.occ.size != params.n_sites:
        raise ValueError("configuration size does not match params")
    occ, n = config.occ, params.n
    events = []
    for x in range(-n, n):
        if not skip_concordant or occ[x + n] != occ[x + 1 + n]:
            events.append((Exchange(x), params.bond_rate))
    if params.j_rate > 0:
        y = birth_site(config, params)
        if y is not None:
            events.append((BirthRight(y), params.boundary_rate))
        z = death_site(config, params)
        if z is not None:
            events.append((DeathLeft(z), params.boundary_rate))
    return events


def apply_event(config: Configuration, event, params: ModelParams, check: bool = True) -> Configuration:
    """Apply one event, returning a new configuration.

    With check=True (default), births/deaths must target the unique site
    allowed by the current configuration; violations raise ValueError.
    """
    occ = config.occ.copy()
    n = (occ.size - 1) // 2
    if isinstance(event, Exchange):
        if not -n <= event.x <= n - 1:
            raise ValueError(f"bond {event.x} outside [-{n}, {n - 1}]")
        i = event.x + n
        occ[i], occ[i + 1] = occ[i + 1], occ[i]
    elif isinstance(event, BirthRight):
        if check and d_plus(config, params, event.y) != 1:
            raise ValueError(f"illegal BirthRight at {event.y}: D+eta != 1")
        occ[event.y + n] = 1
    elif isinstance(event, DeathLeft):
        if check and d_minus(config, params, event.z) != 1:
            raise ValueError(f"illegal DeathLeft at {event.z}: D-eta != 1")
        occ[event.z + n] = 0
    else:
        raise TypeError(f"unknown event {event!r}")
    return Configuration(occ)
