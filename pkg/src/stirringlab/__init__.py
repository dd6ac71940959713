"""stirringlab: simulation and verification laboratory for the 1d stirring
process on {-N,...,N} with window-K boundary injection/removal dynamics.

Subpackages by concern: model (lattice + event catalog), engine (exact CTMC
simulation), oracle (tiny-lattice ground truth), walks (reflected random walk
kernels), profile (deterministic lattice density), macro (Robin heat equation
layer), correlations (v-function studies), fluctuations (density field and
OU covariance), cli (experiment runner), accept (acceptance suite).
"""

__version__ = "0.1.0"

import os as _os
import warnings as _warnings

# the sandbox TBB predates what numba wants; pin the omp layer and silence
# the fallback probe so CLI output stays clean
_os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")
_warnings.filterwarnings("ignore", message=".*TBB threading layer.*")

from .model import ModelParams, Configuration  # noqa: F401
from .engine import SimulationPlan, MomentEstimate  # noqa: F401
