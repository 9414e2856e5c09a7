"""qfreq: frequency configuration toolchain for tunable superconducting chips.

Submodules
----------
chip       grid topology, gate indexing, coupler grouping, matchings counter
physics    synthetic five-mechanism gate-error oracle
kernels    compiled/numpy oracle kernel selection
dataset    frequency grid, random configurations, labelled datasets
surrogate  position-embedded MLP gate-error estimator
optimizer  window-based iterative search plus greedy-snake/random baselines
vqe        noisy density-matrix VQE harness on a transverse-field Ising line
cli        command-line frontend and pipeline orchestration
"""

__version__ = "0.1.0"

from .chip import build_grid  # noqa: F401
from .dataset import FrequencyConfig, FrequencyGrid  # noqa: F401
from .physics import gate_error_oracle, sample_chip_physics  # noqa: F401
