"""Computational design of passive grippers: grasp synthesis, skeleton/trajectory co-optimization, topology optimization."""

import os

# the TBB layer shipped in this environment is too old; OpenMP is always present
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

__version__ = "0.1.0"
