"""Checking MPI communication futures.

Futures are process-algebra terms predicting how each rank of an SPMD
program communicates. This package interprets them together with a native
model of the MPI network, explores the resulting state space, simulates
concrete MPI executions and checks recorded traces against their futures.
"""

__version__ = "0.1.0"
