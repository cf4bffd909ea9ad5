"""Reinforcement-learning contracted quantum eigensolver toolkit.

Subpackages: ``chem`` (STO-6G integrals and SCF), ``qubits`` (exact
statevector simulation), ``environment`` (the RL environment), ``agent``
(deep Q-network and greedy baseline), ``solvers`` (end-to-end drivers) and
``cli`` (command-line interface).
"""

__version__ = "0.1.0"

from . import agent, chem, environment, qubits, solvers  # noqa: E402,F401
