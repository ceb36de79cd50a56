"""
PINC ROV

Physics-informed neural network with control (PINC) surrogate models for a
4-DOF underwater vehicle: dataset generation, training, evaluation and
experiment grids.
"""

__version__ = '0.1.0'
