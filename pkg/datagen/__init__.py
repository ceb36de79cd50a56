"""
Dataset generation: initial conditions, input channels, collocation times and dataset files.
"""

from .sampling import SamplingRanges, sample_initial_state, lhs_collocation, to_net_state, from_net_state
from .inputs import InputSpec, ramp_value, make_ramp_channel, make_sine_channel, make_channels, scale_controls
from .generator import GenerationConfig, Trajectory, Dataset, generate_dataset, trajectory_rng, resample_collocation
from .storage import write_dataset, read_dataset

__all__ = [
    'SamplingRanges', 'sample_initial_state', 'lhs_collocation', 'to_net_state', 'from_net_state',
    'InputSpec', 'ramp_value', 'make_ramp_channel', 'make_sine_channel', 'make_channels', 'scale_controls',
    'GenerationConfig', 'Trajectory', 'Dataset', 'generate_dataset', 'trajectory_rng', 'resample_collocation',
    'write_dataset', 'read_dataset',
]
