"""Transmit beamformers that hide the transmitter's direction from a receive array.

Privacy is measured by the DOA obfuscation ratio (DAOR): received power
toward a fake angle over received power toward the true angle. The design
routines maximize achievable rate subject to ``DAOR >= gamma_th`` over a
seeded Rician mmWave MIMO channel.
"""

from .channel import (ArrayGeometry, ChannelConfig, ChannelRealization, NlosPath, mix_seed,
                      sample_channel, steering_matrix, steering_vector)
from .design import (DesignCase, DesignConfig, DesignOutcome, PrivacyQuadratics, Strategy,
                     boundary_precoder, build_quadratic_forms, classify_case, complexity_report,
                     design_os, design_ss, waterfill_precoder)
from .errors import DaorError, InfeasiblePrivacy, InvalidConfig
from .metrics import (Beampattern, Precoder, Verdict, achievable_rate, beampattern, covariance, daor,
                      dominant_direction)
from .powalloc import AllocationProblem, AllocationResult, solve_power_allocation

__version__ = "0.1.0"
