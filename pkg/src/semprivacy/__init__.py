"""Privacy mechanisms and utility bounds for semantic disclosure with blind encoders."""

from .probcore import (AxisError, Channel, JointTable, Pmf, ValidationError,
                       conditional_entropy, conditional_mutual_information, entropy,
                       extend_with_channel, joint_entropy, marginalize, mutual_information)
from .frl import (FrlOutput, Mechanism, construct_frl, efrl_mechanism,
                  mechanism_utilities, randomized_response, tune_leakage)
from .bounds import (BoundsReport, SemanticConstraints, check_semantic_constraints,
                     corollary2_upper, theorem1_bounds, utility_bounds)
from .oracle import OracleResult, estimate_h_eps, verify_sandwich

__version__ = "0.1.0"
