"""Semidefinite relaxations for M-PSK MIMO detection."""

from .errors import (CertificateError, EnumerationLimitError, ExtractionError, InvariantError,
                     ParameterError, PskSdrError, SchemaError, UsageError)
from .instance import (MimoInstance, PskAlphabet, QuadraticForm, separation_instance, derive_seed,
                       load_instance, sample_instance, save_instance, to_quadratic)
from .relaxations import (ConicProgram, RelaxationSolution, build, build_bsdp, build_csdp2,
                          build_ersdp, build_rsdp, extract_csdp2_dual, solve_relaxation)
from .solver import SdpSolution, SolverOptions, Status, solve, solve_standard
from .rounding import RoundedSolution, project_psk, randomized_round
from .oracle import OracleResult, brute_force
from .certificates import (ConditionReport, TightnessCertificate, certify_csdp2,
                           check_condition, check_csdp_necessary, sigma_max, tail_validators,
                           thm45_bound)

__version__ = "0.1.0"
