"""Mildly dissipative generalized SQG equations with logarithmic multipliers.

Subpackages
-----------
symbols, multipliers
    Radial Fourier symbols, class checks and the admissibility test.
spectral
    Periodic spectral fields, Littlewood-Paley blocks and weighted norms.
solver
    Pseudo-spectral integrating-factor solver for the protean system.
harness
    Reproducible experiments and estimate probes.
config, cli
    Plain-text configuration files and the ``loggsqg`` command.
"""
from .errors import *  # noqa: F401,F403
from .multipliers import (  # noqa: F401
    MultiplierSuite,
    admissibility_check,
    admissible_for_some_gamma,
    family_suite,
    log_identity_quadrature,
    threshold_scan,
    verify_class,
)
from .solver import NormSeries, RunConfig, Trajectory, run, step  # noqa: F401
from .spectral import GridSpec, SpectralField, WeightedNormSpec, lp_partition, weighted_norm  # noqa: F401
from .symbols import (  # noqa: F401
    Constant,
    Identity,
    IterLogPower,
    LogPower,
    OnePlus,
    PowerLaw,
    Product,
    Quotient,
    Sum,
    eval_symbol,
    parse_symbol,
)

__version__ = "0.1.0"
