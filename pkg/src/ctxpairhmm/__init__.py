"""Statistical alignment of two nucleotide sequences under a pair hidden
Markov model with context-dependent (CpG) substitutions, fitted by SAEM."""

from .dp import (
    DpLattice,
    PosteriorLattice,
    backward,
    enumerate_likelihood,
    forward,
    log_likelihood,
    posterior,
    posterior_state_probs,
)
from .estimation import (
    CountStats,
    EstimationTrace,
    SaemConfig,
    complete_log_likelihood,
    m_step_full,
    m_step_reduced,
    saem_fit,
    sem_fit,
    sufficient_counts,
)
from .io import parse_fasta
from .model import (
    DATA_SET_1,
    DATA_SET_2,
    REDUCED_START,
    EvoParams,
    ModelParams,
    ValidationReport,
    expand_reduced,
    hky_context_emission,
    jc_emission,
    tkf91_transition,
    uniform_params,
    validate_params,
)
from .sampler import AlignmentPath, ConsensusResult, consensus_alignment, sample_path, sample_paths
from .selection import ModelFit, bic, count_free_parameters
from .simulate import SimSpec, simulate_pair

__version__ = "0.1.0"
