"""Tensor-variate Gaussian processes with nested (iteration-indexed) length scales."""

from .diagnostics import HpdInterval, galactic_convert, hpd, summarize
from .likelihood import (
    DirectMCMC,
    Empirical,
    KernelParametrised,
    Sigma1Params,
    TensorNormalModel,
    empirical_covariance,
    empirical_mean,
    log_likelihood,
)
from .prediction import (
    AugmentedData,
    ModalSnapshot,
    model_check_slice,
    predict_from_modal,
    predict_joint,
    sample_tensor_normal,
)
from .sampler import Priors, ProposalConfig, SamplerConfig, Target, run_chain

__version__ = "0.1.0"
