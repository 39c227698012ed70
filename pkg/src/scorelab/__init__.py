"""scorelab: a numerical laboratory for score-based diffusion density
estimation on exponential-interaction targets.

Pipeline: factorized targets on the cube -> denoising score matching with
truncated ReLU networks -> reverse-SDE sampling -> TV/W1 evaluation, plus a
verifier for the diffused-density decomposition identities that drive the
adaptivity theory.
"""

from .density import (
    CliqueSet,
    InteractionDensity,
    QuadSpec,
    SmoothComponent,
    load_density,
    log_density,
    make_component,
    marginal_1d,
    normalize,
    sample,
    save_density,
)
from .errors import (
    BlowUpError,
    DomainError,
    FormatError,
    NumericError,
    RegionError,
    ScorelabError,
    SingularityError,
    StudyError,
    TrainingError,
    UnsupportedError,
)
from .kernels import BACKEND as kernel_backend
from .net import ScoreNetwork, backward, forward, init, load_checkpoint, save_checkpoint
from .oracle import (
    DiffusedOracle,
    GaussianMixture,
    diffused_density,
    diffused_score,
    mixture_oracle,
    quadrature_oracle,
    score_l2_error,
    uniform_oracle,
)
from .sampler import SamplerConfig, reverse_sample, reverse_sample_piecewise
from .schedule import NoiseSchedule, TimeWindow, conditional_score, forward_perturb, m_sigma
from .training import (
    PiecewiseScore,
    TimeGrid,
    TrainPlan,
    sm_loss,
    train,
    train_piecewise,
)

__version__ = "0.1.0"
