"""Learning contracting vector fields from demonstrations.

The package fits a vector field xdot = f(x) to demonstration data with
matrix-valued random Fourier features (Gaussian separable or curl-free),
enforces equilibria exactly through a vanishing projector, and imposes
contraction at sampled points via a PSD-constrained least-squares problem
solved by ADMM.  Trained fields integrate with an embedded Dormand-Prince
pair and are scored with trajectory, velocity, DTW and goal-convergence
metrics.
"""

from .cli import TrainConfig, train_field
from .dataset import (DemoSet, Demonstration, PreprocessConfig,
                      finite_difference_velocities, load_demonstrations,
                      resample_and_average, subsample_constraint_points)
from .dynamics import (IntegratorSettings, RolloutResult, TrainedField,
                       export_field_grid, field_eval, field_jacobian,
                       max_contraction_eigenvalue, rollout)
from .features import (FeatureMap, VanishingProjector, build_vanishing_projector,
                       eval_feature_jacobians, eval_features,
                       potential_from_features, sample_feature_map)
from .kernels import (CURL_FREE, GAUSSIAN_SEPARABLE, ExactModel, KernelKind,
                      eval_kernel, eval_vanishing_kernel, exact_field_eval,
                      exact_potential_eval, exact_ridge_fit, gram_matrix)
from .metrics import (EvalReport, GridEvalReport, dtw_distance, evaluate,
                      grid_evaluate, trajectory_error, velocity_error)
from .modelfile import load_model, save_model
from .solver import (ADMMSettings, ConstrainedLSQProblem, SolveReport,
                     admm_solve, assemble_problem, psd_project)

__version__ = "0.1.0"
