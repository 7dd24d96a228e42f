"""Contraction analysis, reachability, certification and robust training of implicit networks."""

__version__ = "0.1.0"

from .adversarial import AttackConfig, empirical_robust_fraction, fgsm, pgd
from .certification import (
    Certificate, LipschitzBound, Specification, certified_fraction_curve, certify_batch, certify_inclusion,
    certify_lipschitz, classification_margin, lipschitz_bound, m_lower, predict_labels, spec_matrix,
)
from .data_io import (
    Dataset, load_dataset, load_mnist_idx, load_model, save_model, synthetic_dataset, write_results,
)
from .exceptions import (
    BudgetError, ContractiveINNError, ConvergenceError, GradientCheckError, InvalidInputError,
    ModelFormatError, TrainingError, UnsupportedVersionError, WellPosednessError,
)
from .gradients import (
    ParameterGradients, embedded_finite_difference_check, embedded_vjp, finite_difference_check,
    fixed_point_vjp,
)
from .losses import cross_entropy
from .measures import (
    PositiveWeights, contraction_norm, metzler_split, parametrize_weight, sign_split, weighted_inf_measure,
    weighted_inf_norm,
)
from .model import (
    Activation, ContractionCertificate, ImplicitNetwork, check_wellposed, forward_map, output_map,
    random_network, suggest_eta,
)
from .reachability import (
    IntervalVector, ReachResult, brute_force_tight_inclusion, reach_inclusion, reach_lipschitz,
    reach_sign_split,
)
from .solver import (
    EmbeddedFixedPoint, SolveConfig, SolveReport, solve_embedded, solve_fixed_point, solve_sign_split,
)
from .training import (
    TrainableModel, TrainingConfig, TrainReport, inclusion_objective, init_model, lipschitz_objective,
    ramp_schedule, train,
)


def __getattr__(name):
    # the estimator pulls in scikit-learn; import it lazily
    if name == "ImplicitNetworkClassifier":
        from .estimator import ImplicitNetworkClassifier

        return ImplicitNetworkClassifier
    raise AttributeError(name)
