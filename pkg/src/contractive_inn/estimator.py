"""scikit-learn compatible classifier backed by a trained implicit network."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .adversarial import AttackConfig, empirical_robust_fraction
from .certification import certified_fraction_curve, certify_batch
from .losses import log_softmax
from .model import output_map
from .solver import SolveConfig, solve_fixed_point
from .training import TrainingConfig, init_model, train


class ImplicitNetworkClassifier(ClassifierMixin, BaseEstimator):
    """Implicit-network classifier trained with the Lipschitz or inclusion objective.

    Parameters
    ----------
    n_hidden : int
        Dimension of the implicit state.
    gamma : float
        Bound on the weighted measure of the weight matrix (must be < 1).
    activation : str
        One of ``relu``, ``leaky_relu``, ``tanh``, ``sigmoid``, ``identity``.
    algo : {"lipschitz", "inclusion"}
        Training objective. ``lam=0`` or ``kappa_nom=0`` give plain training.
    lam, kappa_nom, eps_test, ramp, epochs, batch_size, learning_rate, lr_drop, eta_trainable
        Passed to :class:`~contractive_inn.training.TrainingConfig`.
    random_state : int
        Seeds initialization and minibatch order.

    Attributes
    ----------
    model_ : TrainableModel
    network_ : ImplicitNetwork
    classes_ : ndarray
    history_ : list of EpochStats
    """

    def __init__(self, n_hidden=16, gamma=0.0, activation="relu", algo="lipschitz", lam=0.0,
                 kappa_nom=0.0, eps_test=0.1, ramp=(11, 20), epochs=10, batch_size=100,
                 learning_rate=1e-3, lr_drop=None, eta_trainable=False, tol=1e-8, random_state=0):
        self.n_hidden = n_hidden
        self.gamma = gamma
        self.activation = activation
        self.algo = algo
        self.lam = lam
        self.kappa_nom = kappa_nom
        self.eps_test = eps_test
        self.ramp = ramp
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_drop = lr_drop
        self.eta_trainable = eta_trainable
        self.tol = tol
        self.random_state = random_state

    def _training_config(self) -> TrainingConfig:
        return TrainingConfig(
            algo=self.algo, lam=self.lam, kappa_nom=self.kappa_nom, eps_test=self.eps_test,
            ramp=tuple(self.ramp), epochs=self.epochs, batch_size=self.batch_size,
            learning_rate=self.learning_rate, lr_drop=self.lr_drop, seed=self.random_state,
            eta_trainable=self.eta_trainable, tol=self.tol,
        )

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        q = len(self.classes_)
        if q < 2:
            raise ValueError(f"need at least two classes, got {q}")
        cfg = self._training_config()
        model = init_model(self.n_hidden, X.shape[1], q, self.gamma, self.activation, self.random_state)
        report = train(model, (X, encoded), cfg)
        self.model_ = model
        self.network_ = model.materialize()
        self.eta_ = model.eta
        self.history_ = report.epochs
        return self

    def _solve_cfg(self) -> SolveConfig:
        return SolveConfig(tol=self.tol, eta=self.eta_)

    def transform(self, X):
        """Equilibrium states ``z*`` for every row of ``X``."""
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        rep = solve_fixed_point(self.network_, X, self._solve_cfg())
        return np.atleast_2d(rep.z_star)

    def decision_function(self, X):
        Z = self.transform(X)
        return output_map(self.network_, Z)

    def predict_proba(self, X):
        return np.exp(log_softmax(self.decision_function(X)))

    def predict(self, X):
        scores = self.decision_function(X)
        return self.classes_[np.argmax(scores, axis=1)]

    def _encode(self, y):
        y = np.asarray(y)
        idx = np.searchsorted(self.classes_, y)
        idx = np.clip(idx, 0, len(self.classes_) - 1)
        if not np.all(self.classes_[idx] == y):
            raise ValueError("y contains labels not seen during fit")
        return idx

    def certify(self, X, y, eps: float, method: str = "inclusion"):
        """Per-sample :class:`~contractive_inn.certification.Certificate` objects at radius ``eps``."""
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return certify_batch(self.network_, self.eta_, X, self._encode(y), eps, method, self._solve_cfg())

    def certified_fraction(self, X, y, eps_list, method: str = "inclusion") -> dict:
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return certified_fraction_curve(self.network_, self.eta_, X, self._encode(y), eps_list, method,
                                        self._solve_cfg())

    def empirical_robustness(self, X, y, eps_list, attack: AttackConfig | None = None) -> dict:
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return empirical_robust_fraction(self.network_, X, self._encode(y), eps_list,
                                         attack or AttackConfig(), self._solve_cfg())
