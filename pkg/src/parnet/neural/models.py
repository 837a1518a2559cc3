"""Trainable parametrization (PPN) and knot selection (KSN) estimators.

Both estimators take raw point rows in the layout
``(x_0..x_{l-1}, y_0..y_{l-1})`` and normalize every row per axis into
[0, 1] before it enters the network, exactly as the pipeline does for
segments.  Training is self-supervised: the loss is the mean distance
between the points and their least-squares cubic approximation.
"""

import logging

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from parnet._validation import flatten_points, unflatten_points
from parnet.exceptions import InvalidArgumentError, TrainingDivergedError
from parnet.geometry import minmax_normalize
from parnet.neural.layers import (
    approximation_backward,
    approximation_forward,
    bezier_knot_vector,
    guard_knot,
    ksn_head,
    ksn_head_backward,
    ppn_head,
    ppn_head_backward,
    single_knot_vector,
)
from parnet.neural.mlp import AdamState, Mlp, adam_step
from parnet.neural.serialization import load_model, save_model

logger = logging.getLogger(__name__)


def normalize_rows(X):
    """Per-row, per-axis min-max normalization of flat point rows."""
    points = unflatten_points(X)
    return flatten_points(minmax_normalize(points)[0])


class _NetworkEstimator(BaseEstimator):
    """Shared minibatch Adam loop.

    Subclasses define the network shape and ``_loss_and_grad``.
    """

    def _make_network(self, n_in, rng):
        raise NotImplementedError

    def _network_input(self, X):
        raise NotImplementedError

    def _loss_and_grad(self, out, X, need_grad=True):
        raise NotImplementedError

    def _batch_losses(self, X):
        inputs = self._network_input(X)
        losses = []
        for start in range(0, X.shape[0], 1024):
            out = self.mlp_.predict(inputs[start:start + 1024])
            losses.append(self._loss_and_grad(out, X[start:start + 1024],
                                              need_grad=False)[0])
        return np.concatenate(losses)

    def _fit(self, X, X_test=None):
        net_rng, shuffle_rng, dropout_rng = (
            np.random.default_rng(s)
            for s in np.random.SeedSequence(self.random_state).spawn(3))
        inputs = self._network_input(X)
        self.mlp_ = self._make_network(inputs.shape[1], net_rng)
        state = AdamState(self.learning_rate, self.beta1, self.beta2, self.adam_eps)
        self.history_ = []
        n = X.shape[0]
        batch = min(self.batch_size, n)
        for epoch in range(self.epochs):
            order = shuffle_rng.permutation(n)
            epoch_losses = []
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                out, tape = self.mlp_.forward(inputs[idx], training=True, rng=dropout_rng)
                losses, grad_out = self._loss_and_grad(out, X[idx])
                grads, _ = self.mlp_.backward(tape, grad_out)
                if not (np.all(np.isfinite(losses))
                        and all(np.all(np.isfinite(g)) for g in grads)):
                    raise TrainingDivergedError(
                        f"non-finite loss or gradient at step {state.step + 1}")
                adam_step(state, self.mlp_.params, grads)
                epoch_losses.append(losses.mean())
            train_loss = float(np.mean(epoch_losses))
            test_loss = (float(self._batch_losses(X_test).mean())
                         if X_test is not None and len(X_test) else float("nan"))
            self.history_.append((state.step, train_loss, test_loss))
            if self.verbose:
                logger.info("epoch %d step %d train %.6g test %.6g",
                            epoch, state.step, train_loss, test_loss)
        return self

    def score(self, X, y=None):
        """Negative mean approximation loss (higher is better)."""
        check_is_fitted(self, "mlp_")
        X = check_array(X, ensure_min_features=2 * self.min_points)
        return -float(self._batch_losses(X).mean())

    def history_text(self):
        """Plain-text training log: one ``step train_loss test_loss`` line per epoch."""
        check_is_fitted(self, "history_")
        lines = ["step train_loss test_loss"]
        lines += [f"{step} {train!r} {test!r}" for step, train, test in self.history_]
        return "\n".join(lines) + "\n"


class PointParametrizer(TransformerMixin, _NetworkEstimator):
    """Network mapping l points to a strictly increasing parameter vector.

    ``fit(X)`` trains on flat point rows (n, 2l); ``transform(X)`` returns
    parameters of shape (n, l) with t_0 = 0 and t_{l-1} = 1.

    Parameters
    ----------
    hidden_sizes : tuple of int
        Hidden layer widths; all layers use softplus.
    dropout : float
        Dropout rate of the hidden layers during training.
    learning_rate, beta1, beta2, adam_eps : float
        Adam hyperparameters.
    batch_size, epochs : int
    random_state : int
        Seeds initialization, shuffling and dropout.
    """

    min_points = 4

    def __init__(self, hidden_sizes=(128, 128, 128), dropout=0.2, learning_rate=1e-4,
                 beta1=0.9, beta2=0.999, adam_eps=1e-8, batch_size=256, epochs=50,
                 random_state=0, verbose=False):
        self.hidden_sizes = hidden_sizes
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state
        self.verbose = verbose

    @property
    def n_points_(self):
        return self.n_features_in_ // 2

    def _make_network(self, n_in, rng):
        l = n_in // 2
        sizes = [n_in, *self.hidden_sizes, l - 1]
        mlp = Mlp(sizes, "softplus", self.dropout, rng=rng)
        # start from the uniform parametrization: equal positive increments
        mlp.weights[-1] *= 0.1
        mlp.biases[-1][:] = 0.5
        return mlp

    def _network_input(self, X):
        return normalize_rows(X) - 0.5

    def _loss_and_grad(self, out, X, need_grad=True):
        points = unflatten_points(normalize_rows(X))
        t = ppn_head(out)
        losses, cache = approximation_forward(points, t, bezier_knot_vector())
        if not need_grad:
            return losses, None
        grad_t, _ = approximation_backward(cache, np.full(len(losses), 1.0 / len(losses)))
        return losses, ppn_head_backward(out, grad_t)

    def fit(self, X, y=None, X_test=None):
        X = check_array(X, ensure_min_features=2 * self.min_points)
        if X.shape[1] % 2:
            raise InvalidArgumentError("point rows must have even length")
        self.n_features_in_ = X.shape[1]
        if X_test is not None:
            X_test = check_array(X_test)
        return self._fit(X, X_test)

    def transform(self, X):
        check_is_fitted(self, "mlp_")
        X = check_array(X, ensure_min_features=2 * self.min_points)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgumentError(
                f"expected rows of {self.n_features_in_} values, got {X.shape[1]}")
        return ppn_head(self.mlp_.predict(self._network_input(X)))

    def parametrize(self, points):
        """Parameters for a single (l, 2) point sequence."""
        return self.transform(flatten_points(points)[None])[0]

    def loss(self, X):
        """Per-row approximation loss of the predicted parametrization."""
        check_is_fitted(self, "mlp_")
        return self._batch_losses(check_array(X))

    @classmethod
    def from_mlp(cls, mlp, **params):
        est = cls(hidden_sizes=tuple(mlp.layer_sizes[1:-1]), dropout=mlp.dropout, **params)
        est.mlp_ = mlp
        est.n_features_in_ = mlp.layer_sizes[0]
        est.history_ = []
        return est


def ksn_features(points, t):
    """KSN input rows (x_0..x_{l-1}, y_0..y_{l-1}, t_0..t_{l-1})."""
    return np.concatenate([flatten_points(points), np.asarray(t, dtype=np.float64)],
                          axis=-1)


class KnotSelector(_NetworkEstimator):
    """Network predicting one interior knot in (0, 1) for points and parameters.

    Rows of ``X`` are ``(x.., y.., t..)`` of length 3l (see
    :func:`ksn_features`).  Hidden layers use ReLU, the output a sigmoid
    followed by the threshold layer.
    """

    min_points = 4

    def __init__(self, hidden_sizes=(64, 64, 64), dropout=0.2, learning_rate=1e-4,
                 beta1=0.9, beta2=0.999, adam_eps=1e-8, batch_size=256, epochs=50,
                 random_state=0, verbose=False):
        self.hidden_sizes = hidden_sizes
        self.dropout = dropout
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.adam_eps = adam_eps
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state
        self.verbose = verbose

    @property
    def n_points_(self):
        return self.n_features_in_ // 3

    def _split(self, X):
        l = X.shape[1] // 3
        return X[:, :2 * l], X[:, 2 * l:]

    def _make_network(self, n_in, rng):
        sizes = [n_in, *self.hidden_sizes, 1]
        activations = ["relu"] * len(self.hidden_sizes) + ["sigmoid"]
        mlp = Mlp(sizes, activations, self.dropout, rng=rng)
        mlp.weights[-1] *= 0.1
        return mlp

    def _network_input(self, X):
        flat, t = self._split(X)
        return np.concatenate([normalize_rows(flat), t], axis=1) - 0.5

    def _loss_and_grad(self, out, X, need_grad=True):
        flat, t = self._split(X)
        points = unflatten_points(normalize_rows(flat))
        raw = out[:, 0]
        u, snapped = guard_knot(ksn_head(raw), t)
        losses, cache = approximation_forward(points, t, single_knot_vector(u),
                                              knot_index=4, need_dt=False)
        if not need_grad:
            return losses, None
        _, grad_u = approximation_backward(cache, np.full(len(losses), 1.0 / len(losses)))
        grad_u = np.where(snapped, 0.0, grad_u)
        return losses, ksn_head_backward(raw, grad_u)[:, None]

    def fit(self, X, y=None, X_test=None):
        X = check_array(X, ensure_min_features=3 * self.min_points)
        if X.shape[1] % 3:
            raise InvalidArgumentError("KSN rows must have length 3l")
        self.n_features_in_ = X.shape[1]
        if X_test is not None:
            X_test = check_array(X_test)
        return self._fit(X, X_test)

    def predict(self, X):
        """Knot in [1e-5, 1 - 1e-5] per row."""
        check_is_fitted(self, "mlp_")
        X = check_array(X, ensure_min_features=3 * self.min_points)
        if X.shape[1] != self.n_features_in_:
            raise InvalidArgumentError(
                f"expected rows of {self.n_features_in_} values, got {X.shape[1]}")
        return np.atleast_1d(ksn_head(self.mlp_.predict(self._network_input(X))[:, 0]))

    def predict_knot(self, points, t):
        return float(self.predict(ksn_features(points, t)[None])[0])

    def loss(self, X):
        check_is_fitted(self, "mlp_")
        return self._batch_losses(check_array(X))

    from_mlp = classmethod(PointParametrizer.from_mlp.__func__)


class ConstantKnotSelector(BaseEstimator):
    """Baseline that always predicts the same relative knot position."""

    def __init__(self, value=0.5):
        self.value = value

    def fit(self, X=None, y=None):
        return self

    def predict(self, X):
        return np.full(np.atleast_2d(X).shape[0], ksn_head(self.value))

    def predict_knot(self, points, t):
        return ksn_head(self.value)


def train_ppn(dataset, **params):
    """Train a PointParametrizer on a training Dataset's train split."""
    est = PointParametrizer(**params)
    return est.fit(dataset.train.X, X_test=dataset.test.X)


def ksn_dataset(dataset, ppn):
    """KSN rows for every instance, with parameters predicted by ``ppn``."""
    X = dataset.X
    t = ppn.transform(X)
    return np.concatenate([X, t], axis=1)


def train_ksn(dataset, ppn, **params):
    """Train a KnotSelector on PPN-parametrized training instances."""
    if ppn is None:
        raise InvalidArgumentError("KSN training needs a trained PPN")
    rows = ksn_dataset(dataset, ppn)
    est = KnotSelector(**params)
    return est.fit(rows[~dataset.is_test], X_test=rows[dataset.is_test])


def save_estimator(path, est):
    """Persist a fitted PointParametrizer or KnotSelector."""
    check_is_fitted(est, "mlp_")
    kind = "ppn" if isinstance(est, PointParametrizer) else "ksn"
    save_model(path, est.mlp_, kind=kind, l=est.n_points_)


def load_estimator(path, kind=None):
    """Load a model file back into the matching estimator class."""
    mlp, header = load_model(path)
    if kind is not None and header.get("kind") != kind:
        raise InvalidArgumentError(f"{path} holds a {header.get('kind')!r} model, not {kind!r}")
    cls = {"ppn": PointParametrizer, "ksn": KnotSelector}.get(header.get("kind"))
    if cls is None:
        raise InvalidArgumentError(f"unknown model kind {header.get('kind')!r}")
    return cls.from_mlp(mlp)
