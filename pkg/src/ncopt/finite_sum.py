"""Finite-sum objectives, mini-batch oracles, and dataset ingestion.

A finite-sum problem averages N component objectives; the full f, g, H are
the exact means over all components.  The stochastic oracle draws
mini-batches from independent counter-based random streams so a rerun with
the same seed replays bit for bit regardless of solver branch structure.
"""

from __future__ import annotations

import csv

import numpy as np

from ncopt.problems import ObjectiveProblem


class DatasetParseError(ValueError):
    """A dataset cell failed to parse; message cites the 1-based file row."""


class DatasetSchemaError(ValueError):
    """The dataset violates the expected shape (empty, ragged, too narrow)."""


class FiniteSumProblem(ObjectiveProblem):
    """Mean of `component_count` component objectives.

    Subclasses implement the per-component evaluators; the batched forms
    default to plain loops and are overridden where vectorization pays off.
    """

    def __init__(self, name, dimension, component_count, **metadata):
        self.component_count = int(component_count)
        if self.component_count < 1:
            raise ValueError("component_count must be positive")
        self._all_indices = np.arange(self.component_count)
        super().__init__(
            name,
            dimension,
            value_fn=lambda x: self.batch_value(x, self._all_indices),
            gradient_fn=lambda x: self.batch_gradient(x, self._all_indices),
            hessian_fn=lambda x: self.batch_hessian(x, self._all_indices),
            **metadata,
        )

    def component_value(self, x, index):
        raise NotImplementedError

    def component_gradient(self, x, index):
        raise NotImplementedError

    def component_hessian(self, x, index):
        raise NotImplementedError

    def component(self, x, index):
        """(value, gradient, hessian) of a single component."""
        return (
            self.component_value(x, index),
            self.component_gradient(x, index),
            self.component_hessian(x, index),
        )

    def batch_value(self, x, indices):
        return float(np.mean([self.component_value(x, i) for i in indices]))

    def batch_gradient(self, x, indices):
        return np.mean([self.component_gradient(x, i) for i in indices], axis=0)

    def batch_hessian(self, x, indices):
        return np.mean([self.component_hessian(x, i) for i in indices], axis=0)


class QuadraticFiniteSum(FiniteSumProblem):
    """Components 0.5 (x - c_i)' Q_i (x - c_i) with mean Hessian Q.

    The Q_i are Q plus paired +-perturbations (so they average to Q exactly);
    with a positive definite Q the mean objective is a convex quadratic with
    computable minimizer and optimal value, while individual mini-batch
    Hessians can be indefinite.
    """

    def __init__(self, n=10, components=20, seed=1234, spectrum=None,
                 perturbation=2.5, center_scale=2.0, name=None):
        if components % 2 != 0:
            raise ValueError("components must be even (perturbations are paired)")
        rng = np.random.default_rng(seed)
        if spectrum is None:
            spectrum = np.linspace(1.0, 4.0, n)
        spectrum = np.asarray(spectrum, dtype=float)
        V, _ = np.linalg.qr(rng.normal(size=(n, n)))
        Q = (V * spectrum) @ V.T
        Q = 0.5 * (Q + Q.T)
        lam_min = float(np.min(spectrum))
        mats = np.empty((components, n, n))
        for j in range(components // 2):
            S = rng.normal(size=(n, n))
            S = 0.5 * (S + S.T)
            S *= perturbation * lam_min / max(np.linalg.norm(S, 2), 1e-12)
            mats[2 * j] = Q + S
            mats[2 * j + 1] = Q - S
        centers = rng.normal(scale=center_scale, size=(components, n))

        self.mean_matrix = Q
        self.matrices = mats
        self.centers = centers
        minimizer = np.linalg.solve(Q, np.einsum("kij,kj->i", mats, centers) / components)

        super().__init__(
            name or ("quadratic_sum%d" % n),
            dimension=n,
            component_count=components,
            known_minimizers=[minimizer],
            default_start=minimizer + rng.normal(scale=3.0, size=n),
            local_gradient_lipschitz=float(np.max(spectrum)),
            local_hessian_lipschitz=0.0,
        )
        self.lower_bound = self.batch_value(minimizer, self._all_indices)
        self.reset_counters()

    def component_value(self, x, index):
        u = x - self.centers[index]
        return 0.5 * float(u @ self.matrices[index] @ u)

    def component_gradient(self, x, index):
        u = x - self.centers[index]
        return self.matrices[index] @ u

    def component_hessian(self, x, index):
        return self.matrices[index].copy()

    def batch_value(self, x, indices):
        u = x[None, :] - self.centers[indices]
        return 0.5 * float(np.mean(np.einsum("ki,kij,kj->k", u, self.matrices[indices], u)))

    def batch_gradient(self, x, indices):
        u = x[None, :] - self.centers[indices]
        return np.einsum("kij,kj->i", self.matrices[indices], u) / len(indices)

    def batch_hessian(self, x, indices):
        return np.mean(self.matrices[indices], axis=0)


class LinearLeastSquaresProblem(FiniteSumProblem):
    """Components 0.5 (phi_i' x - y_i)^2 over feature/label records."""

    def __init__(self, features, labels, name="linear_least_squares"):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if features.ndim != 2 or labels.shape != (features.shape[0],):
            raise ValueError("features must be (N, d) with matching labels")
        self.features = features
        self.labels = labels
        n, d = features.shape
        gram = features.T @ features / n
        super().__init__(
            name,
            dimension=d,
            component_count=n,
            lower_bound=0.0,
            local_gradient_lipschitz=float(np.linalg.eigvalsh(gram)[-1]),
            local_hessian_lipschitz=0.0,
        )

    def component_value(self, x, index):
        r = float(self.features[index] @ x - self.labels[index])
        return 0.5 * r * r

    def component_gradient(self, x, index):
        r = float(self.features[index] @ x - self.labels[index])
        return r * self.features[index]

    def component_hessian(self, x, index):
        phi = self.features[index]
        return np.outer(phi, phi)

    def batch_value(self, x, indices):
        r = self.features[indices] @ x - self.labels[indices]
        return 0.5 * float(np.mean(r * r))

    def batch_gradient(self, x, indices):
        r = self.features[indices] @ x - self.labels[indices]
        return (r @ self.features[indices]) / len(indices)

    def batch_hessian(self, x, indices):
        phi = self.features[indices]
        return phi.T @ phi / len(indices)


class TwoLayerNetProblem(FiniteSumProblem):
    """Least-squares loss of a two-layer tanh network over a dataset.

    Parameters pack as [W1 (h*d, row-major), b1 (h), w2 (h), b2].  Component
    i is 0.5 * (net(x_i) - y_i)^2; gradients and Hessians are exact.
    """

    def __init__(self, features, labels, hidden_units=8, name="two_layer_net",
                 start_seed=5):
        features = np.asarray(features, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if features.ndim != 2 or labels.shape != (features.shape[0],):
            raise ValueError("features must be (N, d) with matching labels")
        self.features = features
        self.labels = labels
        self.hidden_units = int(hidden_units)
        n_records, d = features.shape
        h = self.hidden_units
        dim = h * d + 2 * h + 1
        rng = np.random.default_rng(start_seed)
        super().__init__(
            name,
            dimension=dim,
            component_count=n_records,
            lower_bound=0.0,
            default_start=rng.normal(scale=0.2, size=dim),
        )

    def _unpack(self, theta):
        h = self.hidden_units
        d = self.features.shape[1]
        W1 = theta[: h * d].reshape(h, d)
        b1 = theta[h * d: h * d + h]
        w2 = theta[h * d + h: h * d + 2 * h]
        b2 = theta[-1]
        return W1, b1, w2, b2

    def _forward(self, theta, indices):
        W1, b1, w2, b2 = self._unpack(theta)
        X = self.features[indices]
        A = np.tanh(X @ W1.T + b1)
        residual = A @ w2 + b2 - self.labels[indices]
        return X, A, residual, w2

    def batch_value(self, x, indices):
        _, _, r, _ = self._forward(x, indices)
        return 0.5 * float(np.mean(r * r))

    def batch_gradient(self, x, indices):
        X, A, r, w2 = self._forward(x, indices)
        m = len(indices)
        P = 1.0 - A * A
        U = P * w2
        RU = r[:, None] * U
        gW1 = RU.T @ X / m
        gb1 = RU.mean(axis=0)
        gw2 = (r[:, None] * A).mean(axis=0)
        gb2 = r.mean()
        return np.concatenate([gW1.ravel(), gb1, gw2, [gb2]])

    def batch_hessian(self, x, indices):
        X, A, r, w2 = self._forward(x, indices)
        m, d = X.shape
        h = self.hidden_units
        n = self.dimension
        P = 1.0 - A * A
        U = P * w2
        D = -2.0 * A * P * w2

        JW1 = np.einsum("mi,mj->mij", U, X).reshape(m, h * d)
        J = np.concatenate([JW1, U, A, np.ones((m, 1))], axis=1)
        H = J.T @ J / m

        off_b1 = h * d
        off_w2 = h * d + h
        E_bb = np.einsum("m,mi->i", r, D) / m
        E_bW = np.einsum("m,mi,mk->ik", r, D, X) / m
        E_WW = np.einsum("m,mi,mj,mk->ijk", r, D, X, X) / m
        E_wb = np.einsum("m,mi->i", r, P) / m
        E_wW = np.einsum("m,mi,mk->ik", r, P, X) / m

        rows_b1 = off_b1 + np.arange(h)
        H[rows_b1, rows_b1] += E_bb
        for i in range(h):
            cols = i * d + np.arange(d)
            H[off_b1 + i, cols] += E_bW[i]
            H[cols, off_b1 + i] += E_bW[i]
            H[off_w2 + i, cols] += E_wW[i]
            H[cols, off_w2 + i] += E_wW[i]
            H[np.ix_(cols, cols)] += E_WW[i]
            H[off_w2 + i, off_b1 + i] += E_wb[i]
            H[off_b1 + i, off_w2 + i] += E_wb[i]
        return 0.5 * (H + H.T)

    def component_value(self, x, index):
        return self.batch_value(x, np.array([index]))

    def component_gradient(self, x, index):
        return self.batch_gradient(x, np.array([index]))

    def component_hessian(self, x, index):
        return self.batch_hessian(x, np.array([index]))


def synthetic_two_layer_net(records=500, feature_dim=4, hidden_units=8, seed=7,
                            noise=0.05, teacher_scale=1.0):
    """Seeded teacher-generated regression data behind a two-layer net."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(records, feature_dim))
    teacher_w1 = rng.normal(size=(3, feature_dim))
    teacher_w2 = rng.normal(size=3) * teacher_scale
    y = np.tanh(X @ teacher_w1.T) @ teacher_w2 + noise * rng.normal(size=records)
    return TwoLayerNetProblem(X, y, hidden_units=hidden_units)


def random_quadratic_finite_sum(n=10, components=20, seed=1234, **kwargs):
    return QuadraticFiniteSum(n=n, components=components, seed=seed, **kwargs)


def load_dataset(path, has_header=False, model="linear", hidden_units=8):
    """Load a numeric CSV (last column label, rest features) as a finite sum.

    `model` selects the per-record loss: "linear" least squares or a
    "two_layer" tanh network.  Malformed cells raise DatasetParseError citing
    the 1-based file row; empty or ragged files raise DatasetSchemaError.
    """
    rows = []
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        for line_no, cells in enumerate(reader, start=1):
            if line_no == 1 and has_header:
                continue
            if not cells or all(c.strip() == "" for c in cells):
                continue
            parsed = []
            for col, cell in enumerate(cells):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DatasetParseError(
                        "row %d: cell %d (%r) is not numeric" % (line_no, col + 1, cell)
                    ) from None
            rows.append((line_no, parsed))
    if not rows:
        raise DatasetSchemaError("dataset %r has no data rows" % str(path))
    width = len(rows[0][1])
    if width < 2:
        raise DatasetSchemaError("dataset needs at least one feature column plus a label")
    for line_no, parsed in rows:
        if len(parsed) != width:
            raise DatasetSchemaError(
                "row %d has %d columns, expected %d" % (line_no, len(parsed), width)
            )
    data = np.array([parsed for _, parsed in rows])
    features, labels = data[:, :-1], data[:, -1]
    if model == "linear":
        return LinearLeastSquaresProblem(features, labels)
    if model == "two_layer":
        return TwoLayerNetProblem(features, labels, hidden_units=hidden_units)
    raise ValueError("unknown dataset model %r" % model)


STREAM_GRADIENT = 0
STREAM_HESSIAN = 1
STREAM_OMEGA = 2
STREAM_VALUE = 3


class StochasticOracle:
    """Mini-batch sampler over a finite-sum problem.

    Four independent seeded streams (gradient, Hessian, curvature noise,
    value) are realized as counter-based generators keyed by
    (seed, stream, draw index): replays with the same seed are bitwise
    identical and drawing from one stream never perturbs another.  An oracle
    instance is single-consumer; give each solver run its own.
    """

    def __init__(self, problem, batch_size, seed):
        if batch_size < 1:
            raise ValueError("batch_size must be positive")
        if batch_size > problem.component_count:
            raise ValueError(
                "batch_size %d exceeds component count %d"
                % (batch_size, problem.component_count)
            )
        self.problem = problem
        self.batch_size = int(batch_size)
        self.seed = int(seed)
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        self._counters = {
            STREAM_GRADIENT: 0,
            STREAM_HESSIAN: 0,
            STREAM_OMEGA: 0,
            STREAM_VALUE: 0,
        }

    def draw_count(self, stream):
        """How many draws the given stream has produced so far."""
        return self._counters[stream]

    def _next_rng(self, stream):
        counter = self._counters[stream]
        self._counters[stream] = counter + 1
        return np.random.default_rng([self.seed, stream, counter])

    def _draw_batch(self, stream):
        rng = self._next_rng(stream)
        return rng.choice(self.problem.component_count, size=self.batch_size,
                          replace=False)

    def next_gradient_batch(self):
        return self._draw_batch(STREAM_GRADIENT)

    def next_hessian_batch(self):
        return self._draw_batch(STREAM_HESSIAN)

    def next_value_batch(self):
        return self._draw_batch(STREAM_VALUE)

    def next_omega(self):
        """Uniform draw on [-1, 1] from the curvature-noise stream."""
        return float(self._next_rng(STREAM_OMEGA).uniform(-1.0, 1.0))


def sample_estimates(oracle, x):
    """(value, gradient, Hessian) estimates at x.

    The value and gradient share the gradient stream's batch; the Hessian
    uses the Hessian stream's batch.  Each call advances exactly those two
    streams.
    """
    x = np.asarray(x, dtype=float)
    grad_batch = oracle.next_gradient_batch()
    hess_batch = oracle.next_hessian_batch()
    problem = oracle.problem
    value = problem.batch_value(x, grad_batch)
    gradient = problem.batch_gradient(x, grad_batch)
    hessian = problem.batch_hessian(x, hess_batch)
    return value, gradient, hessian
