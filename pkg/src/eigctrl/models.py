"""Linear-in-parameters eigenfunction models with analytic derivatives.

The candidate eigenfunction is phi = exp(-beta V0) with V0(x) = theta . rho(x)
over Gaussian radial features plus a quadratic polynomial block. Everything
needed by the losses (V0, grad V0, lap V0 and their theta-derivatives) is
closed form, so no autodiff framework is involved.
"""

from __future__ import annotations

import numpy as np

from .fields import ScalarField


def farthest_point_centers(samples: np.ndarray, n_centers: int, seed: int = 0) -> np.ndarray:
    """Greedy farthest-point selection of RBF centers from a sample cloud."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    rng = np.random.default_rng(seed)
    idx = [int(rng.integers(samples.shape[0]))]
    d2 = np.sum((samples - samples[idx[0]]) ** 2, axis=1)
    for _ in range(1, min(n_centers, samples.shape[0])):
        j = int(np.argmax(d2))
        idx.append(j)
        d2 = np.minimum(d2, np.sum((samples - samples[j]) ** 2, axis=1))
    return samples[idx].copy()


class GaussianRbfModel:
    """V0 = theta . rho with Gaussian RBFs and a quadratic polynomial block.

    Feature layout: [rbf_1..rbf_nc, 1, x_1..x_d, x_k x_l (k <= l)].
    """

    def __init__(self, centers: np.ndarray, width: float, theta: np.ndarray | None = None):
        self.centers = np.atleast_2d(np.asarray(centers, dtype=float))
        self.width = float(width)
        self.d = self.centers.shape[1]
        self.nc = self.centers.shape[0]
        self.quad_pairs = [(k, l) for k in range(self.d) for l in range(k, self.d)]
        self.n_params = self.nc + 1 + self.d + len(self.quad_pairs)
        self.theta = (
            np.zeros(self.n_params) if theta is None else np.asarray(theta, dtype=float).copy()
        )
        if self.theta.size != self.n_params:
            raise ValueError("theta size does not match the feature count")

    @classmethod
    def from_samples(
        cls, samples: np.ndarray, n_centers: int, seed: int = 0
    ) -> "GaussianRbfModel":
        """Centers by farthest-point selection; width = median pairwise distance."""
        centers = farthest_point_centers(samples, n_centers, seed)
        diff = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt(np.sum(diff ** 2, axis=2))
        iu = np.triu_indices(centers.shape[0], k=1)
        width = float(np.median(dist[iu])) if iu[0].size else 1.0
        return cls(centers, max(width, 1e-6))

    def with_theta(self, theta: np.ndarray) -> "GaussianRbfModel":
        return GaussianRbfModel(self.centers, self.width, theta)

    # feature tables -------------------------------------------------------

    def features(self, x: np.ndarray) -> np.ndarray:
        """rho(x), shape (n, p)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        diff = x[:, None, :] - self.centers[None, :, :]
        rbf = np.exp(-np.sum(diff ** 2, axis=2) / (2.0 * self.width ** 2))
        quad = np.stack([x[:, k] * x[:, l] for k, l in self.quad_pairs], axis=1) \
            if self.quad_pairs else np.zeros((n, 0))
        return np.concatenate([rbf, np.ones((n, 1)), x, quad], axis=1)

    def feat_grad(self, x: np.ndarray) -> np.ndarray:
        """grad rho(x), shape (n, p, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        diff = x[:, None, :] - self.centers[None, :, :]
        rbf = np.exp(-np.sum(diff ** 2, axis=2) / (2.0 * self.width ** 2))
        g_rbf = -(diff / self.width ** 2) * rbf[:, :, None]
        g_const = np.zeros((n, 1, self.d))
        g_lin = np.broadcast_to(np.eye(self.d), (n, self.d, self.d)).copy()
        g_quad = np.zeros((n, len(self.quad_pairs), self.d))
        for j, (k, l) in enumerate(self.quad_pairs):
            g_quad[:, j, k] += x[:, l]
            g_quad[:, j, l] += x[:, k]
        return np.concatenate([g_rbf, g_const, g_lin, g_quad], axis=1)

    def feat_lap(self, x: np.ndarray) -> np.ndarray:
        """lap rho(x), shape (n, p)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n = x.shape[0]
        diff = x[:, None, :] - self.centers[None, :, :]
        r2 = np.sum(diff ** 2, axis=2)
        rbf = np.exp(-r2 / (2.0 * self.width ** 2))
        lap_rbf = rbf * (r2 / self.width ** 4 - self.d / self.width ** 2)
        lap_quad = np.array(
            [2.0 if k == l else 0.0 for k, l in self.quad_pairs]
        )
        return np.concatenate(
            [lap_rbf, np.zeros((n, 1 + self.d)), np.tile(lap_quad, (n, 1))], axis=1
        )

    # model evaluations ----------------------------------------------------

    def v0(self, x: np.ndarray) -> np.ndarray:
        return self.features(x) @ self.theta

    def grad_v0(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("npd,p->nd", self.feat_grad(x), self.theta)

    def lap_v0(self, x: np.ndarray) -> np.ndarray:
        return self.feat_lap(x) @ self.theta

    def v0_field(self) -> ScalarField:
        return ScalarField(value=self.v0, grad=self.grad_v0, laplacian=self.lap_v0)

    def phi_field(self, beta: float) -> ScalarField:
        """phi = exp(-beta V0) as a ScalarField with analytic derivatives."""
        beta = float(beta)

        def value(x):
            return np.exp(-beta * self.v0(x))

        def grad(x):
            return -beta * value(x)[:, None] * self.grad_v0(x)

        def laplacian(x):
            g = self.grad_v0(x)
            return value(x) * (beta ** 2 * np.sum(g ** 2, axis=1) - beta * self.lap_v0(x))

        return ScalarField(value, grad, laplacian)


class ShiftedModel:
    """V0 = base model's V0 plus a fixed analytic offset field.

    Used on the importance-sampled route for non-confining energies, where
    the trained object is V0bar and the physical potential is
    V0 = V0bar - 2E. Feature tables and theta are the base model's, so all
    loss gradients carry over unchanged.
    """

    def __init__(self, base: GaussianRbfModel, offset: ScalarField):
        self.base = base
        self.offset = offset
        self.d = base.d
        self.n_params = base.n_params

    @property
    def theta(self):
        return self.base.theta

    def with_theta(self, theta):
        return ShiftedModel(self.base.with_theta(theta), self.offset)

    def features(self, x):
        return self.base.features(x)

    def feat_grad(self, x):
        return self.base.feat_grad(x)

    def feat_lap(self, x):
        return self.base.feat_lap(x)

    def v0(self, x):
        return self.base.v0(x) + self.offset.value(np.atleast_2d(np.asarray(x, dtype=float)))

    def grad_v0(self, x):
        return self.base.grad_v0(x) + self.offset.grad(np.atleast_2d(np.asarray(x, dtype=float)))

    def lap_v0(self, x):
        return self.base.lap_v0(x) + self.offset.laplacian(
            np.atleast_2d(np.asarray(x, dtype=float))
        )

    def v0_field(self) -> ScalarField:
        return ScalarField(value=self.v0, grad=self.grad_v0, laplacian=self.lap_v0)

    def phi_field(self, beta: float) -> ScalarField:
        beta = float(beta)

        def value(x):
            return np.exp(-beta * self.v0(x))

        def grad(x):
            return -beta * value(x)[:, None] * self.grad_v0(x)

        def laplacian(x):
            g = self.grad_v0(x)
            return value(x) * (beta ** 2 * np.sum(g ** 2, axis=1) - beta * self.lap_v0(x))

        return ScalarField(value, grad, laplacian)


class TimeFeatureCorrection:
    """Vector-valued correction field w(x, t) with per-coordinate parameters.

    Coordinate k gets w_k(x, t) = sum_{a,b} theta[k, a, b] rho_a(x_k) tau_b(t)
    with 1-D Gaussian bumps rho_a on a fixed coordinate range and polynomial
    time features tau_b(t) = (t/T)^b. The parameterization is linear in
    theta, so the pathwise gradient of any functional of w is exact.
    """

    def __init__(self, d: int, T: float, n_space: int = 8, n_time: int = 4,
                 x_range: float = 3.0):
        self.d = int(d)
        self.T = float(T)
        self.n_space = int(n_space)
        self.n_time = int(n_time)
        self.centers = np.linspace(-x_range, x_range, n_space)
        self.width = 2.0 * x_range / max(n_space - 1, 1)
        self.theta = np.zeros((d, n_space * n_time))
        self.n_params = self.theta.size

    def _features(self, x: np.ndarray, t: float) -> np.ndarray:
        """Per-coordinate features, shape (n, d, n_space * n_time)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rho = np.exp(-((x[:, :, None] - self.centers) ** 2) / (2.0 * self.width ** 2))
        s = t / self.T
        tau = s ** np.arange(self.n_time)
        feats = rho[:, :, :, None] * tau
        return feats.reshape(x.shape[0], self.d, -1)

    def value(self, x: np.ndarray, t: float) -> np.ndarray:
        """(n, d) correction values."""
        return np.einsum("ndp,dp->nd", self._features(x, t), self.theta)

    def grad_theta_dot(self, x: np.ndarray, t: float, a: np.ndarray) -> np.ndarray:
        """d/dtheta of sum_k w_k(x, t) a_k per sample, shape (n, d, p)."""
        return self._features(x, t) * a[:, :, None]

    def with_theta(self, theta: np.ndarray) -> "TimeFeatureCorrection":
        out = TimeFeatureCorrection(self.d, self.T, self.n_space, self.n_time)
        out.centers = self.centers
        out.width = self.width
        out.theta = np.asarray(theta, dtype=float).reshape(self.theta.shape).copy()
        return out
