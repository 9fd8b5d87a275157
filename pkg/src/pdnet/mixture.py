"""Mixture-of-Gaussians output head.

The head turns the trunk's last activation ``h`` into

    pi    = softmax(h @ W_pi + b_pi)                  (m,)
    mu    = h @ W_mu + b_mu                           (m, d)
    sigma = exp(clip(h @ W_sigma + b_sigma, -10, 10))  (m, d), or (m,) if isotropic

and scores designs under ``p(z) = sum_i pi_i prod_d N(z_d; mu_id, sigma_id)``.
All density math is done in log space. Designs live in normalized units:
each radius is mapped affinely onto [-1, 1] by :class:`DesignScaler`.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, TrainingError
from .physics import Geometry

LOG_SIGMA_CLAMP = 10.0
HALF_LOG_2PI = 0.5 * np.log(2 * np.pi)


def logsumexp(a, axis=-1, keepdims=False):
    a = np.asarray(a, dtype=np.float64)
    peak = np.max(a, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    out = np.log(np.sum(np.exp(a - peak), axis=axis, keepdims=True)) + peak
    return out if keepdims else np.squeeze(out, axis=axis)


def softmax(logits, axis=-1):
    logits = np.asarray(logits, dtype=np.float64)
    e = np.exp(logits - np.max(logits, axis=axis, keepdims=True))
    return e / np.sum(e, axis=axis, keepdims=True)


@dataclass(frozen=True)
class DesignScaler:
    low: tuple
    high: tuple

    @classmethod
    def from_geometry(cls, geometry: Geometry):
        d = geometry.layer_count
        return cls((geometry.radius_min,) * d, (geometry.radius_max,) * d)

    def __post_init__(self):
        if len(self.low) != len(self.high) or not all(h > l for l, h in zip(self.low, self.high)):
            raise DomainError("scaler needs high > low in every dimension")

    def to_design(self, radii):
        low, high = np.asarray(self.low), np.asarray(self.high)
        return 2.0 * (np.asarray(radii, dtype=np.float64) - low) / (high - low) - 1.0

    def to_physical(self, z):
        low, high = np.asarray(self.low), np.asarray(self.high)
        return low + (np.asarray(z, dtype=np.float64) + 1.0) * 0.5 * (high - low)


@dataclass
class MixtureParams:
    """Mixture for one input, or a batch when arrays carry a leading axis."""

    mixing: np.ndarray  # (..., m)
    means: np.ndarray  # (..., m, d)
    deviations: np.ndarray  # (..., m, d)

    @property
    def m(self):
        return self.mixing.shape[-1]

    @property
    def d(self):
        return self.means.shape[-1]

    def __len__(self):
        return self.mixing.shape[0]

    def __getitem__(self, i):
        return MixtureParams(self.mixing[i], self.means[i], self.deviations[i])

    def validate(self):
        if self.means.shape != self.deviations.shape or self.means.shape[:-1] != self.mixing.shape:
            raise DomainError("mixture parameter shapes disagree")
        if not (np.all(np.isfinite(self.mixing)) and np.all(np.isfinite(self.means))
                and np.all(np.isfinite(self.deviations))):
            raise DomainError("mixture parameters must be finite")
        if np.any(self.deviations <= 0):
            raise DomainError("mixture deviations must be positive")
        if np.any(self.mixing < 0) or np.any(np.abs(self.mixing.sum(-1) - 1) > 1e-12):
            raise DomainError("mixing weights must lie on the simplex")
        return self


@dataclass
class HeadWeights:
    W_pi: np.ndarray
    b_pi: np.ndarray
    W_mu: np.ndarray
    b_mu: np.ndarray
    W_sigma: np.ndarray
    b_sigma: np.ndarray
    m: int
    d: int
    isotropic: bool = False

    def parameters(self):
        return [self.W_pi, self.b_pi, self.W_mu, self.b_mu, self.W_sigma, self.b_sigma]

    def copy(self):
        return HeadWeights(*[p.copy() for p in self.parameters()], self.m, self.d, self.isotropic)


def init_head(width, m, d, seed, isotropic=False) -> HeadWeights:
    """Small-scale uniform init so the initial mixture is nearly uniform with unit sigma.

    Mean biases are spread over [-1, 1] so components start apart.
    """
    rng = np.random.default_rng(seed)
    limit = np.sqrt(1.0 / width)
    n_sigma = m if isotropic else m * d
    b_mu = rng.uniform(-1.0, 1.0, m * d)
    return HeadWeights(
        rng.uniform(-limit, limit, (width, m)) * 0.1, np.zeros(m),
        rng.uniform(-limit, limit, (width, m * d)) * 0.1, b_mu,
        rng.uniform(-limit, limit, (width, n_sigma)) * 0.1, np.full(n_sigma, np.log(0.3)),
        m, d, isotropic,
    )


def head_forward(trunk_output, head: HeadWeights):
    """Raw head outputs: (logits (n, m), means (n, m, d), sigma logits (n, m, d or 1))."""
    h = np.asarray(trunk_output, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != head.W_pi.shape[0]:
        raise DomainError(f"trunk output width {h.shape} does not match head")
    if not np.all(np.isfinite(h)):
        raise DomainError("trunk output contains non-finite values")
    n = h.shape[0]
    logits = h @ head.W_pi + head.b_pi
    means = (h @ head.W_mu + head.b_mu).reshape(n, head.m, head.d)
    s = h @ head.W_sigma + head.b_sigma
    s = s.reshape(n, head.m, 1) if head.isotropic else s.reshape(n, head.m, head.d)
    return logits, means, s


def _sigma(s):
    return np.exp(np.clip(s, -LOG_SIGMA_CLAMP, LOG_SIGMA_CLAMP))


def to_params(logits, means, s) -> MixtureParams:
    sigma = np.broadcast_to(_sigma(s), means.shape).copy()
    return MixtureParams(softmax(logits), means, sigma)


def parameterize(trunk_output, head: HeadWeights, m=None, d=None) -> MixtureParams:
    if (m is not None and m != head.m) or (d is not None and d != head.d):
        raise DomainError("requested (m, d) disagree with the head")
    return to_params(*head_forward(trunk_output, head))


def component_log_density(z, mean, dev):
    """Diagonal Gaussian log-density, summed over the last axis."""
    dev = np.asarray(dev, dtype=np.float64)
    if np.any(dev <= 0):
        raise DomainError("deviations must be positive")
    u = (np.asarray(z, dtype=np.float64) - mean) / dev
    return np.sum(-np.log(dev) - HALF_LOG_2PI - 0.5 * u * u, axis=-1)


def component_terms(params: MixtureParams, z):
    """log pi_i + log N_i(z) for points z of shape (..., d); returns (..., m)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != params.d:
        raise DomainError(f"point dimension {z.shape[-1]} != mixture dimension {params.d}")
    with np.errstate(divide="ignore"):
        log_pi = np.log(params.mixing)
    return log_pi + component_log_density(z[..., None, :], params.means, params.deviations)


def log_density(params: MixtureParams, z):
    """log p(z); z may be a single point (d,) or a stack (k, d)."""
    return logsumexp(component_terms(params, z), axis=-1)


def responsibilities(params: MixtureParams, z):
    return softmax(component_terms(params, z), axis=-1)


def nll_loss(logits, means, s, y):
    """Mean negative log-likelihood of labels y (n, d) and its gradients.

    Returns ``loss, (d_logits, d_means, d_s), gamma`` where ``gamma`` are the
    per-sample component responsibilities. Gradients of ``s`` vanish where the
    sigma clamp is active.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (means.shape[0], means.shape[2]):
        raise DomainError(f"labels shape {y.shape} does not match means {means.shape}")
    n = y.shape[0]
    log_pi = logits - logsumexp(logits, axis=1, keepdims=True)
    sigma = _sigma(s)
    u = (y[:, None, :] - means) / sigma
    log_d = np.sum(-np.log(sigma) - HALF_LOG_2PI - 0.5 * u * u, axis=2)
    joint = log_pi + log_d
    total = logsumexp(joint, axis=1, keepdims=True)
    loss = -float(np.mean(total))
    if not np.isfinite(loss):
        raise TrainingError("non-finite NLL loss")
    gamma = np.exp(joint - total)
    d_logits = (np.exp(log_pi) - gamma) / n
    d_means = -gamma[:, :, None] * u / sigma / n
    active = (s > -LOG_SIGMA_CLAMP) & (s < LOG_SIGMA_CLAMP)
    d_s = -gamma[:, :, None] * (u * u - 1.0) / n
    if s.shape[2] == 1:
        d_s = d_s.sum(axis=2, keepdims=True)
    d_s = d_s * active
    return loss, (d_logits, d_means, d_s), gamma


def head_backward(trunk_output, head: HeadWeights, d_logits, d_means, d_s):
    """Gradients for head parameters (aligned with ``head.parameters()``) and the trunk output."""
    h = np.asarray(trunk_output, dtype=np.float64)
    n = h.shape[0]
    g_mu = d_means.reshape(n, -1)
    g_s = d_s.reshape(n, -1)
    grads = [h.T @ d_logits, d_logits.sum(0), h.T @ g_mu, g_mu.sum(0), h.T @ g_s, g_s.sum(0)]
    dh = d_logits @ head.W_pi.T + g_mu @ head.W_mu.T + g_s @ head.W_sigma.T
    return grads, dh


def sample_design(params: MixtureParams, count, seed):
    """Draw points in design units (unclamped)."""
    if count < 1:
        raise DomainError("count must be >= 1")
    rng = np.random.default_rng(seed)
    idx = rng.choice(params.m, size=count, p=params.mixing / params.mixing.sum())
    noise = rng.standard_normal((count, params.d))
    return params.means[idx] + params.deviations[idx] * noise


def sample(params: MixtureParams, count, seed, scaler: DesignScaler, geometry: Geometry):
    """Draw structures in metres, clamped to the physical radius range."""
    radii = scaler.to_physical(sample_design(params, count, seed))
    return np.clip(radii, geometry.radius_min, geometry.radius_max)


def design_confidence(params: MixtureParams, radii, scaler: DesignScaler):
    """Mixture density at a physical structure (in design units)."""
    return np.exp(log_density(params, scaler.to_design(radii)))
