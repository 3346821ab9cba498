"""Latent space model for signed weighted bipartite networks.

Each donor node i and recipient node j has a position in d-dimensional
Euclidean space; the pair affinity is ``eta_ij = alpha - beta * ||z_d_i -
z_r_j||^2`` with beta > 0, and per-node additive effects delta_i / gamma_j
complete the compatibility ``mu_ij = eta_ij + delta_i + gamma_j``.  Observed
node and edge weights are modeled as independent Gaussians around the model
quantities with known (plug-in) standard deviations, and the log-likelihood is
maximized by L-BFGS-B in an unconstrained parameterization ``b = log(beta)``.
"""

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from .mdsinit import mds_init

__all__ = [
    "LsmParams",
    "FitConfig",
    "FitResult",
    "RefinedEstimates",
    "FitError",
    "pair_affinity",
    "predict_compatibility",
    "log_likelihood",
    "log_likelihood_gradient",
    "fit",
    "refine_network",
]

SE_FLOOR = 1e-8  # degenerate standard errors are floored for stability


class FitError(RuntimeError):
    """All optimizer restarts diverged."""


@dataclass(frozen=True)
class LsmParams:
    """Full parameter set (positions, intercept, slope, node effects)."""

    z_d: np.ndarray
    z_r: np.ndarray
    alpha: float
    beta: float
    delta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        z_d = np.atleast_2d(np.asarray(self.z_d, dtype=float))
        z_r = np.atleast_2d(np.asarray(self.z_r, dtype=float))
        delta = np.asarray(self.delta, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        if z_d.shape[1] != z_r.shape[1]:
            raise ValueError("z_d and z_r must share the latent dimension")
        if delta.shape != (z_d.shape[0],) or gamma.shape != (z_r.shape[0],):
            raise ValueError("node effect lengths must match position counts")
        if not (self.beta > 0):
            raise ValueError("beta must be strictly positive")
        arrays = (z_d, z_r, delta, gamma)
        if not all(np.all(np.isfinite(a)) for a in arrays) or not (
            math.isfinite(self.alpha) and math.isfinite(self.beta)
        ):
            raise ValueError("all parameters must be finite")
        object.__setattr__(self, "z_d", z_d)
        object.__setattr__(self, "z_r", z_r)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self):
        return self.z_d.shape[1]

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "z_d": self.z_d.tolist(),
            "z_r": self.z_r.tolist(),
            "delta": self.delta.tolist(),
            "gamma": self.gamma.tolist(),
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            z_d=np.array(d["z_d"], dtype=float),
            z_r=np.array(d["z_r"], dtype=float),
            alpha=d["alpha"],
            beta=d["beta"],
            delta=np.array(d["delta"], dtype=float),
            gamma=np.array(d["gamma"], dtype=float),
        )


@dataclass(frozen=True)
class FitConfig:
    dim: int = 2
    max_iter: int = 500
    grad_tol: float = 1e-6
    restarts: int = 4
    seed: int = 0
    freeze_beta: bool = False
    fixed_beta: float = 1.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (self.grad_tol > 0):
            raise ValueError("grad_tol must be > 0")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")
        if not (self.fixed_beta > 0):
            raise ValueError("fixed_beta must be > 0")


@dataclass(frozen=True)
class FitResult:
    params: LsmParams
    log_likelihood: float
    iterations: int
    grad_norm: float
    restart_index: int
    converged: bool

    def to_dict(self):
        d = self.params.to_dict()
        d["log_likelihood"] = self.log_likelihood
        d["converged"] = self.converged
        return d


@dataclass(frozen=True)
class RefinedEstimates:
    """Model-based estimates for every pair, including unobserved ones."""

    donor_labels: tuple
    recipient_labels: tuple
    mu: np.ndarray
    eta: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray


def _sqdist(z_d, z_r):
    # ||z_d_i - z_r_j||^2 for all pairs
    diff = z_d[:, None, :] - z_r[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def pair_affinity(params, i, j):
    """alpha - beta * squared Euclidean distance between nodes i and j."""
    d2 = np.sum((params.z_d[i] - params.z_r[j]) ** 2)
    return params.alpha - params.beta * d2


def predict_compatibility(params, i, j):
    """Model compatibility mu_ij = affinity + delta_i + gamma_j."""
    return pair_affinity(params, i, j) + params.delta[i] + params.gamma[j]


def _check_dims(params, net):
    if params.z_d.shape[0] != net.n_d or params.z_r.shape[0] != net.n_r:
        raise ValueError("parameter dimensions do not match network")


def _floored(se):
    return np.maximum(se, SE_FLOOR)


def log_likelihood(params, net):
    """Gaussian log-likelihood of the observed node and edge weights.

    Edge terms use the pair affinity eta_ij as the mean; node terms use the
    node effects.  Only observed (masked-true) edges contribute.
    """
    _check_dims(params, net)
    eta = params.alpha - params.beta * _sqdist(params.z_d, params.z_r)
    m = net.edge_mask
    se = _floored(net.edge_se)
    r = (net.edge_weight - eta)[m]
    s = se[m]
    ll = -0.5 * np.sum(np.log(2.0 * np.pi * s * s)) - 0.5 * np.sum((r / s) ** 2)
    for obs, mean, sig in (
        (net.donor_weight, params.delta, _floored(net.donor_se)),
        (net.recipient_weight, params.gamma, _floored(net.recipient_se)),
    ):
        ll += -0.5 * np.sum(np.log(2.0 * np.pi * sig * sig))
        ll += -0.5 * np.sum(((obs - mean) / sig) ** 2)
    return float(ll)


def log_likelihood_gradient(params, net):
    """Analytic gradient of :func:`log_likelihood` as a flat vector.

    Packing order matches :func:`pack_params`: z_d rows, z_r rows, alpha,
    b = log(beta), delta, gamma.  The slope derivative is taken with respect
    to the unconstrained b, i.e. chained through beta = exp(b).
    """
    _check_dims(params, net)
    z_d, z_r, beta = params.z_d, params.z_r, params.beta
    d2 = _sqdist(z_d, z_r)
    eta = params.alpha - beta * d2
    se = _floored(net.edge_se)
    e = np.where(net.edge_mask, (net.edge_weight - eta) / (se * se), 0.0)
    g_alpha = e.sum()
    g_b = beta * (-(e * d2).sum())
    g_zd = -2.0 * beta * (e.sum(axis=1)[:, None] * z_d - e @ z_r)
    g_zr = 2.0 * beta * (e.T @ z_d - e.sum(axis=0)[:, None] * z_r)
    sd = _floored(net.donor_se)
    sr = _floored(net.recipient_se)
    g_delta = (net.donor_weight - params.delta) / (sd * sd)
    g_gamma = (net.recipient_weight - params.gamma) / (sr * sr)
    return np.concatenate(
        [g_zd.ravel(), g_zr.ravel(), [g_alpha, g_b], g_delta, g_gamma]
    )


def pack_params(params):
    """Flatten parameters into the optimizer vector (with b = log beta)."""
    return np.concatenate(
        [
            params.z_d.ravel(),
            params.z_r.ravel(),
            [params.alpha, math.log(params.beta)],
            params.delta,
            params.gamma,
        ]
    )


def unpack_params(vec, n_d, n_r, dim):
    """Inverse of :func:`pack_params`."""
    k = 0
    z_d = vec[k : k + n_d * dim].reshape(n_d, dim)
    k += n_d * dim
    z_r = vec[k : k + n_r * dim].reshape(n_r, dim)
    k += n_r * dim
    alpha, b = vec[k], vec[k + 1]
    k += 2
    delta = vec[k : k + n_d]
    gamma = vec[k + n_d :]
    return LsmParams(z_d, z_r, float(alpha), math.exp(min(float(b), 300.0)), delta, gamma)


_BIG = 1e25  # stands in for a non-finite objective so line searches back off


def _start_points(net, config, init):
    """Yield (restart_index, initial parameter vector)."""
    n_d, n_r, dim = net.n_d, net.n_r, config.dim
    b0 = math.log(config.fixed_beta) if config.freeze_beta else 0.0
    if init is not None:
        first = pack_params(init)
        if config.freeze_beta:
            first[n_d * dim + n_r * dim + 1] = b0
        yield 0, first
    else:
        z_d0, z_r0 = mds_init(net, dim)
        yield 0, np.concatenate(
            [z_d0.ravel(), z_r0.ravel(), [0.0, b0], net.donor_weight, net.recipient_weight]
        )
    from ._util import substream

    for k in range(config.restarts):
        rng = substream(config.seed, "lsm-restart", str(k))
        vec = 0.5 * rng.standard_normal(n_d * dim + n_r * dim + 2 + n_d + n_r)
        vec[n_d * dim + n_r * dim + 1] = b0 if config.freeze_beta else vec[n_d * dim + n_r * dim + 1]
        yield k + 1, vec


def _polish(x_free, free, template, grad_free, max_steps=4):
    """Newton steps on the gradient itself.

    Near the optimum the objective changes by less than machine epsilon per
    step, so line-search methods stall with gradient norms around 1e-6; the
    gradient is still computed accurately, so root-finding on it tightens the
    stationarity a few more orders of magnitude.  Steps are accepted only if
    they shrink the gradient norm.
    """
    m = x_free.size
    g = grad_free(x_free)
    gnorm = np.max(np.abs(g))
    for _ in range(max_steps):
        if gnorm == 0.0:
            break
        h = np.empty((m, m))
        eps = 1e-6 * np.maximum(1.0, np.abs(x_free))
        for k in range(m):
            xp = x_free.copy()
            xm = x_free.copy()
            xp[k] += eps[k]
            xm[k] -= eps[k]
            h[:, k] = (grad_free(xp) - grad_free(xm)) / (2.0 * eps[k])
        h = 0.5 * (h + h.T)
        try:
            step = np.linalg.solve(h, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(h, -g, rcond=None)[0]
        x_new = x_free + step
        g_new = grad_free(x_new)
        gnorm_new = np.max(np.abs(g_new))
        if not np.all(np.isfinite(g_new)) or gnorm_new >= gnorm:
            break
        x_free, g, gnorm = x_new, g_new, gnorm_new
    return x_free


def fit(net, config, init=None):
    """Maximum likelihood fit via L-BFGS-B with MDS-initialized + random restarts.

    The restart (or the ``init``-seeded start) with the highest final
    log-likelihood wins; ties within 1e-12 go to the lowest restart index.
    Restarts whose objective becomes non-finite are discarded; if all diverge
    a :class:`FitError` is raised.
    """
    if init is not None:
        _check_dims(init, net)
        if init.dim != config.dim:
            raise ValueError("init latent dimension does not match config.dim")
    n_d, n_r, dim = net.n_d, net.n_r, config.dim
    n_free = n_d * dim + n_r * dim + 2 + n_d + n_r
    b_slot = n_d * dim + n_r * dim + 1
    free = np.ones(n_free, dtype=bool)
    if config.freeze_beta:
        free[b_slot] = False
    b_fixed = math.log(config.fixed_beta)

    def expand(x, template):
        full = template.copy()
        full[free] = x
        return full

    def neg_ll(x, template):
        p = unpack_params(expand(x, template), n_d, n_r, dim)
        v = log_likelihood(p, net)
        return _BIG if not math.isfinite(v) else -v

    def neg_grad(x, template):
        full = expand(x, template)
        g = log_likelihood_gradient(unpack_params(full, n_d, n_r, dim), net)
        if not np.all(np.isfinite(g)):
            return np.zeros(free.sum())
        return -g[free]

    best = None
    for idx, x0 in _start_points(net, config, init):
        template = x0.copy()
        if config.freeze_beta:
            template[b_slot] = b_fixed
        options = {
            "maxiter": config.max_iter,
            "gtol": config.grad_tol,
            "ftol": 0.0,
            "maxcor": 20,
        }
        res = minimize(neg_ll, x0[free], args=(template,), jac=neg_grad,
                       method="L-BFGS-B", options=options)
        total_nit = res.nit
        # a fresh L-BFGS memory sometimes finishes the last stretch to gtol
        for _ in range(2):
            if res.nit >= config.max_iter or np.max(np.abs(res.jac)) <= config.grad_tol:
                break
            res = minimize(neg_ll, res.x, args=(template,), jac=neg_grad,
                           method="L-BFGS-B", options=options)
            total_nit += res.nit
        if not math.isfinite(res.fun) or res.fun >= _BIG / 2:
            continue
        x_best = res.x
        if np.max(np.abs(res.jac)) > config.grad_tol:
            x_best = _polish(x_best, free, template, lambda x: -neg_grad(x, template))
        params = unpack_params(expand(x_best, template), n_d, n_r, dim)
        ll = log_likelihood(params, net)
        g = log_likelihood_gradient(params, net)
        if config.freeze_beta:
            g = g[free]
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        cand = FitResult(
            params=params,
            log_likelihood=ll,
            iterations=int(total_nit),
            grad_norm=gnorm,
            restart_index=idx,
            converged=gnorm <= config.grad_tol,
        )
        if best is None or cand.log_likelihood > best.log_likelihood + 1e-12:
            best = cand
    if best is None:
        raise FitError("all optimizer restarts diverged")
    return best


def refine_network(net, result):
    """Model-based estimates for every pair of ``net``, masked pairs included."""
    params = result.params
    _check_dims(params, net)
    eta = params.alpha - params.beta * _sqdist(params.z_d, params.z_r)
    mu = eta + params.delta[:, None] + params.gamma[None, :]
    return RefinedEstimates(
        donor_labels=net.donor_labels,
        recipient_labels=net.recipient_labels,
        mu=mu,
        eta=eta,
        delta=params.delta.copy(),
        gamma=params.gamma.copy(),
    )
