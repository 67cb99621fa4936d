"""Ready-made models used by the experiments."""

from __future__ import annotations

import math

import numpy as np

from . import fbm
from .oracles import SingularDriftParams, VolterraMomentParams, exact_linear_path_value
from .sde import SdeModel
from .sve import PowerKernel, SveModel


def linear_singular_sde(params: SingularDriftParams) -> SdeModel:
    """``dX = mu(t) X dt + sigma0 X dW`` with the two-piece singular ``mu``."""

    def drift(t, x):
        return params.drift_rate(t)[:, None] * x

    def diffusion(t, x):
        return (params.sigma0 * x)[:, :, None]

    return SdeModel(1, 1, drift, diffusion, (params.s0, params.s1))


def linear_singular_sde_exact(params: SingularDriftParams):
    """Exact solution sampler ``(t, x0, w_t) -> X_t`` on shared Brownian values."""

    def exact(t, x0, w_t):
        t = np.asarray(t, dtype=float)
        x = np.asarray(x0, dtype=float).reshape(t.size, -1)
        w = np.asarray(w_t, dtype=float).reshape(t.size, -1)
        return exact_linear_path_value(params, x, t[:, None], w)

    return exact


def linear_singular_sve(params: VolterraMomentParams) -> SveModel:
    """Scalar linear Volterra equation with power-law kernels.

    Drift ``mu (t-s)^-alpha0 |s-s0|^-beta0 x``; diffusion
    ``sqrt(sigma) (t-s)^-(alpha1/2) |s-s1|^-(beta1/2) x``.
    """
    p = params
    drift = PowerKernel(p.mu, p.alpha0, p.s0, p.beta0)
    diffusion = PowerKernel(math.sqrt(p.sigma), p.alpha1 / 2, p.s1, p.beta1 / 2)
    note = f"diagonal t=s; drift center s={p.s0}; diffusion center s={p.s1}"
    return SveModel.from_power_kernels(drift, diffusion, note)


def fbm_sve(H: float, sigma0: float = 1.0, mu: float = 0.0) -> SveModel:
    """``Y_t = y0 + int_0^t sigma0 K_H(t, s) Y_s dW_s + int_0^t mu Y_s ds``."""
    table = fbm.f_table(H) if H != 0.5 else None

    def drift(t, s, x):
        return mu * x

    def diffusion(t, s, x):
        k = fbm.kernel_k_array(t, s, H, table)
        return (sigma0 * k[:, None] * x)[:, :, None]

    return SveModel(1, 1, drift, diffusion, "diagonal t=s (H < 1/2), s=0 column")
