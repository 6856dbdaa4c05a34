"""Inner loop of the threshold market: one numba kernel, one numpy twin.

Both kernels consume identical pre-drawn random buffers and perform the same
floating point operations in the same order, so their outputs agree to the
last bit on a given platform (up to libm differences in ``exp``).

A call advances the market by up to ``len(eta)`` steps. It stops early when
fewer than ``2 * M`` reset uniforms remain so the driver can refill the pool
without ever splitting a step.
"""
import math

import numpy as np

from ._jit import njit


@njit
def advance_numba(
    eta,
    noise,
    reset_u,
    reset_pos,
    state,
    lower,
    upper,
    weight,
    herding,
    price,
    wsum,
    prev_sigma,
    total_weight,
    h,
    kappa,
    f_a,
    f_b,
    zl_lo,
    zl_hi,
    zu_lo,
    zu_hi,
    out_price,
    out_sigma,
    out_switches,
):
    n_steps = eta.shape[0]
    m = state.shape[0]
    use_noise = noise.shape[0] > 0
    sqrt_h = math.sqrt(h)
    for k in range(n_steps):
        if reset_u.shape[0] - reset_pos < 2 * m:
            return k, reset_pos, price, wsum, prev_sigma
        sigma = wsum / total_weight
        dsigma = sigma - prev_sigma
        f = f_a + f_b * abs(sigma)
        price = price * math.exp(sqrt_h * eta[k] * f - 0.5 * h + kappa * dsigma)
        drift = h * abs(sigma)
        new_wsum = wsum
        n_switch = 0
        for i in range(m):
            lo = lower[i]
            up = upper[i]
            if state[i] * sigma < 0.0:
                d = herding[i] * drift
                lo = lo + d
                up = up - d
            if use_noise:
                lo = lo + noise[k, i, 0]
                up = up + noise[k, i, 1]
            if not (lo < price and price < up):
                s = -state[i]
                state[i] = s
                new_wsum = new_wsum + 2.0 * s * weight[i]
                zl = zl_lo + (zl_hi - zl_lo) * reset_u[reset_pos]
                zu = zu_lo + (zu_hi - zu_lo) * reset_u[reset_pos + 1]
                reset_pos += 2
                lo = price / (1.0 + zl)
                up = price * (1.0 + zu)
                n_switch += 1
            lower[i] = lo
            upper[i] = up
        prev_sigma = sigma
        wsum = new_wsum
        out_price[k] = price
        out_sigma[k] = wsum / total_weight
        out_switches[k] = n_switch
    return n_steps, reset_pos, price, wsum, prev_sigma


def advance_numpy(
    eta,
    noise,
    reset_u,
    reset_pos,
    state,
    lower,
    upper,
    weight,
    herding,
    price,
    wsum,
    prev_sigma,
    total_weight,
    h,
    kappa,
    f_a,
    f_b,
    zl_lo,
    zl_hi,
    zu_lo,
    zu_hi,
    out_price,
    out_sigma,
    out_switches,
):
    n_steps = eta.shape[0]
    m = state.shape[0]
    use_noise = noise.shape[0] > 0
    sqrt_h = math.sqrt(h)
    for k in range(n_steps):
        if reset_u.shape[0] - reset_pos < 2 * m:
            return k, reset_pos, price, wsum, prev_sigma
        sigma = wsum / total_weight
        dsigma = sigma - prev_sigma
        f = f_a + f_b * abs(sigma)
        price = price * math.exp(sqrt_h * float(eta[k]) * f - 0.5 * h + kappa * dsigma)
        drift = h * abs(sigma)
        minority = state * sigma < 0.0
        d = herding * drift
        lo = np.where(minority, lower + d, lower)
        up = np.where(minority, upper - d, upper)
        if use_noise:
            lo = lo + noise[k, :, 0]
            up = up + noise[k, :, 1]
        crossed = np.flatnonzero(~((lo < price) & (price < up)))
        new_wsum = wsum
        if crossed.size:
            state[crossed] = -state[crossed]
            # sequential accumulation keeps the sum order of the compiled loop
            for i in crossed:
                new_wsum = new_wsum + 2.0 * state[i] * weight[i]
            u = reset_u[reset_pos : reset_pos + 2 * crossed.size]
            reset_pos += 2 * crossed.size
            zl = zl_lo + (zl_hi - zl_lo) * u[0::2]
            zu = zu_lo + (zu_hi - zu_lo) * u[1::2]
            lo[crossed] = price / (1.0 + zl)
            up[crossed] = price * (1.0 + zu)
        lower[:] = lo
        upper[:] = up
        prev_sigma = sigma
        wsum = new_wsum
        out_price[k] = price
        out_sigma[k] = wsum / total_weight
        out_switches[k] = crossed.size
    return n_steps, reset_pos, price, wsum, prev_sigma
