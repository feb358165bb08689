"""Hot numeric kernels: filter recurrence and Monte Carlo rollout.

Both kernels exist in two interchangeable flavors:

* a loop-style implementation compiled with numba ``@njit`` (default), and
* a pure-numpy fallback (loop over steps for the filter, vectorized across
  samples for the Monte Carlo rollout).

Set the environment variable ``RTAPROP_NO_NUMBA=1`` before import to force
the numpy path (or to run on hosts without numba).  Outputs of the two
paths agree to floating-point noise; a fixed seed gives bitwise-identical
results on repeated runs of the same path.

State layout everywhere: [x, y, z, vx, vy, vz] (meters, meters/second).
``sigma_a2`` scales the white-noise-acceleration process covariance;
``qscales`` are the per-step measurement-noise diagonals.  Steps with
``mask[j] == 0`` skip the measurement update entirely.
"""

from __future__ import annotations

import os

import numpy as np

_FALSEY = {"", "0", "false", "no", "off"}
NUMBA_ENABLED = os.environ.get("RTAPROP_NO_NUMBA", "").strip().lower() in _FALSEY

if NUMBA_ENABLED:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False


def filter_steps_numpy(mean0, cov0, dts, us, zs, qscales, mask, sigma_a2):
    """Reference filter recurrence: predict + Joseph-form update per step.

    Returns (means (S+1,6), covs (S+1,6,6), kp (S,3,3), kv (S,3,3)) where
    row 0 is the entry state and kp/kv are the position/velocity blocks of
    the Kalman gain used at each step (zero where mask is off).
    """
    n_steps = len(dts)
    means = np.zeros((n_steps + 1, 6))
    covs = np.zeros((n_steps + 1, 6, 6))
    kp = np.zeros((n_steps, 3, 3))
    kv = np.zeros((n_steps, 3, 3))
    means[0] = mean0
    covs[0] = cov0

    eye6 = np.eye(6)
    mean = mean0.copy()
    cov = cov0.copy()
    for j in range(n_steps):
        dt = dts[j]
        a_mat = np.eye(6)
        a_mat[0, 3] = dt
        a_mat[1, 4] = dt
        a_mat[2, 5] = dt

        r_mat = np.zeros((6, 6))
        q_pos = 0.25 * dt**4 * sigma_a2
        q_cross = 0.5 * dt**3 * sigma_a2
        q_vel = dt**2 * sigma_a2
        for a in range(3):
            r_mat[a, a] = q_pos
            r_mat[a + 3, a + 3] = q_vel
            r_mat[a, a + 3] = q_cross
            r_mat[a + 3, a] = q_cross

        mean_p = a_mat @ mean
        mean_p[0:3] += dt * us[j]
        cov_p = a_mat @ cov @ a_mat.T + r_mat

        if mask[j]:
            q = qscales[j]
            s_mat = cov_p[0:3, 0:3] + q * np.eye(3)
            gain = np.linalg.solve(s_mat, cov_p[0:3, :]).T  # (6,3)
            innov = zs[j] - mean_p[0:3]
            mean = mean_p + gain @ innov
            ikc = eye6.copy()
            ikc[:, 0:3] -= gain
            cov = ikc @ cov_p @ ikc.T + q * (gain @ gain.T)
            cov = 0.5 * (cov + cov.T)
            kp[j] = gain[0:3, :]
            kv[j] = gain[3:6, :]
        else:
            mean = mean_p
            cov = 0.5 * (cov_p + cov_p.T)
        means[j + 1] = mean
        covs[j + 1] = cov
    return means, covs, kp, kv


def mc_rollout_block_numpy(x0, na, nv, dts, us, zs, kp, kv, mask, sigma_a, sqrt_q):
    """Closed-loop sample rollout, vectorized across the block.

    x0: (B,6) entry states; na/nv: (B,S,3) unit-normal draws for
    acceleration (process) and perceived-position (measurement) noise.
    Returns states (B, S+1, 6).
    """
    n_samples, n_steps = na.shape[0], na.shape[1]
    states = np.zeros((n_samples, n_steps + 1, 6))
    states[:, 0, :] = x0
    pos = x0[:, 0:3].copy()
    vel = x0[:, 3:6].copy()
    for j in range(n_steps):
        dt = dts[j]
        accel = sigma_a * na[:, j, :]
        pos = pos + dt * vel + dt * us[j] + (0.5 * dt * dt) * accel
        vel = vel + dt * accel
        if mask[j]:
            innov = (zs[j] - pos) - sqrt_q[j] * nv[:, j, :]
            pos = pos + innov @ kp[j].T
            vel = vel + innov @ kv[j].T
        states[:, j + 1, 0:3] = pos
        states[:, j + 1, 3:6] = vel
    return states


def _mc_rollout_block_loop(x0, na, nv, dts, us, zs, kp, kv, mask, sigma_a, sqrt_q):
    # Same contract as mc_rollout_block_numpy, written as per-sample loops
    # for numba.
    n_samples, n_steps = na.shape[0], na.shape[1]
    states = np.zeros((n_samples, n_steps + 1, 6))
    for b in range(n_samples):
        states[b, 0, :] = x0[b]
        px, py, pz = x0[b, 0], x0[b, 1], x0[b, 2]
        vx, vy, vz = x0[b, 3], x0[b, 4], x0[b, 5]
        for j in range(n_steps):
            dt = dts[j]
            ax = sigma_a * na[b, j, 0]
            ay = sigma_a * na[b, j, 1]
            az = sigma_a * na[b, j, 2]
            hdt2 = 0.5 * dt * dt
            px = px + dt * vx + dt * us[j, 0] + hdt2 * ax
            py = py + dt * vy + dt * us[j, 1] + hdt2 * ay
            pz = pz + dt * vz + dt * us[j, 2] + hdt2 * az
            vx = vx + dt * ax
            vy = vy + dt * ay
            vz = vz + dt * az
            if mask[j]:
                ix = (zs[j, 0] - px) - sqrt_q[j] * nv[b, j, 0]
                iy = (zs[j, 1] - py) - sqrt_q[j] * nv[b, j, 1]
                iz = (zs[j, 2] - pz) - sqrt_q[j] * nv[b, j, 2]
                px = px + kp[j, 0, 0] * ix + kp[j, 0, 1] * iy + kp[j, 0, 2] * iz
                py = py + kp[j, 1, 0] * ix + kp[j, 1, 1] * iy + kp[j, 1, 2] * iz
                pz = pz + kp[j, 2, 0] * ix + kp[j, 2, 1] * iy + kp[j, 2, 2] * iz
                vx = vx + kv[j, 0, 0] * ix + kv[j, 0, 1] * iy + kv[j, 0, 2] * iz
                vy = vy + kv[j, 1, 0] * ix + kv[j, 1, 1] * iy + kv[j, 1, 2] * iz
                vz = vz + kv[j, 2, 0] * ix + kv[j, 2, 1] * iy + kv[j, 2, 2] * iz
            states[b, j + 1, 0] = px
            states[b, j + 1, 1] = py
            states[b, j + 1, 2] = pz
            states[b, j + 1, 3] = vx
            states[b, j + 1, 4] = vy
            states[b, j + 1, 5] = vz
    return states


if NUMBA_ENABLED:
    filter_steps_numba = njit(cache=True)(filter_steps_numpy)
    mc_rollout_block_numba = njit(cache=True)(_mc_rollout_block_loop)
    filter_steps = filter_steps_numba
    mc_rollout_block = mc_rollout_block_numba
else:
    filter_steps = filter_steps_numpy
    mc_rollout_block = mc_rollout_block_numpy


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"


def warmup() -> None:
    """Trigger JIT compilation on a tiny problem (no-op on the numpy path)."""
    dts = np.ones(2)
    us = np.zeros((2, 3))
    zs = np.zeros((2, 3))
    qs = np.ones(2)
    mask = np.ones(2, dtype=np.uint8)
    m, c, kp, kv = filter_steps(np.zeros(6), np.eye(6), dts, us, zs, qs, mask, 1.0)
    mc_rollout_block(
        np.zeros((2, 6)), np.zeros((2, 2, 3)), np.zeros((2, 2, 3)),
        dts, us, zs, kp, kv, mask, 1.0, np.sqrt(qs),
    )
