"""Trajectory hot loops: numba-compiled kernel with a pure-numpy fallback.

The backend is picked per call: the ``LINDBLADRATE_BACKEND`` environment
variable ("numba" or "numpy") or an explicit argument override the default,
which is numba whenever it imports.  Both paths consume identical
counter-based random streams and the same per-channel eigendecomposition
data, so they agree to floating-point noise; bit-for-bit reproducibility
across worker counts is guaranteed within a backend by accumulating
fixed-size trajectory blocks and merging them in index order.

Trajectory semantics: the conditional state evolves under the channel
self-propagator between exponentially distributed transfer events; each
transfer out of channel R applies the jump map attached to R (the source),
renormalizes the trace, and hands the state to the selected destination.
Grid times are sampled with the exact segment propagator (no intra-segment
discretization).
"""

from __future__ import annotations

import math
import os

import numpy as np

from ._rng import draw_u64, stream_key, to_unit

ENV_BACKEND = "LINDBLADRATE_BACKEND"
BLOCK_SIZE = 1024

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via the env override
    numba = None
    HAVE_NUMBA = False


def resolve_backend(backend: str | None = None) -> str:
    """Pick "numba" or "numpy" from the argument, environment, and availability."""
    choice = backend or os.environ.get(ENV_BACKEND, "") or "auto"
    choice = choice.lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"unknown backend {choice!r}")
    if choice == "auto":
        return "numba" if HAVE_NUMBA else "numpy"
    if choice == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return choice


# ---------------------------------------------------------------------------
# numba path
# ---------------------------------------------------------------------------

if HAVE_NUMBA:
    _U64 = numba.uint64

    @numba.njit(numba.uint64(numba.uint64), cache=True, nogil=True)
    def _mix64_nb(z):
        z = (z ^ (z >> _U64(30))) * _U64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> _U64(27))) * _U64(0x94D049BB133111EB)
        return z ^ (z >> _U64(31))

    @numba.njit(numba.float64(numba.uint64, numba.uint64), cache=True, nogil=True)
    def _unit_nb(key, counter):
        bits = _mix64_nb(key + _U64(0x9E3779B97F4A7C15) * counter)
        return (np.float64(bits >> _U64(11)) + 0.5) * 2.0**-53

    @numba.njit(cache=True, nogil=True)
    def _run_block_nb(
        key_lo,
        key_hi,
        keys,
        grid,
        weights_cum,
        eigvals,
        eigvecs,
        eiginvs,
        jump_ops,
        trans_cum,
        escape,
        rho0,
        ch_sum,
        ch_sq_re,
        ch_sq_im,
    ):
        kchan = weights_cum.shape[0]
        tcount = grid.shape[0]
        n2 = rho0.shape[0]
        d = int(round(math.sqrt(n2)))
        y = np.empty(n2, np.complex128)
        z = np.empty(n2, np.complex128)
        w = np.empty(n2, np.complex128)
        for traj in range(key_lo, key_hi):
            key = keys[traj - key_lo]
            ctr = _U64(0)
            u = _unit_nb(key, ctr)
            ctr += _U64(1)
            chan = kchan - 1
            for k in range(kchan):
                if u <= weights_cum[k]:
                    chan = k
                    break
            for i in range(n2):
                y[i] = rho0[i]
            t0 = 0.0
            g = 0
            while g < tcount:
                gam = escape[chan]
                if gam > 0.0:
                    u = _unit_nb(key, ctr)
                    ctr += _U64(1)
                    t_jump = t0 - math.log(u) / gam
                else:
                    t_jump = math.inf
                for i in range(n2):
                    acc = 0.0 + 0.0j
                    for k2 in range(n2):
                        acc += eiginvs[chan, i, k2] * y[k2]
                    z[i] = acc
                while g < tcount and grid[g] <= t_jump:
                    dt = grid[g] - t0
                    if dt == 0.0:
                        for i in range(n2):
                            val = y[i]
                            ch_sum[chan, g, i] += val
                            ch_sq_re[chan, g, i] += val.real * val.real
                            ch_sq_im[chan, g, i] += val.imag * val.imag
                    else:
                        for i in range(n2):
                            w[i] = z[i] * np.exp(eigvals[chan, i] * dt)
                        for i in range(n2):
                            acc = 0.0 + 0.0j
                            for k2 in range(n2):
                                acc += eigvecs[chan, i, k2] * w[k2]
                            ch_sum[chan, g, i] += acc
                            ch_sq_re[chan, g, i] += acc.real * acc.real
                            ch_sq_im[chan, g, i] += acc.imag * acc.imag
                    g += 1
                if g >= tcount:
                    break
                dtj = t_jump - t0
                for i in range(n2):
                    w[i] = z[i] * np.exp(eigvals[chan, i] * dtj)
                for i in range(n2):
                    acc = 0.0 + 0.0j
                    for k2 in range(n2):
                        acc += eigvecs[chan, i, k2] * w[k2]
                    y[i] = acc
                for i in range(n2):
                    acc = 0.0 + 0.0j
                    for k2 in range(n2):
                        acc += jump_ops[chan, i, k2] * y[k2]
                    w[i] = acc
                tr = 0.0 + 0.0j
                for i in range(d):
                    tr += w[i * d + i]
                if abs(tr - 1.0) > 1e-10 or not math.isfinite(tr.real):
                    return traj
                for i in range(n2):
                    y[i] = w[i] / tr
                u = _unit_nb(key, ctr)
                ctr += _U64(1)
                nxt = -1
                for k in range(kchan):
                    if k == chan:
                        continue
                    if u <= trans_cum[chan, k]:
                        nxt = k
                        break
                if nxt < 0:
                    for k in range(kchan - 1, -1, -1):
                        if k != chan and trans_cum[chan, k] > 0.0:
                            nxt = k
                            break
                chan = nxt
                t0 = t_jump
        return -1


# ---------------------------------------------------------------------------
# numpy path
# ---------------------------------------------------------------------------


def _run_block_np(
    key_lo,
    key_hi,
    keys,
    grid,
    weights_cum,
    eigvals,
    eigvecs,
    eiginvs,
    jump_ops,
    trans_cum,
    escape,
    rho0,
    ch_sum,
    ch_sq_re,
    ch_sq_im,
):
    """Vectorized-per-segment fallback; identical draw sequence to the kernel."""
    kchan = weights_cum.shape[0]
    tcount = grid.shape[0]
    d = int(round(math.sqrt(rho0.shape[0])))
    diag_idx = np.arange(d) * d + np.arange(d)
    for traj in range(key_lo, key_hi):
        key = int(keys[traj - key_lo])
        ctr = 0
        u = to_unit(draw_u64(key, ctr))
        ctr += 1
        chan = int(np.searchsorted(weights_cum, u, side="left"))
        chan = min(chan, kchan - 1)
        y = rho0.copy()
        t0 = 0.0
        g = 0
        while g < tcount:
            gam = escape[chan]
            if gam > 0.0:
                u = to_unit(draw_u64(key, ctr))
                ctr += 1
                t_jump = t0 - math.log(u) / gam
            else:
                t_jump = math.inf
            z = eiginvs[chan] @ y
            g1 = int(np.searchsorted(grid, t_jump, side="right"))
            if g1 > g:
                dts = grid[g:g1] - t0
                states = eigvecs[chan] @ (np.exp(np.outer(eigvals[chan], dts)) * z[:, None])
                if dts[0] == 0.0:
                    states[:, 0] = y
                ch_sum[chan, g:g1] += states.T
                ch_sq_re[chan, g:g1] += states.real.T ** 2
                ch_sq_im[chan, g:g1] += states.imag.T ** 2
                g = g1
            if g >= tcount:
                break
            y = eigvecs[chan] @ (np.exp(eigvals[chan] * (t_jump - t0)) * z)
            y = jump_ops[chan] @ y
            tr = y[diag_idx].sum()
            if abs(tr - 1.0) > 1e-10 or not np.isfinite(tr):
                return traj
            y = y / tr
            u = to_unit(draw_u64(key, ctr))
            ctr += 1
            nxt = -1
            for k in range(kchan):
                if k == chan:
                    continue
                if u <= trans_cum[chan, k]:
                    nxt = k
                    break
            if nxt < 0:
                for k in range(kchan - 1, -1, -1):
                    if k != chan and trans_cum[chan, k] > 0.0:
                        nxt = k
                        break
            chan = nxt
            t0 = t_jump
    return -1


def run_blocks(kit, n: int, master_seed: int, backend: str, workers: int = 1):
    """Run ``n`` trajectories in fixed blocks and merge partials in order.

    Returns ``(ch_sum, ch_sq_re, ch_sq_im)`` shaped ``(K, T, d**2)``.
    """
    runner = _run_block_nb if backend == "numba" else _run_block_np
    kchan = kit.weights_cum.shape[0]
    tcount = kit.grid.shape[0]
    n2 = kit.rho0_vec.shape[0]
    shape = (kchan, tcount, n2)
    total_sum = np.zeros(shape, dtype=complex)
    total_sq_re = np.zeros(shape, dtype=float)
    total_sq_im = np.zeros(shape, dtype=float)

    bounds = [(lo, min(lo + BLOCK_SIZE, n)) for lo in range(0, n, BLOCK_SIZE)]

    def one_block(lo, hi):
        keys = np.array([stream_key(master_seed, i) for i in range(lo, hi)], dtype=np.uint64)
        ch_sum = np.zeros(shape, dtype=complex)
        sq_re = np.zeros(shape, dtype=float)
        sq_im = np.zeros(shape, dtype=float)
        bad = runner(
            lo,
            hi,
            keys,
            kit.grid,
            kit.weights_cum,
            kit.eigvals,
            kit.eigvecs,
            kit.eiginvs,
            kit.jump_ops,
            kit.trans_cum,
            kit.escape,
            kit.rho0_vec,
            ch_sum,
            sq_re,
            sq_im,
        )
        if bad >= 0:
            raise FloatingPointError(f"trajectory {bad}: non-finite state or trace drift beyond 1e-10")
        return ch_sum, sq_re, sq_im

    if workers > 1 and len(bounds) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(lambda b: one_block(*b), bounds))
    else:
        partials = [one_block(lo, hi) for lo, hi in bounds]

    for ch_sum, sq_re, sq_im in partials:
        total_sum += ch_sum
        total_sq_re += sq_re
        total_sq_im += sq_im
    return total_sum, total_sq_re, total_sq_im
