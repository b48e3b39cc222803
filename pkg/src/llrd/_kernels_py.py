"""Pure-numpy implementations of the iteration hot loops.

Mirrors the API of the compiled extension ``_kernels_cy``; the dispatcher
in :mod:`llrd.kernels` picks whichever is available. Everything runs in
log space so arbitrarily large slopes and +inf distortion entries are
exact (``exp(-inf) == 0``), never under/overflow.
"""

from __future__ import annotations

import numpy as np

STATUS_OK = 0
STATUS_MAX_ITERS = 1
STATUS_SUPPORT = 2


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    hi = np.max(a, axis=axis, keepdims=True)
    hi = np.where(np.isfinite(hi), hi, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - hi), axis=axis)) + np.squeeze(hi, axis=axis)
    return out


def ba_iterate(p, d, lam, logq0, tol, max_iters, debug=False):
    """Blahut-Arimoto fixed-slope iteration for min I(X;Y) + lam*E[d].

    Alternates the tilted forward channel W(y|x) ∝ Q(y)exp(-lam*d(x,y))
    with the output-marginal update, stopping when the certified bound on
    the Lagrangian gap, log(max_y sum_x p(x)exp(-lam*d(x,y))/Z(x)), falls
    below ``tol`` (nats).

    Args:
        p: source pmf, shape (n,).
        d: distortion matrix, shape (n, m), +inf entries allowed; every
           row must have a finite entry.
        lam: slope, must be > 0 (the caller special-cases 0).
        logq0: log of the starting output marginal, -inf entries allowed.
        tol: certificate threshold in nats.
        max_iters: iteration cap.
        debug: assert per-iteration monotonicity of the Lagrangian.

    Returns:
        (logw, q_out, rate, dist, iters, gap, status) where logw is the
        (n, m) log forward channel, q_out the output marginal of (p, logw),
        and rate/dist are in nats / d-units.
    """
    p = np.asarray(p, dtype=np.float64)
    n, m = d.shape
    with np.errstate(divide="ignore"):
        logp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0)), -np.inf)
    with np.errstate(invalid="ignore"):
        nld = -lam * d  # -inf where d == +inf
    logq = np.array(logq0, dtype=np.float64)

    status = STATUS_MAX_ITERS
    gap = np.inf
    reinit_used = False
    prev_obj = np.inf
    iters = 0
    while iters < max_iters:
        iters += 1
        logits = logq[None, :] + nld
        logz = _logsumexp(logits, axis=1)
        if not np.all(np.isfinite(logz)):
            if reinit_used:
                status = STATUS_SUPPORT
                break
            logq = np.full(m, -np.log(m))
            reinit_used = True
            continue
        if debug:
            obj = float(-(p * logz).sum())
            assert obj <= prev_obj + 1e-9, "BA Lagrangian increased"
            prev_obj = obj
        logr = _logsumexp(logp[:, None] + nld - logz[:, None], axis=0)
        gap = float(np.max(logr))
        logq = logq + logr
        if gap <= tol:
            status = STATUS_OK
            break

    logits = logq[None, :] + nld
    logz = _logsumexp(logits, axis=1)
    logw = logits - logz[:, None]
    w = np.exp(logw)
    q_out = p @ w
    q_out = q_out / q_out.sum()
    with np.errstate(divide="ignore"):
        logq_out = np.where(q_out > 0, np.log(np.where(q_out > 0, q_out, 1.0)), -np.inf)
    mask = (w > 0) & (p[:, None] > 0)
    pw = p[:, None] * w
    with np.errstate(invalid="ignore"):
        log_ratio = np.where(mask, logw - logq_out[None, :], 0.0)
    rate = float(np.sum(pw[mask] * log_ratio[mask]))
    dist = float(np.sum(pw[mask] * d[mask]))
    return logw, q_out, max(rate, 0.0), dist, iters, gap, status


def sinkhorn_scale(logk, logp, loga0, logb0, tol, max_sweeps):
    """Scale exp(logk) to a coupling with both marginals exp(logp).

    Log-domain alternating normalization. After each sweep the column
    sums are exact by construction; convergence is measured on the max
    absolute row-sum deviation.

    Returns:
        (loga, logb, sweeps, dev, status).
    """
    logk = np.asarray(logk, dtype=np.float64)
    logp = np.asarray(logp, dtype=np.float64)
    loga = np.array(loga0, dtype=np.float64)
    logb = np.array(logb0, dtype=np.float64)
    p = np.exp(logp)
    status = STATUS_MAX_ITERS
    dev = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        row = _logsumexp(logk + logb[None, :], axis=1)
        if np.any(np.isneginf(row) & np.isfinite(logp)):
            status = STATUS_SUPPORT
            break
        loga = np.where(np.isfinite(logp), logp - row, -np.inf)
        col = _logsumexp(logk + loga[:, None], axis=0)
        if np.any(np.isneginf(col) & np.isfinite(logp)):
            status = STATUS_SUPPORT
            break
        logb = np.where(np.isfinite(logp), logp - col, -np.inf)
        w = np.exp(loga[:, None] + logk + logb[None, :])
        dev = float(np.max(np.abs(w.sum(axis=1) - p)))
        if dev <= tol:
            status = STATUS_OK
            break
    return loga, logb, sweeps, dev, status


def symnmf_run(v, b0, iters):
    """Damped multiplicative updates for min ||B B^T - V||_F, B >= 0.

    Uses the beta=1/2 damped rule with a closed-form global rescaling of
    B after every update. Returns the final iterate.
    """
    v = np.asarray(v, dtype=np.float64)
    b = np.array(b0, dtype=np.float64)
    tiny = 1e-300
    for _ in range(iters):
        vb = v @ b
        btb = b.T @ b
        bbtb = b @ btb
        b = b * (0.5 + 0.5 * (vb / np.maximum(bbtb, tiny)))
        num = float(np.sum((v @ b) * b))
        den = float(np.sum((b.T @ b) ** 2))
        if den > tiny and num > 0:
            b *= (num / den) ** 0.5
    return b
