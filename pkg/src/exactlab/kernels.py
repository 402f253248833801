"""Hot numeric kernels with numba and pure-NumPy implementations.

Everything in this module works on plain arrays and scalars so the loop
bodies compile under numba's nopython mode.  The public names at the bottom
are bound to the compiled or the fallback variant depending on
``exactlab.backend.BACKEND``.

Conventions shared with the rest of the package:

* A point of the d-cube is identified with an integer index g in [0, 2^d);
  coordinate j of the point is bit (d-1-j) of g, so the index written in
  binary (most significant bit first) reads off the coordinates in order.
* Classifier labels are ``score >= 0`` (the boundary maps to label 1).
* Integer-weight kernels are exact provided the caller guarantees
  ``sum(|w|) + |b| < 2^62`` (checked by the callers in hypercube.py).
"""

import numpy as np

from .backend import NUMBA_ENABLED, njit_or_python

_CHUNK = 1 << 18


# ---------------------------------------------------------------------------
# hypercube agreement statistics
# ---------------------------------------------------------------------------

def _agree_stats_int_gray(w1, b1, w2, b2, d):
    """Count points where two integer classifiers disagree, over all 2^d.

    Walks the cube in Gray-code order so each step updates both scores with a
    single add.  Returns (disagree_count, smallest disagreeing index or -1).
    """
    total = np.int64(1) << d
    s1 = b1
    s2 = b2
    count = np.int64(0)
    min_idx = np.int64(-1)
    if (s1 >= 0) != (s2 >= 0):
        count = np.int64(1)
        min_idx = np.int64(0)
    g = np.int64(0)
    for k in range(1, total):
        kk = k
        p = 0
        while kk & 1 == 0:
            kk >>= 1
            p += 1
        bit = np.int64(1) << p
        g ^= bit
        j = d - 1 - p
        if g & bit:
            s1 += w1[j]
            s2 += w2[j]
        else:
            s1 -= w1[j]
            s2 -= w2[j]
        if (s1 >= 0) != (s2 >= 0):
            count += 1
            if min_idx < 0 or g < min_idx:
                min_idx = g
    return count, min_idx


def _agree_stats_int_numpy(w1, b1, w2, b2, d):
    """Vectorized fallback: chunked bit-matrix products in exact int64."""
    total = 1 << d
    shifts = np.arange(d - 1, -1, -1, dtype=np.int64)
    count = 0
    min_idx = -1
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = (idx[:, None] >> shifts[None, :]) & 1
        s1 = bits @ w1 + b1
        s2 = bits @ w2 + b2
        dis = (s1 >= 0) != (s2 >= 0)
        c = int(np.count_nonzero(dis))
        if c and min_idx < 0:
            min_idx = int(idx[int(np.argmax(dis))])
        count += c
    return count, min_idx


# ---------------------------------------------------------------------------
# hard-margin dual coordinate ascent
# ---------------------------------------------------------------------------

def _qp_sweeps(A, sq_norms, lam, w, tol, max_sweeps, norm_cap):
    """Projected Gauss-Seidel sweeps on the dual of min 1/2||w||^2 s.t. Aw >= 2.

    ``lam`` and ``w`` are updated in place with w == A^T lam maintained
    incrementally (refreshed periodically against drift).  Returns
    (violation, status, sweeps) with status 0 converged, 1 sweep budget
    exhausted, 2 norm cap exceeded (primal infeasible / dual unbounded).
    """
    K, dim = A.shape
    viol = 0.0
    status = 1
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        viol = 0.0
        for k in range(K):
            margin = 0.0
            for j in range(dim):
                margin += A[k, j] * w[j]
            gap = 2.0 - margin
            if lam[k] > 0.0:
                v = gap if gap >= 0.0 else -gap
            else:
                v = gap if gap > 0.0 else 0.0
            if v > viol:
                viol = v
            nl = lam[k] + gap / sq_norms[k]
            if nl < 0.0:
                nl = 0.0
            dl = nl - lam[k]
            if dl != 0.0:
                lam[k] = nl
                for j in range(dim):
                    w[j] += dl * A[k, j]
        if (sweep & 63) == 63:
            for j in range(dim):
                w[j] = 0.0
            for k in range(K):
                if lam[k] != 0.0:
                    for j in range(dim):
                        w[j] += lam[k] * A[k, j]
        if viol <= tol:
            status = 0
            break
        wn = 0.0
        for j in range(dim):
            wn += w[j] * w[j]
        if wn > norm_cap * norm_cap:
            status = 2
            break
    return viol, status, sweeps


# ---------------------------------------------------------------------------
# perceptron
# ---------------------------------------------------------------------------

def _perceptron_train(X, y, max_passes):
    """Perceptron on 0/1 inputs with integer weights.

    Margin-driven updates: a point with y*score <= 0 (labels read as -1/+1)
    counts as a mistake, so training runs to strict separation and the
    update sequence negates exactly under a label flip.  Predictions follow
    the package-wide convention (score >= 0 maps to 1) regardless.
    """
    n, d = X.shape
    w = np.zeros(d, dtype=np.int64)
    b = np.int64(0)
    converged = False
    for _ in range(max_passes):
        mistakes = 0
        for i in range(n):
            s = b
            for j in range(d):
                s += w[j] * X[i, j]
            if y[i] == 1:
                if s <= 0:
                    mistakes += 1
                    for j in range(d):
                        w[j] += X[i, j]
                    b += 1
            else:
                if s >= 0:
                    mistakes += 1
                    for j in range(d):
                        w[j] -= X[i, j]
                    b -= 1
        if mistakes == 0:
            converged = True
            break
    return w, b, converged


# ---------------------------------------------------------------------------
# full-batch logistic-loss gradient descent
# ---------------------------------------------------------------------------

def _logistic_gd(X, ypm, lr, steps, w0, b0, aggressive):
    """Full-batch gradient descent on mean logistic loss, labels in +-1.

    With `aggressive` set the step is scaled by 1/loss each iteration (the
    schedule that accelerates margin convergence on separable data); off by
    default.
    """
    n, d = X.shape
    w = w0.copy()
    b = b0
    gw = np.empty(d)
    for _ in range(steps):
        for j in range(d):
            gw[j] = 0.0
        gb = 0.0
        loss = 0.0
        for i in range(n):
            s = b
            for j in range(d):
                s += w[j] * X[i, j]
            z = ypm[i] * s
            if z >= 0.0:
                e = np.exp(-z)
                sig = e / (1.0 + e)
                loss += np.log1p(e)
            else:
                loss += -z + np.log1p(np.exp(z))
                sig = 1.0 / (1.0 + np.exp(z))
            c = -ypm[i] * sig / n
            gb += c
            for j in range(d):
                gw[j] += c * X[i, j]
        step = lr
        if aggressive:
            step = lr / max(loss / n, 1e-12)
        for j in range(d):
            w[j] -= step * gw[j]
        b -= step * gb
    return w, b


# ---------------------------------------------------------------------------
# Dormand-Prince 5(4) gradient-flow integrator for the logistic loss
# ---------------------------------------------------------------------------

# Dormand-Prince coefficients (the classic DOPRI5 tableau, FSAL); the c
# column is irrelevant here because the flow field is autonomous
_DP_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    ]
)
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4, applied to k1..k7 gives the embedded 4th-order error estimate
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


def _dp45_flow(Xa, ypm, t_eval, rtol, atol, u0, max_steps):
    """Integrate du/dt = -grad L(u) from t=0, recording states at t_eval.

    Steps are clipped so every requested time is hit exactly (no dense-output
    interpolation).  Step size uses the embedded 4th-order error estimate with
    a PI controller.  Returns (states, status, accepted_steps) with status
    0 ok, 1 step budget exhausted, 2 step size underflow.
    """
    n = Xa.shape[0]
    dim = Xa.shape[1]
    n_eval = t_eval.shape[0]
    out = np.zeros((n_eval, dim))
    u = u0.copy()
    utmp = np.empty(dim)
    unew = np.empty(dim)
    kst = np.empty((7, dim))
    # k1 = -grad L(u): (1/n) sum_i y_i sigmoid(-y_i <x_i, u>) x_i
    for j in range(dim):
        kst[0, j] = 0.0
    for i in range(n):
        s = 0.0
        for j in range(dim):
            s += Xa[i, j] * u[j]
        z = ypm[i] * s
        if z >= 0.0:
            e = np.exp(-z)
            sig = e / (1.0 + e)
        else:
            sig = 1.0 / (1.0 + np.exp(z))
        c = ypm[i] * sig / n
        for j in range(dim):
            kst[0, j] += c * Xa[i, j]

    # conservative initial step from the gradient scale
    f0 = 0.0
    for j in range(dim):
        f0 += kst[0, j] * kst[0, j]
    f0 = np.sqrt(f0 / dim)
    h = 1e-4 / (1e-8 + f0)
    if h > 1e-2:
        h = 1e-2

    t = 0.0
    status = 0
    steps = 0
    err_prev = 1e-4
    ci = 0
    while ci < n_eval:
        t_target = t_eval[ci]
        if t_target <= t:
            for j in range(dim):
                out[ci, j] = u[j]
            ci += 1
            continue
        if steps >= max_steps:
            status = 1
            break
        hstep = h
        clipped = False
        if t + hstep >= t_target:
            hstep = t_target - t
            clipped = True
        if hstep < 1e-13 * max(1.0, t):
            status = 2
            break
        # stages 2..7 (stage 7 is f at the candidate point: FSAL)
        for s in range(1, 7):
            for j in range(dim):
                acc = 0.0
                for q in range(s):
                    if s < 6:
                        acc += _DP_A[s, q] * kst[q, j]
                    else:
                        acc += _DP_B[q] * kst[q, j]
                utmp[j] = u[j] + hstep * acc
            for j in range(dim):
                kst[s, j] = 0.0
            for i in range(n):
                sc_i = 0.0
                for j in range(dim):
                    sc_i += Xa[i, j] * utmp[j]
                z = ypm[i] * sc_i
                if z >= 0.0:
                    e = np.exp(-z)
                    sig = e / (1.0 + e)
                else:
                    sig = 1.0 / (1.0 + np.exp(z))
                c = ypm[i] * sig / n
                for j in range(dim):
                    kst[s, j] += c * Xa[i, j]
            if s == 6:
                for j in range(dim):
                    unew[j] = utmp[j]
        # weighted rms of the embedded error estimate
        err = 0.0
        for j in range(dim):
            e = 0.0
            for q in range(7):
                e += _DP_E[q] * kst[q, j]
            e *= hstep
            au = u[j] if u[j] >= 0.0 else -u[j]
            an = unew[j] if unew[j] >= 0.0 else -unew[j]
            sc = atol + rtol * (au if au > an else an)
            e /= sc
            err += e * e
        err = np.sqrt(err / dim)
        if err <= 1.0:
            steps += 1
            t = t_target if clipped else t + hstep
            for j in range(dim):
                u[j] = unew[j]
                kst[0, j] = kst[6, j]
            if err < 1e-16:
                err = 1e-16
            fac = 0.9 * err ** (-0.14) * err_prev ** 0.08
            if fac > 5.0:
                fac = 5.0
            if fac < 0.2:
                fac = 0.2
            # a clipped step may only grow h, otherwise dense checkpoints
            # would keep collapsing the natural step size
            if clipped:
                if hstep * fac > h:
                    h = hstep * fac
            else:
                h = hstep * fac
            err_prev = err
        else:
            fac = 0.9 * err ** (-0.2)
            if fac < 0.1:
                fac = 0.1
            h = hstep * fac
    return out, status, steps


# ---------------------------------------------------------------------------
# backend binding
# ---------------------------------------------------------------------------

qp_sweeps = njit_or_python(_qp_sweeps)
perceptron_train = njit_or_python(_perceptron_train)
logistic_gd = njit_or_python(_logistic_gd)
dp45_flow = njit_or_python(_dp45_flow)

agree_stats_int_numpy = _agree_stats_int_numpy
if NUMBA_ENABLED:
    agree_stats_int_jit = njit_or_python(_agree_stats_int_gray)
    agree_stats_int = agree_stats_int_jit
else:
    agree_stats_int_jit = None
    agree_stats_int = _agree_stats_int_numpy


def warmup():
    """Trigger JIT compilation of every kernel on tiny inputs."""
    w = np.array([1, -1], dtype=np.int64)
    agree_stats_int(w, np.int64(0), w, np.int64(-1), 2)
    A = np.array([[1.0, 0.0], [0.0, 1.0]])
    qp_sweeps(A, np.ones(2), np.zeros(2), np.zeros(2), 1e-10, 100, 1e8)
    X = np.array([[0, 1], [1, 0]], dtype=np.int64)
    perceptron_train(X, np.array([0, 1], dtype=np.int64), 10)
    Xf = X.astype(np.float64)
    logistic_gd(Xf, np.array([-1.0, 1.0]), 0.5, 5, np.zeros(2), 0.0, False)
    Xa = np.hstack([Xf, np.ones((2, 1))])
    dp45_flow(Xa, np.array([-1.0, 1.0]), np.array([1.0]), 1e-7, 1e-9, np.zeros(3), 10000)
