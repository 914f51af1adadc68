"""Compiled Lindblad right-hand side and Runge-Kutta drivers.

State layout: real and imaginary parts of a batch of density matrices in
separate arrays of shape ``(D + 2, D + 2, n_cells)``. Physical level ``j``
sits at padded index ``j + 1``; the zero border makes every neighbour access
branch-free. Only the upper triangle plus the first sub-diagonal is kept
current, which is all the tridiagonal coupling reads.

Dynamics in the frame rotating at ``wref * n`` (exact, no RWA)::

    d rho/dt = K o rho - i s(t) [z a + conj(z) a^dag, rho]
               + Rd o rho[j+1, k+1] + Ru o rho[j-1, k-1]

with ``z = exp(-i wref t)`` and ``s(t) = A_P cos(w_P t) + A_D cos(w_D t)``
per cell. All rates and frequencies are angular (rad/ns).
"""

import numpy as np
import numba as nb

OK = 0
STEP_UNDERFLOW = 1
MAX_STEPS = 2
NOT_FINITE = 3

# classical fourth-order Runge-Kutta
RK4_C = np.array([0.0, 0.5, 0.5, 1.0])
RK4_A = np.array(
    [[0.0, 0.0, 0.0, 0.0], [0.5, 0.0, 0.0, 0.0], [0.0, 0.5, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]
)
RK4_B = np.array([1 / 6, 1 / 3, 1 / 3, 1 / 6])
RK4_E = np.zeros(4)

# Dormand-Prince 5(4), first-same-as-last
DP5_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
DP5_A = np.zeros((7, 7))
DP5_A[1, :1] = [1 / 5]
DP5_A[2, :2] = [3 / 40, 9 / 40]
DP5_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
DP5_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
DP5_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
DP5_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
DP5_B = DP5_A[6].copy()
DP5_E = DP5_B - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


@nb.njit(cache=True, nogil=True, fastmath=True)
def rhs(t, xr, xi, outr, outi, Kr, Ki, ap, Rd, Ru, amp_p, wp, amp_d, wd, wref, s):
    D = xr.shape[0]
    nc = xr.shape[2]
    zr = np.cos(wref * t)
    zi = -np.sin(wref * t)
    cd = amp_d * np.cos(wd * t)
    for c in range(nc):
        s[c] = amp_p[c] * np.cos(wp[c] * t) + cd
    for j in range(1, D - 1):
        aj = ap[j]
        ajm = ap[j - 1]
        for k in range(j, D - 1):
            akm = ap[k - 1]
            ak = ap[k]
            kr = Kr[j, k]
            ki = Ki[j, k]
            rd = Rd[j, k]
            ru = Ru[j, k]
            for c in range(nc):
                ur = aj * xr[j + 1, k, c] - akm * xr[j, k - 1, c]
                ui = aj * xi[j + 1, k, c] - akm * xi[j, k - 1, c]
                vr = ajm * xr[j - 1, k, c] - ak * xr[j, k + 1, c]
                vi = ajm * xi[j - 1, k, c] - ak * xi[j, k + 1, c]
                cr = zr * (ur + vr) - zi * (ui - vi)
                ci = zr * (ui + vi) + zi * (ur - vr)
                rr = xr[j, k, c]
                ri = xi[j, k, c]
                sc = s[c]
                outr[j, k, c] = (
                    kr * rr - ki * ri + sc * ci + rd * xr[j + 1, k + 1, c] + ru * xr[j - 1, k - 1, c]
                )
                outi[j, k, c] = (
                    kr * ri + ki * rr - sc * cr + rd * xi[j + 1, k + 1, c] + ru * xi[j - 1, k - 1, c]
                )


@nb.njit(cache=True, nogil=True)
def mirror_sub(yr, yi):
    D = yr.shape[0]
    nc = yr.shape[2]
    for j in range(1, D - 2):
        for c in range(nc):
            yr[j + 1, j, c] = yr[j, j + 1, c]
            yi[j + 1, j, c] = -yi[j, j + 1, c]


@nb.njit(cache=True, nogil=True)
def _diag_sum(xr, nvec, out):
    D = xr.shape[0]
    nc = xr.shape[2]
    for c in range(nc):
        v = 0.0
        for j in range(1, D - 1):
            v += nvec[j] * xr[j, j, c]
        out[c] = v


@nb.njit(cache=True, nogil=True, fastmath=True)
def integrate(
    t0, stops, store, hmax, adaptive, rtol, atol, max_steps,
    xr, xi, Kr, Ki, ap, Rd, Ru, amp_p, wp, amp_d, wd, wref,
    nvec, t_window, snap_r, snap_i, A, B, C, E, fsal,
):
    """Advance ``(xr, xi)`` in place from ``t0`` through every time in ``stops``.

    Steps land exactly on each stop. States at stops flagged in ``store`` are
    copied into ``snap_r/snap_i``. Returns ``(integral, n_acc, n_rej, status)``
    where ``integral[c]`` is the time integral of ``sum_j nvec[j] rho_jj`` over
    ``[t_window, stops[-1]]`` by the method's own quadrature of stage states.
    """
    D = xr.shape[0]
    nc = xr.shape[2]
    S = B.shape[0]
    s = np.empty(nc)
    kr = np.zeros((S, D, D, nc))
    ki = np.zeros((S, D, D, nc))
    yr = np.zeros_like(xr)
    yi = np.zeros_like(xi)
    acc = np.zeros(nc)
    stage_n = np.zeros((S, nc))
    n_acc = 0
    n_rej = 0
    status = OK

    mirror_sub(xr, xi)
    t = t0
    h = hmax
    have_k0 = False
    i_snap = 0
    for i_stop in range(stops.shape[0]):
        t_b = stops[i_stop]
        if adaptive:
            n_fixed = 0
            h_fixed = 0.0
        else:
            n_fixed = int(np.ceil((t_b - t) / hmax - 1e-9))
            h_fixed = (t_b - t) / n_fixed if n_fixed > 0 else 0.0
        t_a = t
        i_sub = 0
        while t < t_b - 1e-12 * max(1.0, abs(t_b)):
            if n_acc + n_rej >= max_steps:
                return acc, n_acc, n_rej, MAX_STEPS
            if adaptive:
                hh = min(h, t_b - t)
                if t + hh > t_b - 1e-9 * hh:
                    hh = t_b - t
            else:
                hh = h_fixed
            if not have_k0:
                rhs(t, xr, xi, kr[0], ki[0], Kr, Ki, ap, Rd, Ru, amp_p, wp, amp_d, wd, wref, s)
                have_k0 = True
            _diag_sum(xr, nvec, stage_n[0])
            for st in range(1, S):
                for j in range(1, D - 1):
                    for k in range(j, D - 1):
                        for c in range(nc):
                            yr[j, k, c] = xr[j, k, c]
                            yi[j, k, c] = xi[j, k, c]
                        for m in range(st):
                            am = hh * A[st, m]
                            if am != 0.0:
                                for c in range(nc):
                                    yr[j, k, c] += am * kr[m, j, k, c]
                                    yi[j, k, c] += am * ki[m, j, k, c]
                mirror_sub(yr, yi)
                rhs(t + C[st] * hh, yr, yi, kr[st], ki[st], Kr, Ki, ap, Rd, Ru,
                    amp_p, wp, amp_d, wd, wref, s)
                _diag_sum(yr, nvec, stage_n[st])

            # candidate solution and error estimate
            err = 0.0
            for j in range(1, D - 1):
                for k in range(j, D - 1):
                    for c in range(nc):
                        sr = 0.0
                        si = 0.0
                        er = 0.0
                        ei = 0.0
                        for m in range(S):
                            bm = B[m]
                            if bm != 0.0:
                                sr += bm * kr[m, j, k, c]
                                si += bm * ki[m, j, k, c]
                            if adaptive:
                                em = E[m]
                                if em != 0.0:
                                    er += em * kr[m, j, k, c]
                                    ei += em * ki[m, j, k, c]
                        nr = xr[j, k, c] + hh * sr
                        ni = xi[j, k, c] + hh * si
                        if adaptive:
                            sc = atol + rtol * max(
                                abs(xr[j, k, c]) + abs(xi[j, k, c]), abs(nr) + abs(ni)
                            )
                            q = hh * (abs(er) + abs(ei)) / sc
                            if q > err:
                                err = q
                        yr[j, k, c] = nr
                        yi[j, k, c] = ni

            if adaptive and not (err <= 1.0):
                n_rej += 1
                if err != err:
                    h = hh * 0.2
                else:
                    h = hh * max(0.2, 0.9 * err ** -0.2)
                if h < 1e-12 * max(1.0, abs(t_b)):
                    return acc, n_acc, n_rej, STEP_UNDERFLOW
                continue

            if t >= t_window - 1e-9:
                for c in range(nc):
                    v = 0.0
                    for m in range(S):
                        v += B[m] * stage_n[m, c]
                    acc[c] += hh * v
            for j in range(1, D - 1):
                for k in range(j, D - 1):
                    for c in range(nc):
                        xr[j, k, c] = yr[j, k, c]
                        xi[j, k, c] = yi[j, k, c]
            mirror_sub(xr, xi)
            n_acc += 1
            if adaptive:
                t += hh
                if t > t_b - 1e-9 * hh:
                    t = t_b
                if fsal:
                    for j in range(1, D - 1):
                        for k in range(j, D - 1):
                            for c in range(nc):
                                kr[0, j, k, c] = kr[S - 1, j, k, c]
                                ki[0, j, k, c] = ki[S - 1, j, k, c]
                else:
                    have_k0 = False
                fac = 5.0 if err == 0.0 else 0.9 * err ** -0.2
                h = min(hmax, hh * min(5.0, max(0.2, fac)))
            else:
                i_sub += 1
                t = t_b if i_sub == n_fixed else t_a + i_sub * h_fixed
                have_k0 = False

            for c in range(nc):
                if not np.isfinite(xr[1, 1, c]):
                    return acc, n_acc, n_rej, NOT_FINITE

        t = t_b
        if store[i_stop]:
            for j in range(D):
                for k in range(D):
                    for c in range(nc):
                        snap_r[i_snap, j, k, c] = xr[j, k, c]
                        snap_i[i_snap, j, k, c] = xi[j, k, c]
            i_snap += 1
    return acc, n_acc, n_rej, status
