"""Fused marching kernels.

The time loops live here as flat-array functions so numba can compile them;
the driver packs problem objects into plain arrays and unpacks the results.
Without numba the same code runs as ordinary Python (slow but identical).

Status codes returned by the marchers: 0 completed, 1 diverged,
2 step underflow, 3 singular linear system.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


COMPLETED, DIVERGED, UNDERFLOW, SINGULAR = 0, 1, 2, 3


@njit(cache=True, inline="always")
def _law(u, p):
    # p = (p0, p1, gauss_amp, gauss_rate, gauss_center)
    v = p[0] + p[1] * u
    if p[2] != 0.0:
        dv = u - p[4]
        v += p[2] * math.exp(-p[3] * dv * dv)
    return v


@njit(cache=True, inline="always")
def _bern(z):
    az = abs(z)
    if az < 1e-5:
        z2 = z * z
        return 1.0 - 0.5 * z + z2 / 12.0 - z2 * z2 / 720.0
    if z > 500.0:
        e = math.exp(-z)
        return z * e / (1.0 - e)
    return z / math.expm1(z)


@njit(cache=True, inline="always")
def _signal(t, off, amps, pers, phs, st0, st1, sv):
    v = off
    for i in range(amps.size):
        v += amps[i] * math.sin(2.0 * math.pi * t / pers[i] + phs[i])
    n = sv.size
    for i in range(n):
        if st0[i] <= t and (t < st1[i] or (i == n - 1 and t <= st1[i])):
            v += sv[i]
            break
    return v


@njit(cache=True, inline="always")
def _pe_at(t, pt0, pt1, pv):
    n = pv.size
    for i in range(n - 1):
        if pt0[i] <= t < pt1[i]:
            return pv[i]
    return pv[n - 1]


@njit(cache=True, inline="always")
def _surf_left(u0, bi, uamb, g, pe, adv):
    if adv:
        return bi * (uamb - u0) + g
    return pe * u0 - (bi * (u0 - uamb) - g)


@njit(cache=True, inline="always")
def _surf_right(un, bi, uamb, pe, adv):
    if adv:
        return bi * (un - uamb)
    return pe * un + bi * (un - uamb)


@njit(cache=True, inline="always")
def _interp_sg(xi, dx, uj, uj1, pe, nu):
    th = pe * dx / nu
    if abs(th) < 1e-12:
        w = xi / dx
        return (1.0 - w) * uj + w * uj1
    flux = (nu / dx) * (-_bern(th) * uj1 + _bern(-th) * uj)
    if th > 0.0:
        ratio = math.exp(pe * (xi - dx) / nu) / math.expm1(-th)
    else:
        ratio = -math.exp(pe * xi / nu) / math.expm1(th)
    return flux / pe + (uj - uj1) * ratio


@njit(cache=True)
def _sg_bound(u, dx, pe, cs, ds, bi_l, adv_l, bi_r, adv_r, mat_const):
    """Stable-step bound: nodewise tanh bound plus half-cell boundary bounds."""
    n = u.size
    if mat_const:
        c0 = cs[0]
        d0 = ds[0]
        if pe == 0.0:
            interior = c0 * dx * dx / (2.0 * d0)
        else:
            interior = (c0 * dx / abs(pe)) * math.tanh(abs(pe) * dx / (2.0 * d0))
        th = pe * dx / d0
        grad_l = (d0 / dx) * _bern(-th) + bi_l
        if not adv_l:
            grad_l -= pe
        grad_r = (d0 / dx) * _bern(th) + bi_r
        if not adv_r:
            grad_r += pe
        bound = interior
        if grad_l > 0.0:
            b = c0 * 0.5 * dx / grad_l
            if b < bound:
                bound = b
        if grad_r > 0.0:
            b = c0 * 0.5 * dx / grad_r
            if b < bound:
                bound = b
        return bound

    interior = 1e300
    d_first = _law(u[0], ds)
    d_prev = d_first
    d_last = d_first
    for j in range(n):
        cj = _law(u[j], cs)
        dj = _law(u[j], ds)
        if pe == 0.0:
            b = cj * dx * dx / (2.0 * dj)
        else:
            b = (cj * dx / abs(pe)) * math.tanh(abs(pe) * dx / (2.0 * dj))
        if b < interior:
            interior = b
        if j == 1:
            d_prev = dj
        if j == n - 1:
            d_last = dj
    dh0 = 0.5 * (d_first + d_prev)
    dhn = 0.5 * (_law(u[n - 2], ds) + d_last)
    th0 = pe * dx / dh0
    thn = pe * dx / dhn
    grad_l = (dh0 / dx) * _bern(-th0) + bi_l
    if not adv_l:
        grad_l -= pe
    grad_r = (dhn / dx) * _bern(thn) + bi_r
    if not adv_r:
        grad_r += pe
    bound = interior
    if grad_l > 0.0:
        b = _law(u[0], cs) * 0.5 * dx / grad_l
        if b < bound:
            bound = b
    if grad_r > 0.0:
        b = _law(u[n - 1], cs) * 0.5 * dx / grad_r
        if b < bound:
            bound = b
    return bound


@njit(cache=True)
def sg_march(
    u_init, dx, targets, store_flags, adaptive, sigma, dt_nominal,
    cs, ds, mat_const,
    pe_t0, pe_t1, pe_v,
    bi_l, g_l, adv_l, off_l, amp_l, per_l, ph_l, sl0, sl1, slv,
    bi_r, adv_r, off_r, amp_r, per_r, ph_r, sr0, sr1, srv,
    probe_pos, node_stride, sup_limit, n_store, log_cap,
):
    n = u_init.size
    n_keep = (n - 1) // node_stride + 1
    n_probes = probe_pos.size

    u = u_init.copy()
    u_new = np.empty(n)
    out = np.empty((n_store, n_keep))
    stamps = np.empty(n_store)
    probe_u = np.empty((n_store, n_probes))
    dt_log = np.empty(log_cap)

    pe0 = _pe_at(0.0, pe_t0, pe_t1, pe_v)
    pe_cur = pe0
    # cached constant-coefficient flux weights, refreshed when Pe changes
    c0 = _law(0.0, cs)
    d0 = _law(0.0, ds)
    if mat_const:
        c0 = cs[0]
        d0 = ds[0]
    th0 = pe_cur * dx / d0
    bp = _bern(th0)
    bm = _bern(-th0)

    row = 0
    for jj in range(n_keep):
        out[row, jj] = u[jj * node_stride]
    stamps[row] = 0.0
    for p in range(n_probes):
        x = probe_pos[p]
        j = int(x / dx)
        if j > n - 2:
            j = n - 2
        xi = x - j * dx
        if xi < 1e-12 * dx or n_probes == 0:
            probe_u[row, p] = u[j]
        else:
            if mat_const:
                nu = d0
            else:
                nu = 0.5 * (_law(u[j], ds) + _law(u[j + 1], ds))
            probe_u[row, p] = _interp_sg(xi, dx, u[j], u[j + 1], pe_cur, nu)
    row += 1

    status = COMPLETED
    bad_node = -1
    n_acc = 0
    n_clamp = 0
    n_log = 0
    log_trunc = False
    dt_min = 1e300
    dt_max = 0.0
    t = 0.0

    for i_t in range(targets.size):
        t_goal = targets[i_t]
        while t < t_goal - 1e-15 * (1.0 + t_goal):
            pe = _pe_at(t, pe_t0, pe_t1, pe_v)
            if pe != pe_cur:
                pe_cur = pe
                th0 = pe_cur * dx / d0
                bp = _bern(th0)
                bm = _bern(-th0)
            rem = t_goal - t
            if adaptive:
                bound = sigma * _sg_bound(u, dx, pe, cs, ds, bi_l, adv_l, bi_r, adv_r, mat_const)
                dt = bound
                clamped = False
                if rem < dt:
                    dt = rem
                    clamped = True
            else:
                dt = dt_nominal
                clamped = False
                if rem < dt * (1.0 - 1e-12):
                    dt = rem
                    clamped = True
            if dt < 1e-12:
                status = UNDERFLOW
                break

            u_l = _signal(t, off_l, amp_l, per_l, ph_l, sl0, sl1, slv)
            u_r = _signal(t, off_r, amp_r, per_r, ph_r, sr0, sr1, srv)
            j_prev = _surf_left(u[0], bi_l, u_l, g_l, pe, adv_l)
            maxu = 0.0
            ssum = 0.0
            if mat_const:
                m_int = dt / (c0 * dx)
                m_bnd = 2.0 * m_int
                fc = d0 / dx
                for j in range(n):
                    if j == n - 1:
                        j_next = _surf_right(u[j], bi_r, u_r, pe, adv_r)
                        v = u[j] - m_bnd * (j_next - j_prev)
                    else:
                        j_next = fc * (-bp * u[j + 1] + bm * u[j])
                        if j == 0:
                            v = u[j] - m_bnd * (j_next - j_prev)
                        else:
                            v = u[j] - m_int * (j_next - j_prev)
                    u_new[j] = v
                    av = abs(v)
                    if av > maxu:
                        maxu = av
                    ssum += v
                    j_prev = j_next
            else:
                d_prev = _law(u[0], ds)
                for j in range(n):
                    if j == n - 1:
                        j_next = _surf_right(u[j], bi_r, u_r, pe, adv_r)
                    else:
                        d_next = _law(u[j + 1], ds)
                        dh = 0.5 * (d_prev + d_next)
                        th = pe * dx / dh
                        j_next = (dh / dx) * (-_bern(th) * u[j + 1] + _bern(-th) * u[j])
                        d_prev = d_next
                    cj = _law(u[j], cs)
                    if j == 0 or j == n - 1:
                        v = u[j] - (dt / (cj * 0.5 * dx)) * (j_next - j_prev)
                    else:
                        v = u[j] - (dt / (cj * dx)) * (j_next - j_prev)
                    u_new[j] = v
                    av = abs(v)
                    if av > maxu:
                        maxu = av
                    ssum += v
                    j_prev = j_next

            if not math.isfinite(ssum) or maxu > sup_limit:
                status = DIVERGED
                bad_node = 0
                for j in range(n):
                    if not math.isfinite(u_new[j]) or abs(u_new[j]) > sup_limit:
                        bad_node = j
                        break
                break

            tmp = u
            u = u_new
            u_new = tmp
            n_acc += 1
            if clamped:
                n_clamp += 1
            if dt < dt_min:
                dt_min = dt
            if dt > dt_max:
                dt_max = dt
            if n_log < log_cap:
                dt_log[n_log] = dt
                n_log += 1
            else:
                log_trunc = True
            if clamped:
                t = t_goal
            else:
                t = t + dt

        if status != COMPLETED:
            break
        t = t_goal
        if store_flags[i_t]:
            for jj in range(n_keep):
                out[row, jj] = u[jj * node_stride]
            stamps[row] = t
            pe = _pe_at(t, pe_t0, pe_t1, pe_v)
            for p in range(n_probes):
                x = probe_pos[p]
                j = int(x / dx)
                if j > n - 2:
                    j = n - 2
                xi = x - j * dx
                if xi < 1e-12 * dx:
                    probe_u[row, p] = u[j]
                else:
                    if mat_const:
                        nu = d0
                    else:
                        nu = 0.5 * (_law(u[j], ds) + _law(u[j + 1], ds))
                    probe_u[row, p] = _interp_sg(xi, dx, u[j], u[j + 1], pe, nu)
            row += 1

    if status != COMPLETED and row < n_store:
        # retain the last finite layer
        for jj in range(n_keep):
            out[row, jj] = u[jj * node_stride]
        stamps[row] = t
        for p in range(n_probes):
            x = probe_pos[p]
            j = int(x / dx)
            if j > n - 2:
                j = n - 2
            probe_u[row, p] = u[j]
        row += 1

    return (out, stamps, probe_u, dt_log, n_log, log_trunc,
            n_acc, n_clamp, dt_min, dt_max, status, bad_node, row)


@njit(cache=True)
def imex_march(
    u_init, dx, targets, store_flags, dt_nominal,
    cs, ds, mat_const,
    pe_t0, pe_t1, pe_v,
    bi_l, g_l, adv_l, off_l, amp_l, per_l, ph_l, sl0, sl1, slv,
    bi_r, adv_r, off_r, amp_r, per_r, ph_r, sr0, sr1, srv,
    probe_pos, node_stride, sup_limit, n_store,
):
    n = u_init.size
    n_keep = (n - 1) // node_stride + 1
    n_probes = probe_pos.size

    u = u_init.copy()
    out = np.empty((n_store, n_keep))
    stamps = np.empty(n_store)
    probe_u = np.empty((n_store, n_probes))

    lower = np.empty(n)
    diag = np.empty(n)
    upper = np.empty(n)
    w = np.empty(n)
    inv_piv = np.empty(n)
    g = np.empty(n)
    c_arr = np.empty(n)
    dh = np.empty(n - 1)

    row = 0
    for jj in range(n_keep):
        out[row, jj] = u[jj * node_stride]
    stamps[row] = 0.0
    for p in range(n_probes):
        x = probe_pos[p]
        j = int(x / dx)
        if j > n - 2:
            j = n - 2
        ww = (x - j * dx) / dx
        probe_u[row, p] = (1.0 - ww) * u[j] + ww * u[j + 1]
    row += 1

    status = COMPLETED
    bad_node = -1
    n_acc = 0
    n_clamp = 0

    factored = False
    pe_fac = 0.0
    dt_fac = -1.0
    rb = 0.0
    rs = 0.0
    ra = 0.0

    t = 0.0
    for i_t in range(targets.size):
        t_goal = targets[i_t]
        dt = t_goal - t
        if dt < 1e-12:
            status = UNDERFLOW
            break
        if dt < dt_nominal * (1.0 - 1e-12):
            n_clamp += 1
        pe = _pe_at(t, pe_t0, pe_t1, pe_v)
        sgn = 0.0
        if pe > 0.0:
            sgn = 1.0
        elif pe < 0.0:
            sgn = -1.0
        bp = 0.5 * (1.0 + sgn)
        bm = 0.5 * (1.0 - sgn)
        u_l_new = _signal(t_goal, off_l, amp_l, per_l, ph_l, sl0, sl1, slv)
        u_r_new = _signal(t_goal, off_r, amp_r, per_r, ph_r, sr0, sr1, srv)

        if mat_const:
            if not factored or pe != pe_fac or dt != dt_fac:
                c0 = cs[0]
                d0 = ds[0]
                lam = d0 * dt / (2.0 * dx * dx * c0)
                gam = pe * dt / (2.0 * dx * c0)
                for j in range(1, n - 1):
                    diag[j] = 1.0 + gam * (bp - bm) + 2.0 * lam
                    upper[j] = -(lam - gam * bm)
                    lower[j] = -(gam * bp + lam)
                diag[0] = d0 / dx + bi_l + (pe if adv_l else 0.0)
                upper[0] = -d0 / dx
                lower[0] = 0.0
                diag[n - 1] = d0 / dx + bi_r - (pe if adv_r else 0.0)
                lower[n - 1] = -d0 / dx
                upper[n - 1] = 0.0
                piv = diag[0]
                if piv == 0.0:
                    status = SINGULAR
                    bad_node = 0
                    break
                inv_piv[0] = 1.0 / piv
                w[0] = upper[0] * inv_piv[0]
                ok = True
                for j in range(1, n):
                    piv = diag[j] - lower[j] * w[j - 1]
                    if piv == 0.0:
                        status = SINGULAR
                        bad_node = j
                        ok = False
                        break
                    inv_piv[j] = 1.0 / piv
                    w[j] = upper[j] * inv_piv[j]
                if not ok:
                    break
                rb = 1.0 - gam * (bp - bm) - 2.0 * lam
                rs = lam - gam * bm
                ra = gam * bp + lam
                factored = True
                pe_fac = pe
                dt_fac = dt
            g[0] = (bi_l * u_l_new + g_l) * inv_piv[0]
            for j in range(1, n - 1):
                r = rb * u[j] + rs * u[j + 1] + ra * u[j - 1]
                g[j] = (r - lower[j] * g[j - 1]) * inv_piv[j]
            g[n - 1] = (bi_r * u_r_new - lower[n - 1] * g[n - 2]) * inv_piv[n - 1]
            u[n - 1] = g[n - 1]
            for j in range(n - 2, -1, -1):
                u[j] = g[j] - w[j] * u[j + 1]
        else:
            for j in range(n):
                c_arr[j] = _law(u[j], cs)
            d_prev = _law(u[0], ds)
            for j in range(n - 1):
                d_next = _law(u[j + 1], ds)
                dh[j] = 0.5 * (d_prev + d_next)
                d_prev = d_next
            d_first = _law(u[0], ds)
            d_last = d_prev
            diag[0] = d_first / dx + bi_l + (pe if adv_l else 0.0)
            upper[0] = -d_first / dx
            lower[0] = 0.0
            g[0] = bi_l * u_l_new + g_l
            for j in range(1, n - 1):
                cj = c_arr[j]
                lam_r = dh[j] * dt / (2.0 * dx * dx * cj)
                lam_l = dh[j - 1] * dt / (2.0 * dx * dx * cj)
                gam = pe * dt / (2.0 * dx * cj)
                diag[j] = 1.0 + gam * (bp - bm) + lam_r + lam_l
                upper[j] = -(lam_r - gam * bm)
                lower[j] = -(gam * bp + lam_l)
                g[j] = ((1.0 - gam * (bp - bm) - lam_r - lam_l) * u[j]
                        + (lam_r - gam * bm) * u[j + 1]
                        + (gam * bp + lam_l) * u[j - 1])
            diag[n - 1] = d_last / dx + bi_r - (pe if adv_r else 0.0)
            lower[n - 1] = -d_last / dx
            upper[n - 1] = 0.0
            g[n - 1] = bi_r * u_r_new
            piv = diag[0]
            if piv == 0.0:
                status = SINGULAR
                bad_node = 0
                break
            w[0] = upper[0] / piv
            g[0] = g[0] / piv
            ok = True
            for j in range(1, n):
                piv = diag[j] - lower[j] * w[j - 1]
                if piv == 0.0:
                    status = SINGULAR
                    bad_node = j
                    ok = False
                    break
                w[j] = upper[j] / piv
                g[j] = (g[j] - lower[j] * g[j - 1]) / piv
            if not ok:
                break
            u[n - 1] = g[n - 1]
            for j in range(n - 2, -1, -1):
                u[j] = g[j] - w[j] * u[j + 1]

        maxu = 0.0
        ssum = 0.0
        for j in range(n):
            av = abs(u[j])
            if av > maxu:
                maxu = av
            ssum += u[j]
        if not math.isfinite(ssum) or maxu > sup_limit:
            status = DIVERGED
            bad_node = 0
            for j in range(n):
                if not math.isfinite(u[j]) or abs(u[j]) > sup_limit:
                    bad_node = j
                    break
            break

        t = t_goal
        n_acc += 1
        if store_flags[i_t]:
            for jj in range(n_keep):
                out[row, jj] = u[jj * node_stride]
            stamps[row] = t
            for p in range(n_probes):
                x = probe_pos[p]
                j = int(x / dx)
                if j > n - 2:
                    j = n - 2
                ww = (x - j * dx) / dx
                probe_u[row, p] = (1.0 - ww) * u[j] + ww * u[j + 1]
            row += 1

    return (out, stamps, probe_u, n_acc, n_clamp, status, bad_node, row)


@njit(cache=True)
def sg_steady(
    u_init, dx, sigma,
    cs, ds, mat_const, pe,
    bi_l, g_l, adv_l, u_l,
    bi_r, adv_r, u_r,
    tol, max_steps,
):
    """March the explicit scheme with frozen boundary values to steady state."""
    n = u_init.size
    u = u_init.copy()
    u_new = np.empty(n)
    resid_tail = np.zeros(5)

    steps = 0
    while steps < max_steps:
        bound = sigma * _sg_bound(u, dx, pe, cs, ds, bi_l, adv_l, bi_r, adv_r, mat_const)
        dt = bound
        j_prev = _surf_left(u[0], bi_l, u_l, g_l, pe, adv_l)
        maxd = 0.0
        maxu = 0.0
        d_prev = _law(u[0], ds)
        for j in range(n):
            if j == n - 1:
                j_next = _surf_right(u[j], bi_r, u_r, pe, adv_r)
            else:
                d_next = _law(u[j + 1], ds)
                dh = 0.5 * (d_prev + d_next)
                th = pe * dx / dh
                j_next = (dh / dx) * (-_bern(th) * u[j + 1] + _bern(-th) * u[j])
                d_prev = d_next
            cj = _law(u[j], cs)
            if j == 0 or j == n - 1:
                v = u[j] - (dt / (cj * 0.5 * dx)) * (j_next - j_prev)
            else:
                v = u[j] - (dt / (cj * dx)) * (j_next - j_prev)
            u_new[j] = v
            ad = abs(v - u[j])
            if ad > maxd:
                maxd = ad
            av = abs(v)
            if av > maxu:
                maxu = av
            j_prev = j_next
        tmp = u
        u = u_new
        u_new = tmp
        steps += 1
        for k in range(4):
            resid_tail[k] = resid_tail[k + 1]
        resid_tail[4] = maxd / dt
        if not math.isfinite(maxu):
            return u, DIVERGED, steps, resid_tail
        if maxd / dt < tol:
            return u, COMPLETED, steps, resid_tail
        if maxd <= 4e-16 * (1.0 + maxu):
            # stagnation at machine precision counts as converged
            return u, COMPLETED, steps, resid_tail
    return u, UNDERFLOW, steps, resid_tail
