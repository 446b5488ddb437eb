# cython: language_level=3
# cython: boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True

"""Compiled ensemble kernel.

One trajectory at a time at C speed.  All state arithmetic happens on
separate real and imaginary planes, statement for statement the same
operation sequence as the pure-NumPy kernel, and the module is compiled
without floating-point contraction, so isolated real multiplies and adds
round identically in both backends.  Each trajectory consumes the same
Philox stream through numpy's own C distribution functions.  The two
backends therefore produce bit-identical trajectories.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport fabs

import numpy as np

cimport numpy as cnp
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()

BACKEND_NAME = "cython"


def simulate_block(
    object master_seed,
    object traj_start,
    Py_ssize_t n_lanes,
    Py_ssize_t steps,
    Py_ssize_t stride,
    object z0,
    double dt,
    double g,
    double complex eps,
    double complex epsc,
    double complex ij,
    double complex c2,
    double complex cm,
    double complex cp,
    double sdt,
    double pre,
    double thr2,
):
    """Same contract and bit-identical output as the fallback kernel."""
    cdef Py_ssize_t n_samples = steps // stride + 1
    states_arr = np.zeros((n_samples, 6, n_lanes), dtype=np.complex128)
    planes_arr = states_arr.view(np.float64).reshape(n_samples, 6, n_lanes, 2)
    div_arr = np.full(n_lanes, -1, dtype=np.int64)
    cdef double[:, :, :, ::1] planes = planes_arr
    cdef cnp.int64_t[::1] div_step = div_arr

    cdef Py_ssize_t lane, m, k
    cdef bitgen_t *rng
    cdef double a1r, a1i, p1r, p1i, a2r, a2i, p2r, p2i, a3r, a3i, p3r, p3i
    cdef double n1r, n1i, n2r, n2i, n3r, n3i
    cdef double cn_r, cn_i, gar, gai, gbr, gbi, d2r
    cdef double u1r, u1i, v1r, v1i, u3r, u3i, v3r, v3i
    cdef double w2r, w2i, y2r, y2i, s13r, s13i, t13r, t13i
    cdef double f1r, f1i, q1r, q1i, f2r, f2i, q2r, q2i, f3r, f3i, q3r, q3i
    cdef double b1r, b1i, b2r, b2i, b3r, b3i, b4r, b4i, b5r, b5i, b6r, b6i
    cdef double e0, e1, e2, e3, e4, e5, sa, da, wr, wi
    cdef bint ok

    z0_arr = np.ascontiguousarray(z0, dtype=np.complex128)
    cdef double complex[::1] z0v = z0_arr
    cdef double z00r = z0v[0].real, z00i = z0v[0].imag
    cdef double z01r = z0v[1].real, z01i = z0v[1].imag
    cdef double z02r = z0v[2].real, z02i = z0v[2].imag
    cdef double z03r = z0v[3].real, z03i = z0v[3].imag
    cdef double z04r = z0v[4].real, z04i = z0v[4].imag
    cdef double z05r = z0v[5].real, z05i = z0v[5].imag
    states_arr[0] = z0_arr[:, None]

    # scalar constants on the real planes
    cdef double jt = ij.imag
    cdef double mj = -jt
    cdef double c = c2.imag
    cdef double epsr = eps.real, epsi = eps.imag
    cdef double epscr = epsc.real, epsci = epsc.imag
    cdef double cmr = cm.real, cmi = cm.imag
    cdef double cpr = cp.real, cpi = cp.imag

    philox = np.random.Philox

    for lane in range(n_lanes):
        bg = philox(key=np.array([master_seed, traj_start + lane], dtype=np.uint64))
        capsule = bg.capsule
        rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")

        a1r = z00r; a1i = z00i; p1r = z01r; p1i = z01i
        a2r = z02r; a2i = z02i; p2r = z03r; p2i = z03i
        a3r = z04r; a3i = z04i; p3r = z05r; p3i = z05i
        for m in range(steps):
            e0 = random_standard_normal(rng)
            e1 = random_standard_normal(rng)
            e2 = random_standard_normal(rng)
            e3 = random_standard_normal(rng)
            e4 = random_standard_normal(rng)
            e5 = random_standard_normal(rng)

            n1r = p1r * a1r - p1i * a1i
            n1i = p1r * a1i + p1i * a1r
            n2r = p2r * a2r - p2i * a2i
            n2i = p2r * a2i + p2i * a2r
            n3r = p3r * a3r - p3i * a3i
            n3i = p3r * a3i + p3i * a3r

            # well 1: ga = g + 2i chi n1, gb = g - 2i chi n1
            cn_r = c * n1r
            cn_i = c * n1i
            gar = g - cn_i
            gai = cn_r
            gbr = g + cn_i
            gbi = -cn_r
            u1r = gar * a1r - gai * a1i
            u1i = gar * a1i + gai * a1r
            v1r = gbr * p1r - gbi * p1i
            v1i = gbr * p1i + gbi * p1r
            f1r = mj * a2i - u1r
            f1i = jt * a2r - u1i
            q1r = jt * p2i - v1r
            q1i = mj * p2r - v1i

            # well 2 (pumped, undamped)
            cn_r = c * n2r
            cn_i = c * n2i
            d2r = -cn_i
            w2r = d2r * a2r - cn_r * a2i
            w2i = d2r * a2i + cn_r * a2r
            y2r = d2r * p2r - cn_r * p2i
            y2i = d2r * p2i + cn_r * p2r
            s13r = a1r + a3r
            s13i = a1i + a3i
            t13r = p1r + p3r
            t13i = p1i + p3i
            f2r = (epsr - w2r) + mj * s13i
            f2i = (epsi - w2i) + jt * s13r
            q2r = (epscr + y2r) + jt * t13i
            q2i = (epsci + y2i) + mj * t13r

            # well 3 mirrors well 1
            cn_r = c * n3r
            cn_i = c * n3i
            gar = g - cn_i
            gai = cn_r
            gbr = g + cn_i
            gbi = -cn_r
            u3r = gar * a3r - gai * a3i
            u3i = gar * a3i + gai * a3r
            v3r = gbr * p3r - gbi * p3i
            v3i = gbr * p3i + gbi * p3r
            f3r = mj * a2i - u3r
            f3i = jt * a2r - u3i
            q3r = jt * p2i - v3r
            q3i = mj * p2r - v3i

            # principal branch of sqrt(-2i chi a^2) = (cm*a) * s with
            # s = +/-1; exact comparisons of re+im and re-im pick the
            # same branch as the fallback kernel.
            sa = a1r + a1i
            da = a1r - a1i
            wr = cmr * a1r - cmi * a1i
            wi = cmr * a1i + cmi * a1r
            if sa > 0 or (sa == 0 and da < 0):
                b1r = wr; b1i = wi
            else:
                b1r = -wr; b1i = -wi
            sa = p1r - p1i
            da = p1r + p1i
            wr = cpr * p1r - cpi * p1i
            wi = cpr * p1i + cpi * p1r
            if sa > 0 or (sa == 0 and da > 0):
                b2r = wr; b2i = wi
            else:
                b2r = -wr; b2i = -wi
            sa = a2r + a2i
            da = a2r - a2i
            wr = cmr * a2r - cmi * a2i
            wi = cmr * a2i + cmi * a2r
            if sa > 0 or (sa == 0 and da < 0):
                b3r = wr; b3i = wi
            else:
                b3r = -wr; b3i = -wi
            sa = p2r - p2i
            da = p2r + p2i
            wr = cpr * p2r - cpi * p2i
            wi = cpr * p2i + cpi * p2r
            if sa > 0 or (sa == 0 and da > 0):
                b4r = wr; b4i = wi
            else:
                b4r = -wr; b4i = -wi
            sa = a3r + a3i
            da = a3r - a3i
            wr = cmr * a3r - cmi * a3i
            wi = cmr * a3i + cmi * a3r
            if sa > 0 or (sa == 0 and da < 0):
                b5r = wr; b5i = wi
            else:
                b5r = -wr; b5i = -wi
            sa = p3r - p3i
            da = p3r + p3i
            wr = cpr * p3r - cpi * p3i
            wi = cpr * p3i + cpi * p3r
            if sa > 0 or (sa == 0 and da > 0):
                b6r = wr; b6i = wi
            else:
                b6r = -wr; b6i = -wi

            a1r = (a1r + f1r * dt) + (b1r * e0) * sdt
            a1i = (a1i + f1i * dt) + (b1i * e0) * sdt
            p1r = (p1r + q1r * dt) + (b2r * e1) * sdt
            p1i = (p1i + q1i * dt) + (b2i * e1) * sdt
            a2r = (a2r + f2r * dt) + (b3r * e2) * sdt
            a2i = (a2i + f2i * dt) + (b3i * e2) * sdt
            p2r = (p2r + q2r * dt) + (b4r * e3) * sdt
            p2i = (p2i + q2i * dt) + (b4i * e3) * sdt
            a3r = (a3r + f3r * dt) + (b5r * e4) * sdt
            a3i = (a3i + f3i * dt) + (b5i * e4) * sdt
            p3r = (p3r + q3r * dt) + (b6r * e5) * sdt
            p3i = (p3i + q3i * dt) + (b6i * e5) * sdt

            # two-stage divergence test; non-finite values fail the
            # prefilter and are confirmed by the exact stage
            ok = (
                fabs(a1r) <= pre and fabs(a1i) <= pre
                and fabs(p1r) <= pre and fabs(p1i) <= pre
                and fabs(a2r) <= pre and fabs(a2i) <= pre
                and fabs(p2r) <= pre and fabs(p2i) <= pre
                and fabs(a3r) <= pre and fabs(a3i) <= pre
                and fabs(p3r) <= pre and fabs(p3i) <= pre
            )
            if not ok:
                if not (
                    (a1r * a1r + a1i * a1i) <= thr2
                    and (p1r * p1r + p1i * p1i) <= thr2
                    and (a2r * a2r + a2i * a2i) <= thr2
                    and (p2r * p2r + p2i * p2i) <= thr2
                    and (a3r * a3r + a3i * a3i) <= thr2
                    and (p3r * p3r + p3i * p3i) <= thr2
                ):
                    div_step[lane] = m
                    break

            if (m + 1) % stride == 0:
                k = (m + 1) // stride
                planes[k, 0, lane, 0] = a1r
                planes[k, 0, lane, 1] = a1i
                planes[k, 1, lane, 0] = p1r
                planes[k, 1, lane, 1] = p1i
                planes[k, 2, lane, 0] = a2r
                planes[k, 2, lane, 1] = a2i
                planes[k, 3, lane, 0] = p2r
                planes[k, 3, lane, 1] = p2i
                planes[k, 4, lane, 0] = a3r
                planes[k, 4, lane, 1] = a3i
                planes[k, 5, lane, 0] = p3r
                planes[k, 5, lane, 1] = p3i

    return states_arr, div_arr
