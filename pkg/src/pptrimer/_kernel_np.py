"""Pure-NumPy ensemble kernel.

Integrates a contiguous block of trajectories with explicit Euler steps in
the Ito calculus, vectorized over the block lane axis.

All state arithmetic is carried out on separate real and imaginary
planes, one real ufunc call per arithmetic operation.  This is what makes
the fallback bit-identical to the compiled kernel: NumPy's complex-valued
ufunc loops are free to contract multiply-add pairs into FMA instructions
(hardware dependent, one-ulp effects), while isolated real multiplies and
adds round exactly once everywhere.  The compiled kernel mirrors the same
operation sequence statement for statement and is built without
floating-point contraction.

Each trajectory owns a counter-based Philox stream keyed by
(master_seed, trajectory index) and consumes six standard normals per
step, in the variable order (a1, ap1, a2, ap2, a3, ap3), via the
generator's native ziggurat transform.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "numpy"

# Steps of pregenerated noise per lane between refills; value only affects
# memory, never the stream (each lane's generator is consumed in order).
_NOISE_CHUNK = 512


def simulate_block(
    master_seed: int,
    traj_start: int,
    n_lanes: int,
    steps: int,
    stride: int,
    z0: np.ndarray,
    dt: float,
    g: float,
    eps: complex,
    epsc: complex,
    ij: complex,
    c2: complex,
    cm: complex,
    cp: complex,
    sdt: float,
    pre: float,
    thr2: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Integrate lanes [traj_start, traj_start + n_lanes).

    Returns (states, div_step): states has shape (steps//stride + 1, 6,
    n_lanes) holding the state at sample times k*stride*dt, zeroed for
    every sample at or after a lane's divergence; div_step holds the step
    index at which each lane diverged, -1 if it never did.
    """
    n_samples = steps // stride + 1
    states = np.zeros((n_samples, 6, n_lanes), dtype=np.complex128)
    planes = states.view(np.float64).reshape(n_samples, 6, n_lanes, 2)
    div_step = np.full(n_lanes, -1, dtype=np.int64)

    gens = [
        np.random.Generator(
            np.random.Philox(key=np.array([master_seed, traj_start + lane], dtype=np.uint64))
        )
        for lane in range(n_lanes)
    ]

    z0 = np.asarray(z0, dtype=np.complex128)
    states[0] = z0[:, None]
    a1r = np.full(n_lanes, z0[0].real)
    a1i = np.full(n_lanes, z0[0].imag)
    p1r = np.full(n_lanes, z0[1].real)
    p1i = np.full(n_lanes, z0[1].imag)
    a2r = np.full(n_lanes, z0[2].real)
    a2i = np.full(n_lanes, z0[2].imag)
    p2r = np.full(n_lanes, z0[3].real)
    p2i = np.full(n_lanes, z0[3].imag)
    a3r = np.full(n_lanes, z0[4].real)
    a3i = np.full(n_lanes, z0[4].imag)
    p3r = np.full(n_lanes, z0[5].real)
    p3i = np.full(n_lanes, z0[5].imag)
    alive = np.ones(n_lanes, dtype=bool)

    # scalar constants on the real planes
    jt = ij.imag
    mj = -jt
    c = c2.imag
    epsr, epsi = eps.real, eps.imag
    epscr, epsci = epsc.real, epsc.imag
    cmr, cmi = cm.real, cm.imag
    cpr, cpi = cp.real, cp.imag

    noise = np.empty((n_lanes, _NOISE_CHUNK, 6))

    with np.errstate(over="ignore", invalid="ignore"):
        m = 0
        while m < steps:
            n_sub = min(_NOISE_CHUNK, steps - m)
            for lane, gen in enumerate(gens):
                noise[lane, :n_sub] = gen.standard_normal((n_sub, 6))
            # (step, variable, lane) layout so each step reads contiguous rows
            chunk = np.ascontiguousarray(noise[:, :n_sub].transpose(1, 2, 0))

            for s in range(n_sub):
                e = chunk[s]

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
                # s = +/-1; the half-plane test reduces to exact
                # comparisons of re+im and re-im, so both backends take
                # the same branch.
                sa = a1r + a1i
                da = a1r - a1i
                wr = cmr * a1r - cmi * a1i
                wi = cmr * a1i + cmi * a1r
                keep = (sa > 0) | ((sa == 0) & (da < 0))
                b1r = np.where(keep, wr, -wr)
                b1i = np.where(keep, wi, -wi)
                sa = p1r - p1i
                da = p1r + p1i
                wr = cpr * p1r - cpi * p1i
                wi = cpr * p1i + cpi * p1r
                keep = (sa > 0) | ((sa == 0) & (da > 0))
                b2r = np.where(keep, wr, -wr)
                b2i = np.where(keep, wi, -wi)
                sa = a2r + a2i
                da = a2r - a2i
                wr = cmr * a2r - cmi * a2i
                wi = cmr * a2i + cmi * a2r
                keep = (sa > 0) | ((sa == 0) & (da < 0))
                b3r = np.where(keep, wr, -wr)
                b3i = np.where(keep, wi, -wi)
                sa = p2r - p2i
                da = p2r + p2i
                wr = cpr * p2r - cpi * p2i
                wi = cpr * p2i + cpi * p2r
                keep = (sa > 0) | ((sa == 0) & (da > 0))
                b4r = np.where(keep, wr, -wr)
                b4i = np.where(keep, wi, -wi)
                sa = a3r + a3i
                da = a3r - a3i
                wr = cmr * a3r - cmi * a3i
                wi = cmr * a3i + cmi * a3r
                keep = (sa > 0) | ((sa == 0) & (da < 0))
                b5r = np.where(keep, wr, -wr)
                b5i = np.where(keep, wi, -wi)
                sa = p3r - p3i
                da = p3r + p3i
                wr = cpr * p3r - cpi * p3i
                wi = cpr * p3i + cpi * p3r
                keep = (sa > 0) | ((sa == 0) & (da > 0))
                b6r = np.where(keep, wr, -wr)
                b6i = np.where(keep, wi, -wi)

                a1r = (a1r + f1r * dt) + (b1r * e[0]) * sdt
                a1i = (a1i + f1i * dt) + (b1i * e[0]) * sdt
                p1r = (p1r + q1r * dt) + (b2r * e[1]) * sdt
                p1i = (p1i + q1i * dt) + (b2i * e[1]) * sdt
                a2r = (a2r + f2r * dt) + (b3r * e[2]) * sdt
                a2i = (a2i + f2i * dt) + (b3i * e[2]) * sdt
                p2r = (p2r + q2r * dt) + (b4r * e[3]) * sdt
                p2i = (p2i + q2i * dt) + (b4i * e[3]) * sdt
                a3r = (a3r + f3r * dt) + (b5r * e[4]) * sdt
                a3i = (a3i + f3i * dt) + (b5i * e[4]) * sdt
                p3r = (p3r + q3r * dt) + (b6r * e[5]) * sdt
                p3i = (p3i + q3i * dt) + (b6i * e[5]) * sdt

                # two-stage divergence test; non-finite values fail the
                # prefilter and are confirmed by the exact stage
                ok = (
                    (np.abs(a1r) <= pre) & (np.abs(a1i) <= pre)
                    & (np.abs(p1r) <= pre) & (np.abs(p1i) <= pre)
                    & (np.abs(a2r) <= pre) & (np.abs(a2i) <= pre)
                    & (np.abs(p2r) <= pre) & (np.abs(p2i) <= pre)
                    & (np.abs(a3r) <= pre) & (np.abs(a3i) <= pre)
                    & (np.abs(p3r) <= pre) & (np.abs(p3i) <= pre)
                )
                suspect = alive & ~ok
                if suspect.any():
                    bad = ~(
                        ((a1r * a1r + a1i * a1i) <= thr2)
                        & ((p1r * p1r + p1i * p1i) <= thr2)
                        & ((a2r * a2r + a2i * a2i) <= thr2)
                        & ((p2r * p2r + p2i * p2i) <= thr2)
                        & ((a3r * a3r + a3i * a3i) <= thr2)
                        & ((p3r * p3r + p3i * p3i) <= thr2)
                    )
                    newly = suspect & bad
                    if newly.any():
                        div_step[newly] = m + s
                        alive &= ~newly
                        for arr in (a1r, a1i, p1r, p1i, a2r, a2i,
                                    p2r, p2i, a3r, a3i, p3r, p3i):
                            arr[newly] = 0.0

                if (m + s + 1) % stride == 0:
                    k = (m + s + 1) // stride
                    planes[k, 0, :, 0] = a1r
                    planes[k, 0, :, 1] = a1i
                    planes[k, 1, :, 0] = p1r
                    planes[k, 1, :, 1] = p1i
                    planes[k, 2, :, 0] = a2r
                    planes[k, 2, :, 1] = a2i
                    planes[k, 3, :, 0] = p2r
                    planes[k, 3, :, 1] = p2i
                    planes[k, 4, :, 0] = a3r
                    planes[k, 4, :, 1] = a3i
                    planes[k, 5, :, 0] = p3r
                    planes[k, 5, :, 1] = p3i
            m += n_sub

    for lane in np.nonzero(div_step >= 0)[0]:
        k0 = div_step[lane] // stride + 1
        states[k0:, :, lane] = 0.0
    return states, div_step
