"""Numba inner loops for trajectory propagation.

The effective-frame propagator factorises per noise interval: the
Hamiltonian is held constant over each step (signal evaluated at the step
midpoint, noise at the interval start), so the step propagator is an exact
matrix exponential.  Free evolution only couples the outer (+1, -1)
components and uses the closed-form SU(2) rotation; pulse steps
exponentiate the full 3x3 Hermitian matrix by eigendecomposition.

Noise updates use the exact OU recurrence
    x' = x * a + b * n,   a = exp(-dt/tau),  b = sigma * sqrt(1 - a^2)
with pre-drawn unit normals, one triple per step, matching
:class:`zfmag.noise.OuProcess` bit for bit.
"""

import numpy as np
from numba import njit

KIND_FREE = 0
KIND_PULSE = 1
KIND_IDEAL = 2


@njit(cache=True)
def run_segments(kinds, n_steps, dts, t0s, c_amps, ph_re, ph_im,
                 ou_a, ou_b, x0, normals,
                 rf_rabi, g_ac, d_omega,
                 sample_flags, psi0):
    """Propagate one trajectory through the segment table.

    Returns (populations, final noise values, max norm error).  Row 0 of
    the populations is the initial state; one further row is appended
    after every segment whose sample flag is set.  Population columns are
    (P_plus, P_zero, P_minus) with P_plus = |psi_+1 + psi_-1|^2 / 2.
    """
    n_seg = kinds.shape[0]
    n_samples = 1 + int(np.sum(sample_flags))
    pops = np.empty((n_samples, 3))
    psi = psi0.astype(np.complex128).copy()

    de = x0[0]
    er = x0[1]
    em = x0[2]

    inv2 = 0.5
    pops[0, 0] = inv2 * abs(psi[0] + psi[2]) ** 2
    pops[0, 1] = abs(psi[1]) ** 2
    pops[0, 2] = inv2 * abs(psi[0] - psi[2]) ** 2

    h3 = np.zeros((3, 3), dtype=np.complex128)
    step = 0
    samp = 1
    max_norm_err = 0.0

    for s in range(n_seg):
        kind = kinds[s]
        if kind == KIND_IDEAL:
            # 2 pi pulse in the {|0>, |+>} subspace: |+-1> -> -|-+1>, |0> -> -|0>
            p0 = psi[0]
            psi[0] = -psi[2]
            psi[1] = -psi[1]
            psi[2] = -p0
        else:
            dt = dts[s]
            t0 = t0s[s]
            a0 = ou_a[s, 0]
            b0 = ou_b[s, 0]
            a1 = ou_a[s, 1]
            b1 = ou_b[s, 1]
            a2 = ou_a[s, 2]
            b2 = ou_b[s, 2]
            if kind == KIND_FREE:
                for k in range(n_steps[s]):
                    tm = t0 + (k + 0.5) * dt
                    h = 0.5 * (rf_rabi * (1.0 + er)
                               + g_ac * np.cos(d_omega * tm))
                    w = np.sqrt(h * h + de * de)
                    th = w * dt
                    cth = np.cos(th)
                    sth = np.sin(th)
                    if w > 0.0:
                        nz = h / w
                        nx = de / w
                    else:
                        nz = 0.0
                        nx = 0.0
                    u00 = complex(cth, -sth * nz)
                    u01 = complex(0.0, -sth * nx)
                    pa = psi[0]
                    pb = psi[2]
                    psi[0] = u00 * pa + u01 * pb
                    psi[2] = u01 * pa + np.conj(u00) * pb
                    de = de * a0 + b0 * normals[step, 0]
                    er = er * a1 + b1 * normals[step, 1]
                    em = em * a2 + b2 * normals[step, 2]
                    step += 1
            else:
                cph = complex(ph_re[s], ph_im[s])
                for k in range(n_steps[s]):
                    tm = t0 + (k + 0.5) * dt
                    h = 0.5 * (rf_rabi * (1.0 + er)
                               + g_ac * np.cos(d_omega * tm))
                    c = c_amps[s] * (1.0 + em)
                    h3[0, 0] = h
                    h3[1, 1] = 0.0
                    h3[2, 2] = -h
                    h3[0, 2] = de
                    h3[2, 0] = de
                    h3[0, 1] = c * np.conj(cph)
                    h3[1, 0] = c * cph
                    h3[1, 2] = c * cph
                    h3[2, 1] = c * np.conj(cph)
                    evals, evecs = np.linalg.eigh(h3)
                    amp = np.conj(evecs.T) @ psi
                    for j in range(3):
                        amp[j] = amp[j] * np.exp(complex(0.0, -evals[j] * dt))
                    psi = evecs @ amp
                    de = de * a0 + b0 * normals[step, 0]
                    er = er * a1 + b1 * normals[step, 1]
                    em = em * a2 + b2 * normals[step, 2]
                    step += 1
        if sample_flags[s]:
            pp = inv2 * abs(psi[0] + psi[2]) ** 2
            p0_ = abs(psi[1]) ** 2
            pm = inv2 * abs(psi[0] - psi[2]) ** 2
            pops[samp, 0] = pp
            pops[samp, 1] = p0_
            pops[samp, 2] = pm
            err = abs(pp + p0_ + pm - 1.0)
            if err > max_norm_err:
                max_norm_err = err
            samp += 1

    return pops, de, er, em, max_norm_err
