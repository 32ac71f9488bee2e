# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-step scalar element kernel; see _assembly_py for the
reference formulation."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def convection_supg_values(
    cnp.int32_t[:, ::1] tets,
    double[:, :, ::1] grads,
    double[::1] vols,
    double[::1] h,
    double[:, ::1] w,
    double rho,
    double delta,
    double visc4_over_rho,
):
    cdef Py_ssize_t ne = tets.shape[0]
    out_arr = np.empty((ne, 16), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, i, j, k, l, v
    cdef double a[4][4]
    cdef double m[4][4]
    cdef double wk[4][3]
    cdef double wm0, wm1, wm2, div_w, delta_k, vol, acc, half_rho
    half_rho = 0.5 * rho
    for e in range(ne):
        vol = vols[e]
        for k in range(4):
            for v in range(3):
                wk[k][v] = w[tets[e, k], v]
        for k in range(4):
            for j in range(4):
                acc = 0.0
                for v in range(3):
                    acc += wk[k][v] * grads[e, j, v]
                a[k][j] = acc
        for i in range(4):
            for j in range(4):
                m[i][j] = vol / 20.0
            m[i][i] = vol / 10.0
        div_w = a[0][0] + a[1][1] + a[2][2] + a[3][3]
        wm0 = 0.25 * (wk[0][0] + wk[1][0] + wk[2][0] + wk[3][0])
        wm1 = 0.25 * (wk[0][1] + wk[1][1] + wk[2][1] + wk[3][1])
        wm2 = 0.25 * (wk[0][2] + wk[1][2] + wk[2][2] + wk[3][2])
        delta_k = delta * h[e] * h[e] / (
            visc4_over_rho + h[e] * (wm0 * wm0 + wm1 * wm1 + wm2 * wm2) ** 0.5
        )
        for i in range(4):
            for j in range(4):
                acc = 0.0
                for k in range(4):
                    acc += m[i][k] * a[k][j]
                acc *= rho
                acc += half_rho * div_w * m[i][j]
                out[e, i * 4 + j] = acc
        for i in range(4):
            for j in range(4):
                acc = 0.0
                for k in range(4):
                    for l in range(4):
                        acc += a[k][i] * m[k][l] * a[l][j]
                out[e, i * 4 + j] += delta_k * acc
    return out_arr
