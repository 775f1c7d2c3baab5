# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled element kernels; same contract as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def interpolate(double[:, :, ::1] ops, double[:, :, ::1] De):
    cdef Py_ssize_t nel = De.shape[0], ns = De.shape[2], nq = ops.shape[0]
    cdef Py_ssize_t e, q, k, a, s
    cdef double acc
    out = np.empty((nel, nq, 3, ns))
    cdef double[:, :, :, ::1] o = out
    for e in range(nel):
        for q in range(nq):
            for k in range(3):
                for s in range(ns):
                    acc = 0.0
                    for a in range(4):
                        acc += ops[q, k, a] * De[e, a, s]
                    o[e, q, k, s] = acc
    return out


def element_gradient(double[:, :, ::1] ops, double[::1] w, double[:, :, :, ::1] dL):
    cdef Py_ssize_t nel = dL.shape[0], nq = dL.shape[1], ns = dL.shape[3]
    cdef Py_ssize_t e, q, k, a, s
    cdef double c
    out = np.zeros((nel, 4, ns))
    cdef double[:, :, ::1] o = out
    for e in range(nel):
        for q in range(nq):
            for k in range(3):
                for a in range(4):
                    c = w[q] * ops[q, k, a]
                    for s in range(ns):
                        o[e, a, s] += c * dL[e, q, k, s]
    return out


def element_hessian(double[:, :, ::1] ops, double[::1] w, double[:, :, :, ::1] Hp):
    cdef Py_ssize_t nel = Hp.shape[0], nq = Hp.shape[1], m3 = Hp.shape[2]
    cdef Py_ssize_t ns = m3 // 3
    cdef Py_ssize_t e, q, k, l, a, b, s, t
    cdef double c
    out = np.zeros((nel, 4 * ns, 4 * ns))
    cdef double[:, :, ::1] o = out
    # tmp[l, s, b... ] reused per (e, q): row-contracted Hessian (4, ns, 3*ns)
    tmp_arr = np.empty((4, ns, m3))
    cdef double[:, :, ::1] tmp = tmp_arr
    for e in range(nel):
        for q in range(nq):
            for a in range(4):
                for s in range(ns):
                    for l in range(m3):
                        c = 0.0
                        for k in range(3):
                            c += ops[q, k, a] * Hp[e, q, k * ns + s, l]
                        tmp[a, s, l] = w[q] * c
            for a in range(4):
                for s in range(ns):
                    for b in range(4):
                        for t in range(ns):
                            c = 0.0
                            for l in range(3):
                                c += tmp[a, s, l * ns + t] * ops[q, l, b]
                            o[e, a * ns + s, b * ns + t] += c
    return out


def scatter_add(cnp.int64_t[:, ::1] dofmap, double[:, ::1] values, Py_ssize_t ndof):
    cdef Py_ssize_t nel = dofmap.shape[0], m = dofmap.shape[1], e, i
    out = np.zeros(ndof)
    cdef double[::1] o = out
    for e in range(nel):
        for i in range(m):
            o[dofmap[e, i]] += values[e, i]
    return out
