# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twins of the kernels in reference.py.

Arithmetic expressions and their evaluation order deliberately mirror the
NumPy backend so the two produce bit-identical output; keep them in sync.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, floor, sqrt

cnp.import_array()


def raycast_frame(rot, trans, fx, fy, cx, cy, width, height,
                  sphere_geom, sphere_rgb, box_min, box_max, box_rgb,
                  background, z_near):
    """See reference.raycast_frame; identical contract and output."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] r = np.ascontiguousarray(rot, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t = np.ascontiguousarray(trans, dtype=np.float64).reshape(3)
    cdef double[:, ::1] sg = np.ascontiguousarray(np.asarray(sphere_geom, dtype=np.float64).reshape(-1, 4))
    cdef double[:, ::1] bmin = np.ascontiguousarray(np.asarray(box_min, dtype=np.float64).reshape(-1, 3))
    cdef double[:, ::1] bmax = np.ascontiguousarray(np.asarray(box_max, dtype=np.float64).reshape(-1, 3))

    cdef int w = int(width), h = int(height)
    cdef double fx_ = fx, fy_ = fy, cx_ = cx, cy_ = cy, zn = z_near
    cdef double r00 = r[0, 0], r01 = r[0, 1], r02 = r[0, 2]
    cdef double r10 = r[1, 0], r11 = r[1, 1], r12 = r[1, 2]
    cdef double r20 = r[2, 0], r21 = r[2, 1], r22 = r[2, 2]
    cdef double t0 = t[0], t1 = t[1], t2 = t[2]
    cdef double ox = -((r00 * t0 + r10 * t1) + r20 * t2)
    cdef double oy = -((r01 * t0 + r11 * t1) + r21 * t2)
    cdef double oz = -((r02 * t0 + r12 * t1) + r22 * t2)

    best_arr = np.full((h, w), INFINITY, dtype=np.float64)
    winner_arr = np.full((h, w), -1, dtype=np.int64)
    cdef double[:, ::1] best = best_arr
    cdef cnp.int64_t[:, ::1] winner = winner_arr

    cdef Py_ssize_t ns = sg.shape[0], nb = bmin.shape[0]
    cdef Py_ssize_t row, colm, i, ax
    cdef double a, b, dx, dy, dz, aq, bq, cq, disc, sq, s_near, s_far, s
    cdef double scx, scy, scz, rad, ocx, ocy, ocz
    cdef double tnear, tfar, o_ax, d_ax, lo_b, hi_b, s1, s2, lo, hi

    with nogil:
        for row in range(h):
            b = (row - cy_) / fy_
            for colm in range(w):
                a = (colm - cx_) / fx_
                dx = (r00 * a + r10 * b) + r20
                dy = (r01 * a + r11 * b) + r21
                dz = (r02 * a + r12 * b) + r22
                aq = (dx * dx + dy * dy) + dz * dz
                for i in range(ns):
                    scx = sg[i, 0]; scy = sg[i, 1]; scz = sg[i, 2]; rad = sg[i, 3]
                    ocx = ox - scx
                    ocy = oy - scy
                    ocz = oz - scz
                    bq = 2.0 * ((dx * ocx + dy * ocy) + dz * ocz)
                    cq = ((ocx * ocx + ocy * ocy) + ocz * ocz) - rad * rad
                    disc = bq * bq - 4.0 * aq * cq
                    if disc < 0.0:
                        continue
                    sq = sqrt(disc)
                    s_near = (-bq - sq) / (2.0 * aq)
                    s_far = (-bq + sq) / (2.0 * aq)
                    s = s_near if s_near > zn else s_far
                    if s > zn and s < best[row, colm]:
                        best[row, colm] = s
                        winner[row, colm] = i
                for i in range(nb):
                    tnear = -INFINITY
                    tfar = INFINITY
                    for ax in range(3):
                        if ax == 0:
                            o_ax = ox; d_ax = dx
                        elif ax == 1:
                            o_ax = oy; d_ax = dy
                        else:
                            o_ax = oz; d_ax = dz
                        lo_b = bmin[i, ax]; hi_b = bmax[i, ax]
                        if d_ax == 0.0:
                            if lo_b <= o_ax and o_ax <= hi_b:
                                lo = -INFINITY; hi = INFINITY
                            else:
                                lo = INFINITY; hi = -INFINITY
                        else:
                            s1 = (lo_b - o_ax) / d_ax
                            s2 = (hi_b - o_ax) / d_ax
                            lo = s1 if s1 < s2 else s2
                            hi = s1 if s1 > s2 else s2
                        if lo > tnear:
                            tnear = lo
                        if hi < tfar:
                            tfar = hi
                    s = tnear if tnear > zn else tfar
                    if tnear <= tfar and s > zn and s < best[row, colm]:
                        best[row, colm] = s
                        winner[row, colm] = ns + i

    palette = np.concatenate([
        np.asarray(sphere_rgb, dtype=np.float32).reshape(-1, 3),
        np.asarray(box_rgb, dtype=np.float32).reshape(-1, 3),
        np.asarray(background, dtype=np.float32).reshape(1, 3),
    ])
    frame = palette[winner_arr]
    depth = np.where(winner_arr >= 0, best_arr, -1.0).astype(np.float32)
    return frame, depth


def splat_points(positions, colors, rot, trans, fx, fy, cx, cy, width, height, z_near):
    """See reference.splat_points; identical contract and output."""
    cdef double[:, ::1] p = np.ascontiguousarray(np.asarray(positions, dtype=np.float64).reshape(-1, 3))
    cdef float[:, ::1] col = np.ascontiguousarray(np.asarray(colors, dtype=np.float32).reshape(-1, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] r = np.ascontiguousarray(rot, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] t = np.ascontiguousarray(trans, dtype=np.float64).reshape(3)

    cdef int w = int(width), h = int(height)
    cdef double fx_ = fx, fy_ = fy, cx_ = cx, cy_ = cy, zn = z_near
    cdef double r00 = r[0, 0], r01 = r[0, 1], r02 = r[0, 2]
    cdef double r10 = r[1, 0], r11 = r[1, 1], r12 = r[1, 2]
    cdef double r20 = r[2, 0], r21 = r[2, 1], r22 = r[2, 2]
    cdef double t0 = t[0], t1 = t[1], t2 = t[2]

    frame_arr = np.zeros((h, w, 3), dtype=np.float32)
    mask_arr = np.ones((h, w), dtype=np.uint8)
    depth_arr = np.full((h, w), -1.0, dtype=np.float32)
    zbuf_arr = np.full((h, w), INFINITY, dtype=np.float64)
    cdef float[:, :, ::1] frame = frame_arr
    cdef cnp.uint8_t[:, ::1] mask = mask_arr
    cdef float[:, ::1] depth = depth_arr
    cdef double[:, ::1] zbuf = zbuf_arr

    cdef Py_ssize_t m = p.shape[0], i
    cdef Py_ssize_t ui, vi
    cdef double px, py, pz, x, y, z, u, v

    with nogil:
        for i in range(m):
            px = p[i, 0]; py = p[i, 1]; pz = p[i, 2]
            x = ((px * r00 + py * r01) + pz * r02) + t0
            y = ((px * r10 + py * r11) + pz * r12) + t1
            z = ((px * r20 + py * r21) + pz * r22) + t2
            if z <= zn:
                continue
            u = cx_ + fx_ * (x / z)
            v = cy_ + fy_ * (y / z)
            if u < 0.0 or u >= w or v < 0.0 or v >= h:
                continue
            ui = <Py_ssize_t>floor(u + 0.5)
            vi = <Py_ssize_t>floor(v + 0.5)
            if ui > w - 1:
                ui = w - 1
            if vi > h - 1:
                vi = h - 1
            mask[vi, ui] = 0
            if z < zbuf[vi, ui]:
                zbuf[vi, ui] = z
                depth[vi, ui] = <float>z
                frame[vi, ui, 0] = col[i, 0]
                frame[vi, ui, 1] = col[i, 1]
                frame[vi, ui, 2] = col[i, 2]

    return frame_arr, mask_arr.astype(bool), depth_arr
