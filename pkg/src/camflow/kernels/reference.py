"""Pure-NumPy geometry kernels: primitive ray casting and z-buffer point splatting.

This is the fallback backend and the arithmetic contract for the compiled
one: `_fastpath.pyx` evaluates the same expressions in the same order, so
both backends produce bit-identical output (see tests/test_kernels.py).
Keep any change here mirrored there.
"""

from __future__ import annotations

import numpy as np

_INF = np.inf


def raycast_frame(rot, trans, fx, fy, cx, cy, width, height,
                  sphere_geom, sphere_rgb, box_min, box_max, box_rgb,
                  background, z_near):
    """Ray-cast analytic primitives into an RGB frame and a depth map.

    Rays are parameterized so the parameter equals camera-frame depth; the
    nearest intersection with depth > z_near wins each pixel. A camera inside
    a primitive sees its interior (far intersection). Pixels hitting nothing
    get the background color and sentinel depth -1.

    Returns (frame (H,W,3) float32, depth (H,W) float32).
    """
    rot = np.asarray(rot, dtype=np.float64)
    trans = np.asarray(trans, dtype=np.float64)
    sphere_geom = np.asarray(sphere_geom, dtype=np.float64).reshape(-1, 4)
    box_min = np.asarray(box_min, dtype=np.float64).reshape(-1, 3)
    box_max = np.asarray(box_max, dtype=np.float64).reshape(-1, 3)

    r00, r01, r02 = rot[0]
    r10, r11, r12 = rot[1]
    r20, r21, r22 = rot[2]
    t0, t1, t2 = trans
    # camera center: o = -R^T t
    ox = -((r00 * t0 + r10 * t1) + r20 * t2)
    oy = -((r01 * t0 + r11 * t1) + r21 * t2)
    oz = -((r02 * t0 + r12 * t1) + r22 * t2)

    a = (np.arange(width, dtype=np.float64) - cx) / fx  # (W,)
    b = (np.arange(height, dtype=np.float64) - cy) / fy  # (H,)
    a = a[None, :]
    b = b[:, None]
    # world ray direction d = R^T (a, b, 1), unnormalized: param = depth
    dx = (r00 * a + r10 * b) + r20
    dy = (r01 * a + r11 * b) + r21
    dz = (r02 * a + r12 * b) + r22

    best = np.full((height, width), _INF, dtype=np.float64)
    winner = np.full((height, width), -1, dtype=np.int64)

    aq = (dx * dx + dy * dy) + dz * dz
    for i in range(sphere_geom.shape[0]):
        scx, scy, scz, rad = sphere_geom[i]
        ocx = ox - scx
        ocy = oy - scy
        ocz = oz - scz
        bq = 2.0 * ((dx * ocx + dy * ocy) + dz * ocz)
        cq = ((ocx * ocx + ocy * ocy) + ocz * ocz) - rad * rad
        disc = bq * bq - 4.0 * aq * cq
        hit = disc >= 0.0
        sq = np.sqrt(np.where(hit, disc, 0.0))
        s_near = (-bq - sq) / (2.0 * aq)
        s_far = (-bq + sq) / (2.0 * aq)
        s = np.where(s_near > z_near, s_near, s_far)
        ok = hit & (s > z_near) & (s < best)
        best = np.where(ok, s, best)
        winner = np.where(ok, i, winner)

    n_spheres = sphere_geom.shape[0]
    for i in range(box_min.shape[0]):
        tnear = np.full((height, width), -_INF, dtype=np.float64)
        tfar = np.full((height, width), _INF, dtype=np.float64)
        for o_ax, d_ax, lo_b, hi_b in ((ox, dx, box_min[i, 0], box_max[i, 0]),
                                       (oy, dy, box_min[i, 1], box_max[i, 1]),
                                       (oz, dz, box_min[i, 2], box_max[i, 2])):
            zero = d_ax == 0.0
            inside = (lo_b <= o_ax) and (o_ax <= hi_b)
            dsafe = np.where(zero, 1.0, d_ax)
            s1 = (lo_b - o_ax) / dsafe
            s2 = (hi_b - o_ax) / dsafe
            lo = np.minimum(s1, s2)
            hi = np.maximum(s1, s2)
            lo = np.where(zero, -_INF if inside else _INF, lo)
            hi = np.where(zero, _INF if inside else -_INF, hi)
            tnear = np.maximum(tnear, lo)
            tfar = np.minimum(tfar, hi)
        s = np.where(tnear > z_near, tnear, tfar)
        ok = (tnear <= tfar) & (s > z_near) & (s < best)
        best = np.where(ok, s, best)
        winner = np.where(ok, n_spheres + i, winner)

    palette = np.concatenate([
        np.asarray(sphere_rgb, dtype=np.float32).reshape(-1, 3),
        np.asarray(box_rgb, dtype=np.float32).reshape(-1, 3),
        np.asarray(background, dtype=np.float32).reshape(1, 3),
    ])
    frame = palette[winner]  # winner -1 indexes the background row
    depth = np.where(winner >= 0, best, -1.0).astype(np.float32)
    return frame, depth


def splat_points(positions, colors, rot, trans, fx, fy, cx, cy, width, height, z_near):
    """Z-buffer splat world points into an RGB frame, one pixel per point.

    Each point with depth > z_near projecting inside the image paints the
    pixel nearest its projection (half-up rounding, clamped to the border);
    the smallest depth wins a pixel and equal depths go to the lowest point
    index. Unpainted pixels are holes: mask true, color 0, depth -1.

    Returns (frame (H,W,3) float32, mask (H,W) bool, depth (H,W) float32).
    """
    p = np.asarray(positions, dtype=np.float64).reshape(-1, 3)
    col = np.asarray(colors, dtype=np.float32).reshape(-1, 3)
    r00, r01, r02 = float(rot[0][0]), float(rot[0][1]), float(rot[0][2])
    r10, r11, r12 = float(rot[1][0]), float(rot[1][1]), float(rot[1][2])
    r20, r21, r22 = float(rot[2][0]), float(rot[2][1]), float(rot[2][2])
    t0, t1, t2 = float(trans[0]), float(trans[1]), float(trans[2])

    frame = np.zeros((height, width, 3), dtype=np.float32)
    mask = np.ones((height, width), dtype=bool)
    depth = np.full((height, width), -1.0, dtype=np.float32)
    if p.shape[0] == 0:
        return frame, mask, depth

    px, py, pz = p[:, 0], p[:, 1], p[:, 2]
    x = ((px * r00 + py * r01) + pz * r02) + t0
    y = ((px * r10 + py * r11) + pz * r12) + t1
    z = ((px * r20 + py * r21) + pz * r22) + t2
    vis = z > z_near
    safe = np.where(vis, z, 1.0)
    u = cx + fx * (x / safe)
    v = cy + fy * (y / safe)
    vis &= (u >= 0.0) & (u < width) & (v >= 0.0) & (v < height)
    if not vis.any():
        return frame, mask, depth

    ui = np.minimum(np.floor(u[vis] + 0.5).astype(np.int64), width - 1)
    vi = np.minimum(np.floor(v[vis] + 0.5).astype(np.int64), height - 1)
    d = z[vis]
    c = col[vis]
    lin = vi * width + ui
    # ascending stable sort then reversed writes: the final write at each
    # pixel is the minimum depth, ties resolved to the lowest point index
    order = np.argsort(d, kind="stable")[::-1]
    frame.reshape(-1, 3)[lin[order]] = c[order]
    depth.reshape(-1)[lin[order]] = d[order].astype(np.float32)
    mask.reshape(-1)[lin] = False
    return frame, mask, depth
