"""Loop kernels for the real-space projectors and the gridding interpolation.

Every adjoint repeats the forward loop nest with the same weight arithmetic
and swaps gather for scatter, which is what makes each pair an exact
transpose. All accumulation is float64 and strictly sequential, so results
do not depend on scheduling.
"""

import math

import numpy as np

from tomocouple._accel import njit

# Rays closer than this to axis-parallel are treated as exactly parallel in
# the Siddon traversal.
_PARALLEL_EPS = 1e-12


# --------------------------------------------------------------------------
# pixel-driven
# --------------------------------------------------------------------------


@njit
def pd_forward(img, cos_a, sin_a, n_cells, out):
    P = img.shape[0]
    h = (P - 1) / 2.0
    hn = (n_cells - 1) / 2.0
    for k in range(cos_a.shape[0]):
        c = cos_a[k]
        s = sin_a[k]
        for i in range(P):
            base = (h - i) * s + hn
            for j in range(P):
                v = img[i, j]
                u = (j - h) * c + base
                n0 = int(math.floor(u))
                w = u - n0
                if 0 <= n0 < n_cells:
                    out[k, n0] += (1.0 - w) * v
                if 0 <= n0 + 1 < n_cells:
                    out[k, n0 + 1] += w * v


@njit
def pd_adjoint(sino, cos_a, sin_a, P, out):
    n_cells = sino.shape[1]
    h = (P - 1) / 2.0
    hn = (n_cells - 1) / 2.0
    for k in range(cos_a.shape[0]):
        c = cos_a[k]
        s = sin_a[k]
        for i in range(P):
            base = (h - i) * s + hn
            for j in range(P):
                u = (j - h) * c + base
                n0 = int(math.floor(u))
                w = u - n0
                acc = 0.0
                if 0 <= n0 < n_cells:
                    acc += (1.0 - w) * sino[k, n0]
                if 0 <= n0 + 1 < n_cells:
                    acc += w * sino[k, n0 + 1]
                out[i, j] += acc


# --------------------------------------------------------------------------
# ray-driven (Siddon traversal)
# --------------------------------------------------------------------------


@njit
def _axis_setup(p0, d, half):
    """Entry/exit parameters of the slab [-half, half] along one axis."""
    if abs(d) > _PARALLEL_EPS:
        a1 = (-half - p0) / d
        a2 = (half - p0) / d
        return min(a1, a2), max(a1, a2), True
    if -half < p0 < half:
        return -np.inf, np.inf, False
    return np.inf, -np.inf, False


@njit
def _first_line(p0, d, a_entry, half):
    """Index m of the first gridline ``-half + m`` crossed after ``a_entry``."""
    pos = p0 + a_entry * d + half
    if d > 0:
        return int(math.floor(pos)) + 1, 1
    return int(math.ceil(pos)) - 1, -1


@njit
def _siddon_ray(img, t, c, s, gather, value):
    """Walk one ray through the image.

    With ``gather`` the weighted pixel sum is returned; otherwise ``value`` is
    scattered into ``img`` with the same weights.
    """
    P = img.shape[0]
    half = P / 2.0
    # point on the ray closest to the origin, and the unit direction
    px = t * c
    py = t * s
    dx = -s
    dy = c
    axmin, axmax, mx_ok = _axis_setup(px, dx, half)
    aymin, aymax, my_ok = _axis_setup(py, dy, half)
    amin = max(axmin, aymin)
    amax = min(axmax, aymax)
    if not amax > amin:
        return 0.0
    inf = np.inf
    mx = 0
    sx = 0
    ax_next = inf
    if mx_ok:
        mx, sx = _first_line(px, dx, amin, half)
        ax_next = (-half + mx - px) / dx
    my = 0
    sy = 0
    ay_next = inf
    if my_ok:
        my, sy = _first_line(py, dy, amin, half)
        ay_next = (-half + my - py) / dy
    acc = 0.0
    acur = amin
    while acur < amax:
        anext = min(ax_next, ay_next, amax)
        if anext > acur:
            amid = 0.5 * (acur + anext)
            j = int(math.floor(px + amid * dx + half))
            i = int(math.floor(half - (py + amid * dy)))
            if 0 <= i < P and 0 <= j < P:
                if gather:
                    acc += img[i, j] * (anext - acur)
                else:
                    img[i, j] += value * (anext - acur)
            acur = anext
        if ax_next <= anext:
            mx += sx
            ax_next = (-half + mx - px) / dx
        if ay_next <= anext:
            my += sy
            ay_next = (-half + my - py) / dy
    return acc


@njit
def rd_forward(img, cos_a, sin_a, det, out):
    for k in range(cos_a.shape[0]):
        for n in range(det.shape[0]):
            out[k, n] = _siddon_ray(img, det[n], cos_a[k], sin_a[k], True, 0.0)


@njit
def rd_adjoint(sino, cos_a, sin_a, det, out):
    for k in range(cos_a.shape[0]):
        for n in range(det.shape[0]):
            v = sino[k, n]
            if v != 0.0:
                _siddon_ray(out, det[n], cos_a[k], sin_a[k], False, v)


# --------------------------------------------------------------------------
# distance-driven
# --------------------------------------------------------------------------


@njit
def _dd_line(c_b, p0, n_pix, n_cells, reverse, line, sino_row, gather):
    """Overlap merge of ascending cell boundaries ``c_b`` with pixel edges
    ``p0 + m`` (m = 0..n_pix). ``line`` holds the pixel values in ascending
    coordinate order; ``reverse`` maps ascending cell slots back to indices.
    """
    ip = 0
    ic = 0
    while ip < n_pix and ic < n_cells:
        plo = p0 + ip
        phi = plo + 1.0
        clo = c_b[ic]
        chi = c_b[ic + 1]
        lo = plo if plo > clo else clo
        hi = phi if phi < chi else chi
        if hi > lo:
            n = n_cells - 1 - ic if reverse else ic
            if gather:
                sino_row[n] += line[ip] * (hi - lo)
            else:
                line[ip] += sino_row[n] * (hi - lo)
        if phi < chi:
            ip += 1
        else:
            ic += 1


@njit
def _dd_view(img, c, s, use_columns, det, sino_row, gather):
    P = img.shape[0]
    N = det.shape[0]
    h = (P - 1) / 2.0
    half = P / 2.0
    c_b = np.empty(N + 1)
    line = np.empty(P)
    if use_columns:
        # near-horizontal rays: image columns, overlaps measured along x2
        for j in range(P):
            x1 = j - h
            for m in range(N + 1):
                c_b[m] = ((det[0] - 0.5 + m) - x1 * c) / s
            # ascending x2 runs from the bottom row upwards
            if gather:
                for m in range(P):
                    line[m] = img[P - 1 - m, j]
            else:
                line[:] = 0.0
            _dd_line(c_b, -half, P, N, False, line, sino_row, gather)
            if not gather:
                for m in range(P):
                    img[P - 1 - m, j] += line[m]
    else:
        # near-vertical rays: image rows, overlaps measured along x1
        reverse = c < 0
        for i in range(P):
            x2 = h - i
            for m in range(N + 1):
                tb = det[N - 1] + 0.5 - m if reverse else det[0] - 0.5 + m
                c_b[m] = (tb - x2 * s) / c
            if gather:
                for m in range(P):
                    line[m] = img[i, m]
            else:
                line[:] = 0.0
            _dd_line(c_b, -half, P, N, reverse, line, sino_row, gather)
            if not gather:
                for m in range(P):
                    img[i, m] += line[m]


@njit
def dd_forward(img, cos_a, sin_a, columns, det, out):
    for k in range(cos_a.shape[0]):
        _dd_view(img, cos_a[k], sin_a[k], columns[k], det, out[k], True)


@njit
def dd_adjoint(sino, cos_a, sin_a, columns, det, out):
    for k in range(cos_a.shape[0]):
        _dd_view(out, cos_a[k], sin_a[k], columns[k], det, sino[k], False)


# --------------------------------------------------------------------------
# slant stacking
# --------------------------------------------------------------------------


@njit
def ss_forward(img, cos_a, sin_a, vertical, det, out):
    P = img.shape[0]
    h = (P - 1) / 2.0
    for k in range(cos_a.shape[0]):
        c = cos_a[k]
        s = sin_a[k]
        for n in range(det.shape[0]):
            t = det[n]
            acc = 0.0
            if vertical[k]:
                for i in range(P):
                    u = (t - (h - i) * s) / c + h
                    j0 = int(math.floor(u))
                    w = u - j0
                    if 0 <= j0 < P:
                        acc += (1.0 - w) * img[i, j0]
                    if 0 <= j0 + 1 < P:
                        acc += w * img[i, j0 + 1]
                out[k, n] = acc / abs(c)
            else:
                for j in range(P):
                    v = h - (t - (j - h) * c) / s
                    i0 = int(math.floor(v))
                    w = v - i0
                    if 0 <= i0 < P:
                        acc += (1.0 - w) * img[i0, j]
                    if 0 <= i0 + 1 < P:
                        acc += w * img[i0 + 1, j]
                out[k, n] = acc / abs(s)


@njit
def ss_adjoint(sino, cos_a, sin_a, vertical, det, out):
    P = out.shape[0]
    h = (P - 1) / 2.0
    for k in range(cos_a.shape[0]):
        c = cos_a[k]
        s = sin_a[k]
        for n in range(det.shape[0]):
            t = det[n]
            if vertical[k]:
                g = sino[k, n] / abs(c)
                for i in range(P):
                    u = (t - (h - i) * s) / c + h
                    j0 = int(math.floor(u))
                    w = u - j0
                    if 0 <= j0 < P:
                        out[i, j0] += (1.0 - w) * g
                    if 0 <= j0 + 1 < P:
                        out[i, j0 + 1] += w * g
            else:
                g = sino[k, n] / abs(s)
                for j in range(P):
                    v = h - (t - (j - h) * c) / s
                    i0 = int(math.floor(v))
                    w = v - i0
                    if 0 <= i0 < P:
                        out[i0, j] += (1.0 - w) * g
                    if 0 <= i0 + 1 < P:
                        out[i0 + 1, j] += w * g


# --------------------------------------------------------------------------
# gridding: Cartesian <-> polar kernel interpolation
# --------------------------------------------------------------------------


@njit
def grid_gather(H, by, bx, wy, wx, out):
    K = H.shape[0]
    J = wx.shape[2]
    for k in range(out.shape[0]):
        for m in range(out.shape[1]):
            r0 = by[k, m]
            c0 = bx[k, m]
            acc = 0.0 + 0.0j
            for a in range(J):
                r = (r0 + a) % K
                row = 0.0 + 0.0j
                for b in range(J):
                    row += wx[k, m, b] * H[r, (c0 + b) % K]
                acc += wy[k, m, a] * row
            out[k, m] = acc


@njit
def grid_scatter(G, by, bx, wy, wx, H):
    K = H.shape[0]
    J = wx.shape[2]
    for k in range(G.shape[0]):
        for m in range(G.shape[1]):
            r0 = by[k, m]
            c0 = bx[k, m]
            g = G[k, m]
            for a in range(J):
                r = (r0 + a) % K
                ga = wy[k, m, a] * g
                for b in range(J):
                    H[r, (c0 + b) % K] += wx[k, m, b] * ga
