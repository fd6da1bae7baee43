"""Vectorised numpy kernels, same signatures as ``_kernels_numba``.

These are independent formulations of the same matrices rather than
transliterated loops: ray-driven weights come from the closed-form chord
length of a line through a unit square, and distance-driven overlaps from
differences of cumulative integrals. They serve as the fallback backend and
as a cross-check of the loop kernels.
"""

import numpy as np

from tomocouple.core import pixel_centers


def _flat_centers(P):
    x1, x2 = pixel_centers(P)
    return x1.ravel(), x2.ravel()


# --------------------------------------------------------------------------
# pixel-driven
# --------------------------------------------------------------------------


def _pd_weights(P, c, s, n_cells):
    h = (P - 1) / 2.0
    hn = (n_cells - 1) / 2.0
    j = np.arange(P, dtype=np.float64)
    i = np.arange(P, dtype=np.float64)
    base = ((h - i) * s + hn)[:, None]
    u = ((j - h) * c)[None, :] + base
    n0 = np.floor(u)
    w = u - n0
    return n0.astype(np.int64).ravel(), w.ravel()


def pd_forward(img, cos_a, sin_a, n_cells, out):
    P = img.shape[0]
    v = img.ravel()
    for k in range(cos_a.shape[0]):
        n0, w = _pd_weights(P, cos_a[k], sin_a[k], n_cells)
        for idx, wt in ((n0, 1.0 - w), (n0 + 1, w)):
            ok = (idx >= 0) & (idx < n_cells)
            out[k] += np.bincount(idx[ok], weights=wt[ok] * v[ok], minlength=n_cells)


def pd_adjoint(sino, cos_a, sin_a, P, out):
    n_cells = sino.shape[1]
    acc = np.zeros(P * P)
    for k in range(cos_a.shape[0]):
        n0, w = _pd_weights(P, cos_a[k], sin_a[k], n_cells)
        row = np.concatenate(([0.0], sino[k], [0.0]))
        # shift by one so that out-of-range cells hit the zero guards
        lo = np.clip(n0 + 1, 0, n_cells + 1)
        hi = np.clip(n0 + 2, 0, n_cells + 1)
        acc += (1.0 - w) * row[lo] + w * row[hi]
    out += acc.reshape(P, P)


# --------------------------------------------------------------------------
# ray-driven: chord length of the ray through each unit pixel
# --------------------------------------------------------------------------


def _chord_weights(P, c, s, det):
    """Sparse (pixel, cell, length) triplets of one view.

    A line at signed distance ``d`` from a unit square's center, with normal
    ``(c, s)``, crosses it over a trapezoidal profile in ``d``.
    """
    x1, x2 = _flat_centers(P)
    big = max(abs(c), abs(s))
    small = min(abs(c), abs(s))
    lo = 0.5 * (big - small)
    hi = 0.5 * (big + small)
    proj = x1 * c + x2 * s
    n_first = np.floor(proj - hi - det[0]).astype(np.int64)
    pix, cells, lens = [], [], []
    for off in range(4):
        n = n_first + off
        ok = (n >= 0) & (n < det.shape[0])
        d = np.abs(det[np.clip(n, 0, det.shape[0] - 1)] - proj)
        length = np.where(d <= lo, 1.0 / big, 0.0)
        if small > 0.0:
            ramp = (d > lo) & (d < hi)
            length = np.where(ramp, (hi - d) / (big * small), length)
        ok &= length > 0.0
        pix.append(np.nonzero(ok)[0])
        cells.append(n[ok])
        lens.append(length[ok])
    return np.concatenate(pix), np.concatenate(cells), np.concatenate(lens)


def rd_forward(img, cos_a, sin_a, det, out):
    P = img.shape[0]
    v = img.ravel()
    for k in range(cos_a.shape[0]):
        pix, cells, lens = _chord_weights(P, cos_a[k], sin_a[k], det)
        out[k] = np.bincount(cells, weights=lens * v[pix], minlength=det.shape[0])


def rd_adjoint(sino, cos_a, sin_a, det, out):
    P = out.shape[0]
    acc = np.zeros(P * P)
    for k in range(cos_a.shape[0]):
        pix, cells, lens = _chord_weights(P, cos_a[k], sin_a[k], det)
        acc += np.bincount(pix, weights=lens * sino[k, cells], minlength=P * P)
    out += acc.reshape(P, P)


# --------------------------------------------------------------------------
# distance-driven: differences of cumulative integrals along each line
# --------------------------------------------------------------------------


def _cumulative_at(values, start, step, q):
    """Evaluate the running integral of a piecewise-constant profile.

    ``values[..., m]`` occupies ``[start + m*step, start + (m+1)*step]``;
    ``start`` and ``step`` are scalars or per-line ``(L, 1)`` columns.
    """
    n = values.shape[-1]
    cum = np.concatenate([np.zeros(values.shape[:-1] + (1,)), np.cumsum(values, axis=-1) * step], axis=-1)
    pos = (q - start) / step
    pos = np.clip(pos, 0.0, float(n))
    m = np.minimum(np.floor(pos).astype(np.int64), n - 1)
    frac = pos - m
    take = np.take_along_axis
    return take(cum, m, axis=-1) + frac * step * take(values, m, axis=-1)


def _dd_lines(P, N, c, s, use_columns, det):
    """Per-line cell boundaries (ascending), and whether cell order is reversed."""
    h = (P - 1) / 2.0
    centers = np.arange(P) - h
    if use_columns:
        tb = det[0] - 0.5 + np.arange(N + 1)
        bounds = (tb[None, :] - centers[:, None] * c) / s
        return bounds, False
    reverse = c < 0
    m = np.arange(N + 1)
    tb = det[N - 1] + 0.5 - m if reverse else det[0] - 0.5 + m
    bounds = (tb[None, :] - (h - np.arange(P))[:, None] * s) / c
    return bounds, reverse


def _dd_image_lines(img, use_columns):
    # lines in ascending coordinate order along the overlap axis
    if use_columns:
        return img[::-1, :].T
    return img


def dd_forward(img, cos_a, sin_a, columns, det, out):
    P = img.shape[0]
    N = det.shape[0]
    half = P / 2.0
    for k in range(cos_a.shape[0]):
        bounds, reverse = _dd_lines(P, N, cos_a[k], sin_a[k], columns[k], det)
        lines = _dd_image_lines(img, columns[k])
        F = _cumulative_at(lines, -half, 1.0, bounds)
        vals = (F[:, 1:] - F[:, :-1]).sum(axis=0)
        out[k] += vals[::-1] if reverse else vals


def dd_adjoint(sino, cos_a, sin_a, columns, det, out):
    P = out.shape[0]
    N = det.shape[0]
    half = P / 2.0
    edges = -half + np.arange(P + 1, dtype=np.float64)
    for k in range(cos_a.shape[0]):
        bounds, reverse = _dd_lines(P, N, cos_a[k], sin_a[k], columns[k], det)
        g = sino[k, ::-1] if reverse else sino[k]
        step = bounds[:, 1:2] - bounds[:, 0:1]
        # cell values per unit length, so that the running integral is in
        # overlap-length units
        dens = np.broadcast_to(g[None, :], (P, N))
        Hq = _cumulative_at(dens, bounds[:, 0:1], step, np.broadcast_to(edges, (P, P + 1)))
        lines = Hq[:, 1:] - Hq[:, :-1]
        if columns[k]:
            out += lines.T[::-1, :]
        else:
            out += lines


# --------------------------------------------------------------------------
# slant stacking
# --------------------------------------------------------------------------


def _ss_taps(P, c, s, vertical, det):
    """Interpolation taps of one view as (cell, row, col, weight) arrays."""
    h = (P - 1) / 2.0
    line = np.arange(P, dtype=np.float64)
    t = det[:, None]
    if vertical:
        u = (t - (h - line)[None, :] * s) / c + h
        scale = 1.0 / abs(c)
    else:
        u = h - (t - (line - h)[None, :] * c) / s
        scale = 1.0 / abs(s)
    f0 = np.floor(u)
    w = u - f0
    f0 = f0.astype(np.int64)
    cells = np.broadcast_to(np.arange(det.shape[0])[:, None], u.shape)
    fixed = np.broadcast_to(np.arange(P)[None, :], u.shape)
    out = []
    for idx, wt in ((f0, 1.0 - w), (f0 + 1, w)):
        ok = (idx >= 0) & (idx < P)
        if vertical:
            rows, cols = fixed[ok], idx[ok]
        else:
            rows, cols = idx[ok], fixed[ok]
        out.append((cells[ok], rows, cols, wt[ok] * scale))
    return out


def ss_forward(img, cos_a, sin_a, vertical, det, out):
    P = img.shape[0]
    N = det.shape[0]
    for k in range(cos_a.shape[0]):
        for cells, rows, cols, wt in _ss_taps(P, cos_a[k], sin_a[k], vertical[k], det):
            out[k] += np.bincount(cells, weights=wt * img[rows, cols], minlength=N)


def ss_adjoint(sino, cos_a, sin_a, vertical, det, out):
    P = out.shape[0]
    acc = np.zeros(P * P)
    for k in range(cos_a.shape[0]):
        for cells, rows, cols, wt in _ss_taps(P, cos_a[k], sin_a[k], vertical[k], det):
            acc += np.bincount(rows * P + cols, weights=wt * sino[k, cells], minlength=P * P)
    out += acc.reshape(P, P)


# --------------------------------------------------------------------------
# gridding interpolation
# --------------------------------------------------------------------------

_CHUNK = 16


def grid_gather(H, by, bx, wy, wx, out):
    K = H.shape[0]
    J = wx.shape[2]
    taps = np.arange(J)
    for k0 in range(0, out.shape[0], _CHUNK):
        sl = slice(k0, k0 + _CHUNK)
        rows = (by[sl, :, None] + taps) % K
        cols = (bx[sl, :, None] + taps) % K
        patch = H[rows[..., :, None], cols[..., None, :]]
        out[sl] = np.einsum("kma,kmb,kmab->km", wy[sl], wx[sl], patch)


def grid_scatter(G, by, bx, wy, wx, H):
    K = H.shape[0]
    J = wx.shape[2]
    taps = np.arange(J)
    flat = np.zeros(K * K, dtype=np.complex128)
    for k0 in range(0, G.shape[0], _CHUNK):
        sl = slice(k0, k0 + _CHUNK)
        rows = (by[sl, :, None] + taps) % K
        cols = (bx[sl, :, None] + taps) % K
        idx = (rows[..., :, None] * K + cols[..., None, :]).ravel()
        w = (wy[sl][..., :, None] * wx[sl][..., None, :] * G[sl][..., None, None]).ravel()
        flat += np.bincount(idx, weights=w.real, minlength=K * K)
        flat += 1j * np.bincount(idx, weights=w.imag, minlength=K * K)
    H += flat.reshape(K, K)
