"""Brute-force oracle for the texture-block decision, shared by the codec
tests and the acceptance suite.

Instead of the implementation's corner-bbox shortcut, this maps every pixel
of the block, takes the extremes over all mapped coordinates, expands by the
1-px interpolation support, and enumerates the source cells from integer
pixel positions."""

import numpy as np

from texcodec.datasets import TEXTURE
from texcodec.frames import BLOCK


def is_texture_block_oracle(rect, cur_mask, ref_mask, m, ref_w, ref_h):
    for py in range(rect.y, rect.y + rect.size):
        for px in range(rect.x, rect.x + rect.size):
            if cur_mask.labels[py // BLOCK, px // BLOCK] != TEXTURE:
                return False
    yy, xx = np.mgrid[rect.y:rect.y + rect.size,
                      rect.x:rect.x + rect.size].astype(np.float64)
    wx, wy = m.apply(xx, yy)
    x0, x1 = wx.min() - 1.0, wx.max() + 1.0
    y0, y1 = wy.min() - 1.0, wy.max() + 1.0
    if x0 < 0 or y0 < 0 or x1 > ref_w - 1 or y1 > ref_h - 1:
        return False
    for iy in range(int(np.floor(y0)), int(np.floor(y1)) + 1):
        for ix in range(int(np.floor(x0)), int(np.floor(x1)) + 1):
            if ref_mask.labels[iy // BLOCK, ix // BLOCK] != TEXTURE:
                return False
    return True
