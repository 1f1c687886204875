"""Orthonormal Haar subband decomposition for images and series."""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ShapeError

IMAGE = "image"
PACKET = "packet"


@dataclass
class SubbandSet:
    """The four subbands of one decomposition, in LL, LH, HL, HH order.

    ``original_shape`` is the extent before any edge-replication padding, so the
    inverse can crop back exactly.
    """

    ll: np.ndarray
    lh: np.ndarray
    hl: np.ndarray
    hh: np.ndarray
    kind: str = IMAGE
    original_shape: Optional[Tuple[int, ...]] = None

    def __post_init__(self):
        shapes = {band.shape for band in self.bands()}
        if len(shapes) != 1:
            raise ShapeError(f"subband shapes differ: {sorted(shapes)}")

    def bands(self):
        return (self.ll, self.lh, self.hl, self.hh)

    @property
    def shape(self):
        return self.ll.shape

    def energy(self) -> float:
        return float(sum(np.sum(band ** 2) for band in self.bands()))


def subband_energy(subbands: SubbandSet) -> dict:
    """Energy per subband, keyed ll, lh, hl, hh."""
    return {name: float(np.sum(band ** 2)) for name, band in zip(("ll", "lh", "hl", "hh"), subbands.bands())}


def pad_to_multiple(x, multiple: int, axis: int = -1) -> Tuple[np.ndarray, int]:
    """Edge-replicate ``x`` along ``axis`` to a multiple of ``multiple``; return (padded, original length)."""
    x = np.asarray(x, dtype=np.float64)
    length = x.shape[axis]
    extra = (-length) % multiple
    if extra == 0:
        return x, length
    widths = [(0, 0)] * x.ndim
    widths[axis] = (0, extra)
    return np.pad(x, widths, mode="edge"), length


def haar_dwt2d(image) -> SubbandSet:
    """One-level 2-D Haar transform over the two trailing axes.

    Odd extents are edge-replicated to even first; the original shape is kept.
    """
    x = np.asarray(image, dtype=np.float64)
    if x.ndim < 2 or x.size == 0:
        raise ShapeError(f"haar_dwt2d needs a non-empty ...xHxW input, got shape {x.shape}")
    original = x.shape
    x, _ = pad_to_multiple(x, 2, axis=-2)
    x, _ = pad_to_multiple(x, 2, axis=-1)
    a = x[..., 0::2, 0::2]
    b = x[..., 0::2, 1::2]
    c = x[..., 1::2, 0::2]
    d = x[..., 1::2, 1::2]
    return SubbandSet(
        ll=(a + b + c + d) / 2,
        lh=(a - b + c - d) / 2,
        hl=(a + b - c - d) / 2,
        hh=(a - b - c + d) / 2,
        kind=IMAGE,
        original_shape=original,
    )


def haar_idwt2d(subbands: SubbandSet) -> np.ndarray:
    """Exact inverse of :func:`haar_dwt2d`, cropped to the recorded original shape."""
    ll, lh, hl, hh = subbands.bands()
    if ll.ndim < 2:
        raise ShapeError(f"haar_idwt2d needs ...xHxW subbands, got {ll.shape}")
    height, width = ll.shape[-2:]
    out = np.empty(ll.shape[:-2] + (2 * height, 2 * width))
    out[..., 0::2, 0::2] = (ll + lh + hl + hh) / 2
    out[..., 0::2, 1::2] = (ll - lh + hl - hh) / 2
    out[..., 1::2, 0::2] = (ll + lh - hl - hh) / 2
    out[..., 1::2, 1::2] = (ll - lh - hl + hh) / 2
    if subbands.original_shape is not None:
        rows, cols = subbands.original_shape[-2:]
        out = out[..., :rows, :cols]
    return out


def wavelet_packet1d(series, depth: int = 2) -> SubbandSet:
    """Depth-2 Haar wavelet packet along the trailing axis.

    Per block [a, b, c, d]: AA -> ll, AD -> lh, DA -> hl, DD -> hh.
    """
    if depth != 2:
        raise ShapeError(f"only depth 2 is supported, got {depth}")
    x = np.asarray(series, dtype=np.float64)
    if x.ndim < 1 or x.shape[-1] == 0:
        raise ShapeError(f"wavelet_packet1d needs a non-empty series, got shape {x.shape}")
    if x.shape[-1] % 4:
        raise ShapeError(f"series length {x.shape[-1]} is not divisible by 4; pad first")
    a, b, c, d = (x[..., k::4] for k in range(4))
    return SubbandSet(
        ll=(a + b + c + d) / 2,
        lh=(a + b - c - d) / 2,
        hl=(a - b + c - d) / 2,
        hh=(a - b - c + d) / 2,
        kind=PACKET,
        original_shape=x.shape,
    )


def inverse_wavelet_packet1d(subbands: SubbandSet) -> np.ndarray:
    """Exact inverse of :func:`wavelet_packet1d`."""
    aa, ad, da, dd = subbands.bands()
    out = np.empty(aa.shape[:-1] + (4 * aa.shape[-1],))
    out[..., 0::4] = (aa + ad + da + dd) / 2
    out[..., 1::4] = (aa + ad - da - dd) / 2
    out[..., 2::4] = (aa - ad + da - dd) / 2
    out[..., 3::4] = (aa - ad - da + dd) / 2
    if subbands.original_shape is not None:
        out = out[..., :subbands.original_shape[-1]]
    return out


def _channel_axis(kind, ndim):
    axis = ndim - 3 if kind == IMAGE else ndim - 2
    return axis if axis >= 0 else None


def subband_stack(subbands: SubbandSet) -> np.ndarray:
    """Concatenate LL, LH, HL, HH along the channel axis, quadrupling the channel count.

    Bands without a channel axis (a bare HxW image or a bare series) gain a
    leading channel axis of size 4.
    """
    axis = _channel_axis(subbands.kind, subbands.ll.ndim)
    if axis is None:
        return np.stack(subbands.bands(), axis=0)
    return np.concatenate(subbands.bands(), axis=axis)


def subband_unstack(stacked, kind: str = IMAGE, original_shape=None, bare=False) -> SubbandSet:
    """Split a channel-stacked tensor back into its four subbands."""
    x = np.asarray(stacked, dtype=np.float64)
    if bare:
        if x.shape[0] != 4:
            raise ShapeError(f"expected a leading axis of 4 subbands, got {x.shape}")
        return SubbandSet(*x, kind=kind, original_shape=original_shape)
    axis = _channel_axis(kind, x.ndim)
    if axis is None or x.shape[axis] % 4:
        raise ShapeError(f"cannot split shape {x.shape} into four subbands")
    return SubbandSet(*np.split(x, 4, axis=axis), kind=kind, original_shape=original_shape)
