"""FLOP accounting for the blocks.

Conventions: a convolution costs 2 * k_h * k_w * c_in * c_out * out_h *
out_w (multiply + add; bias not counted); every elementwise op (sigmoid,
SiLU, ReLU, adds, gate multiplies) costs 1 per element; pooling costs 1 per
input element reduced. Block totals are plain sums of their parts, so the
composite-minus-plain difference decomposes exactly into the coordinate-
channel and CBAM increments.
"""

from dataclasses import dataclass


def conv_flops(c_in: int, c_out: int, k_h: int, k_w: int, out_h: int, out_w: int) -> int:
    return 2 * k_h * k_w * c_in * c_out * out_h * out_w


def coordconv_flops(c_in: int, c_out: int, k_h: int, k_w: int, out_h: int, out_w: int) -> int:
    """Plain conv cost with two extra input channels (coordinate channels
    are table lookups and are not counted)."""
    return conv_flops(c_in + 2, c_out, k_h, k_w, out_h, out_w)


def cbam_flops(channels: int, h: int, w: int, reduction: int = 16, spatial_kernel: int = 7) -> int:
    c = channels
    hidden = max(1, c // reduction)
    mlp = 2 * c * hidden + hidden + 2 * hidden * c  # two linears + hidden ReLU
    total = 0
    total += 2 * c * h * w  # average and max spatial pooling
    total += 2 * mlp  # shared MLP on both descriptors
    total += 2 * c  # branch addition + sigmoid
    total += c * h * w  # channel gate multiply
    total += 2 * c * h * w  # channel-wise mean and max maps
    total += conv_flops(2, 1, spatial_kernel, spatial_kernel, h, w)
    total += h * w  # sigmoid on the spatial map
    total += c * h * w  # spatial gate multiply
    return total


@dataclass(frozen=True)
class C2fConfig:
    """Shape configuration shared by the plain and composite blocks."""

    c_in: int
    c_out: int
    h: int
    w: int
    n: int = 1
    reduction: int = 16

    def __post_init__(self):
        if self.c_out % 2 != 0:
            raise ValueError("c_out must be even")

    @property
    def half(self) -> int:
        return self.c_out // 2

    @property
    def cat_channels(self) -> int:
        return (2 + self.n) * self.half


def _bottleneck_flops(ch: int, h: int, w: int) -> int:
    per_conv = conv_flops(ch, ch, 3, 3, h, w) + ch * h * w  # conv + SiLU
    return 2 * per_conv + ch * h * w  # two convs + residual add


def _c2f_core_flops(cfg: C2fConfig, entry_c_in: int) -> int:
    ch, h, w = cfg.half, cfg.h, cfg.w
    total = conv_flops(entry_c_in, 2 * ch, 1, 1, h, w) + 2 * ch * h * w  # entry + SiLU
    total += cfg.n * _bottleneck_flops(ch, h, w)
    total += conv_flops(cfg.cat_channels, cfg.c_out, 1, 1, h, w) + cfg.c_out * h * w  # exit + SiLU
    return total


def c2f_flops(cfg: C2fConfig) -> int:
    """Plain split-bottleneck-concat block (no coordinates, no attention)."""
    return _c2f_core_flops(cfg, cfg.c_in)


def c2f_cd_flops(cfg: C2fConfig) -> int:
    """Composite block: coordinate entry conv plus CBAM on the concatenation."""
    return _c2f_core_flops(cfg, cfg.c_in + 2) + cbam_flops(cfg.cat_channels, cfg.h, cfg.w, cfg.reduction)
