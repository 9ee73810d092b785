"""PAN-guided denoising network.

A grayscale guide image is distilled into a three-level feature pyramid; the
noisy spectral-feature map passes through a U-shaped stack of attention
blocks. Each block mixes channel self-attention on the spectral features with
spatial cross-attention driven by the guide, and rescales the result by the
per-token cosine agreement between guide and spectral features before a
conventional FFN residual.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import (Tensor, concat, conv2d, conv_transpose2d,
                     cosine_lastdim, gelu, layer_norm, matmul, reshape,
                     softmax_lastdim, transpose)


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    vals = rng.standard_normal(shape) * std
    return np.clip(vals, -2 * std, 2 * std)


class Module:
    """Minimal parameter container; collects Tensors recursively by name."""

    def params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                out[name] = val
            elif isinstance(val, Module):
                for k, v in val.params().items():
                    out[f"{name}.{k}"] = v
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        for k, v in item.params().items():
                            out[f"{name}.{i}.{k}"] = v
        return out

    def load_params(self, flat: dict[str, np.ndarray], prefix: str = ""):
        own = self.params()
        for name, tensor in own.items():
            key = prefix + name
            if key not in flat:
                raise ConfigError(f"checkpoint missing parameter {key!r}")
            arr = np.asarray(flat[key])
            if arr.shape != tensor.shape:
                raise ShapeError(f"parameter {key!r}: shape {arr.shape} != {tensor.shape}")
            tensor.data = arr.astype(tensor.dtype)


def _param(rng, shape, std=0.02, zero=False) -> Tensor:
    data = np.zeros(shape) if zero else trunc_normal(rng, shape, std)
    return Tensor(data, requires_grad=True)


# -- window partitioning -------------------------------------------------------

def partition(x: Tensor, m: int, mode: str) -> Tensor:
    """H x W x D map -> B x N x D token groups.

    ``local``: each group is one m x m window (B = HW/m^2, N = m^2).
    ``grid``: each group gathers the same in-window position across all
    windows (B = m^2, N = HW/m^2).
    """
    h, w, d = x.shape
    if h % m or w % m:
        raise ShapeError(f"window side {m} does not divide spatial extents {(h, w)}")
    x5 = reshape(x, (h // m, m, w // m, m, d))
    if mode == "local":
        t = transpose(x5, (0, 2, 1, 3, 4))
        return reshape(t, ((h // m) * (w // m), m * m, d))
    if mode == "grid":
        t = transpose(x5, (1, 3, 0, 2, 4))
        return reshape(t, (m * m, (h // m) * (w // m), d))
    raise ConfigError(f"unknown window mode {mode!r}")


def unpartition(tok: Tensor, m: int, mode: str, h: int, w: int) -> Tensor:
    d = tok.shape[-1]
    if mode == "local":
        t = reshape(tok, (h // m, w // m, m, m, d))
        t = transpose(t, (0, 2, 1, 3, 4))
    elif mode == "grid":
        t = reshape(tok, (m, m, h // m, w // m, d))
        t = transpose(t, (2, 0, 3, 1, 4))
    else:
        raise ConfigError(f"unknown window mode {mode!r}")
    return reshape(t, (h, w, d))


def layout_counts(h: int, w: int, m: int, mode: str) -> tuple[int, int]:
    """(groups B, tokens-per-group N) for a layout."""
    if mode == "local":
        return (h * w) // (m * m), m * m
    return m * m, (h * w) // (m * m)


# -- configuration ------------------------------------------------------------

@dataclass
class ArchConfig:
    """Static shape/toggle description of the denoiser; hashed into checkpoints."""

    bands: int
    height: int
    width: int
    window: int = 8
    base_width: int | None = None
    heads: tuple[int, int, int] = (1, 2, 4)
    ffn_expand: int = 4
    use_crw: bool = True
    use_mhac: bool = True
    use_mhas: bool = True

    def __post_init__(self):
        if self.base_width is None:
            self.base_width = self.bands
        d, m = self.base_width, self.window
        if self.height % (4 * m) or self.width % (4 * m):
            raise ConfigError(
                f"spatial extents {(self.height, self.width)} must be divisible by 4*window={4 * m}")
        if d % 2:
            raise ConfigError("base width must be even (guide width is half)")
        for lvl in range(3):
            if self.guide_width(lvl) % self.heads[lvl]:
                raise ConfigError(
                    f"level {lvl}: guide width {self.guide_width(lvl)} "
                    f"not divisible by {self.heads[lvl]} heads")

    def level_width(self, lvl: int) -> int:
        return self.base_width * (1 << lvl)

    def guide_width(self, lvl: int) -> int:
        return self.level_width(lvl) // 2

    def level_extent(self, lvl: int) -> tuple[int, int]:
        return self.height >> lvl, self.width >> lvl

    def to_items(self) -> list[tuple[str, str]]:
        return [("bands", str(self.bands)), ("height", str(self.height)),
                ("width", str(self.width)), ("window", str(self.window)),
                ("base_width", str(self.base_width)),
                ("heads", ",".join(map(str, self.heads))),
                ("ffn_expand", str(self.ffn_expand)),
                ("use_crw", str(int(self.use_crw))),
                ("use_mhac", str(int(self.use_mhac))),
                ("use_mhas", str(int(self.use_mhas)))]


# -- attention block ------------------------------------------------------------

def _split_heads(t: Tensor, heads: int) -> Tensor:
    b, n, c = t.shape
    return transpose(reshape(t, (b, n, heads, c // heads)), (0, 2, 1, 3))


def _merge_heads(t: Tensor) -> Tensor:
    b, h, n, ch = t.shape
    return reshape(transpose(t, (0, 2, 1, 3)), (b, n, h * ch))


class AttentionBlock(Module):
    """One shape-preserving guided block operating on a fixed window layout.

    With the residual-path output weights (value reweighting projection and
    second FFN matrix) zeroed this block is the exact identity.
    """

    def __init__(self, cfg: ArchConfig, level: int, mode: str,
                 rng: np.random.Generator, identity_init: bool = True):
        self.cfg = cfg
        self.level = level
        self.mode = mode
        dim = cfg.level_width(level)
        gdim = cfg.guide_width(level)
        heads = cfg.heads[level]
        h, w = cfg.level_extent(level)
        _, n = layout_counts(h, w, cfg.window, mode)
        self.dim, self.gdim, self.heads, self.n_tokens = dim, gdim, heads, n

        self.ln1_g = Tensor(np.ones(dim), requires_grad=True)
        self.ln1_b = Tensor(np.zeros(dim), requires_grad=True)
        self.ln2_g = Tensor(np.ones(dim), requires_grad=True)
        self.ln2_b = Tensor(np.zeros(dim), requires_grad=True)

        self.w_v1 = _param(rng, (dim, gdim))
        self.w_v2 = _param(rng, (dim, gdim))
        if cfg.use_mhac:
            self.w_q1 = _param(rng, (dim, gdim))
            self.w_k1 = _param(rng, (dim, gdim))
            self.pos1 = Tensor(np.zeros((heads, gdim // heads, gdim // heads)),
                               requires_grad=True)
        if cfg.use_mhas or cfg.use_crw:
            self.w_q2 = _param(rng, (gdim, gdim))
        if cfg.use_mhas:
            self.w_k2 = _param(rng, (gdim, gdim))
            self.pos2 = Tensor(np.zeros((heads, n, n)), requires_grad=True)
        if cfg.use_crw:
            self.w_k3 = _param(rng, (dim, gdim))
            self.w_v3 = _param(rng, (dim, dim), zero=identity_init)

        hid = cfg.ffn_expand * dim
        self.ffn_w1 = _param(rng, (dim, hid))
        self.ffn_b1 = Tensor(np.zeros(hid), requires_grad=True)
        self.ffn_w2 = _param(rng, (hid, dim), zero=identity_init)
        self.ffn_b2 = Tensor(np.zeros(dim), requires_grad=True)

    # attention over the channel axis of the spectral features
    def _mha_c(self, xn: Tensor) -> Tensor:
        ch = self.gdim // self.heads
        q1 = transpose(_split_heads(matmul(xn, self.w_q1), self.heads), (0, 1, 3, 2))
        k1 = transpose(_split_heads(matmul(xn, self.w_k1), self.heads), (0, 1, 3, 2))
        v1 = transpose(_split_heads(matmul(xn, self.w_v1), self.heads), (0, 1, 3, 2))
        scores = matmul(q1, transpose(k1, (0, 1, 3, 2))) * (1.0 / np.sqrt(self.n_tokens))
        attn = softmax_lastdim(scores + self.pos1)
        out = matmul(attn, v1)  # B x h x ch x N
        return _merge_heads(transpose(out, (0, 1, 3, 2)))

    # cross-attention over spatial tokens, queries/keys from the guide
    def _mha_s(self, xn: Tensor, q2: Tensor, gt: Tensor) -> Tensor:
        ch = self.gdim // self.heads
        q2h = _split_heads(q2, self.heads)
        k2h = _split_heads(matmul(gt, self.w_k2), self.heads)
        v2h = _split_heads(matmul(xn, self.w_v2), self.heads)
        scores = matmul(q2h, transpose(k2h, (0, 1, 3, 2))) * (1.0 / np.sqrt(ch))
        attn = softmax_lastdim(scores + self.pos2)
        return _merge_heads(matmul(attn, v2h))

    def _crw(self, x_intra: Tensor, q2: Tensor) -> Tensor:
        k3 = matmul(x_intra, self.w_k3)
        v3 = matmul(x_intra, self.w_v3)
        return cosine_lastdim(q2, k3) * v3

    def _ffn(self, t: Tensor) -> Tensor:
        return matmul(gelu(matmul(t, self.ffn_w1) + self.ffn_b1), self.ffn_w2) + self.ffn_b2

    def forward(self, x: Tensor, guide: Tensor) -> Tensor:
        h, w, d = x.shape
        if d != self.dim:
            raise ShapeError(f"block expects width {self.dim}, got {d}")
        if guide.shape != (h, w, self.gdim):
            raise ShapeError(f"guide shape {guide.shape} != {(h, w, self.gdim)}")
        m = self.cfg.window
        xt = partition(x, m, self.mode)
        gt = partition(guide, m, self.mode)

        xn = layer_norm(xt, self.ln1_g, self.ln1_b)
        q2 = matmul(gt, self.w_q2) if (self.cfg.use_mhas or self.cfg.use_crw) else None

        x1 = self._mha_c(xn) if self.cfg.use_mhac else matmul(xn, self.w_v1)
        x2 = self._mha_s(xn, q2, gt) if self.cfg.use_mhas else matmul(xn, self.w_v2)
        x_intra = concat([x1, x2], axis=-1)

        delta = self._crw(x_intra, q2) if self.cfg.use_crw else x_intra
        mid = xt + delta
        out = mid + self._ffn(layer_norm(mid, self.ln2_g, self.ln2_b))
        return unpartition(out, m, self.mode, h, w)


# -- guide pyramid ---------------------------------------------------------------

class GuideExtractor(Module):
    """Three-level convolutional pyramid from the panchromatic image.

    Widths follow the half-width rule (guide width = half the spectral
    feature width at each level); stride-2 convolutions step down levels.
    """

    def __init__(self, cfg: ArchConfig, rng: np.random.Generator):
        self.cfg = cfg
        g0, g1, g2 = (cfg.guide_width(l) for l in range(3))
        self.c1_w = _param(rng, (3, 3, 1, g0), std=0.1)
        self.c1_b = Tensor(np.zeros(g0), requires_grad=True)
        self.c2_w = _param(rng, (3, 3, g0, g1), std=0.1)
        self.c2_b = Tensor(np.zeros(g1), requires_grad=True)
        self.c3_w = _param(rng, (3, 3, g1, g2), std=0.1)
        self.c3_b = Tensor(np.zeros(g2), requires_grad=True)

    def forward(self, pan: Tensor) -> list[Tensor]:
        if pan.ndim != 2:
            raise ShapeError(f"guide extractor expects a 2-d image, got {pan.shape}")
        h, w = pan.shape
        if h % 4 or w % 4:
            raise ShapeError(f"guide image extents {(h, w)} must be divisible by 4")
        x = reshape(pan, (h, w, 1))
        g1 = gelu(conv2d(x, self.c1_w, self.c1_b))
        g2 = gelu(conv2d(g1, self.c2_w, self.c2_b, stride=2))
        g3 = gelu(conv2d(g2, self.c3_w, self.c3_b, stride=2))
        return [g1, g2, g3]


# -- U-shaped denoiser --------------------------------------------------------------

class GuidedDenoiser(Module):
    """Residual denoiser: noise level enters as a constant channel, guide
    features steer each attention block, output adds back the input."""

    def __init__(self, cfg: ArchConfig, rng: np.random.Generator,
                 identity_init: bool = True):
        self.cfg = cfg
        c, d = cfg.bands, cfg.base_width
        self.head_w = _param(rng, (3, 3, c + 1, d), std=0.1)
        self.head_b = Tensor(np.zeros(d), requires_grad=True)

        self.enc0 = AttentionBlock(cfg, 0, "local", rng, identity_init)
        self.down1_w = _param(rng, (3, 3, d, 2 * d), std=0.1)
        self.down1_b = Tensor(np.zeros(2 * d), requires_grad=True)
        self.enc1 = AttentionBlock(cfg, 1, "grid", rng, identity_init)
        self.down2_w = _param(rng, (3, 3, 2 * d, 4 * d), std=0.1)
        self.down2_b = Tensor(np.zeros(4 * d), requires_grad=True)
        self.mid = AttentionBlock(cfg, 2, "grid", rng, identity_init)

        self.up1_w = _param(rng, (2, 2, 4 * d, 2 * d), std=0.1)
        self.fuse1_w = _param(rng, (1, 1, 4 * d, 2 * d), std=0.1)
        self.fuse1_b = Tensor(np.zeros(2 * d), requires_grad=True)
        self.dec1 = AttentionBlock(cfg, 1, "grid", rng, identity_init)

        self.up0_w = _param(rng, (2, 2, 2 * d, d), std=0.1)
        self.fuse0_w = _param(rng, (1, 1, 2 * d, d), std=0.1)
        self.fuse0_b = Tensor(np.zeros(d), requires_grad=True)
        self.dec0 = AttentionBlock(cfg, 0, "local", rng, identity_init)

        # zero tail keeps the whole denoiser an exact identity at start
        if identity_init:
            self.tail_w = Tensor(np.zeros((3, 3, d, c)), requires_grad=True)
        else:
            self.tail_w = _param(rng, (3, 3, d, c), std=0.1)
        self.tail_b = Tensor(np.zeros(c), requires_grad=True)

    def forward(self, x: Tensor, sigma, pyramid: list[Tensor]) -> Tensor:
        cfg = self.cfg
        h, w, c = x.shape
        if (h, w, c) != (cfg.height, cfg.width, cfg.bands):
            raise ShapeError(f"denoiser built for {(cfg.height, cfg.width, cfg.bands)}, got {x.shape}")
        if not isinstance(sigma, Tensor):
            sigma = Tensor(float(sigma))
        s_chan = Tensor(np.ones((h, w, 1))) * sigma
        f0 = conv2d(concat([x, s_chan], axis=-1), self.head_w, self.head_b)

        e0 = self.enc0.forward(f0, pyramid[0])
        f1 = conv2d(e0, self.down1_w, self.down1_b, stride=2)
        e1 = self.enc1.forward(f1, pyramid[1])
        f2 = conv2d(e1, self.down2_w, self.down2_b, stride=2)
        b = self.mid.forward(f2, pyramid[2])

        u1 = conv_transpose2d(b, self.up1_w)
        d1 = conv2d(concat([u1, e1], axis=-1), self.fuse1_w, self.fuse1_b)
        d1 = self.dec1.forward(d1, pyramid[1])

        u0 = conv_transpose2d(d1, self.up0_w)
        d0 = conv2d(concat([u0, e0], axis=-1), self.fuse0_w, self.fuse0_b)
        d0 = self.dec0.forward(d0, pyramid[0])

        return x + conv2d(d0, self.tail_w, self.tail_b)


# -- multiply-accumulate counting -----------------------------------------------

def _conv_macs(h, w, k, cin, cout, stride=1):
    return (h // stride) * (w // stride) * k * k * cin * cout


def block_macs(cfg: ArchConfig, level: int, mode: str) -> dict[str, int]:
    h, w = cfg.level_extent(level)
    dim, gdim, heads = cfg.level_width(level), cfg.guide_width(level), cfg.heads[level]
    b, n = layout_counts(h, w, cfg.window, mode)
    ch = gdim // heads
    out = {"proj_v": 2 * b * n * dim * gdim,
           "ffn": 2 * b * n * dim * cfg.ffn_expand * dim,
           "mhac": 0, "mhas": 0, "crw": 0}
    if cfg.use_mhac:
        out["mhac"] = 2 * b * n * dim * gdim + 2 * b * heads * ch * ch * n
    if cfg.use_mhas or cfg.use_crw:
        out["q2"] = b * n * gdim * gdim
    else:
        out["q2"] = 0
    if cfg.use_mhas:
        out["mhas"] = b * n * gdim * gdim + 2 * b * heads * n * n * ch
    if cfg.use_crw:
        out["crw"] = b * n * dim * gdim + b * n * dim * dim + 3 * b * n * gdim
    return out


def denoiser_macs(cfg: ArchConfig) -> int:
    h, w, c, d = cfg.height, cfg.width, cfg.bands, cfg.base_width
    total = _conv_macs(h, w, 3, c + 1, d) + _conv_macs(h, w, 3, d, c)
    total += _conv_macs(h, w, 3, d, 2 * d, 2) + _conv_macs(h // 2, w // 2, 3, 2 * d, 4 * d, 2)
    total += (h // 2) * (w // 2) * 4 * (4 * d) * (2 * d)  # up1 transposed conv
    total += _conv_macs(h // 2, w // 2, 1, 4 * d, 2 * d)
    total += h * w * 4 * (2 * d) * d + _conv_macs(h, w, 1, 2 * d, d)
    for level, mode in ((0, "local"), (1, "grid"), (2, "grid"), (1, "grid"), (0, "local")):
        total += sum(block_macs(cfg, level, mode).values())
    return total


def gfe_macs(cfg: ArchConfig) -> int:
    h, w = cfg.height, cfg.width
    g0, g1, g2 = (cfg.guide_width(l) for l in range(3))
    return (_conv_macs(h, w, 3, 1, g0) + _conv_macs(h, w, 3, g0, g1, 2)
            + _conv_macs(h // 2, w // 2, 3, g1, g2, 2))


def cg_macs(cfg: ArchConfig, iters: int) -> int:
    n = cfg.height * cfg.width * cfg.bands
    return iters * (4 * n + 6 * n)  # one normal-operator apply + vector updates


def pipeline_macs(cfg: ArchConfig, stages: int, cg_iters: int) -> int:
    return gfe_macs(cfg) + stages * (cg_macs(cfg, cg_iters) + denoiser_macs(cfg))
