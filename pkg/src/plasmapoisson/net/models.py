"""UNet and MSNet builders with parameter-budget matching."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import torch
from torch import nn

from .layers import ConvStack, branch_sizes, downsample2, downsample_to_branch, upsample2

UNET = "unet"
MSNET = "msnet"


@dataclass(frozen=True)
class NetConfig:
    """Architecture description.

    ``depths[b]`` counts the convolutions acting at branch ``b`` along the
    longest path.  For a UNet the finest branch keeps two of its layers for
    the decoder and every intermediate branch keeps one, so ``depths[0] >= 2``
    and ``depths[b] >= 1``.  ``channels`` may be left empty, in which case
    widths are chosen to match ``budget`` parameters.
    """

    architecture: str = UNET
    depths: tuple = (4, 2, 2)
    k_s: int = 3
    channels: tuple = ()
    budget: int = 30_000
    growth: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.architecture not in (UNET, MSNET):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.k_s < 3 or self.k_s % 2 == 0:
            raise ValueError("kernel size must be odd and >= 3")
        if not self.depths:
            raise ValueError("at least one branch is needed")
        if any(d < 1 for d in self.depths[1:]) or self.depths[0] < 1:
            raise ValueError("every branch needs at least one convolution")
        if self.architecture == UNET and self.n_b > 1 and self.depths[0] < 2:
            raise ValueError("a multi-branch UNet needs depths[0] >= 2")
        if self.channels and len(self.channels) != self.n_b:
            raise ValueError("one channel width per branch is required")

    @property
    def n_b(self) -> int:
        return len(self.depths)

    @property
    def global_depth(self) -> int:
        return sum(self.depths)

    def to_text(self) -> str:
        return "\n".join([
            f"architecture={self.architecture}",
            f"depths={','.join(map(str, self.depths))}",
            f"k_s={self.k_s}",
            f"channels={','.join(map(str, self.channels))}",
            f"budget={self.budget}",
            f"growth={self.growth!r}",
            f"seed={self.seed}",
        ])

    @classmethod
    def from_mapping(cls, entries: dict) -> "NetConfig":
        def ints(v):
            return tuple(int(t) for t in str(v).split(",") if t.strip())

        return cls(entries.get("architecture", UNET), ints(entries.get("depths", "4,2,2")),
                   int(entries.get("k_s", 3)), ints(entries.get("channels", "")),
                   int(entries.get("budget", 30_000)), float(entries.get("growth", 0.5)),
                   int(entries.get("seed", 0)))


def decoder_depths(depths: tuple) -> list[int]:
    """Convolutions run after the skip concatenation at each non-bottom branch."""
    n_b = len(depths)
    return [2 if b == 0 else 1 for b in range(n_b - 1)]


class UNet(nn.Module):
    def __init__(self, depths, channels, k_s):
        super().__init__()
        n_b = len(depths)
        self.n_b = n_b
        if n_b == 1:
            self.single = ConvStack(1, channels[0], 1, depths[0], k_s, last_linear=True)
            return
        dec = decoder_depths(depths)
        self.encoders = nn.ModuleList()
        skip_ch, c_in = [], 1
        for b in range(n_b - 1):
            e = depths[b] - dec[b]
            self.encoders.append(ConvStack(c_in, channels[b], channels[b], e, k_s, False) if e else nn.Identity())
            c_in = channels[b] if e else c_in
            skip_ch.append(c_in)
        self.bottom = ConvStack(c_in, channels[-1], channels[-1], depths[-1], k_s, False)
        self.decoders = nn.ModuleList([None] * (n_b - 1))
        up_ch = channels[-1]
        for b in reversed(range(n_b - 1)):
            out = 1 if b == 0 else channels[b]
            self.decoders[b] = ConvStack(up_ch + skip_ch[b], channels[b], out, dec[b], k_s, last_linear=b == 0)
            up_ch = out

    def output_layer(self) -> nn.Conv2d:
        stack = self.single if self.n_b == 1 else self.decoders[0]
        return stack.body[-1]

    def forward(self, x):
        if self.n_b == 1:
            return self.single(x)
        skips = []
        for enc in self.encoders:
            x = enc(x)
            skips.append(x)
            x = downsample2(x)
        x = self.bottom(x)
        for b in reversed(range(self.n_b - 1)):
            x = upsample2(x, skips[b].shape[-2:])
            x = self.decoders[b](torch.cat([x, skips[b]], dim=1))
        return x


class MSNet(nn.Module):
    """Coarse-to-fine scales, each refining a single-map estimate from the scale below."""

    def __init__(self, depths, channels, k_s):
        super().__init__()
        n_b = len(depths)
        self.n_b = n_b
        self.scales = nn.ModuleList(
            ConvStack(1 if b == n_b - 1 else 2, channels[b], 1, depths[b], k_s, last_linear=True)
            for b in range(n_b)
        )

    def output_layer(self) -> nn.Conv2d:
        return self.scales[0].body[-1]

    def forward(self, x):
        inputs = [x]
        for _ in range(self.n_b - 1):
            inputs.append(downsample2(inputs[-1]))
        out = None
        for b in reversed(range(self.n_b)):
            h = inputs[b] if out is None else torch.cat([inputs[b], upsample2(out, inputs[b].shape[-2:])], dim=1)
            out = self.scales[b](h)
        return out


def branch_widths(width: float, n_b: int, growth: float) -> tuple:
    return tuple(max(1, int(round(width * (1 + growth * b)))) for b in range(n_b))


def _body(config: NetConfig, channels) -> nn.Module:
    cls = UNet if config.architecture == UNET else MSNet
    return cls(config.depths, channels, config.k_s)


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def match_budget(config: NetConfig) -> tuple:
    """Branch widths whose parameter count is closest to ``config.budget``."""
    with torch.device("meta"):
        def count(w):
            return count_parameters(_body(config, branch_widths(w, config.n_b, config.growth)))

        lo, hi = 1, 2
        while count(hi) < config.budget and hi < 4096:
            lo, hi = hi, hi * 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if count(mid) < config.budget:
                lo = mid
            else:
                hi = mid
        best = min((lo, hi), key=lambda w: abs(count(w) - config.budget))
    return branch_widths(best, config.n_b, config.growth)


class Network(nn.Module):
    """A configured UNet or MSNet mapping ``(B, 1, ny, nx)`` charge to potential."""

    def __init__(self, config: NetConfig):
        super().__init__()
        if not config.channels:
            config = replace(config, channels=match_budget(config))
        self.config = config
        gen_state = torch.random.get_rng_state()
        torch.manual_seed(config.seed)
        try:
            self.body = _body(config, config.channels)
            for m in self.modules():
                if isinstance(m, nn.Conv2d):
                    nn.init.kaiming_uniform_(m.weight, nonlinearity="relu")
                    nn.init.zeros_(m.bias)
            # A zero output layer starts training from phi = 0.  A random one
            # produces a rough field whose huge Laplacian drives the last
            # hidden ReLUs dead within the first epoch.
            nn.init.zeros_(self.body.output_layer().weight)
        finally:
            torch.random.set_rng_state(gen_state)
        self.lowest_branch_warning = False

    def forward(self, x):
        return self.body(x)

    @property
    def parameter_count(self) -> int:
        return count_parameters(self)

    def check_input_size(self, n: int) -> bool:
        """Flag inputs whose coarsest branch is no larger than the kernel."""
        coarse = branch_sizes(n, self.config.n_b)[-1]
        self.lowest_branch_warning = coarse <= self.config.k_s
        return self.lowest_branch_warning


def build_network(config: NetConfig, grid=None) -> Network:
    """Instantiate ``config``; with a grid, also flag a too-small lowest branch."""
    net = Network(config)
    if grid is not None:
        if net.check_input_size(min(grid.nx, grid.ny)):
            warnings.warn(
                f"lowest branch of {config.n_b}-branch network on {grid.nx}x{grid.ny} input "
                f"is not larger than the kernel size {config.k_s}",
                stacklevel=2,
            )
    return net
