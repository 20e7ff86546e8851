"""Patch encoder: stem conv, grouped residual stages, pooled embedding.

Spatial layout halves at each stage entry through a 2x2 average pool, so
a 32-pixel patch maps 32 -> 16 -> 8 -> 4 across the default three stages.
Per stage: 1x1 reduce, grouped 3x3 (cardinality paths), 1x1 expand, add
the (possibly projected) shortcut, then one variant block and a ReLU.
Strided convolution is deliberately absent: output extents must divide
exactly, which a stride-2 odd kernel cannot satisfy on even inputs.
"""

from dataclasses import dataclass

import numpy as np

from hscl.engine.layers import (
    CBAM,
    AvgPool2,
    Conv2d,
    Conv3d,
    DepthwiseSeparable,
    GlobalAvgPool,
    Identity,
    Layer,
    Linear,
    ReLU,
    SEGate,
)

VARIANTS = ("conv3d", "dsc", "cbam", "seb", "none")


@dataclass(frozen=True)
class BackboneConfig:
    input_bands: int = 32
    patch_size: int = 32
    variant: str = "seb"
    cardinality: int = 4
    stage_channels: tuple = (32, 64, 128)
    embedding_dim: int = 128
    projection_dim: int = 64

    def __post_init__(self):
        object.__setattr__(self, "stage_channels", tuple(int(w) for w in self.stage_channels))
        self.validate()

    def validate(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        for field in ("input_bands", "patch_size", "cardinality", "embedding_dim",
                      "projection_dim"):
            if getattr(self, field) < 1:
                raise ValueError(f"{field} must be >= 1")
        if not self.stage_channels:
            raise ValueError("stage_channels must be non-empty")
        for w in self.stage_channels:
            if w < 2 or w % 2:
                raise ValueError(f"stage width {w} must be even and >= 2")
            if w % self.cardinality or (w // 2) % self.cardinality:
                raise ValueError(
                    f"cardinality {self.cardinality} must divide stage width {w} "
                    f"and its bottleneck {w // 2}"
                )
            if self.variant == "cbam" and w % 4:
                raise ValueError(f"cbam needs stage widths divisible by 4, got {w}")
        if self.embedding_dim != self.stage_channels[-1]:
            raise ValueError(
                f"embedding_dim {self.embedding_dim} must equal the last stage width "
                f"{self.stage_channels[-1]} (global average pool output)"
            )
        down = 2 ** len(self.stage_channels)
        if self.patch_size % down:
            raise ValueError(
                f"patch_size {self.patch_size} must be divisible by {down} "
                f"({len(self.stage_channels)} pooling stages)"
            )

    def to_text(self):
        lines = [
            f"input_bands={self.input_bands}",
            f"patch_size={self.patch_size}",
            f"variant={self.variant}",
            f"cardinality={self.cardinality}",
            "stage_channels=" + ",".join(str(w) for w in self.stage_channels),
            f"embedding_dim={self.embedding_dim}",
            f"projection_dim={self.projection_dim}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        fields = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = line.split("=", 1)
            fields[key.strip()] = value.strip()
        kwargs = {}
        for key, value in fields.items():
            if key == "variant":
                kwargs[key] = value
            elif key == "stage_channels":
                kwargs[key] = tuple(int(v) for v in value.split(",") if v)
            elif key in ("input_bands", "patch_size", "cardinality", "embedding_dim",
                         "projection_dim"):
                kwargs[key] = int(value)
            else:
                raise ValueError(f"unknown config key {key!r}")
        return cls(**kwargs)


class ResidualDSC(Layer):
    def __init__(self, channels, rng):
        super().__init__()
        self.inner = DepthwiseSeparable(channels, channels, 3, rng)

    def named_params(self):
        return [("inner." + n, p) for n, p in self.inner.named_params()]

    def forward(self, x):
        self._cache = ()
        return x + self.inner.forward(x)

    def backward(self, dy):
        self._take_cache()
        return dy + self.inner.backward(dy)


class ResidualConv3d(Layer):
    """Adds a single 3x3x3 filter run over the (C, H, W) volume."""

    def __init__(self, rng):
        super().__init__()
        self.inner = Conv3d(1, 1, (3, 3, 3), rng, pad=1)

    def named_params(self):
        return [("inner." + n, p) for n, p in self.inner.named_params()]

    def forward(self, x):
        self._cache = ()
        return x + self.inner.forward(x[:, None])[:, 0]

    def backward(self, dy):
        self._take_cache()
        return dy + self.inner.backward(dy[:, None])[:, 0]


def make_variant_block(variant, channels, rng):
    if variant == "seb":
        return SEGate(channels)
    if variant == "cbam":
        return CBAM(channels, rng)
    if variant == "dsc":
        return ResidualDSC(channels, rng)
    if variant == "conv3d":
        return ResidualConv3d(rng)
    if variant == "none":
        return Identity()
    raise ValueError(f"unknown variant {variant!r}")


class Stage(Layer):
    def __init__(self, in_channels, width, cardinality, variant, rng):
        super().__init__()
        mid = width // 2
        self.pool = AvgPool2()
        self.reduce = Conv2d(in_channels, mid, 1, rng)
        self.relu1 = ReLU()
        self.grouped = Conv2d(mid, mid, 3, rng, pad=1, groups=cardinality)
        self.relu2 = ReLU()
        self.expand = Conv2d(mid, width, 1, rng)
        self.shortcut = (
            Conv2d(in_channels, width, 1, rng) if in_channels != width else Identity()
        )
        self.block = make_variant_block(variant, width, rng)
        self.relu3 = ReLU()

    def named_params(self):
        out = []
        for prefix, child in (
            ("reduce", self.reduce),
            ("grouped", self.grouped),
            ("expand", self.expand),
            ("shortcut", self.shortcut),
            ("block", self.block),
        ):
            out += [(f"{prefix}.{n}", p) for n, p in child.named_params()]
        return out

    def forward(self, x):
        self._cache = ()
        xp = self.pool.forward(x)
        main = self.expand.forward(
            self.relu2.forward(self.grouped.forward(self.relu1.forward(self.reduce.forward(xp))))
        )
        total = main + self.shortcut.forward(xp)
        return self.relu3.forward(self.block.forward(total))

    def backward(self, dy):
        self._take_cache()
        dsum = self.block.backward(self.relu3.backward(dy))
        dmain = self.reduce.backward(
            self.relu1.backward(
                self.grouped.backward(self.relu2.backward(self.expand.backward(dsum)))
            )
        )
        dxp = dmain + self.shortcut.backward(dsum)
        return self.pool.backward(dxp)


class Backbone:
    """Deterministic map from (N, C, S, S) patches to (N, D) embeddings."""

    def __init__(self, config, rng):
        self.config = config
        self.stem = Conv2d(config.input_bands, config.stage_channels[0], 3, rng, pad=1)
        self.stem_relu = ReLU()
        self.stages = []
        in_ch = config.stage_channels[0]
        for width in config.stage_channels:
            self.stages.append(Stage(in_ch, width, config.cardinality, config.variant, rng))
            in_ch = width
        self.gap = GlobalAvgPool()

    def named_params(self):
        out = [("stem." + n, p) for n, p in self.stem.named_params()]
        for i, stage in enumerate(self.stages, 1):
            out += [(f"stage{i}.{n}", p) for n, p in stage.named_params()]
        return out

    def zero_grad(self):
        for _, p in self.named_params():
            p.zero_grad()

    def _check_input(self, x):
        s = self.config.patch_size
        c = self.config.input_bands
        if x.ndim != 4 or x.shape[1:] != (c, s, s):
            raise ValueError(f"expected input (N, {c}, {s}, {s}), got {x.shape}")

    def forward_stages(self, x):
        self._check_input(x)
        h = self.stem_relu.forward(self.stem.forward(x))
        outs = []
        for stage in self.stages:
            h = stage.forward(h)
            outs.append(h)
        return outs

    def backward_stages(self, dstage_outs):
        if len(dstage_outs) != len(self.stages):
            raise ValueError(f"expected {len(self.stages)} stage gradients")
        d = dstage_outs[-1]
        for i in range(len(self.stages) - 1, -1, -1):
            d_in = self.stages[i].backward(d)
            d = d_in + dstage_outs[i - 1] if i > 0 else d_in
        return self.stem.backward(self.stem_relu.backward(d))

    def forward(self, x):
        outs = self.forward_stages(x)
        return self.gap.forward(outs[-1])

    def backward(self, dembed):
        d = self.gap.backward(dembed)
        for stage in reversed(self.stages):
            d = stage.backward(d)
        return self.stem.backward(self.stem_relu.backward(d))

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_params()}

    def load_state_dict(self, state):
        params = dict(self.named_params())
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        if missing or extra:
            raise ValueError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"{name}: shape {arr.shape} does not match parameter {p.data.shape}"
                )
            p.data = arr.copy()


class ProjectionHead:
    """Two-layer map from embeddings to the contrastive comparison space."""

    def __init__(self, config, rng):
        self.fc1 = Linear(config.embedding_dim, config.projection_dim, rng)
        self.relu = ReLU()
        self.fc2 = Linear(config.projection_dim, config.projection_dim, rng)

    def named_params(self):
        out = [("fc1." + n, p) for n, p in self.fc1.named_params()]
        out += [("fc2." + n, p) for n, p in self.fc2.named_params()]
        return out

    def zero_grad(self):
        for _, p in self.named_params():
            p.zero_grad()

    def forward(self, f):
        return self.fc2.forward(self.relu.forward(self.fc1.forward(f)))

    def backward(self, dz):
        return self.fc1.backward(self.relu.backward(self.fc2.backward(dz)))

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_params()}

    def load_state_dict(self, state):
        params = dict(self.named_params())
        missing = sorted(set(params) - set(state))
        extra = sorted(set(state) - set(params))
        if missing or extra:
            raise ValueError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            arr = np.asarray(state[name], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"{name}: shape {arr.shape} does not match parameter {p.data.shape}"
                )
            p.data = arr.copy()


def init_rng(seed):
    # shared stream layout: [seed, 0] init, [seed, 1, epoch] sampling, [seed, 2, ...] views
    return np.random.default_rng([int(seed), 0])
