import threading
from enum import Enum
from typing import List, Optional

import torch
import torch.nn.functional as F
from torch import Tensor, nn

from multicat.types import ArchitectureSpec, Downsampling, Shortcut

INPUT_CHANNELS = 3

# torch.manual_seed is process wide; concurrent runs must not interleave their initialization
_INIT_LOCK = threading.Lock()


class ShapeError(ValueError):
    """Raised when a batch does not match the network input."""


class ForwardMode(str, Enum):
    TRAIN = "train"
    EVAL = "eval"


def _norm(channels: int, batch_norm: bool) -> nn.Module:
    return nn.BatchNorm2d(channels) if batch_norm else nn.Identity()


class ResidualBlock(nn.Module):
    """Two 3x3 convolutions with a shortcut around them.

    With Shortcut.ZERO_PAD the shortcut is the identity, subsampled when the block strides and padded
    with zero channels when the block widens. Shortcut.PROJECTION uses a 1x1 convolution instead.
    """

    def __init__(self, in_channels: int, out_channels: int, stride: int, spec: ArchitectureSpec):
        super().__init__()
        bias = not spec.batch_norm
        self.first_conv = nn.Conv2d(in_channels, out_channels, 3, stride=stride, padding=1, bias=bias)
        self.first_norm = _norm(out_channels, spec.batch_norm)
        self.second_conv = nn.Conv2d(out_channels, out_channels, 3, stride=1, padding=1, bias=bias)
        self.second_norm = _norm(out_channels, spec.batch_norm)

        self.stride = stride
        self.extra_channels = out_channels - in_channels
        self.projection: Optional[nn.Sequential] = None
        if spec.shortcut == Shortcut.PROJECTION and (stride != 1 or in_channels != out_channels):
            self.projection = nn.Sequential(
                nn.Conv2d(in_channels, out_channels, 1, stride=stride, bias=bias),
                _norm(out_channels, spec.batch_norm),
            )
        elif self.extra_channels < 0:
            raise ValueError("Zero padding shortcuts can not reduce the channel count")

    def shortcut(self, x: Tensor) -> Tensor:
        if self.projection is not None:
            return self.projection(x)
        if self.stride != 1:
            x = x[:, :, :: self.stride, :: self.stride]
        if self.extra_channels > 0:
            x = F.pad(x, (0, 0, 0, 0, 0, self.extra_channels))
        return x

    def forward(self, x: Tensor) -> Tensor:
        out = F.relu(self.first_norm(self.first_conv(x)))
        out = self.second_norm(self.second_conv(out))
        return F.relu(out + self.shortcut(x))


class ResidualNetwork(nn.Module):
    """Residual network built from an ArchitectureSpec.

    Layout: optional stem convolution, then the stages. With Downsampling.MAXPOOL a 3x3/2 max pool
    precedes every stage but the first (the first gets one if spec.stem_pool is set) and all blocks
    keep their resolution. With Downsampling.STRIDED the first block of every later stage strides
    instead. A global average pool and a fully connected head follow.
    """

    def __init__(self, spec: ArchitectureSpec):
        super().__init__()
        self.spec = spec
        channels = INPUT_CHANNELS

        self.stem: Optional[nn.Sequential] = None
        if spec.stem_channels > 0:
            self.stem = nn.Sequential(
                nn.Conv2d(
                    channels,
                    spec.stem_channels,
                    spec.stem_kernel,
                    stride=spec.stem_stride,
                    padding=spec.stem_kernel // 2,
                    bias=not spec.batch_norm,
                ),
                _norm(spec.stem_channels, spec.batch_norm),
                nn.ReLU(inplace=True),
            )
            channels = spec.stem_channels

        self.stages = nn.ModuleList()
        for stage_index, (block_count, stage_channels) in enumerate(spec.stages):
            layers: List[nn.Module] = []
            pool = spec.stem_pool if stage_index == 0 else spec.downsampling == Downsampling.MAXPOOL
            if pool:
                layers.append(nn.MaxPool2d(kernel_size=3, stride=2, padding=1))
            for block_index in range(block_count):
                strided = stage_index > 0 and block_index == 0 and spec.downsampling == Downsampling.STRIDED
                layers.append(ResidualBlock(channels, stage_channels, 2 if strided else 1, spec))
                channels = stage_channels
            self.stages.append(nn.Sequential(*layers))

        self.feature_channels = channels
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head: Optional[nn.Linear] = nn.Linear(channels, spec.output_width) if spec.output_width > 0 else None

    def features(self, x: Tensor) -> List[Tensor]:
        """Activations after the stem and after every stage."""
        activations = []
        if self.stem is not None:
            x = self.stem(x)
            activations.append(x)
        for stage in self.stages:
            x = stage(x)
            activations.append(x)
        return activations

    def forward(self, x: Tensor) -> Tensor:
        if self.stem is not None:
            x = self.stem(x)
        for stage in self.stages:
            x = stage(x)
        x = torch.flatten(self.pool(x), 1)
        if self.head is not None:
            x = self.head(x)
        return x

    def decayed_weights(self) -> List[Tensor]:
        """Convolution and classifier weights, the parameters weight decay applies to."""
        return [
            module.weight for module in self.modules() if isinstance(module, (nn.Conv2d, nn.Linear))
        ]


def he_initialize(network: nn.Module) -> None:
    """Zero-mean normal weights with variance 2/fan_in, zero biases, unit batch norm scale."""
    for module in network.modules():
        if isinstance(module, (nn.Conv2d, nn.Linear)):
            nn.init.kaiming_normal_(module.weight, mode="fan_in", nonlinearity="relu")
            if module.bias is not None:
                nn.init.zeros_(module.bias)
        elif isinstance(module, nn.BatchNorm2d):
            nn.init.ones_(module.weight)
            nn.init.zeros_(module.bias)


def build_network(spec: ArchitectureSpec, seed: int) -> ResidualNetwork:
    """Build and He-initialize a network. Equal (spec, seed) give bit-identical parameters."""
    with _INIT_LOCK:
        generator_state = torch.random.get_rng_state()
        try:
            torch.manual_seed(seed)
            network = ResidualNetwork(spec)
            he_initialize(network)
        finally:
            torch.random.set_rng_state(generator_state)
    return network


def forward(network: ResidualNetwork, batch: Tensor, mode: ForwardMode) -> Tensor:
    """N x 3 x S x S batch to N x output_width logits; eval mode uses the running batch norm statistics."""
    size = network.spec.input_size
    if batch.dim() != 4 or tuple(batch.shape[1:]) != (INPUT_CHANNELS, size, size):
        raise ShapeError(f"Expected a batch of shape N x {INPUT_CHANNELS} x {size} x {size}, got {tuple(batch.shape)}")
    network.train(mode == ForwardMode.TRAIN)
    return network(batch)


def count_params(module: nn.Module) -> int:
    """Number of trainable scalars; batch norm running statistics are buffers and not counted."""
    return sum(parameter.numel() for parameter in module.parameters() if parameter.requires_grad)
