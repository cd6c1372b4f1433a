from __future__ import annotations

from dataclasses import asdict, dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ModelConfig:
    """Network widths and iteration counts.

    `base_channels` is the width at 1/4 resolution; 1/2 uses half of it and
    1/8, 1/16 use 1.5x and 2x. Toy defaults, not the widths of any published model.
    """

    base_channels: int = 32
    n_loftr: int = 4
    attention_heads: int = 2
    max_disparity: int = 192
    train_iters: int = 22
    eval_iters: int = 32
    positional_embedding: str = "sinusoidal"
    # random origin range (in 1/4-resolution tokens) for the sinusoidal grid during training; 0 disables
    position_jitter: int = 256
    hidden_dim: int = 32
    corr_groups: int = 8
    corr_radius: int = 4
    corr_levels: int = 2

    def __post_init__(self):
        if self.max_disparity % 4 or self.max_disparity <= 0:
            raise ConfigError(f"max_disparity must be a positive multiple of 4, got {self.max_disparity}")
        if self.n_loftr < 1:
            raise ConfigError("n_loftr must be >= 1")
        if self.train_iters < 1 or self.eval_iters < 1:
            raise ConfigError("iteration counts must be >= 1")
        if self.positional_embedding not in ("sinusoidal", "learned"):
            raise ConfigError(f"unknown positional embedding {self.positional_embedding!r}")
        if self.position_jitter < 0:
            raise ConfigError("position_jitter must be >= 0")
        if self.base_channels % self.attention_heads:
            raise ConfigError("base_channels must be divisible by attention_heads")
        if self.base_channels % self.corr_groups:
            raise ConfigError("base_channels must be divisible by corr_groups")
        if self.base_channels % 4:
            raise ConfigError("base_channels must be divisible by 4 for the 2D positional encoding")

    @property
    def num_candidates(self) -> int:
        return self.max_disparity // 4

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})
