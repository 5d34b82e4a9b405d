"""System-level configuration shared by the channel model, networks and attacks."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields


@dataclass
class SystemConfig:
    """Physical and network dimensions of one simulated link.

    Antenna/element counts: n_t, n_r transmit/receive ULA antennas, the two
    reflecting surfaces are (a1_v x a1_h) and (a2_v x a2_h) planar arrays.
    m is the message cardinality, block_len the number of symbols processed
    per block. power is the transmit power P (linear), sigma2 the receiver
    noise variance (linear), kappa/omega the Rician parameters shared by all
    links. Spacings are in wavelengths, angular spreads in radians.
    """

    n_t: int = 4
    n_r: int = 4
    a1_v: int = 2
    a1_h: int = 4
    a2_v: int = 2
    a2_h: int = 4
    m: int = 16
    block_len: int = 8
    power: float = 1.0
    sigma2: float = 1.0
    kappa: float = 0.2
    omega: float = 1.0
    n_adv: int | None = None  # adversary transmit antennas; None -> same as n_t
    num_scatterers: int = 9
    spread_tx: float = math.pi / 2
    spread_ris: float = math.pi / 2
    spread_sc: float = math.pi / 2
    spacing_tx: float = 0.5
    spacing_ris_v: float = 0.5
    spacing_ris_h: float = 0.5
    spacing_sc: float = 0.5
    hidden_width: int = 128
    kernel_size: int = 3
    bn_eps: float = 1e-5
    bn_momentum: float = 0.9
    loss: str = "bce"  # "bce" (default) or "ce" for categorical cross entropy

    @property
    def a1(self) -> int:
        return self.a1_v * self.a1_h

    @property
    def a2(self) -> int:
        return self.a2_v * self.a2_h

    @property
    def adversary_antennas(self) -> int:
        return self.n_t if self.n_adv is None else self.n_adv

    @property
    def decoder_channels(self) -> int:
        """Real channel count of the decoder input: 2 (N_r + N_r N_t)."""
        return 2 * (self.n_r + self.n_r * self.n_t)

    def validate(self) -> None:
        counts = {
            "n_t": self.n_t, "n_r": self.n_r, "a1_v": self.a1_v, "a1_h": self.a1_h,
            "a2_v": self.a2_v, "a2_h": self.a2_h, "block_len": self.block_len,
            "num_scatterers": self.num_scatterers, "hidden_width": self.hidden_width,
        }
        for name, value in counts.items():
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.m < 2:
            raise ValueError(f"m must be >= 2, got {self.m}")
        if self.power <= 0.0:
            raise ValueError(f"power must be > 0, got {self.power}")
        if self.sigma2 <= 0.0:
            raise ValueError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.kappa < 0.0 or self.omega < 0.0:
            raise ValueError("kappa and omega must be nonnegative")
        if self.n_adv is not None and self.n_adv < 1:
            raise ValueError(f"n_adv must be positive when set, got {self.n_adv}")
        for name in ("spread_tx", "spread_ris", "spread_sc"):
            s = getattr(self, name)
            if not 0.0 < s <= math.pi:
                raise ValueError(f"{name} must lie in (0, pi], got {s}")
        for name in ("spacing_tx", "spacing_ris_v", "spacing_ris_h", "spacing_sc"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if self.kernel_size % 2 != 1:
            raise ValueError("kernel_size must be odd for same padding")
        if self.loss not in ("bce", "ce"):
            raise ValueError(f"loss must be 'bce' or 'ce', got {self.loss!r}")

    def replace(self, **kwargs) -> "SystemConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(kwargs)
        cfg = SystemConfig(**values)
        cfg.validate()
        return cfg
