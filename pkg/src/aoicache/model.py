"""System parameters: radio model, mean service rates, request catalogs.

The radio layer exists only to produce the two mean service rates (content
delivery from the base station, content fetching from a source node); there
is no fading, interference, or scheduling model.  All rates are in requests
per second and all times in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import NonPositiveRate

# Fixed byte convention: a "KB" of content is 8192 bits.  Pinning one
# convention makes rate values derived from KB-quoted sizes reproducible.
BITS_PER_KB = 8192


def dbm_to_watts(dbm: float) -> float:
    """Convert a dBm power figure to watts (-95 dBm -> 3.162e-13 W)."""
    return 10.0 ** (dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class RadioConfig:
    """Physical-layer parameters of one cell.

    coverage_radius    cell radius, meters
    bandwidth          channel bandwidth, Hz
    content_size       item size, bits
    path_loss_exponent unitless
    noise_power        watts
    bs_tx_power        base-station transmit power, watts
    source_tx_power    source-node transmit power, watts

    Construction rejects any configuration whose derived rates would be
    non-positive (mean SNR at most 1 for either link).
    """

    coverage_radius: float
    bandwidth: float
    content_size: float
    path_loss_exponent: float
    noise_power: float
    bs_tx_power: float
    source_tx_power: float

    def __post_init__(self):
        for name in (
            "coverage_radius",
            "bandwidth",
            "content_size",
            "path_loss_exponent",
            "noise_power",
            "bs_tx_power",
            "source_tx_power",
        ):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for power, label in (
            (self.bs_tx_power, "bs_tx_power"),
            (self.source_tx_power, "source_tx_power"),
        ):
            if self.mean_snr(power) <= 1.0:
                raise NonPositiveRate(
                    f"{label}={power} W gives mean SNR <= 1; derived rate would"
                    " be non-positive"
                )

    def mean_snr(self, tx_power: float) -> float:
        """Distance-averaged SNR for a uniformly placed endpoint.

        Averaging log SNR over the disc collapses the geometry to an
        effective distance R/sqrt(e).
        """
        geometry = (self.coverage_radius / math.sqrt(math.e)) ** (
            -self.path_loss_exponent
        )
        return tx_power * geometry / self.noise_power


@dataclass(frozen=True)
class ServiceRates:
    """Mean delivery (mu_d) and fetch (mu_r) rates, requests per second."""

    mu_d: float
    mu_r: float

    def __post_init__(self):
        if not (self.mu_d > 0 and self.mu_r > 0):
            raise NonPositiveRate("service rates must be positive")

    @property
    def aoi_floor(self) -> float:
        """Minimum achievable mean age: one fetch plus one delivery."""
        return 1.0 / self.mu_r + 1.0 / self.mu_d


def derive_service_rates(config: RadioConfig) -> ServiceRates:
    """Mean service rates for the delivery and fetch links.

    Rate = (bandwidth / content_size) * log2(mean SNR), the distance-averaged
    Shannon rate with the +1 inside the log dropped; a conservative
    approximation valid when transmit power dwarfs noise.
    """
    per_content = config.bandwidth / config.content_size
    values = []
    for power, label in (
        (config.bs_tx_power, "bs_tx_power"),
        (config.source_tx_power, "source_tx_power"),
    ):
        snr = config.mean_snr(power)
        if snr <= 1.0:
            raise NonPositiveRate(f"{label}: mean SNR {snr:.4g} <= 1")
        values.append(per_content * math.log2(snr))
    mu_d, mu_r = values
    return ServiceRates(mu_d=mu_d, mu_r=mu_r)


def zipf_popularities(item_count: int, concentration: float) -> np.ndarray:
    """Zipf popularity vector over ranks 1..item_count.

    concentration=0 is uniform; larger values skew mass toward low ranks.
    0.56 is a typical video-workload setting.
    """
    if item_count < 1:
        raise ValueError("item_count must be >= 1")
    if concentration < 0:
        raise ValueError("concentration must be >= 0")
    ranks = np.arange(1, item_count + 1, dtype=np.float64)
    weights = ranks ** (-float(concentration))
    return weights / weights.sum()


@dataclass(frozen=True)
class CatalogItem:
    item_id: int
    popularity: float
    window: float


@dataclass(frozen=True)
class Catalog:
    """Cached items with their popularities and refreshing windows.

    Per-item request rates follow from thinning the total Poisson stream:
    lambda_c = total_arrival_rate * popularity_c.
    """

    items: tuple[CatalogItem, ...]
    total_arrival_rate: float

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if not self.items:
            raise ValueError("catalog needs at least one item")
        if not self.total_arrival_rate > 0:
            raise ValueError("total_arrival_rate must be positive")
        for it in self.items:
            if not 0.0 < it.popularity <= 1.0:
                raise ValueError(
                    f"item {it.item_id}: popularity {it.popularity} outside (0, 1]"
                )
        total = math.fsum(it.popularity for it in self.items)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"popularities sum to {total!r}, expected 1")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def popularities(self) -> np.ndarray:
        return np.array([it.popularity for it in self.items])

    @property
    def windows(self) -> np.ndarray:
        return np.array([it.window for it in self.items])

    @property
    def arrival_rates(self) -> np.ndarray:
        return self.total_arrival_rate * self.popularities

    @property
    def item_ids(self) -> tuple[int, ...]:
        return tuple(it.item_id for it in self.items)

    def validate_windows(self, rates: ServiceRates) -> None:
        """Every window must clear the AoI floor of the given rates."""
        floor = rates.aoi_floor
        for it in self.items:
            if it.window < floor:
                raise ValueError(
                    f"item {it.item_id}: window {it.window} below AoI floor {floor}"
                )

    def with_windows(self, windows) -> "Catalog":
        """Copy of this catalog with the window vector replaced."""
        windows = np.asarray(windows, dtype=float)
        if windows.shape != (len(self.items),):
            raise ValueError("need exactly one window per item")
        items = tuple(
            replace(it, window=float(w)) for it, w in zip(self.items, windows)
        )
        return Catalog(items=items, total_arrival_rate=self.total_arrival_rate)

    @classmethod
    def from_popularities(
        cls, popularities, total_arrival_rate: float, window
    ) -> "Catalog":
        """Catalog with item ids 1..C; window may be a scalar or a vector."""
        pops = np.asarray(popularities, dtype=float)
        wins = np.broadcast_to(np.asarray(window, dtype=float), pops.shape)
        items = tuple(
            CatalogItem(i + 1, float(q), float(w))
            for i, (q, w) in enumerate(zip(pops, wins))
        )
        return cls(items=items, total_arrival_rate=float(total_arrival_rate))

    @classmethod
    def zipf(
        cls,
        item_count: int,
        concentration: float,
        total_arrival_rate: float,
        window,
    ) -> "Catalog":
        return cls.from_popularities(
            zipf_popularities(item_count, concentration), total_arrival_rate, window
        )
