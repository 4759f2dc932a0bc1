"""Randomized viewpoint generation with per-class sampling rules.

Each object class draws camera viewpoints from a rule: azimuth either
covers the full circle or a frontal band, elevation either a band around
the equator or a raised band, in-plane roll is a truncated Gaussian, and
distance is uniform. The built-in rule table assigns classes whose
canonical photos are frontal (screens, appliances) to the "front" azimuth
mode and classes usually seen from above (keyboards, bathtubs) to the
"top" elevation mode; unknown classes fall back to all/all.

Reproducibility: SeededRng wraps the Mersenne Twister core stream, whose
output for a given seed is guaranteed stable across Python versions and
platforms, and derives Gaussians via an in-house Box-Muller transform so
no library-version drift can change the sample stream. Truncation is by
rejection, so bounds hold exactly.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from .errors import ConfigError
from .geometry import Viewpoint

THETA_STD_DEFAULT = math.pi / 18.0

FRONT_AZIMUTH = (-math.pi / 3.0, math.pi / 3.0)
ELEVATION_ALL = {"mean": 0.0, "std": math.pi / 18.0, "lo": -math.pi / 6.0, "hi": math.pi / 3.0}
ELEVATION_TOP = {"mean": math.pi / 6.0, "std": math.pi / 18.0, "lo": math.pi / 36.0, "hi": math.pi / 2.0}
THETA_BOUNDS = (-math.pi / 2.0, math.pi / 2.0)

_MAX_REJECTIONS = 100_000


class SeededRng:
    """Deterministic sample source; same seed gives the same stream everywhere."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._core = random.Random(self.seed)

    def random(self) -> float:
        return self._core.random()

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self._core.random()

    def normal(self, mean: float = 0.0, std: float = 1.0) -> float:
        # Box-Muller on the guaranteed-stable core stream; the cosine branch
        # only, one pair of uniforms per draw.
        u1 = 1.0 - self._core.random()  # (0, 1], keeps log finite
        u2 = self._core.random()
        z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
        return mean + std * z

    def truncated_normal(self, mean: float, std: float, lo: float, hi: float) -> float:
        for _ in range(_MAX_REJECTIONS):
            x = self.normal(mean, std)
            if lo <= x <= hi:
                return x
        raise RuntimeError(
            f"truncated normal rejection did not converge for N({mean}, {std}) on [{lo}, {hi}]"
        )


@dataclass(frozen=True)
class ViewpointRule:
    """Per-class sampling rule; modes select the ranges documented above."""

    azimuth_mode: str = "all"  # "all" | "front"
    elevation_mode: str = "all"  # "all" | "top"
    theta_std: float = THETA_STD_DEFAULT
    distance_range: tuple[float, float] = (4.0, 8.0)

    def __post_init__(self):
        if self.azimuth_mode not in ("all", "front"):
            raise ConfigError(f"unknown azimuth mode {self.azimuth_mode!r}")
        if self.elevation_mode not in ("all", "top"):
            raise ConfigError(f"unknown elevation mode {self.elevation_mode!r}")
        if not self.theta_std > 0.0:
            raise ConfigError(f"theta_std must be > 0, got {self.theta_std}")
        lo, hi = self.distance_range
        if not (0.0 < lo < hi):
            raise ConfigError(f"need 0 < min < max for distance_range, got {self.distance_range}")


DEFAULT_RULE = ViewpointRule()

# Built-in table of per-class rule assignments; config files may override
# or extend it. Classes not listed anywhere use DEFAULT_RULE.
_FRONT_ALL = ViewpointRule(azimuth_mode="front")
_ALL_TOP = ViewpointRule(elevation_mode="top")
_FRONT_TOP = ViewpointRule(azimuth_mode="front", elevation_mode="top")

DEFAULT_RULE_TABLE: dict[str, ViewpointRule] = {}
for _name in (
    "airliner", "beach wagon", "cab", "coffee mug", "dining table", "piano",
    "bicycle", "pillow", "police van", "pot", "school bus", "warplane",
    "bottle", "bench", "birdhouse", "ambulance", "trolleybus",
):
    DEFAULT_RULE_TABLE[_name] = DEFAULT_RULE
for _name in (
    "cellular phone", "laptop", "mailbox", "microwave", "remote control",
    "washer", "bag",
):
    DEFAULT_RULE_TABLE[_name] = _FRONT_ALL
for _name in ("keyboard", "table lamp", "trash can", "bathtub", "couch", "soup bowl"):
    DEFAULT_RULE_TABLE[_name] = _ALL_TOP
for _name in ("printer", "stove"):
    DEFAULT_RULE_TABLE[_name] = _FRONT_TOP
del _name


def rule_for_class(class_name: str, rule_table: dict[str, ViewpointRule] | None = None) -> ViewpointRule:
    """Look up the sampling rule for a class.

    Precedence: the supplied table's class entry, then its "default" entry,
    then the built-in table, then the all/all default.
    """
    if rule_table:
        if class_name in rule_table:
            return rule_table[class_name]
        if "default" in rule_table:
            return rule_table["default"]
    return DEFAULT_RULE_TABLE.get(class_name, DEFAULT_RULE)


def sample_viewpoint(rule: ViewpointRule, rng: SeededRng) -> Viewpoint:
    """Draw one viewpoint according to the rule.

    Azimuth: Uniform[0, 2*pi) for "all", Uniform(-pi/3, pi/3) for "front"
    (stored normalized into [0, 2*pi)). Elevation: truncated Gaussian,
    N(0, pi/18) on [-pi/6, pi/3] for "all", N(pi/6, pi/18) on [pi/36, pi/2]
    for "top". Theta: N(0, theta_std) truncated to (-pi/2, pi/2). Distance:
    Uniform over the rule's range.
    """
    if rule.azimuth_mode == "all":
        azimuth = rng.uniform(0.0, 2.0 * math.pi)
    else:
        azimuth = rng.uniform(*FRONT_AZIMUTH)

    band = ELEVATION_ALL if rule.elevation_mode == "all" else ELEVATION_TOP
    elevation = rng.truncated_normal(band["mean"], band["std"], band["lo"], band["hi"])

    theta = rng.truncated_normal(0.0, rule.theta_std, *THETA_BOUNDS)
    distance = rng.uniform(*rule.distance_range)
    return Viewpoint(azimuth=azimuth, elevation=elevation, theta=theta, distance=distance)
