"""Clearness index from extraterrestrial insolation and day classification."""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DayRangeError, GeometryError, LatitudeError

CLEAR_MIN_KT = 0.45
PARTIAL_MIN_KT = 0.25


class DayKind(str, enum.Enum):
    CLEAR = "Clear"
    PARTIAL = "PartiallyCloudy"
    CLOUDY = "Cloudy"

    @property
    def short(self):
        return {"Clear": "CD", "PartiallyCloudy": "PCD", "Cloudy": "CLD"}[self.value]

    @classmethod
    def parse(cls, text):
        for k in cls:
            if text in (k.value, k.short, k.name):
                return k
        raise ValueError(f"unknown day kind {text!r}")


@dataclass(frozen=True)
class SiteGeometry:
    latitude_deg: float = -27.5
    solar_constant: float = 1.367
    eccentricity_coeff: float = 0.033

    def __post_init__(self):
        if not -90.0 <= self.latitude_deg <= 90.0:
            raise LatitudeError(f"latitude {self.latitude_deg} outside [-90, 90]")
        if self.solar_constant <= 0:
            raise GeometryError("solar constant must be positive")


@dataclass(frozen=True)
class DayClass:
    kind: DayKind
    k_t: float


@dataclass(frozen=True)
class SeasonComposition:
    window_days: int
    clear_pct: float
    partial_pct: float
    cloudy_pct: float
    start_index: int = 0
    partial_window: bool = False


def _check_day(n):
    if int(n) != n or not 1 <= n <= 365:
        raise DayRangeError(f"day of year {n} outside 1..365")


def declination(day_of_year):
    """Solar declination in degrees."""
    _check_day(day_of_year)
    return 23.45 * math.sin(2.0 * math.pi * (day_of_year - 80) / 365.0)


def sunrise_hour_angle(latitude_deg, declination_deg):
    """Sunrise hour angle in radians."""
    if abs(latitude_deg) >= 90.0:
        raise LatitudeError("sunrise angle undefined at the poles")
    c = -math.tan(math.radians(latitude_deg)) * math.tan(math.radians(declination_deg))
    if abs(c) > 1.0:
        raise LatitudeError(f"polar day or night at latitude {latitude_deg}, "
                            f"declination {declination_deg}")
    return math.acos(c)


def extraterrestrial_irradiance(day_of_year, site):
    """Normal-incidence extraterrestrial irradiance I0 in kW/m2."""
    _check_day(day_of_year)
    return site.solar_constant * (1.0 + site.eccentricity_coeff
                                  * math.cos(2.0 * math.pi * day_of_year / 365.0))


def extraterrestrial_insolation(day_of_year, site):
    """Daily extraterrestrial insolation H0 on a horizontal surface, kWh/m2."""
    i0 = extraterrestrial_irradiance(day_of_year, site)
    dec = declination(day_of_year)
    ws = sunrise_hour_angle(site.latitude_deg, dec)
    phi, d = math.radians(site.latitude_deg), math.radians(dec)
    return 24.0 * i0 / math.pi * (math.cos(phi) * math.cos(d) * math.sin(ws)
                                  + ws * math.sin(phi) * math.sin(d))


def kind_for(k_t):
    if k_t >= CLEAR_MIN_KT:
        return DayKind.CLEAR
    if k_t >= PARTIAL_MIN_KT:
        return DayKind.PARTIAL
    return DayKind.CLOUDY


def classify_day(daily_insolation, h0):
    """Clearness index and class; a boundary value goes to the clearer class."""
    if not h0 > 0:
        raise GeometryError(f"extraterrestrial insolation must be positive, got {h0}")
    if daily_insolation < 0:
        raise GeometryError("daily insolation must be non-negative")
    k_t = daily_insolation / h0
    return DayClass(kind_for(k_t), k_t)


def daily_insolation(irradiance_wm2, step_minutes):
    """Trapezoidal integral of one day of irradiance samples, in kWh/m2."""
    g = np.nan_to_num(np.asarray(irradiance_wm2, dtype=np.float64), nan=0.0)
    if g.size < 2:
        return 0.0
    dt_h = step_minutes / 60.0
    return float(dt_h * (g.sum() - 0.5 * (g[0] + g[-1])) / 1000.0)


def season_composition(classes, window_days=30):
    """Per-window percentages of each kind, over consecutive windows."""
    kinds = [c.kind if isinstance(c, DayClass) else DayKind(c) for c in classes]
    out = []
    for start in range(0, len(kinds), window_days):
        chunk = kinds[start:start + window_days]
        n = len(chunk)
        pct = [round(100.0 * sum(k is kind for k in chunk) / n, 1) for kind in DayKind]
        out.append(SeasonComposition(n, pct[0], pct[1], pct[2], start, n < window_days))
    return out
