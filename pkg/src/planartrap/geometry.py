"""Planar trap electrode layouts.

The cross-section model is 2D: x runs across the electrode plane, y is the
height above it, and strips are infinite along the trap axis.  The canonical
five-electrode arrangement is outer | g' | RF | g | center | g | RF | g' | outer,
centered on x = 0, with an optional DC-biased plate at height h.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .constants import ATOMIC_MASS, ELEMENTARY_CHARGE
from .errors import UnsupportedLayoutError, ValidationError

CANONICAL_GROUPS = ("center", "rf", "outer")
PLATE_GROUP = "plate"

_UNIT_SCALES = {"m": 1.0, "mm": 1e-3, "um": 1e-6, "µm": 1e-6, "nm": 1e-9}


class Role(Enum):
    RF = "rf"
    DC = "dc"
    GROUND = "ground"


@dataclass(frozen=True)
class Electrode:
    """A strip electrode: [x_min, x_max] on the plane, infinite along the axis.

    ``group`` names the electrically-tied group the strip belongs to; the
    field solver produces one unit-voltage basis solution per group.
    """

    id: str
    role: Role
    x_min: float
    x_max: float
    group: str = ""

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValidationError(
                f"electrode {self.id!r}: x_min ({self.x_min}) must be < x_max ({self.x_max})"
            )
        if not self.group:
            object.__setattr__(self, "group", self.id)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min


@dataclass(frozen=True)
class TopPlate:
    """Conducting plane at height h above the electrode plane."""

    height: float
    is_dc: bool = True

    def __post_init__(self):
        if self.height <= 0:
            raise ValidationError(f"top plate height must be positive, got {self.height}")


@dataclass(frozen=True)
class IonSpecies:
    """Charge Q (C), mass m (kg) and radius R (m, used only by the drag model)."""

    charge: float
    mass: float
    radius: float = 0.0

    def __post_init__(self):
        if self.charge == 0:
            raise ValidationError("ion charge must be nonzero")
        if self.mass <= 0:
            raise ValidationError(f"ion mass must be positive, got {self.mass}")
        if self.radius < 0:
            raise ValidationError(f"ion radius must be nonnegative, got {self.radius}")

    @classmethod
    def singly_charged(cls, mass_amu: float, radius: float = 0.0) -> "IonSpecies":
        return cls(charge=ELEMENTARY_CHARGE, mass=mass_amu * ATOMIC_MASS, radius=radius)


@dataclass(frozen=True)
class TrapLayout:
    """Ordered strip electrodes plus optional top plate and the solve domain.

    ``domain`` is (x_min, x_max, y_min, y_max); y_min is the electrode plane.
    Immutable after construction, safe to share across sweep workers.
    """

    electrodes: tuple[Electrode, ...]
    top_plate: Optional[TopPlate] = None
    domain: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    canonical: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        validate_strips(self.electrodes)
        x0, x1, y0, y1 = self.domain
        if not (x0 < x1 and y0 < y1):
            raise ValidationError(f"degenerate domain {self.domain}")
        for e in self.electrodes:
            if e.x_min < x0 - 1e-12 or e.x_max > x1 + 1e-12:
                raise ValidationError(f"electrode {e.id!r} outside domain")
        if self.top_plate is not None and abs(self.top_plate.height - (y1 - y0)) > 1e-9 * (y1 - y0):
            raise ValidationError("domain height must equal the top plate height when a plate is present")

    @property
    def groups(self) -> tuple[str, ...]:
        seen: list[str] = []
        for e in self.electrodes:
            if e.group not in seen:
                seen.append(e.group)
        if self.top_plate is not None:
            seen.append(PLATE_GROUP)
        return tuple(seen)

    def group_electrodes(self, group: str) -> tuple[Electrode, ...]:
        return tuple(e for e in self.electrodes if e.group == group)

    def key(self) -> tuple:
        """Canonical hashable description, used for basis caching."""
        plate = (self.top_plate.height, self.top_plate.is_dc) if self.top_plate else None
        return (
            tuple((e.id, e.role.value, e.group, e.x_min, e.x_max) for e in self.electrodes),
            plate,
            self.domain,
        )


def validate_strips(electrodes: Sequence[Electrode]) -> None:
    """Reject overlapping strips (shared edges are allowed)."""
    if not electrodes:
        raise ValidationError("layout needs at least one electrode")
    by_x = sorted(electrodes, key=lambda e: e.x_min)
    for left, right in zip(by_x[:-1], by_x[1:]):
        if right.x_min < left.x_max - 1e-15 * max(abs(left.x_max), 1.0):
            raise ValidationError(
                f"electrodes {left.id!r} and {right.id!r} overlap "
                f"({left.x_min:g}..{left.x_max:g} vs {right.x_min:g}..{right.x_max:g})"
            )


def five_electrode_layout(
    w_c: float,
    w_r: float,
    g: float,
    *,
    g_prime: Optional[float] = None,
    w_o: Optional[float] = None,
    top_plate_height: Optional[float] = None,
    top_plate_is_dc: bool = True,
    domain_height: Optional[float] = None,
    min_height_factor: float = 10.0,
) -> TrapLayout:
    """Canonical symmetric five-electrode cross-section.

    The center and the two outer strips are grounded (DC-controllable), the
    two strips between them carry the RF drive.  Opposing strips are
    electrically tied, so the independent groups are center / rf / outer
    (plus the plate when present).

    w_o defaults to 10*r1, which doubles as the grounded far-field margin:
    the side walls sit at the outer electrodes' outer edges.  The lid is at
    max(min_height_factor*r1, top_plate_height).
    """
    if g_prime is None:
        g_prime = g
    for name, val in (("w_c", w_c), ("w_r", w_r), ("g", g), ("g_prime", g_prime)):
        if not val > 0:
            raise ValidationError(f"{name} must be positive, got {val}")
    r1_val = (w_c + w_r) / 2 + g
    if w_o is None:
        w_o = 10.0 * r1_val
    if not w_o > 0:
        raise ValidationError(f"w_o must be positive, got {w_o}")

    half_c = w_c / 2
    rf_in = half_c + g
    rf_out = rf_in + w_r
    outer_in = rf_out + g_prime
    outer_out = outer_in + w_o

    electrodes = (
        Electrode("outer_left", Role.GROUND, -outer_out, -outer_in, group="outer"),
        Electrode("rf_left", Role.RF, -rf_out, -rf_in, group="rf"),
        Electrode("center", Role.GROUND, -half_c, half_c, group="center"),
        Electrode("rf_right", Role.RF, rf_in, rf_out, group="rf"),
        Electrode("outer_right", Role.GROUND, outer_in, outer_out, group="outer"),
    )

    plate = None
    if top_plate_height is not None:
        plate = TopPlate(height=top_plate_height, is_dc=top_plate_is_dc)
        height = top_plate_height
        if domain_height is not None and abs(domain_height - top_plate_height) > 1e-12:
            raise ValidationError("domain_height must equal top_plate_height when a plate is present")
    else:
        height = domain_height if domain_height is not None else min_height_factor * r1_val

    canonical = {
        "w_c": w_c, "w_r": w_r, "w_o": w_o, "g": g, "g_prime": g_prime,
        "h": top_plate_height,
    }
    return TrapLayout(
        electrodes=electrodes,
        top_plate=plate,
        domain=(-outer_out, outer_out, 0.0, height),
        canonical=canonical,
    )


def r1(layout: TrapLayout) -> float:
    """Characteristic trap size (w_c + w_r)/2 + g of a canonical layout."""
    if not layout.canonical:
        raise UnsupportedLayoutError("r1 is defined only for the canonical five-electrode layout")
    c = layout.canonical
    return (c["w_c"] + c["w_r"]) / 2 + c["g"]


def load_layout(path) -> TrapLayout:
    """Read a layout file: JSON with {w_c, w_r, w_o, g, g_prime, h, unit}."""
    with open(path, "r", encoding="utf-8") as f:
        raw = json.load(f)
    return layout_from_dict(raw)


def layout_from_dict(raw: dict) -> TrapLayout:
    unit = raw.get("unit", "m")
    if unit not in _UNIT_SCALES:
        raise ValidationError(f"unknown unit {unit!r}; expected one of {sorted(_UNIT_SCALES)}")
    scale = _UNIT_SCALES[unit]

    def get(name, required=True):
        if name not in raw or raw[name] is None:
            if required:
                raise ValidationError(f"layout file missing field {name!r}")
            return None
        return float(raw[name]) * scale

    return five_electrode_layout(
        w_c=get("w_c"),
        w_r=get("w_r"),
        g=get("g"),
        g_prime=get("g_prime", required=False),
        w_o=get("w_o", required=False),
        top_plate_height=get("h", required=False),
    )


def layout_to_dict(layout: TrapLayout, unit: str = "m") -> dict:
    if not layout.canonical:
        raise UnsupportedLayoutError("only canonical layouts can be serialized")
    scale = _UNIT_SCALES[unit]
    out = {k: (v / scale if v is not None else None) for k, v in layout.canonical.items()}
    out["unit"] = unit
    return out


def save_layout(layout: TrapLayout, path, unit: str = "m") -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(layout_to_dict(layout, unit), f, indent=2, sort_keys=True)
        f.write("\n")
