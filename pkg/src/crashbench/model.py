"""Canonical domain types shared by every pipeline stage.

Everything here is an immutable value object; no I/O and no statistics.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Protocol


class ModelError(ValueError):
    """A value violates a canonical-type invariant."""


KNOWN_LOCATIONS = ("Phoenix", "SanFrancisco", "LosAngeles", "Austin")
ALL_LOCATIONS = "AllLocations"


@dataclass(frozen=True)
class Location:
    """One analysis region. Names outside KNOWN_LOCATIONS are ``Other``."""

    name: str

    def __post_init__(self):
        if not self.name or self.name != self.name.strip():
            raise ModelError(f"invalid location name {self.name!r}")

    @property
    def is_other(self) -> bool:
        return self.name not in KNOWN_LOCATIONS

    def sort_key(self):
        if self.name in KNOWN_LOCATIONS:
            return (0, KNOWN_LOCATIONS.index(self.name), "")
        return (1, 0, self.name)

    def __str__(self) -> str:
        return self.name


def location_sort_key(name: str):
    """Known locations first in fixed order, then others, then the blended row."""
    if name == ALL_LOCATIONS:
        return (2, 0, "")
    return Location(name).sort_key()


class OutcomeLevel(str, enum.Enum):
    AnyPropertyDamageOrInjury = "AnyPropertyDamageOrInjury"
    PoliceReported = "PoliceReported"
    AnyInjuryReported = "AnyInjuryReported"
    AirbagDeployment = "AirbagDeployment"
    SuspectedSeriousInjuryPlus = "SuspectedSeriousInjuryPlus"


# outcomes compared against human benchmarks; the other two are emit-only
PRIMARY_OUTCOMES = (
    OutcomeLevel.AnyInjuryReported,
    OutcomeLevel.AirbagDeployment,
    OutcomeLevel.SuspectedSeriousInjuryPlus,
)


class CrashTypeGroup(str, enum.Enum):
    Cyclist = "Cyclist"
    Motorcycle = "Motorcycle"
    Pedestrian = "Pedestrian"
    SecondaryCrash = "SecondaryCrash"
    SingleVehicle = "SingleVehicle"
    V2VBacking = "V2VBacking"
    V2VF2R = "V2VF2R"
    V2VOppositeDirection = "V2VOppositeDirection"
    V2VIntersection = "V2VIntersection"
    V2VLateral = "V2VLateral"
    Other = "Other"


class F2RRole(str, enum.Enum):
    Striking = "Striking"
    Struck = "Struck"


@dataclass(frozen=True)
class CrashType:
    group: CrashTypeGroup
    f2r_role: Optional[F2RRole] = None

    def __post_init__(self):
        if self.f2r_role is not None and self.group is not CrashTypeGroup.V2VF2R:
            raise ModelError("f2r_role is only valid for V2VF2R")


# crash-type keys used by benchmarks and comparisons
AGGREGATE = "All"
F2R_STRIKING = "V2VF2R-Striking"
F2R_STRUCK = "V2VF2R-Struck"
CRASH_TYPE_KEYS = (AGGREGATE,) + tuple(g.value for g in CrashTypeGroup) + (F2R_STRIKING, F2R_STRUCK)


def crash_type_sort_key(key: str) -> int:
    return CRASH_TYPE_KEYS.index(key) if key in CRASH_TYPE_KEYS else len(CRASH_TYPE_KEYS)


def f2r_key(role: F2RRole) -> str:
    return F2R_STRIKING if role is F2RRole.Striking else F2R_STRUCK


class BodyClass(str, enum.Enum):
    PassengerVehicle = "PassengerVehicle"
    Motorcycle = "Motorcycle"
    Cyclist = "Cyclist"
    Pedestrian = "Pedestrian"
    HeavyVehicle = "HeavyVehicle"
    FixedObjectOrGround = "FixedObjectOrGround"
    UnknownVehicle = "UnknownVehicle"


class RoadClass(str, enum.Enum):
    SurfaceStreet = "SurfaceStreet"
    FreewayOrInterstate = "FreewayOrInterstate"
    Unknown = "Unknown"


class Configuration(str, enum.Enum):
    Backing = "Backing"
    FrontToRear = "FrontToRear"
    OppositeDirection = "OppositeDirection"
    IntersectionTurningOrCrossing = "IntersectionTurningOrCrossing"
    LateralSameDirection = "LateralSameDirection"
    SingleVehicle = "SingleVehicle"
    OtherOrUnknown = "OtherOrUnknown"


class Injury(str, enum.Enum):
    """KABCO ladder plus an allegation of injury with unknown severity."""

    NONE = "None"
    C = "C"
    B = "B"
    A = "A"
    K = "K"
    UnknownWithInjuryAllegation = "UnknownWithInjuryAllegation"

    @property
    def rank(self) -> int:
        return _INJURY_RANK[self]


_INJURY_RANK = {
    Injury.NONE: 0,
    Injury.UnknownWithInjuryAllegation: 1,
    Injury.C: 2,
    Injury.B: 3,
    Injury.A: 4,
    Injury.K: 5,
}
SERIOUS_INJURIES = frozenset({Injury.A, Injury.K})
ANY_INJURY = frozenset(
    {Injury.C, Injury.B, Injury.A, Injury.K, Injury.UnknownWithInjuryAllegation}
)


class InitiatorRole(str, enum.Enum):
    Initiator = "Initiator"
    Responder = "Responder"
    Unknown = "Unknown"


class VehicleClass(str, enum.Enum):
    All = "All"
    PassengerOnly = "PassengerOnly"


@dataclass(frozen=True)
class Actor:
    body_class: BodyClass
    role_order: int = 1
    in_transport: bool = True

    def __post_init__(self):
        if self.role_order < 1:
            raise ModelError("role_order must be >= 1")


@dataclass(frozen=True)
class Severity:
    """Crash-level maxima over every involved party."""

    max_injury: Injury = Injury.NONE
    any_airbag_any_vehicle: bool = False
    police_reported: bool = False
    police_confirmed_serious: Optional[bool] = None

    def __post_init__(self):
        if self.police_confirmed_serious and self.max_injury not in SERIOUS_INJURIES:
            raise ModelError("police_confirmed_serious requires max_injury A or K")


@dataclass(frozen=True)
class Kinematics:
    """Subject motion over the 5 s before first contact."""

    stopped_duration_s: float
    peak_deceleration_mps2: float


@dataclass(frozen=True)
class Annotations:
    initiator_role: Optional[InitiatorRole] = None
    f2r_role: Optional[F2RRole] = None
    kinematics: Optional[Kinematics] = None


@dataclass(frozen=True)
class CrashRecord:
    """One counted crashed vehicle (the subject) and its crash."""

    crash_id: str
    subject: Actor
    location: Location
    partner: Optional[Actor] = None
    coordinates: Optional[tuple[float, float]] = None
    road_class: RoadClass = RoadClass.Unknown
    sequence_position: int = 1
    configuration: Configuration = Configuration.OtherOrUnknown
    severity: Severity = field(default_factory=Severity)
    annotations: Annotations = field(default_factory=Annotations)
    weight: float = 1.0

    def __post_init__(self):
        if not self.crash_id:
            raise ModelError("crash_id is required")
        if self.sequence_position < 1:
            raise ModelError("sequence_position must be >= 1")
        if not (0.0 <= self.weight <= 1.0) or math.isnan(self.weight):
            raise ModelError(f"weight {self.weight} outside [0, 1]")
        if self.subject.body_class is BodyClass.PassengerVehicle and self.weight != 1.0:
            raise ModelError("known passenger vehicles carry weight 1")
        if self.partner is not None and self.partner.role_order == self.subject.role_order:
            raise ModelError("subject and partner share a role_order")
        if self.coordinates is not None:
            check_coordinates(*self.coordinates)


@dataclass(frozen=True)
class ExposureRow:
    location: Location
    road_class: RoadClass
    miles: float
    vehicle_class: VehicleClass = VehicleClass.All
    cell: Optional[str] = None

    def __post_init__(self):
        if not self.miles >= 0:
            raise ModelError(f"negative or NaN miles: {self.miles}")


@dataclass(frozen=True)
class ExposureTable:
    rows: tuple[ExposureRow, ...] = ()

    def total(self, location: Location | str, road_class: Optional[RoadClass] = None,
              cells: Optional[bool] = None) -> float:
        """Miles for one location; ``cells`` selects cell-level (True) or aggregate rows."""
        name = str(location)
        return math.fsum(
            r.miles
            for r in self.rows
            if r.location.name == name
            and (road_class is None or r.road_class is road_class)
            and (cells is None or (r.cell is not None) == cells)
        )

    def locations(self) -> list[str]:
        names = {r.location.name for r in self.rows}
        return sorted(names, key=location_sort_key)

    def surface_only(self) -> "ExposureTable":
        return ExposureTable(tuple(r for r in self.rows if r.road_class is RoadClass.SurfaceStreet))

    def check_cell_totals(self, rel_tol: float = 1e-3) -> list[str]:
        """Locations whose cell-level rows do not sum to the aggregate total of the same road class."""
        bad = []
        for loc in self.locations():
            for rc in sorted({r.road_class for r in self.rows if r.location.name == loc}, key=lambda c: c.value):
                agg = self.total(loc, rc, cells=False)
                cell = self.total(loc, rc, cells=True)
                if agg > 0 and cell > 0 and abs(cell - agg) > rel_tol * agg:
                    bad.append(loc)
                    break
        return bad


# --- spatial cells -----------------------------------------------------------

def check_coordinates(lat: float, lon: float) -> None:
    if not (-90.0 <= lat <= 90.0) or not (-180.0 <= lon <= 180.0):
        raise ModelError(f"coordinates out of range: ({lat}, {lon})")


class CellScheme(Protocol):
    def cell_of(self, lat: float, lon: float) -> str: ...


@dataclass(frozen=True)
class EqualAngleGrid:
    """Square lat/lon cells of ``180 / 2**level`` degrees.

    Rows count up from the south pole, columns east from the antimeridian.
    Points on the north pole or on lon = 180 fold into the last row/column.
    """

    level: int = 13

    def __post_init__(self):
        if not 0 <= self.level <= 30:
            raise ModelError("level must be in [0, 30]")

    @property
    def width(self) -> float:
        return 180.0 / (1 << self.level)

    def index(self, lat: float, lon: float) -> tuple[int, int]:
        check_coordinates(lat, lon)
        n = 1 << self.level
        row = min(int(math.floor((lat + 90.0) / self.width)), n - 1)
        col = min(int(math.floor((lon + 180.0) / self.width)), 2 * n - 1)
        return row, col

    def cell_of(self, lat: float, lon: float) -> str:
        row, col = self.index(lat, lon)
        return f"L{self.level}/{row}/{col}"

    def center(self, cell: str) -> tuple[float, float]:
        _, row, col = cell.split("/")
        w = self.width
        return -90.0 + (int(row) + 0.5) * w, -180.0 + (int(col) + 0.5) * w


def cell_of(coordinates: tuple[float, float], level: int = 13,
            scheme: Optional[CellScheme] = None) -> str:
    """Map (lat, lon) degrees to a cell id; default scheme is EqualAngleGrid(level)."""
    lat, lon = coordinates
    if scheme is None:
        scheme = EqualAngleGrid(level)
    return scheme.cell_of(lat, lon)
