"""Crash-type, outcome-level and pre-crash movement labels for canonical records."""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional

from .model import (
    AGGREGATE,
    ANY_INJURY,
    PRIMARY_OUTCOMES,
    f2r_key,
    BodyClass,
    Configuration,
    CrashRecord,
    CrashType,
    CrashTypeGroup,
    Kinematics,
    ModelError,
    OutcomeLevel,
)

STOPPED_S = 5.0
CONSTANT_DECEL = 0.75  # m/s^2
HARD_DECEL = 3.5  # m/s^2


class PreCrashMovement(str, enum.Enum):
    Stopped5s = "Stopped5s"
    ConstantOrAccelerating = "ConstantOrAccelerating"
    ModerateBraking = "ModerateBraking"
    HardBraking = "HardBraking"


_VRU = {
    BodyClass.Pedestrian: CrashTypeGroup.Pedestrian,
    BodyClass.Cyclist: CrashTypeGroup.Cyclist,
    BodyClass.Motorcycle: CrashTypeGroup.Motorcycle,
}

_V2V = {
    Configuration.Backing: CrashTypeGroup.V2VBacking,
    Configuration.FrontToRear: CrashTypeGroup.V2VF2R,
    Configuration.OppositeDirection: CrashTypeGroup.V2VOppositeDirection,
    Configuration.IntersectionTurningOrCrossing: CrashTypeGroup.V2VIntersection,
    Configuration.LateralSameDirection: CrashTypeGroup.V2VLateral,
}


def classify_crash_type(record: CrashRecord) -> CrashType:
    """Assign one of the 11 groups.

    Precedence: secondary contact, then vulnerable-road-user partner, then
    single vehicle, then vehicle-to-vehicle geometry, else Other.  The F2R
    role comes from the record's annotation when present.
    """
    if record.sequence_position > 1:
        return CrashType(CrashTypeGroup.SecondaryCrash)
    partner = record.partner
    if partner is not None and partner.body_class in _VRU:
        return CrashType(_VRU[partner.body_class])
    if partner is None or partner.body_class is BodyClass.FixedObjectOrGround:
        return CrashType(CrashTypeGroup.SingleVehicle)
    group = _V2V.get(record.configuration, CrashTypeGroup.Other)
    if group is CrashTypeGroup.V2VF2R:
        return CrashType(group, record.annotations.f2r_role)
    return CrashType(group)


def classify_outcomes(record: CrashRecord) -> frozenset[OutcomeLevel]:
    sev = record.severity
    out = set()
    if record.subject.in_transport:
        out.add(OutcomeLevel.AnyPropertyDamageOrInjury)
    if sev.police_reported:
        out.add(OutcomeLevel.PoliceReported)
    if sev.max_injury in ANY_INJURY:
        out.add(OutcomeLevel.AnyInjuryReported)
    if sev.any_airbag_any_vehicle:
        out.add(OutcomeLevel.AirbagDeployment)
    if sev.police_confirmed_serious:
        out.add(OutcomeLevel.SuspectedSeriousInjuryPlus)
    return frozenset(out)


def classify_pre_crash_movement(kinematics: Kinematics) -> PreCrashMovement:
    """Bin subject motion; each threshold belongs to the harder-braking side."""
    stopped, decel = kinematics.stopped_duration_s, kinematics.peak_deceleration_mps2
    if stopped < 0 or decel < 0:
        raise ModelError("kinematics must be non-negative")
    if stopped >= STOPPED_S:
        return PreCrashMovement.Stopped5s
    if decel < CONSTANT_DECEL:
        return PreCrashMovement.ConstantOrAccelerating
    if decel < HARD_DECEL:
        return PreCrashMovement.ModerateBraking
    return PreCrashMovement.HardBraking


@dataclass(frozen=True)
class ClassifiedRecord:
    record: CrashRecord
    crash_type: CrashType
    outcomes: frozenset[OutcomeLevel]
    movement: Optional[PreCrashMovement] = None

    @property
    def crash_type_key(self) -> str:
        return self.crash_type.group.value


def classify(record: CrashRecord) -> ClassifiedRecord:
    kin = record.annotations.kinematics
    return ClassifiedRecord(
        record=record,
        crash_type=classify_crash_type(record),
        outcomes=classify_outcomes(record),
        movement=classify_pre_crash_movement(kin) if kin is not None else None,
    )


def classify_all(records: Iterable[CrashRecord]) -> list[ClassifiedRecord]:
    return [classify(r) for r in records]


def tally(classified: Iterable[ClassifiedRecord], outcome: Optional[OutcomeLevel] = None,
          weighted: bool = False) -> Counter:
    """Per-group counts, optionally restricted to one outcome."""
    counts: Counter = Counter()
    for c in classified:
        if outcome is None or outcome in c.outcomes:
            counts[c.crash_type.group] += c.record.weight if weighted else 1
    return counts


def event_counts(classified: Iterable[ClassifiedRecord],
                 outcomes: Iterable[OutcomeLevel] = PRIMARY_OUTCOMES,
                 f2r_split: bool = True) -> dict[tuple[str, str, str], float]:
    """Weighted counts keyed by (location, outcome, crash-type key).

    Every record adds to the aggregate key and to its group; front-to-rear
    records with a known role also add to the striking or struck key.
    """
    outcomes = tuple(outcomes)
    counts: dict[tuple[str, str, str], float] = {}
    for c in classified:
        keys = [AGGREGATE, c.crash_type.group.value]
        if f2r_split and c.crash_type.f2r_role is not None:
            keys.append(f2r_key(c.crash_type.f2r_role))
        for outcome in outcomes:
            if outcome not in c.outcomes:
                continue
            for k in keys:
                key = (c.record.location.name, outcome.value, k)
                counts[key] = counts.get(key, 0.0) + c.record.weight
    return counts
