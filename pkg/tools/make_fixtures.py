"""Regenerate the shipped fixture files under src/crashbench/data.

The ADS event corpus is synthetic (ids SYN-###) but its per-location,
per-crash-type event counts, outcome overlaps and front-to-rear pre-crash
movement mix follow the published summary tables.  Run from the repo root:

    python3 tools/make_fixtures.py
"""

from __future__ import annotations

import csv
import itertools
from pathlib import Path

DATA = Path(__file__).resolve().parents[1] / "src" / "crashbench" / "data"

SGO_COLUMNS = [
    "Report ID", "Report Version", "City", "State", "Latitude", "Longitude", "Roadway Type",
    "Crash With", "Highest Injury Severity Alleged", "SV Any Air Bags Deployed?",
    "CP Any Air Bags Deployed?", "Law Enforcement Investigating?", "SV Was Vehicle Impacted?",
    "SV Contact Area - Front", "SV Contact Area - Rear", "Narrative",
    "In Transport (Review)", "Narrative Injury (Review)", "Any Vehicle Airbag (Review)",
    "Police Confirmed Severity (Review)", "Crash Sequence Position (Review)",
    "Configuration (Review)", "F2R Role (Review)", "Initiator Role (Review)",
    "Stopped Duration s (Review)", "Peak Deceleration mps2 (Review)",
]

CITY = {
    "Phoenix": ("Phoenix", "AZ", 33.4484, -112.0740),
    "SanFrancisco": ("San Francisco", "CA", 37.7749, -122.4194),
    "LosAngeles": ("Los Angeles", "CA", 34.0522, -118.2437),
    "Austin": ("Austin", "TX", 30.2672, -97.7431),
}

# crash kind -> (Crash With, configuration, sequence position)
KIND = {
    "cyc": ("Non-Motorist: Cyclist", "OtherOrUnknown", 1),
    "moto": ("Motorcycle", "OppositeDirection", 1),
    "ped": ("Non-Motorist: Pedestrian", "OtherOrUnknown", 1),
    "ped_scooter": ("Non-Motorist: Scooter", "IntersectionTurningOrCrossing", 1),
    "sec": ("Passenger Car", "FrontToRear", 2),
    "sec_moto": ("Motorcycle", "FrontToRear", 2),
    "single": ("Fixed Object", "SingleVehicle", 1),
    "backing": ("SUV", "Backing", 1),
    "f2r": ("Passenger Car", "FrontToRear", 1),
    "opp": ("Pickup Truck", "OppositeDirection", 1),
    "int": ("SUV", "IntersectionTurningOrCrossing", 1),
    "lat": ("Passenger Car", "LateralSameDirection", 1),
    "other": ("Passenger Car", "OtherOrUnknown", 1),
}

# pre-crash kinematics (stopped s, peak decel m/s^2) by movement class
MOVES = {
    "stop": [(12.0, 0.0), (6.5, 0.0), (5.0, 0.3), (30.2, 0.0), (8.1, 0.0), (9.9, 0.2)],
    "const": [(0.0, 0.4), (1.5, 0.74), (0.0, 0.1)],
    "mod": [(0.0, 0.75), (0.0, 1.8), (2.0, 3.49), (0.0, 2.6), (0.0, 1.1), (4.9, 2.2),
            (0.0, 3.0), (0.0, 0.9), (0.0, 2.4), (0.0, 1.5), (0.0, 3.3)],
    "hard": [(0.0, 3.5), (0.0, 4.2), (0.0, 6.1), (0.0, 5.0), (0.0, 3.8), (0.0, 7.4)],
}


class Builder:
    def __init__(self):
        self.rows = []
        self.ids = itertools.count(1)
        self.moves = {k: iter(v) for k, v in MOVES.items()}

    def add(self, loc, kind, inj=None, airbag=None, police=None, move=None, role="Struck",
            role_from_geometry=False, narrative_injury=False, in_transport=True, impacted=True,
            version=1, crash_id=None, initiator="Responder"):
        n = next(self.ids) if crash_id is None else None
        cid = crash_id or f"SYN-{n:03d}"
        city, state, lat, lon = CITY[loc]
        k = len(self.rows)
        partner, config, seq = KIND[kind]
        sv_bag = cp_bag = review_bag = "No"
        if airbag == "sv":
            sv_bag = "Yes"
        elif airbag == "cp":
            cp_bag = "Yes"
        elif airbag == "review":
            review_bag = "Y"
        stopped = decel = ""
        if move is not None:
            stopped, decel = next(self.moves[move])
        f2r = config == "FrontToRear" and seq == 1
        self.rows.append({
            "Report ID": cid,
            "Report Version": str(version),
            "City": city,
            "State": state,
            "Latitude": f"{lat + 0.0013 * (k % 17):.6f}",
            "Longitude": f"{lon - 0.0011 * (k % 13):.6f}",
            "Roadway Type": "Intersection" if config == "IntersectionTurningOrCrossing" else "Street",
            "Crash With": partner,
            "Highest Injury Severity Alleged": inj or "No Injuries Reported",
            "SV Any Air Bags Deployed?": sv_bag,
            "CP Any Air Bags Deployed?": cp_bag,
            "Law Enforcement Investigating?": "Yes" if police else "No",
            "SV Was Vehicle Impacted?": "Yes" if impacted else "No",
            "SV Contact Area - Front": "Y" if f2r and role == "Striking" else "N",
            "SV Contact Area - Rear": "Y" if (f2r and role == "Struck") or seq > 1 else "N",
            "Narrative": f"Synthetic {kind} event in {city}.",
            "In Transport (Review)": "Y" if in_transport else "N",
            "Narrative Injury (Review)": "Y" if narrative_injury else "N",
            "Any Vehicle Airbag (Review)": review_bag if review_bag == "Y" else ("Y" if airbag else "N"),
            "Police Confirmed Severity (Review)": police or "",
            "Crash Sequence Position (Review)": str(seq),
            "Configuration (Review)": config,
            "F2R Role (Review)": role if f2r and not role_from_geometry else "",
            "Initiator Role (Review)": initiator,
            "Stopped Duration s (Review)": "" if move is None else repr(stopped),
            "Peak Deceleration mps2 (Review)": "" if move is None else repr(decel),
        })
        return cid


def build_sgo() -> list[dict]:
    b = Builder()
    # Phoenix: 24 any-injury, 8 airbag, 0 serious
    b.add("Phoenix", "moto", inj="Minor", police="C")
    b.add("Phoenix", "moto", inj="Moderate")
    b.add("Phoenix", "sec_moto", inj="Minor")  # riderless minibike: secondary first
    for move, bag in [("stop", "sv"), ("stop", "review"), ("stop", "cp"), ("stop", "sv"), ("const", "sv")]:
        b.add("Phoenix", "f2r", inj="Minor", airbag=bag, move=move, police="C")
    for i, move in enumerate(["const"] + ["mod"] * 5 + ["hard"] * 4):
        b.add("Phoenix", "f2r", inj="Minor", move=move, role_from_geometry=(i == 3))
    b.add("Phoenix", "opp", inj="Moderate", airbag="sv", police="B")
    b.add("Phoenix", "int", inj="Minor", airbag="cp", police="C")
    b.add("Phoenix", "int", inj="Moderate", airbag="sv", police="B")
    b.add("Phoenix", "int", inj="Minor")
    b.add("Phoenix", "lat", inj="Minor")
    b.add("Phoenix", "lat", inj="Minor")
    # Phoenix property-damage events (no primary outcome)
    b.add("Phoenix", "f2r", role="Striking")
    b.add("Phoenix", "backing")
    b.add("Phoenix", "other", inj="Unknown")  # unknown severity without injury mention

    # San Francisco: 16 any-injury, 7 airbag, 2 serious
    b.add("SanFrancisco", "cyc", inj="Minor")
    b.add("SanFrancisco", "cyc", inj="Minor", police="C")
    b.add("SanFrancisco", "ped_scooter", inj="Minor")
    b.add("SanFrancisco", "sec", inj="Serious", police="A", airbag="review")
    b.add("SanFrancisco", "sec", inj="Fatality", police="K")
    b.add("SanFrancisco", "sec", inj="Serious", police="C")  # not police-confirmed serious
    b.add("SanFrancisco", "f2r", inj="Minor", airbag="sv", move="stop")
    for move in ["const"] + ["mod"] * 4 + ["hard"] * 2:
        b.add("SanFrancisco", "f2r", inj="Minor", move=move)
    b.add("SanFrancisco", "lat", inj="Minor", airbag="cp")
    b.add("SanFrancisco", "lat", inj="Moderate")
    b.add("SanFrancisco", "opp", airbag="review")
    b.add("SanFrancisco", "int", airbag="sv")
    b.add("SanFrancisco", "int", airbag="cp")
    b.add("SanFrancisco", "other", airbag="sv")
    # dropped: parked (not in transport) and not impacted
    b.add("SanFrancisco", "other", inj="Minor", in_transport=False)
    b.add("SanFrancisco", "lat", inj="Minor", impacted=False)
    # superseded report version: the later version carries the final severity
    b.add("SanFrancisco", "single", inj="Unknown", crash_id="SYN-900", version=1)
    b.add("SanFrancisco", "single", crash_id="SYN-900", version=2)

    # Los Angeles: 8 any-injury, 2 airbag, 0 serious
    b.add("LosAngeles", "cyc", inj="Minor")
    b.add("LosAngeles", "ped", inj="Minor")
    b.add("LosAngeles", "single", inj="Minor")
    b.add("LosAngeles", "f2r", inj="Minor", airbag="sv", move="mod")
    b.add("LosAngeles", "f2r", inj="Minor", move="mod")
    b.add("LosAngeles", "opp", inj="Minor")
    b.add("LosAngeles", "int", inj="Minor")
    b.add("LosAngeles", "other", inj="Unknown", narrative_injury=True)
    b.add("LosAngeles", "sec", airbag="cp")

    # Austin: 1 airbag
    b.add("Austin", "int", airbag="sv")
    return b.rows


ADS_MILES = {"Phoenix": 31.159e6, "SanFrancisco": 18.260e6, "LosAngeles": 6.448e6, "Austin": 0.834e6}

ANY, BAG, SER = "AnyInjuryReported", "AirbagDeployment", "SuspectedSeriousInjuryPlus"
GROUPS = ["Cyclist", "Motorcycle", "Pedestrian", "SecondaryCrash", "SingleVehicle", "V2VBacking",
          "V2VF2R", "V2VOppositeDirection", "V2VIntersection", "V2VLateral", "Other"]

# published human IPMM (dynamic adjustment; any-injury also underreporting adjusted)
AGGREGATE = {
    "Phoenix": {ANY: 2.09, BAG: 1.42, SER: 0.12},
    "SanFrancisco": {ANY: 8.02, BAG: 2.31, SER: 0.46},
    "LosAngeles": {ANY: 2.37, BAG: 1.18, SER: 0.14},
    "AllLocations": {ANY: 4.04, BAG: 1.69, SER: 0.24},
}
BY_TYPE_ANY = {
    "Phoenix": [0.04, 0.05, 0.07, 0.17, 0.12, 0.00, 0.44, 0.06, 0.97, 0.13, 0.04],
    "SanFrancisco": [0.80, 0.52, 1.12, 0.31, 0.56, 0.10, 0.97, 0.08, 2.84, 0.56, 0.18],
    "LosAngeles": [0.10, 0.06, 0.15, 0.16, 0.19, 0.02, 0.40, 0.04, 1.04, 0.17, 0.05],
    "AllLocations": [0.29, 0.20, 0.42, 0.21, 0.27, 0.04, 0.61, 0.06, 1.58, 0.27, 0.09],
}
# airbag tables omit the three vulnerable-road-user groups
BY_TYPE_BAG = {
    "Phoenix": [0.12, 0.10, 0.00, 0.24, 0.05, 0.81, 0.07, 0.03],
    "SanFrancisco": [0.13, 0.35, 0.02, 0.20, 0.04, 1.31, 0.15, 0.07],
    "LosAngeles": [0.09, 0.18, 0.01, 0.13, 0.02, 0.63, 0.07, 0.03],
    "AllLocations": [0.12, 0.19, 0.01, 0.22, 0.05, 0.96, 0.09, 0.04],
}
PUBLISHED_COUNT = 1e6  # large synthetic human count: published rates carry no count


def published_rows():
    rows = []

    def add(loc, outcome, ctype, rate):
        if rate > 0:
            count, exposure = PUBLISHED_COUNT, 1e6 * PUBLISHED_COUNT / rate
        else:
            count, exposure = 0.0, 1e12
        rows.append([loc, outcome, ctype, repr(rate), repr(count), repr(exposure),
                     "true" if outcome == ANY else "false", "true"])

    for loc, rates in AGGREGATE.items():
        for outcome, rate in rates.items():
            add(loc, outcome, "All", rate)
    for loc, rates in BY_TYPE_ANY.items():
        for g, rate in zip(GROUPS, rates):
            add(loc, ANY, g, rate)
    for loc, rates in BY_TYPE_BAG.items():
        for g, rate in zip(GROUPS[3:], rates):
            add(loc, BAG, g, rate)
    return rows


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    with open(DATA / "sgo_fixture.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, SGO_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(build_sgo())
    with open(DATA / "ads_miles.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "miles"])
        for loc, miles in ADS_MILES.items():
            w.writerow([loc, repr(miles)])
    with open(DATA / "published_benchmarks.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "outcome", "crash_type", "rate", "effective_count", "exposure",
                    "underreporting_applied", "dynamic_applied"])
        w.writerows(published_rows())


if __name__ == "__main__":
    main()
