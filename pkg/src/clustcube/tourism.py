"""Seeded synthetic tourism dataset: one fact table, sixteen dimensions.

The star models tourist bookings: a Reservation fact row references eight
service dimensions (Accommodation, PointOfInterest, CarRental, Flight,
Ferry, Taxi, Tour, Tourist), a GeographicalArea dimension with a
city < region < country hierarchy, and seven review dimensions (one per
reviewed service, one review row per reservation).  Tourist carries an
age_band < generation hierarchy.  Fact measures are price, party_size
and duration_days.

Review scores are planted: score = intercept + price_coef * price +
duration_coef * duration_days + gaussian noise, with the coefficients
drawn once per seed and written to ``ground_truth.json``, so a regression
over any preset cube has a known answer to recover.

Generation is a pure function of (seed, scale): the same inputs always
produce byte-identical files.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .errors import ClustCubeError
from .lattice import CuboidId, DimensionSpec
from .star_store import Column, ColumnType, export_csv, TableData

SCALES = {"tiny": 100, "small": 10_000, "medium": 100_000}

REVIEW_TABLES = ("AccommodationReview", "CarRentalReview", "FlightReview",
                 "FerryReview", "TourReview", "TaxiReview", "PointOfInterestReview")

DIMENSION_TABLES = ("Accommodation", "PointOfInterest", "CarRental", "Flight", "Ferry",
                    "Taxi", "Tour", "Tourist", "GeographicalArea") + REVIEW_TABLES

_GEOGRAPHY = [
    # (city, region, country)
    ("Rende", "Calabria", "Italy"), ("Cosenza", "Calabria", "Italy"), ("Tropea", "Calabria", "Italy"),
    ("Palermo", "Sicily", "Italy"), ("Catania", "Sicily", "Italy"), ("Rome", "Lazio", "Italy"),
    ("Marseille", "Provence", "France"), ("Nice", "Provence", "France"), ("Avignon", "Provence", "France"),
    ("Rennes", "Brittany", "France"), ("Brest", "Brittany", "France"), ("Paris", "Ile-de-France", "France"),
]

_AGE_BANDS = [(18, 24, "18-24", "GenZ"), (25, 34, "25-34", "Millennial"),
              (35, 44, "35-44", "Millennial"), (45, 54, "45-54", "GenX"),
              (55, 64, "55-64", "GenX"), (65, 120, "65+", "Boomer")]

_FERRY_OPERATORS = ["AdriaLines", "MedStar", "BlueWave", "IonianFerries", "CoastRunner", "Sirena"]
_VESSELS = ["hydrofoil", "cruiser", "catamaran"]
_AIRLINES = ["AirCalabria", "VoloSud", "SkyMed", "TransAlp", "Aquila", "NuvolaJet"]
_CABINS = ["economy", "premium", "business"]
_RENTAL_COMPANIES = ["DriveNow", "AutoSole", "RentaMed", "GoWheels", "CityCar", "ViaggioAuto"]
_VEHICLE_CLASSES = ["economy", "compact", "suv", "luxury"]
_TAXI_COMPANIES = ["RadioTaxi", "CityCab", "EuroRide", "TaxiBlu", "Presto", "LagoCab"]
_TAXI_VEHICLES = ["sedan", "van", "minibus"]
_TOUR_OPERATORS = ["HeritageWalks", "GustoTours", "TerraViva", "ArteViva", "SentieroSud", "MareAperto"]
_TOUR_THEMES = ["food", "history", "nature", "art"]
_ACCOM_TYPES = ["hotel", "hostel", "apartment", "resort"]
_POI_CATEGORIES = ["museum", "beach", "park", "monument", "gallery"]


@dataclass(frozen=True)
class GenConfig:
    seed: int
    scale: str
    out_dir: str | Path

    def __post_init__(self):
        if self.scale not in SCALES:
            raise ClustCubeError(f"unknown scale {self.scale!r}; choose one of {', '.join(SCALES)}")


@dataclass(frozen=True)
class CuboidPreset:
    """One of the five service-oriented cuboids over the tourism cube."""

    name: str
    dimensions: tuple[DimensionSpec, ...]
    codq_text: str
    default_k: int
    target: str

    @property
    def default_cuboid(self) -> CuboidId:
        """Coordinate dimensions at their finest level, review dimensions rolled away."""
        choices = []
        for d in self.dimensions:
            choices.append(None if d.name.endswith("Review") else 0)
        return CuboidId(tuple(choices))


def _dim_sizes(scale: str) -> dict[str, int]:
    n = SCALES[scale]
    service = {"tiny": 8, "small": 24, "medium": 48}[scale]
    return {
        "Accommodation": {"tiny": 10, "small": 40, "medium": 120}[scale],
        "PointOfInterest": {"tiny": 10, "small": 30, "medium": 80}[scale],
        "CarRental": service, "Flight": service, "Ferry": service,
        "Taxi": service, "Tour": service,
        "Tourist": {"tiny": 30, "small": 600, "medium": 3000}[scale],
        "GeographicalArea": len(_GEOGRAPHY),
        **{t: n for t in REVIEW_TABLES},
    }


def _columns(table: str) -> tuple[Column, ...]:
    I, R, T = ColumnType.INTEGER, ColumnType.REAL, ColumnType.TEXT
    if table == "Reservation":
        cols = [Column("id", I)]
        cols += [Column(_fk_name(t), I) for t in DIMENSION_TABLES]
        cols += [Column("price", R), Column("party_size", I), Column("duration_days", I)]
        return tuple(cols)
    specs = {
        "Accommodation": [("id", I), ("name", T), ("type", T), ("stars", I), ("city", T)],
        "PointOfInterest": [("id", I), ("name", T), ("category", T), ("city", T)],
        "CarRental": [("id", I), ("company", T), ("vehicle_class", T)],
        "Flight": [("id", I), ("airline", T), ("cabin", T)],
        "Ferry": [("id", I), ("operator", T), ("vessel_type", T), ("departure_city", T),
                  ("arrival_city", T), ("route", T)],
        "Taxi": [("id", I), ("company", T), ("vehicle_type", T)],
        "Tour": [("id", I), ("operator", T), ("theme", T)],
        "Tourist": [("id", I), ("age", I), ("age_band", T), ("generation", T), ("home_country", T)],
        "GeographicalArea": [("id", I), ("city", T), ("region", T), ("country", T)],
    }
    if table in specs:
        return tuple(Column(n, t) for n, t in specs[table])
    if table in REVIEW_TABLES:
        return tuple([Column("id", I), Column("score", R)])
    raise ClustCubeError(f"unknown table {table!r}")


def _fk_name(table: str) -> str:
    out = []
    for i, ch in enumerate(table):
        if ch.isupper() and i > 0:
            out.append("_")
        out.append(ch.lower())
    return "".join(out) + "_id"


def _band_for(age: int) -> tuple[str, str]:
    for lo, hi, band, gen in _AGE_BANDS:
        if lo <= age <= hi:
            return band, gen
    return _AGE_BANDS[-1][2], _AGE_BANDS[-1][3]


def _gen_dimension(table: str, size: int, rng: random.Random) -> list[tuple]:
    rows = []
    cities = [g[0] for g in _GEOGRAPHY]
    for i in range(1, size + 1):
        if table == "Accommodation":
            rows.append((i, f"Stay{i}", rng.choice(_ACCOM_TYPES), rng.randint(1, 5), rng.choice(cities)))
        elif table == "PointOfInterest":
            rows.append((i, f"Sight{i}", rng.choice(_POI_CATEGORIES), rng.choice(cities)))
        elif table == "CarRental":
            rows.append((i, rng.choice(_RENTAL_COMPANIES), rng.choice(_VEHICLE_CLASSES)))
        elif table == "Flight":
            rows.append((i, rng.choice(_AIRLINES), rng.choice(_CABINS)))
        elif table == "Ferry":
            dep, arr = rng.sample(cities, 2)
            rows.append((i, rng.choice(_FERRY_OPERATORS), rng.choice(_VESSELS), dep, arr, f"{dep}-{arr}"))
        elif table == "Taxi":
            rows.append((i, rng.choice(_TAXI_COMPANIES), rng.choice(_TAXI_VEHICLES)))
        elif table == "Tour":
            rows.append((i, rng.choice(_TOUR_OPERATORS), rng.choice(_TOUR_THEMES)))
        elif table == "Tourist":
            age = rng.randint(18, 79)
            band, gen = _band_for(age)
            rows.append((i, age, band, gen, rng.choice(["Italy", "France", "Germany", "Spain", "UK"])))
        elif table == "GeographicalArea":
            city, region, country = _GEOGRAPHY[i - 1]
            rows.append((i, city, region, country))
    return rows


def generate(config: GenConfig) -> dict:
    """Write the full dataset and return {table: row_count} for bookkeeping.

    Emits one ``<Table>.csv`` per table, ``schema.json`` (the manifest),
    ``presets/<Name>.codq`` query files and ``ground_truth.json`` with the
    planted review-score coefficients.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(config.seed)
    n_fact = SCALES[config.scale]
    sizes = _dim_sizes(config.scale)

    ground_truth = {"seed": config.seed, "scale": config.scale, "noise_model": "gaussian",
                    "predictors": ["price", "duration_days"], "reviews": {}}
    coeffs = {}
    for table in REVIEW_TABLES:
        coeffs[table] = {
            "intercept": round(rng.uniform(2.0, 4.0), 4),
            "price_coef": round(rng.uniform(0.001, 0.004), 6),
            "duration_coef": round(rng.uniform(0.05, 0.2), 4),
            "noise_std": 0.5,
        }
        ground_truth["reviews"][table] = coeffs[table]

    tables: dict[str, TableData] = {}
    for table in DIMENSION_TABLES:
        if table in REVIEW_TABLES:
            continue
        tables[table] = TableData(table, _columns(table),
                                  tuple(_gen_dimension(table, sizes[table], rng)))

    fact_rows = []
    review_rows: dict[str, list[tuple]] = {t: [] for t in REVIEW_TABLES}
    review_of = {"Accommodation": "AccommodationReview", "CarRental": "CarRentalReview",
                 "Flight": "FlightReview", "Ferry": "FerryReview", "Tour": "TourReview",
                 "Taxi": "TaxiReview", "PointOfInterest": "PointOfInterestReview"}
    for i in range(1, n_fact + 1):
        price = round(rng.uniform(50.0, 2000.0), 2)
        party_size = rng.randint(1, 8)
        duration = rng.randint(1, 21)
        fks = {}
        for table in DIMENSION_TABLES:
            if table in REVIEW_TABLES:
                fks[table] = i  # one review per reservation per reviewed service
            else:
                fks[table] = rng.randint(1, sizes[table])
        for table in REVIEW_TABLES:
            c = coeffs[table]
            score = (c["intercept"] + c["price_coef"] * price
                     + c["duration_coef"] * duration + rng.gauss(0.0, c["noise_std"]))
            review_rows[table].append((i, score))
        fact_rows.append((i, *(fks[t] for t in DIMENSION_TABLES), price, party_size, duration))

    for table in REVIEW_TABLES:
        tables[table] = TableData(table, _columns(table), tuple(review_rows[table]))
    tables["Reservation"] = TableData("Reservation", _columns("Reservation"), tuple(fact_rows))

    for name, data in tables.items():
        export_csv(data, out / f"{name}.csv")

    manifest = {
        "fact": "Reservation",
        "dimensions": [{"table": t, "fact_fk": _fk_name(t), "dim_key": "id"} for t in DIMENSION_TABLES],
        "hierarchies": [
            {"dimension": "GeographicalArea", "levels": ["city", "region", "country"]},
            {"dimension": "Tourist", "levels": ["age_band", "generation"]},
        ],
        "measures": ["price", "party_size", "duration_days"],
        "tables": {name: [{"name": c.name, "type": c.type.value} for c in data.columns]
                   for name, data in tables.items()},
    }
    (out / "schema.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "ground_truth.json").write_text(json.dumps(ground_truth, indent=2, sort_keys=True) + "\n",
                                           encoding="utf-8")

    presets_dir = out / "presets"
    presets_dir.mkdir(exist_ok=True)
    for preset in presets():
        (presets_dir / f"{preset.name}.codq").write_text(preset.codq_text, encoding="utf-8")

    return {name: len(data.rows) for name, data in tables.items()}


# ---------------------------------------------------------------------------
# Preset cuboids


def _preset_codq(service: str, service_coord: str, coord_name: str, review: str, target: str) -> str:
    return (
        "SELECT ga.city AS city:coordinate,\n"
        "       t.age_band AS age_band:coordinate,\n"
        f"       s.{service_coord} AS {coord_name}:coordinate,\n"
        "       a.type AS accommodation_type:coordinate,\n"
        "       r.price AS price:feature,\n"
        "       r.duration_days AS duration_days:feature,\n"
        "       r.party_size AS party_size:feature,\n"
        f"       sr.score AS {target}:target,\n"
        "       ar.score AS accommodation_review_score:feature\n"
        "FROM Reservation r\n"
        f"JOIN {service} s ON r.{_fk_name(service)} = s.id\n"
        "JOIN GeographicalArea ga ON r.geographical_area_id = ga.id\n"
        "JOIN Tourist t ON r.tourist_id = t.id\n"
        "JOIN Accommodation a ON r.accommodation_id = a.id\n"
        f"JOIN {review} sr ON r.{_fk_name(review)} = sr.id\n"
        "JOIN AccommodationReview ar ON r.accommodation_review_id = ar.id\n"
    )


def _preset_dims(service: str, service_level: str, review: str) -> tuple[DimensionSpec, ...]:
    return (
        DimensionSpec("Accommodation", ("type",)),
        DimensionSpec(service, (service_level,)),
        DimensionSpec("GeographicalArea", ("city", "region", "country")),
        DimensionSpec("Tourist", ("age_band", "generation")),
        DimensionSpec(review, ("score",)),
        DimensionSpec("AccommodationReview", ("score",)),
    )


def presets() -> list[CuboidPreset]:
    """The five service cuboids, each over six dimensions of the tourism cube."""
    defs = [
        # name, service table, coordinate column, coordinate attr, review table
        ("FlightInformationCube", "Flight", "airline", "airline", "FlightReview", "flight_review_score"),
        ("FerryInformationCube", "Ferry", "operator", "ferry_operator", "FerryReview", "ferry_review_score"),
        ("CarRentalInformationCube", "CarRental", "company", "rental_company", "CarRentalReview",
         "car_rental_review_score"),
        # the published composition of this cuboid names CarRental, not Tour
        ("TourInformationCube", "CarRental", "company", "rental_company", "CarRentalReview",
         "car_rental_review_score"),
        ("TaxiInformationCube", "Taxi", "company", "taxi_company", "TaxiReview", "taxi_review_score"),
    ]
    out = []
    for name, service, coord_col, coord_name, review, target in defs:
        out.append(CuboidPreset(
            name=name,
            dimensions=_preset_dims(service, coord_col, review),
            codq_text=_preset_codq(service, coord_col, coord_name, review, target),
            default_k=3,
            target=target,
        ))
    return out


def preset_by_name(name: str) -> CuboidPreset:
    for p in presets():
        if p.name == name:
            return p
    raise ClustCubeError(f"unknown preset cuboid {name!r}; available: "
                         + ", ".join(p.name for p in presets()))
