"""Deterministic synthetic FHIR corpus with malformation injection.

Generation is a pure function of the spec: the same seed yields byte-identical
bundles. Injected malformations are fatal by construction, and the emitted
manifest lists exactly which bundle entries were mutated, giving tests a
ground truth to reconcile against the transform report.
"""

from __future__ import annotations

import base64
import json
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from typing import Any

KIND_ORDER = ("Patient", "Observation", "Encounter", "DocumentReference")

# categories that can only be made fatal on observations
_OBSERVATION_ONLY = {"IncompleteCoding", "AmbiguousChoice"}
_INJECTABLE = {
    "MalformedExtension",
    "IncompleteCoding",
    "MissingRequiredField",
    "AmbiguousChoice",
    "UnsupportedResourceType",
}

_GIVEN = ("Alice", "Bram", "Chidi", "Dana", "Emil", "Fatou", "Georg", "Hana", "Iris", "Jonas")
_FAMILY = ("Abara", "Berg", "Chen", "Duval", "Eriksen", "Fischer", "Grant", "Horvat", "Ito", "Juhasz")
_GENDERS = ("female", "male", "other", "unknown")

_SIMPLE_CODES = (
    ("2339-0", "Glucose", "mg/dL", 60.0, 180.0),
    ("8867-4", "Heart rate", "/min", 50.0, 110.0),
    ("8310-5", "Body temperature", "Cel", 35.5, 39.5),
    ("29463-7", "Body weight", "kg", 45.0, 110.0),
)
_BP_COMPONENTS = (
    ("8480-6", "Systolic blood pressure", 95.0, 160.0),
    ("8462-4", "Diastolic blood pressure", 55.0, 100.0),
)
_LOINC = "http://loinc.org"

_DOC_TYPES = (
    ("11506-3", "Progress Note"),
    ("34133-9", "Summary of episode note"),
    ("18842-5", "Discharge summary"),
)
_ENC_CLASSES = (("AMB", "ambulatory"), ("IMP", "inpatient encounter"), ("EMER", "emergency"))


@dataclass(frozen=True)
class CorpusSpec:
    seed: int = 0
    counts: dict = field(default_factory=dict)
    malformation_rates: dict = field(default_factory=dict)
    component_weights: tuple[float, ...] = (0.55, 0.0, 0.35, 0.10)

    def __post_init__(self):
        for kind in self.counts:
            if kind not in KIND_ORDER:
                raise ValueError(f"unknown resource kind {kind!r}")
            if self.counts[kind] < 0:
                raise ValueError("counts must be >= 0")
        for category, rate in self.malformation_rates.items():
            if category not in _INJECTABLE:
                raise ValueError(f"category {category!r} cannot be injected")
            if not 0.0 <= rate <= 1.0:
                raise ValueError("malformation rates must be within [0, 1]")

    @staticmethod
    def from_json_dict(raw: dict) -> "CorpusSpec":
        return CorpusSpec(
            seed=int(raw.get("seed", 0)),
            counts={str(k): int(v) for k, v in (raw.get("counts") or {}).items()},
            malformation_rates={
                str(k): float(v) for k, v in (raw.get("malformation_rates") or {}).items()
            },
            component_weights=tuple(
                raw.get("component_weights", (0.55, 0.0, 0.35, 0.10))
            ),
        )


def _make_patient(i: int, rng: random.Random) -> dict:
    given = [rng.choice(_GIVEN)]
    if rng.random() < 0.3:
        given.append(rng.choice(_GIVEN))
    family = rng.choice(_FAMILY)
    patient: dict[str, Any] = {
        "resourceType": "Patient",
        "id": f"pat-{i:04d}",
        "name": [{"use": "usual", "family": family, "given": given}],
        "gender": _GENDERS[i % len(_GENDERS)],
        "birthDate": f"{rng.randint(1930, 2010)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}",
    }
    if rng.random() < 0.5:
        patient["name"].insert(
            0, {"use": "official", "family": family.upper(), "given": given}
        )
    if rng.random() < 0.7:
        patient["identifier"] = [
            {"system": "http://hospital.example/mrn", "value": f"MRN{100000 + i}"}
        ]
    return patient


def _effective(i: int, rng: random.Random) -> str:
    base = datetime(2024, 1, 1, 8, 0, 0, tzinfo=timezone.utc)
    moment = base + timedelta(hours=6 * i, minutes=rng.randint(0, 59))
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def _make_observation(i: int, rng: random.Random, subject: str, weights) -> dict:
    obs: dict[str, Any] = {
        "resourceType": "Observation",
        "id": f"obs-{i:04d}",
        "status": "final",
        "subject": {"reference": subject},
        "effectiveDateTime": _effective(i, rng),
    }
    n_components = rng.choices((0, 1, 2, 3), weights=weights)[0]
    if n_components == 0:
        code, display, unit, lo, hi = _SIMPLE_CODES[i % len(_SIMPLE_CODES)]
        obs["code"] = {
            "coding": [{"system": _LOINC, "code": code, "display": display}],
            "text": display,
        }
        if rng.random() < 0.08:
            obs["valueString"] = rng.choice(("positive", "negative", "inconclusive"))
        else:
            obs["valueQuantity"] = {
                "value": round(rng.uniform(lo, hi), 1),
                "unit": unit,
                "system": "http://unitsofmeasure.org",
                "code": unit,
            }
    else:
        obs["code"] = {
            "coding": [
                {"system": _LOINC, "code": "85354-9", "display": "Blood pressure panel"}
            ],
            "text": "Blood pressure",
        }
        components = []
        for code, display, lo, hi in _BP_COMPONENTS[:n_components] or _BP_COMPONENTS:
            components.append(
                {
                    "code": {"coding": [{"system": _LOINC, "code": code, "display": display}]},
                    "valueQuantity": {
                        "value": round(rng.uniform(lo, hi), 1),
                        "unit": "mmHg",
                        "system": "http://unitsofmeasure.org",
                        "code": "mm[Hg]",
                    },
                }
            )
        obs["component"] = components
    return obs


def _make_encounter(i: int, rng: random.Random, subject: str) -> dict:
    code, display = _ENC_CLASSES[i % len(_ENC_CLASSES)]
    start = datetime(2024, 1, 1, 9, 0, 0, tzinfo=timezone.utc) + timedelta(days=i)
    end = start + timedelta(minutes=rng.randint(15, 180))
    return {
        "resourceType": "Encounter",
        "id": f"enc-{i:04d}",
        "status": rng.choice(("finished", "in-progress", "planned")),
        "class": {
            "system": "http://terminology.hl7.org/CodeSystem/v3-ActCode",
            "code": code,
            "display": display,
        },
        "type": [
            {
                "coding": [
                    {"system": "http://snomed.info/sct", "code": "308335008", "display": "Patient encounter procedure"}
                ]
            }
        ],
        "subject": {"reference": subject},
        "period": {
            "start": start.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "end": end.strftime("%Y-%m-%dT%H:%M:%SZ"),
        },
    }


def _make_document(i: int, rng: random.Random, subject: str) -> dict:
    code, display = _DOC_TYPES[i % len(_DOC_TYPES)]
    doc: dict[str, Any] = {
        "resourceType": "DocumentReference",
        "id": f"doc-{i:04d}",
        "status": "current",
        "docStatus": rng.choice(("final", "preliminary", "amended")),
        "type": {"coding": [{"system": _LOINC, "code": code, "display": display}]},
        "date": f"2024-01-{(i % 27) + 1:02d}",
        "author": [{"reference": f"Practitioner/pr-{rng.randint(1, 9):03d}"}],
        "subject": {"reference": subject},
    }
    if rng.random() < 0.5:
        blob = base64.b64encode(f"note body {i}".encode("ascii")).decode("ascii")
        doc["content"] = [
            {"attachment": {"contentType": "text/plain", "data": blob, "title": display}}
        ]
    else:
        doc["content"] = [
            {"attachment": {"contentType": "text/plain", "url": f"Binary/bin-{i:04d}"}}
        ]
    return doc


def _inject(resource: dict, category: str) -> None:
    if category == "MalformedExtension":
        resource["extension"] = [{"valueString": "vendor-payload"}]
    elif category == "IncompleteCoding":
        resource["code"] = {"coding": [{"display": "local label"}]}
    elif category == "MissingRequiredField":
        required = {
            "Patient": "id",
            "Observation": "code",
            "Encounter": "status",
            "DocumentReference": "status",
        }[resource["resourceType"]]
        resource.pop(required, None)
    elif category == "AmbiguousChoice":
        resource["valueQuantity"] = {"value": 1, "unit": "1"}
        resource["valueString"] = "duplicate"
        resource.pop("component", None)
    elif category == "UnsupportedResourceType":
        resource["resourceType"] = "Medication"


def generate(spec: CorpusSpec) -> tuple[bytes, dict]:
    """Generate a bundle plus a manifest of injected entry indices."""
    gen_rng = random.Random(f"{spec.seed}-gen")
    place_rng = random.Random(f"{spec.seed}-place")

    patients = [_make_patient(i, gen_rng) for i in range(spec.counts.get("Patient", 0))]
    subjects = [f"Patient/{p['id']}" for p in patients] or ["Patient/external"]

    made: dict[str, list[dict]] = {"Patient": patients}
    made["Observation"] = [
        _make_observation(i, gen_rng, subjects[i % len(subjects)], spec.component_weights)
        for i in range(spec.counts.get("Observation", 0))
    ]
    made["Encounter"] = [
        _make_encounter(i, gen_rng, subjects[i % len(subjects)])
        for i in range(spec.counts.get("Encounter", 0))
    ]
    made["DocumentReference"] = [
        _make_document(i, gen_rng, subjects[i % len(subjects)])
        for i in range(spec.counts.get("DocumentReference", 0))
    ]

    offsets = {}
    offset = 0
    for kind in KIND_ORDER:
        offsets[kind] = offset
        offset += len(made[kind])

    injections = []
    for kind in KIND_ORDER:
        count = len(made[kind])
        if count == 0:
            continue
        pool = list(range(count))
        place_rng.shuffle(pool)
        cursor = 0
        for category in sorted(spec.malformation_rates):
            if category in _OBSERVATION_ONLY and kind != "Observation":
                continue
            wanted = math.floor(spec.malformation_rates[category] * count)
            if cursor + wanted > count:
                raise ValueError(f"malformation rates exceed {kind} count")
            for local in pool[cursor:cursor + wanted]:
                _inject(made[kind][local], category)
                injections.append(
                    {"index": offsets[kind] + local, "kind": kind, "category": category}
                )
            cursor += wanted

    injections.sort(key=lambda item: item["index"])
    entries = []
    for kind in KIND_ORDER:
        entries.extend({"resource": r} for r in made[kind])

    bundle = {
        "resourceType": "Bundle",
        "type": "collection",
        "total": len(entries),
        "entry": entries,
    }
    manifest = {
        "seed": spec.seed,
        "counts": {k: len(made[k]) for k in KIND_ORDER if made[k]},
        "total_entries": len(entries),
        "injections": injections,
    }
    return json.dumps(bundle, indent=2).encode("utf-8"), manifest
