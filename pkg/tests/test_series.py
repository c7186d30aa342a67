"""Series extraction and summaries."""

import json
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from fhirlens.ingest import load_local
from fhirlens.normalize import normalize_batch
from fhirlens.series import SeriesKey, extract_series, format_sig, summarize


def obs(i, value, when, code="2339-0", unit="mg/dL", subject="Patient/1"):
    return {
        "resourceType": "Observation",
        "id": f"o{i}",
        "status": "final",
        "subject": {"reference": subject},
        "code": {"coding": [{"system": "http://loinc.org", "code": code, "display": "Glucose"}]},
        "valueQuantity": {"value": value, "unit": unit},
        "effectiveDateTime": when,
    }


def dataset_of(*resources):
    bundle = {"resourceType": "Bundle", "type": "collection",
              "entry": [{"resource": r} for r in resources]}
    return normalize_batch(load_local(json.dumps(bundle).encode(), "series.json"))


GLUCOSE_KEY = SeriesKey("Patient/1", "http://loinc.org", "2339-0", None)


class TestExtractSeries:
    def test_three_points_sorted(self):
        ds = dataset_of(
            obs(1, 110, "2024-01-02T08:00:00Z"),
            obs(2, 95, "2024-01-01T08:00:00Z"),
            obs(3, 120, "2024-01-03T08:00:00Z"),
        )
        series = extract_series(ds).series
        assert len(series) == 1
        points = series[GLUCOSE_KEY]
        assert [float(p.v) for p in points] == [95.0, 110.0, 120.0]
        assert [p.t.iso_text for p in points] == [
            "2024-01-01T08:00:00Z", "2024-01-02T08:00:00Z", "2024-01-03T08:00:00Z",
        ]

    def test_documents_only_dataset_is_empty(self):
        ds = dataset_of({"resourceType": "DocumentReference", "id": "d", "status": "current"})
        assert extract_series(ds).series == {}

    def test_duplicate_timestamp_last_wins(self):
        ds = dataset_of(
            obs(1, 5, "2024-01-01T08:00:00Z"),
            obs(2, 7, "2024-01-01T08:00:00Z"),
        )
        points = extract_series(ds).series[GLUCOSE_KEY]
        assert [float(p.v) for p in points] == [7.0]

    def test_non_quantity_and_dateless_rows_excluded(self):
        text_obs = obs(1, 0, "2024-01-01T08:00:00Z")
        del text_obs["valueQuantity"]
        text_obs["valueString"] = "positive"
        no_date = obs(2, 50, "2024-01-01T08:00:00Z")
        del no_date["effectiveDateTime"]
        year_only = obs(3, 60, "2024")
        ds = dataset_of(text_obs, no_date, year_only)
        assert extract_series(ds).series == {}

    def test_unit_mismatch_excluded_with_warning(self):
        ds = dataset_of(
            obs(1, 100, "2024-01-01T08:00:00Z", unit="mg/dL"),
            obs(2, 5.5, "2024-01-02T08:00:00Z", unit="mmol/L"),
        )
        out = extract_series(ds)
        assert len(out.series[GLUCOSE_KEY]) == 1
        assert any("UnitMismatch" in w for w in out.warnings)

    def test_naive_timestamps_flagged(self):
        ds = dataset_of(obs(1, 100, "2024-01-01T08:00:00"))
        out = extract_series(ds)
        assert len(out.series[GLUCOSE_KEY]) == 1
        assert any("NaiveTimestamp" in w for w in out.warnings)

    def test_component_series_keyed_separately(self):
        bp = {
            "resourceType": "Observation",
            "id": "bp",
            "status": "final",
            "subject": {"reference": "Patient/1"},
            "code": {"coding": [{"system": "http://loinc.org", "code": "85354-9", "display": "BP"}]},
            "effectiveDateTime": "2024-01-01T08:00:00Z",
            "component": [
                {"code": {"coding": [{"system": "http://loinc.org", "code": "8480-6"}]},
                 "valueQuantity": {"value": 120, "unit": "mmHg"}},
                {"code": {"coding": [{"system": "http://loinc.org", "code": "8462-4"}]},
                 "valueQuantity": {"value": 80, "unit": "mmHg"}},
            ],
        }
        series = extract_series(dataset_of(bp)).series
        assert len(series) == 2
        assert {k.component_code for k in series} == {"8480-6", "8462-4"}

    @given(seed=st.integers(0, 10_000))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariance_with_unique_timestamps(self, seed):
        rng = random.Random(seed)
        resources = [
            obs(i, 80 + i, f"2024-01-{i + 1:02d}T08:00:00Z") for i in range(6)
        ]
        shuffled = resources[:]
        rng.shuffle(shuffled)
        a = extract_series(dataset_of(*resources)).to_json_dict()
        b = extract_series(dataset_of(*shuffled)).to_json_dict()
        assert a["series"] == b["series"]

    def test_wire_shape(self):
        ds = dataset_of(obs(1, 100, "2024-01-01T08:00:00Z"))
        payload = extract_series(ds).to_json_dict()
        entry = payload["series"][0]
        assert entry["key"] == {
            "subject_ref": "Patient/1",
            "code_system": "http://loinc.org",
            "code": "2339-0",
            "component_code": None,
        }
        assert entry["unit"] == "mg/dL"
        assert entry["points"] == [[1704096000000, 100.0]]


class TestSummarize:
    def make_summary(self, *values):
        resources = [
            obs(i, v, f"2024-01-{i + 1:02d}T08:00:00Z") for i, v in enumerate(values)
        ]
        out = extract_series(dataset_of(*resources))
        return summarize(out)[GLUCOSE_KEY]

    def test_symmetric(self):
        s = self.make_summary(1, 2, 3)
        assert (float(s.min), float(s.max), s.mean) == (1.0, 3.0, 2.0)

    def test_singleton(self):
        s = self.make_summary(42)
        assert float(s.min) == float(s.max) == s.mean == 42.0
        assert s.count == 1

    def test_mean_oracle(self):
        s = self.make_summary(120, 80)
        assert s.mean == 100.0

    @given(st.lists(st.integers(-10_000, 10_000), min_size=1, max_size=12))
    @settings(max_examples=40, deadline=None)
    def test_bounds_and_bruteforce_mean(self, values):
        s = self.make_summary(*values)
        assert float(s.min) <= s.mean <= float(s.max)
        brute = sum(values) / len(values)
        assert abs(s.mean - brute) <= 1e-9 * max(1.0, abs(brute))
        assert all(float(s.min) <= v <= float(s.max) for v in values)

    def test_mean_reported_4_significant_digits(self):
        assert format_sig(100.0, 4) == "100"
        assert format_sig(33.333333, 4) == "33.33"
        assert format_sig(0.00123456, 4) == "0.001235"
        assert format_sig(123456.0, 4) == "123500"
