"""Core model: parsing, classification, bundle unwrapping, choice resolution."""

import json
from datetime import datetime, timezone
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fhirlens.errors import AmbiguousChoice, MalformedJson, MissingResourceType, NotABundle
from fhirlens.model import (
    BUNDLE,
    PATIENT,
    CHOICE_PRIORITY,
    JsonNumber,
    ResourceKind,
    ValueKind,
    classify_resource,
    extract_bundle_entries,
    parse_resource_tree,
    parse_timepoint,
    render_json,
    resolve_choice,
    Precision,
)


def tree_of(obj) -> object:
    return parse_resource_tree(json.dumps(obj).encode())


class TestParseResourceTree:
    def test_appendix_bundle_root(self, appendix_bundle_bytes):
        tree = parse_resource_tree(appendix_bundle_bytes)
        assert tree.root["resourceType"] == "Bundle"
        assert tree.raw_size_bytes == len(appendix_bundle_bytes)

    def test_minimal_patient(self):
        tree = parse_resource_tree(b'{"resourceType":"Patient"}')
        assert tree.resource_type == "Patient"

    def test_missing_resource_type(self):
        with pytest.raises(MissingResourceType):
            parse_resource_tree(b'{"id":"x"}')

    def test_non_object_root(self):
        with pytest.raises(MissingResourceType):
            parse_resource_tree(b"[1,2]")

    def test_malformed_json_reports_byte_offset(self):
        with pytest.raises(MalformedJson) as excinfo:
            parse_resource_tree(b'{"resourceType": }')
        assert excinfo.value.byte_offset == 17

    def test_invalid_utf8(self):
        with pytest.raises(MalformedJson):
            parse_resource_tree(b'{"resourceType":"\xff"}')

    def test_nan_rejected(self):
        with pytest.raises(MalformedJson):
            parse_resource_tree(b'{"resourceType":"Observation","v":NaN}')

    def test_decimal_lexeme_preserved(self):
        tree = parse_resource_tree(
            b'{"resourceType":"Observation","valueQuantity":{"value":98.60}}'
        )
        value = tree.root["valueQuantity"]["value"]
        assert isinstance(value, JsonNumber)
        assert value.text == "98.60"
        assert value == Decimal("98.6")

    def test_determinism(self, appendix_bundle_bytes):
        a = parse_resource_tree(appendix_bundle_bytes)
        b = parse_resource_tree(appendix_bundle_bytes)
        assert a.root == b.root


class TestRenderJson:
    def test_number_lexeme_round_trip(self):
        tree = parse_resource_tree(b'{"resourceType":"Observation","v":98.60,"n":-0.5E2}')
        text = render_json(tree.root)
        assert '"v":98.60' in text
        assert '"n":-0.5E2' in text

    def test_nested_structures(self):
        tree = parse_resource_tree(b'{"resourceType":"X","a":[1,{"b":null,"c":true}]}')
        assert render_json(tree.root) == '{"resourceType":"X","a":[1,{"b":null,"c":true}]}'


class TestClassify:
    def test_known_kinds(self):
        assert classify_resource(tree_of({"resourceType": "Patient"})) == PATIENT
        assert classify_resource(tree_of({"resourceType": "Bundle"})) == BUNDLE

    def test_unsupported_carries_verbatim_name(self):
        kind = classify_resource(tree_of({"resourceType": "Medication"}))
        assert kind == ResourceKind("Medication")
        assert not kind.supported
        assert kind.name == "Medication"


class TestExtractBundleEntries:
    def test_appendix_bundle(self, appendix_bundle_bytes):
        meta, entries = extract_bundle_entries(parse_resource_tree(appendix_bundle_bytes))
        assert meta.bundle_type == "searchset"
        assert meta.total == 2
        assert [e.resource_type for e in entries] == ["Patient", "DocumentReference"]
        assert entries[0].resource_id == "32298144"

    def test_empty_bundle(self):
        meta, entries = extract_bundle_entries(
            tree_of({"resourceType": "Bundle", "type": "collection", "entry": []})
        )
        assert entries == []
        assert meta.skipped_entries == 0

    def test_entries_without_resource_are_counted(self):
        bundle = {
            "resourceType": "Bundle",
            "type": "collection",
            "entry": [
                {"resource": {"resourceType": "Patient", "id": "a"}},
                {"fullUrl": "urn:x"},
                {"resource": {"resourceType": "Patient", "id": "b"}},
            ],
        }
        meta, entries = extract_bundle_entries(tree_of(bundle))
        assert [e.resource_id for e in entries] == ["a", "b"]
        assert meta.skipped_entries == 1

    def test_links_preserve_order(self):
        bundle = {
            "resourceType": "Bundle",
            "type": "searchset",
            "link": [
                {"relation": "self", "url": "u1"},
                {"relation": "next", "url": "u2"},
            ],
            "entry": [],
        }
        meta, _ = extract_bundle_entries(tree_of(bundle))
        assert meta.links == (("self", "u1"), ("next", "u2"))

    def test_not_a_bundle(self):
        with pytest.raises(NotABundle):
            extract_bundle_entries(tree_of({"resourceType": "Patient"}))


class TestResolveChoice:
    def test_quantity(self):
        value = resolve_choice({"valueQuantity": {"value": Decimal("98.6"), "unit": "degF"}}, "value")
        assert value.kind is ValueKind.QUANTITY
        assert value.quantity.value == Decimal("98.6")
        assert value.quantity.unit == "degF"

    def test_absent(self):
        assert resolve_choice({}, "value") is None
        assert resolve_choice({"value": 1, "valuation": 2}, "value") is None

    def test_ambiguous(self):
        with pytest.raises(AmbiguousChoice):
            resolve_choice({"valueString": "pos", "valueBoolean": True}, "value")

    def test_period_is_unrendered(self):
        value = resolve_choice({"valuePeriod": {"start": "2024-01-01"}}, "value")
        assert value.kind is ValueKind.UNRENDERED
        assert value.raw == '{"start":"2024-01-01"}'

    def test_codeable_concept_display_rules(self):
        concept = {"coding": [{"system": "s", "code": "c", "display": "Shown"}]}
        value = resolve_choice({"valueCodeableConcept": concept}, "value")
        assert value.kind is ValueKind.CODEABLE
        assert value.text == "Shown"

    def test_quantity_without_value_is_unrendered(self):
        value = resolve_choice({"valueQuantity": {"unit": "degF"}}, "value")
        assert value.kind is ValueKind.UNRENDERED

    _SAMPLES = {
        "Quantity": {"value": 1},
        "CodeableConcept": {"text": "t"},
        "String": "s",
        "Boolean": True,
        "Integer": 3,
        "DateTime": "2024-01-09",
        "Period": {"start": "2024-01-01"},
        "Ratio": {"numerator": {"value": 1}},
    }

    @given(suffix=st.sampled_from(sorted(_SAMPLES)))
    def test_single_key_resolves_to_matching_variant(self, suffix):
        payload = json.loads(json.dumps({f"value{suffix}": self._SAMPLES[suffix]}))
        value = resolve_choice(payload, "value")
        expected = {
            "Quantity": ValueKind.QUANTITY,
            "CodeableConcept": ValueKind.CODEABLE,
            "String": ValueKind.TEXT,
            "Boolean": ValueKind.BOOLEAN,
            "Integer": ValueKind.INTEGER,
            "DateTime": ValueKind.DATETIME,
            "Period": ValueKind.UNRENDERED,
            "Ratio": ValueKind.UNRENDERED,
        }[suffix]
        assert value.kind is expected

    def test_priority_order_is_total(self):
        assert list(CHOICE_PRIORITY) == [
            "Quantity", "CodeableConcept", "String", "Boolean", "Integer", "DateTime", "Period",
        ]


class TestTimePoint:
    @pytest.mark.parametrize(
        "text,precision",
        [
            ("1810", Precision.YEAR),
            ("1810-03", Precision.MONTH),
            ("1810-03-21", Precision.DAY),
            ("2024-01-09T10:00:00Z", Precision.SECOND),
            ("2024-01-09T10:00:00.250Z", Precision.MILLISECOND),
        ],
    )
    def test_precision(self, text, precision):
        tp = parse_timepoint(text)
        assert tp.precision is precision
        assert tp.iso_text == text

    @pytest.mark.parametrize("text", ["1810-3-21", "2024-13-01", "2024-02-30", "x", "2024-01-09T10:00Z", "2024-01-09T25:00:00Z"])
    def test_invalid(self, text):
        assert parse_timepoint(text) is None

    def test_epoch_for_date(self):
        tp = parse_timepoint("1970-01-02")
        assert tp.epoch_millis_utc == 86400_000

    def test_epoch_partial_precision_absent(self):
        assert parse_timepoint("1810").epoch_millis_utc is None
        assert parse_timepoint("1810-03").epoch_millis_utc is None

    def test_timezone_offset(self):
        plus = parse_timepoint("2024-01-09T10:00:00+02:00")
        zulu = parse_timepoint("2024-01-09T08:00:00Z")
        assert plus.epoch_millis_utc == zulu.epoch_millis_utc

    def test_naive_flagged(self):
        tp = parse_timepoint("2024-01-09T10:00:00")
        assert tp.has_timezone is False
        assert tp.epoch_millis_utc == parse_timepoint("2024-01-09T10:00:00Z").epoch_millis_utc

    @given(
        st.datetimes(
            min_value=datetime(1900, 1, 1),
            max_value=datetime(2100, 1, 1),
        ),
        st.sampled_from(["Z", "+05:30", "-08:00"]),
    )
    @settings(max_examples=60)
    def test_epoch_matches_stdlib(self, moment, suffix):
        text = moment.strftime("%Y-%m-%dT%H:%M:%S") + suffix
        tp = parse_timepoint(text)
        oracle = datetime.fromisoformat(text.replace("Z", "+00:00"))
        assert tp.epoch_millis_utc == int(oracle.timestamp() * 1000)
        assert tp.iso_text == text
