"""Workbook/CSV writers: cell typing, ZIP integrity, determinism, quoting."""

import io
import zipfile

import pytest

from fhirlens.errors import SheetNameCollision
from fhirlens.xlsx import (
    Cell,
    Sheet,
    WorkbookModel,
    build_workbook,
    column_ref,
    render_csv,
    render_xlsx,
    sanitize_sheet_name,
)

from helpers import verify_xlsx_against_model
import xlsxread


class TestBuildWorkbook:
    def test_appendix_patient_sheet(self, appendix_dataset):
        model = build_workbook(appendix_dataset)
        names = [s.name for s in model.sheets]
        assert names == ["Patient", "Documents", "TransformReport"]
        patient = model.sheets[0]
        assert patient.rows[0][0] == Cell.of_text("32298144")  # ids stay text
        assert patient.rows[0][1] == Cell.of_text("F_Name L_Name")
        assert patient.rows[0][3] == Cell.of_text("1810-03-21")  # dates stay text

    def test_quantity_becomes_number_with_preserved_lexeme(self, tree_factory):
        import json

        from fhirlens.ingest import load_local
        from fhirlens.normalize import normalize_batch

        bundle = {
            "resourceType": "Bundle",
            "type": "collection",
            "entry": [{
                "resource": {
                    "resourceType": "Observation",
                    "id": "o",
                    "status": "final",
                    "code": {"coding": [{"system": "s", "code": "c", "display": "Temp"}]},
                    "valueQuantity": {"value": 98.60, "unit": "degF"},
                }
            }],
        }
        raw = json.dumps(bundle).replace("98.6", "98.60").encode()
        dataset = normalize_batch(load_local(raw, "x.json"))
        model = build_workbook(dataset)
        obs_sheet = next(s for s in model.sheets if s.name == "Observation")
        value_cell = obs_sheet.rows[0][7]
        assert value_cell == Cell.number("98.60")

    def test_empty_kinds_omitted(self, appendix_dataset):
        model = build_workbook(appendix_dataset)
        assert "Observation" not in [s.name for s in model.sheets]


class TestRenderXlsx:
    def test_round_trip(self, appendix_dataset):
        model = build_workbook(appendix_dataset)
        verify_xlsx_against_model(render_xlsx(model), model)

    def test_exact_entry_list(self, appendix_dataset):
        data = render_xlsx(build_workbook(appendix_dataset))
        archive = zipfile.ZipFile(io.BytesIO(data))
        assert archive.namelist() == [
            "[Content_Types].xml",
            "_rels/.rels",
            "xl/workbook.xml",
            "xl/_rels/workbook.xml.rels",
            "xl/worksheets/sheet1.xml",
            "xl/worksheets/sheet2.xml",
            "xl/worksheets/sheet3.xml",
        ]
        assert archive.testzip() is None

    def test_minimal_archive(self):
        model = WorkbookModel(sheets=(Sheet("One", ("h",), ((Cell.of_text("x"),),)),))
        data = render_xlsx(model)
        archive = zipfile.ZipFile(io.BytesIO(data))
        assert len(archive.namelist()) == 5
        verify_xlsx_against_model(data, model)

    def test_deterministic_bytes(self, appendix_dataset):
        model = build_workbook(appendix_dataset)
        assert render_xlsx(model) == render_xlsx(model)

    def test_deflate_flag_round_trips(self, appendix_dataset):
        model = build_workbook(appendix_dataset)
        deflated = render_xlsx(model, deflate=True)
        assert len(deflated) < len(render_xlsx(model))
        verify_xlsx_against_model(deflated, model)

    def test_ten_thousand_rows(self):
        rows = tuple(
            (Cell.of_text(f"id-{i}"), Cell.number(str(i)), Cell.of_text("final"))
            for i in range(10_000)
        )
        model = WorkbookModel(sheets=(Sheet("Big", ("a", "b", "c"), rows),))
        grid = xlsxread.read_workbook(render_xlsx(model))["Big"]
        assert len(grid) == 10_001
        assert grid[10_000] == [("s", "id-9999"), ("n", "9999"), ("s", "final")]

    def test_sheet_name_sanitization_and_collision(self):
        assert sanitize_sheet_name("bad[name]:*?/\\") == "bad_name______"
        assert len(sanitize_sheet_name("x" * 40)) == 31
        model = WorkbookModel(
            sheets=(
                Sheet("a/b", ("h",), ()),
                Sheet("a:b", ("h",), ()),
            )
        )
        with pytest.raises(SheetNameCollision):
            render_xlsx(model)

    def test_whitespace_preserved(self):
        model = WorkbookModel(sheets=(Sheet("S", ("h",), ((Cell.of_text("  padded  "),),)),))
        grid = xlsxread.read_workbook(render_xlsx(model))["S"]
        assert grid[1][0] == ("s", "  padded  ")


class TestColumnRef:
    @pytest.mark.parametrize("index,ref", [(0, "A"), (25, "Z"), (26, "AA"), (51, "AZ"), (701, "ZZ"), (702, "AAA")])
    def test_refs(self, index, ref):
        assert column_ref(index) == ref


class TestRenderCsv:
    def test_quoting_rules(self):
        data = render_csv(("name",), [('say "hi"',), ("a,b",), ("line\nbreak",)])
        assert data == b'name\r\n"say ""hi"""\r\n"a,b"\r\n"line\nbreak"\r\n'

    def test_empty_table_is_header_only(self):
        assert render_csv(("a", "b"), []) == b"a,b\r\n"

    def test_appendix_patient_two_lines(self, appendix_dataset):
        from fhirlens.exports import export_dataset

        body, media, name = export_dataset(appendix_dataset, "csv", kind="Patient")
        lines = body.decode("utf-8").split("\r\n")
        assert len(lines) == 3 and lines[-1] == ""
        assert "32298144" in lines[1]
        assert media == "text/csv" and name == "patient.csv"

    def test_utf8_no_bom(self):
        data = render_csv(("h",), [("é",)])
        assert not data.startswith(b"\xef\xbb\xbf")
        assert "é".encode("utf-8") in data
