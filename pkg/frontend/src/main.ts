/** DOM wiring: upload/fetch flows, tabs, series selection, chart, exports. */

import { ApiError, FhirlensClient, Series, TransformReport, seriesKeyId } from "./api.js";
import { chartSvg } from "./chart.js";
import {
  KINDS,
  Kind,
  ViewState,
  beginOperation,
  datasetLoaded,
  initialState,
  operationFailed,
  selectTab,
  toggleSeries,
} from "./state.js";
import { pagerHtml, reportHtml, tableHtml } from "./table.js";

const client = new FhirlensClient("");
let state: ViewState = initialState();
let seriesCache: Series[] = [];
let seriesWarnings: string[] = [];

const $ = <T extends HTMLElement>(selector: string): T => {
  const node = document.querySelector(selector);
  if (!node) throw new Error(`missing element ${selector}`);
  return node as T;
};

function showError(message: string): void {
  const banner = $("#error-banner");
  banner.textContent = message;
  banner.classList.remove("hidden");
}

function clearError(): void {
  $("#error-banner").classList.add("hidden");
}

function setBusy(busy: boolean): void {
  $("#upload-button").toggleAttribute("disabled", busy);
  $("#fetch-button").toggleAttribute("disabled", busy);
}

async function refreshTable(): Promise<void> {
  if (!state.datasetId) return;
  try {
    const page = await client.table(state.datasetId, state.activeKind, state.offset, state.limit);
    $("#table-container").innerHTML = tableHtml(page);
    $("#pager").innerHTML = pagerHtml(state.offset, state.limit, page.total);
    for (const button of document.querySelectorAll<HTMLButtonElement>("#pager button")) {
      button.addEventListener("click", () => {
        const delta = button.dataset.page === "next" ? state.limit : -state.limit;
        state = { ...state, offset: Math.max(0, state.offset + delta) };
        void refreshTable();
      });
    }
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      showError("dataset no longer available; please re-ingest the file");
    } else {
      showError(String(error instanceof Error ? error.message : error));
    }
  }
}

function renderTabs(): void {
  const nav = $("#tabs");
  nav.innerHTML = KINDS.map(
    (kind) =>
      `<button data-kind="${kind}" class="${kind === state.activeKind ? "active" : ""}">${kind}</button>`,
  ).join("");
  for (const button of nav.querySelectorAll<HTMLButtonElement>("button")) {
    button.addEventListener("click", () => {
      state = selectTab(state, button.dataset.kind as Kind);
      renderTabs();
      void refreshTable();
    });
  }
}

function renderChart(): void {
  const selected = seriesCache.filter((s) => state.selectedKeys.includes(seriesKeyId(s.key)));
  $("#chart-container").innerHTML = chartSvg(selected);
}

function renderSeriesList(): void {
  const list = $("#series-list");
  if (seriesCache.length === 0) {
    list.innerHTML = `<p class="empty">No numeric time series in this dataset.</p>`;
    renderChart();
    return;
  }
  list.innerHTML = seriesCache
    .map((series) => {
      const id = seriesKeyId(series.key);
      const checked = state.selectedKeys.includes(id) ? " checked" : "";
      const unit = series.unit ? ` (${series.unit})` : "";
      return (
        `<label><input type="checkbox" data-key="${encodeURIComponent(id)}"${checked}>` +
        `${series.label}${unit} &middot; ${series.points.length} points</label>`
      );
    })
    .join("");
  const warnings = $("#series-warnings");
  warnings.textContent = seriesWarnings.join("; ");
  warnings.classList.toggle("hidden", seriesWarnings.length === 0);
  for (const box of list.querySelectorAll<HTMLInputElement>("input[type=checkbox]")) {
    box.addEventListener("change", () => {
      state = toggleSeries(state, decodeURIComponent(box.dataset.key ?? ""));
      renderChart();  // selection changes never refetch
    });
  }
  renderChart();
}

async function onDatasetReady(datasetId: string, report: TransformReport, fetchedPages?: number): Promise<void> {
  const payload = await client.series(datasetId);
  seriesCache = payload.series;
  seriesWarnings = payload.warnings;
  state = datasetLoaded(state, datasetId, seriesCache.map((s) => seriesKeyId(s.key)));
  $("#report").innerHTML = reportHtml(report.kinds, fetchedPages);
  $("#workspace").classList.remove("hidden");
  renderTabs();
  renderSeriesList();
  await refreshTable();
}

async function uploadFlow(): Promise<void> {
  const input = $("#file-input") as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) {
    showError("choose a FHIR JSON file first");
    return;
  }
  clearError();
  try {
    state = beginOperation(state);
  } catch (error) {
    showError(String((error as Error).message));
    return;
  }
  setBusy(true);
  try {
    const bytes = await file.arrayBuffer();
    const result = await client.ingestFile(bytes, file.name);
    await onDatasetReady(result.dataset_id, result.report);
  } catch (error) {
    state = operationFailed(state);
    showError(error instanceof ApiError ? error.message : String(error));
  } finally {
    setBusy(false);
  }
}

async function fetchFlow(): Promise<void> {
  const baseUrl = ($("#fetch-base") as HTMLInputElement).value.trim();
  const resourceType = ($("#fetch-type") as HTMLInputElement).value.trim();
  const query = ($("#fetch-query") as HTMLInputElement).value.trim();
  if (!baseUrl) {
    showError("endpoint base URL is required");
    return;
  }
  clearError();
  try {
    state = beginOperation(state);
  } catch (error) {
    showError(String((error as Error).message));
    return;
  }
  setBusy(true);
  try {
    const result = await client.fetchEndpoint({
      base_url: baseUrl,
      resource_type: resourceType || "Patient",
      query,
    });
    await onDatasetReady(result.dataset_id, result.report, result.fetched_pages);
  } catch (error) {
    state = operationFailed(state);
    showError(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error));
  } finally {
    setBusy(false);
  }
}

function exportFlow(format: "pdf" | "xlsx" | "csv"): void {
  if (!state.datasetId) {
    showError("load a dataset first");
    return;
  }
  const kind = format === "csv" ? state.activeKind : undefined;
  window.location.href = client.exportUrl(state.datasetId, format, kind);
}

export function wire(): void {
  $("#upload-button").addEventListener("click", () => void uploadFlow());
  $("#fetch-button").addEventListener("click", () => void fetchFlow());
  $("#export-pdf").addEventListener("click", () => exportFlow("pdf"));
  $("#export-xlsx").addEventListener("click", () => exportFlow("xlsx"));
  $("#export-csv").addEventListener("click", () => exportFlow("csv"));
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", wire);
}
