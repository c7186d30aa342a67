/** Typed client for the fhirlens service JSON API. */

export interface ReportKind {
  kind: string;
  attempted: number;
  succeeded: number;
  success_rate: number;
  failures: { resource_index: number; category: string; message: string }[];
  warnings: { resource_index: number; message: string }[];
}

export interface TransformReport {
  kinds: ReportKind[];
}

export interface IngestResult {
  dataset_id: string;
  report: TransformReport;
  fetched_pages?: number;
}

export interface TablePage {
  columns: string[];
  rows: string[][];
  total: number;
}

export interface SeriesKey {
  subject_ref: string;
  code_system: string;
  code: string;
  component_code: string | null;
}

export interface Series {
  key: SeriesKey;
  label: string;
  unit: string;
  points: [number, number][];
}

export interface SeriesPayload {
  series: Series[];
  warnings: string[];
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detailPath?: string,
  ) {
    super(message);
  }
}

async function fail(response: Response): Promise<never> {
  let code = "Error";
  let message = `HTTP ${response.status}`;
  let detailPath: string | undefined;
  try {
    const body = (await response.json()) as { code?: string; message?: string; detail_path?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
    detailPath = body.detail_path;
  } catch {
    // non-JSON error body: keep the HTTP status message
  }
  throw new ApiError(response.status, code, message, detailPath);
}

async function asJson<T>(response: Response): Promise<T> {
  if (!response.ok) await fail(response);
  return (await response.json()) as T;
}

/** Stable identity for a series key, used for selection state. */
export function seriesKeyId(key: SeriesKey): string {
  return [key.subject_ref, key.code_system, key.code, key.component_code ?? ""].join("|");
}

export class FhirlensClient {
  constructor(readonly base: string = "") {}

  async ingestFile(data: ArrayBuffer | Uint8Array | string, name: string): Promise<IngestResult> {
    const body: BodyInit = typeof data === "string" ? data : (data as BodyInit);
    const response = await fetch(`${this.base}/api/ingest?name=${encodeURIComponent(name)}`, {
      method: "POST",
      body,
    });
    return asJson<IngestResult>(response);
  }

  async fetchEndpoint(params: {
    base_url: string;
    resource_type: string;
    query?: string;
    max_pages?: number;
  }): Promise<IngestResult> {
    const response = await fetch(`${this.base}/api/fetch`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(params),
    });
    return asJson<IngestResult>(response);
  }

  async table(datasetId: string, kind: string, offset = 0, limit = 100): Promise<TablePage> {
    const response = await fetch(
      `${this.base}/api/datasets/${datasetId}/tables/${kind}?offset=${offset}&limit=${limit}`,
    );
    return asJson<TablePage>(response);
  }

  async series(datasetId: string): Promise<SeriesPayload> {
    const response = await fetch(`${this.base}/api/datasets/${datasetId}/series`);
    return asJson<SeriesPayload>(response);
  }

  exportUrl(datasetId: string, format: "pdf" | "xlsx" | "csv", kind?: string): string {
    let url = `${this.base}/api/datasets/${datasetId}/export?format=${format}`;
    if (kind) url += `&kind=${encodeURIComponent(kind)}`;
    return url;
  }
}
