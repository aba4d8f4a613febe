/** Typed client for the summary query service (HTTP/JSON). */

export type ComparatorOp = "=" | "!=" | "<" | "<=" | ">" | ">=" | "in" | "between";

export interface ClauseJson {
  attribute: string;
  op: ComparatorOp;
  value: unknown;
}

export interface AttributeInfo {
  name: string;
  kind: "numeric" | "categorical";
}

export interface DatasetDescriptor {
  id: string;
  n: number;
  attributes: AttributeInfo[];
  totals: Record<string, number>;
}

export interface SketchBuildRequest {
  attribute: string;
  b?: number;
  m?: number;
  p?: number;
  epsilon?: number;
  k?: number;
  seed?: number;
}

export interface SketchDescriptor {
  id: string;
  dataset_id: string;
  attribute: string;
  b: number;
  epsilon_certified: number | null;
  S: number;
  distinct_entries: number;
}

export interface QueryAnswer {
  estimate: number;
  additive_bound: number | null;
  relative_bound: number | null;
  matched_entries: number;
  matched_frequency_mass: number;
  flags: string[];
}

export interface FrequencyBucket {
  fr: number;
  count: number;
}

export interface StatsBlock {
  value: number;
  distinct: number;
  bag_mass: number;
  frequencies: FrequencyBucket[];
}

export interface SketchStats {
  attribute: string;
  b: number;
  S: number;
  distinct_entries: number;
  frequency_mass: number;
  blocks: StatsBlock[];
}

export interface LogEntry {
  predicate: ClauseJson[];
  answer: QueryAnswer;
  timestamp: string;
}

export interface ServiceError {
  code: string;
  message: string;
  detail: unknown;
}

/**
 * The drill-down loop consumes only this surface; the exact-query method is
 * kept separate so views can gate it behind an explicit slow-path control.
 */
export interface SketchQueryApi {
  querySketch(sketchId: string, clauses: ClauseJson[]): Promise<QueryAnswer>;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly body: ServiceError,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

async function parseResponse<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let body: ServiceError;
    try {
      body = (await response.json()) as ServiceError;
    } catch {
      body = { code: "http-error", message: response.statusText, detail: null };
    }
    throw new ApiError(response.status, body);
  }
  return (await response.json()) as T;
}

export class ServiceClient implements SketchQueryApi {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async uploadDataset(csvText: string, name = "dataset"): Promise<DatasetDescriptor> {
    const response = await fetch(this.url(`/datasets?name=${encodeURIComponent(name)}`), {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: csvText,
    });
    return parseResponse(response);
  }

  async buildSketch(
    datasetId: string,
    request: SketchBuildRequest,
  ): Promise<SketchDescriptor> {
    const response = await fetch(this.url(`/datasets/${datasetId}/sketches`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(request),
    });
    return parseResponse(response);
  }

  async querySketch(sketchId: string, clauses: ClauseJson[]): Promise<QueryAnswer> {
    const response = await fetch(this.url(`/sketches/${sketchId}/query`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ predicate: { clauses } }),
    });
    return parseResponse(response);
  }

  async sketchStats(sketchId: string): Promise<SketchStats> {
    const response = await fetch(this.url(`/sketches/${sketchId}/stats`));
    return parseResponse(response);
  }

  async sketchLog(sketchId: string, limit?: number): Promise<LogEntry[]> {
    const suffix = limit === undefined ? "" : `?limit=${limit}`;
    const response = await fetch(this.url(`/sketches/${sketchId}/log${suffix}`));
    const body = await parseResponse<{ queries: LogEntry[] }>(response);
    return body.queries;
  }

  /** Slow path against the source relation; only for explicit verification. */
  async exactQuery(
    datasetId: string,
    attribute: string,
    clauses: ClauseJson[],
  ): Promise<number> {
    const response = await fetch(this.url(`/datasets/${datasetId}/exact-query`), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ attribute, predicate: { clauses } }),
    });
    const body = await parseResponse<{ exact: number }>(response);
    return body.exact;
  }
}
