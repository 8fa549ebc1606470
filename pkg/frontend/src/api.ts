/**
 * Thin HTTP client for the simulation service.
 *
 * Every payload is a kv text document; values stay raw strings end to end.
 * The client never invents or transforms numbers, it only moves them.
 */
import { KvDoc, parseKv, renderKv } from "./kv.js";

export interface ApiResponse {
  status: number;
  /** Exact response body, byte for byte (as UTF-8 text). */
  raw: string;
  /** Parsed fields; values are verbatim substrings of `raw`. */
  doc: KvDoc;
}

export class StudioClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request(method: string, path: string, body?: string): Promise<ApiResponse> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "Content-Type": "text/plain; charset=utf-8" };
      init.body = body;
    }
    const resp = await this.fetchFn(this.baseUrl + path, init);
    const raw = await resp.text();
    return { status: resp.status, raw, doc: parseKv(raw) };
  }

  listContests(): Promise<ApiResponse> {
    return this.request("GET", "/contests");
  }

  contestDetail(contestId: string): Promise<ApiResponse> {
    return this.request("GET", `/contests/${encodeURIComponent(contestId)}`);
  }

  modelInfo(): Promise<ApiResponse> {
    return this.request("GET", "/model");
  }

  /** POST one what-if request; `body` maps request keys to raw string values. */
  simulate(body: KvDoc): Promise<ApiResponse> {
    return this.request("POST", "/simulate", renderKv(body));
  }
}
