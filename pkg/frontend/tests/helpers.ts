/**
 * Shared test plumbing: recorded fixtures and a fetch stand-in that serves
 * them byte for byte. Requests with no recording fail loudly, so a drifting
 * client shows up as a missing fixture, never as a silently wrong number.
 */
import { readFileSync } from "node:fs";
import { KvDoc, parseKv } from "../src/kv.js";
import { DesignPanelState, NoiseLevel, Tri } from "../src/state.js";

export interface Recorded {
  status: number;
  body: string;
}

export interface Fixtures {
  contest_id: string;
  contest_ids: string[];
  n_boot: string;
  seed: string;
  api: Record<string, Recorded>;
  interactions: { name: string; request: KvDoc }[];
  cube: { request: KvDoc }[];
  errors: Record<string, KvDoc>;
  expected_order: { label: string; ate: string }[];
}

export function loadFixtures(): Fixtures {
  const path = new URL("../fixtures/studio_fixtures.json", import.meta.url);
  return JSON.parse(readFileSync(path, "utf-8")) as Fixtures;
}

/** Same lookup key the recorder wrote; both sides sort the request entries. */
export function canonicalPost(request: KvDoc): string {
  const joined = Object.entries(request)
    .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
    .map(([k, v]) => `${k}=${v}`)
    .join("&");
  return `POST /simulate ${joined}`;
}

export function fixtureFetch(fixtures: Fixtures): typeof fetch {
  return async (input, init) => {
    const url = new URL(String(input));
    const method = init?.method ?? "GET";
    const key =
      method === "GET"
        ? `GET ${url.pathname}`
        : canonicalPost(parseKv(String(init?.body ?? "")));
    const hit = fixtures.api[key];
    if (hit === undefined) {
      throw new Error(`no fixture recorded for: ${key}`);
    }
    return new Response(hit.body, {
      status: hit.status,
      headers: { "Content-Type": "text/plain; charset=utf-8" },
    });
  };
}

/** Put a recorded request's settings onto the panel, as a user would. */
export function applyRequest(state: DesignPanelState, request: KvDoc): void {
  state.selectedContest = request["contest_id"];
  state.captainBonus = request["captain_bonus"] as Tri;
  state.rewardFifth = request["reward_fifth"] as Tri;
  state.includeWorst = request["include_worst"] as Tri;
  state.groupSize = request["group_size"];
  state.prizeSchedule = request["prize_schedule"];
  state.noiseLevel = request["noise_level"] as NoiseLevel;
  state.nBoot = request["n_boot"];
  state.seed = request["seed"];
}

function unescapeHtml(text: string): string {
  return text
    .replace(/&quot;/g, '"')
    .replace(/&lt;/g, "<")
    .replace(/&gt;/g, ">")
    .replace(/&amp;/g, "&");
}

/**
 * Every data-field value in a rendered snippet, in document order per field
 * name. This is how the tests read "what the user sees".
 */
export function fieldValues(html: string): Record<string, string[]> {
  const out: Record<string, string[]> = {};
  const re = /data-field="([^"]*)"[^>]*>([^<]*)</g;
  let match: RegExpExecArray | null;
  while ((match = re.exec(html)) !== null) {
    const name = unescapeHtml(match[1]);
    (out[name] ??= []).push(unescapeHtml(match[2]));
  }
  return out;
}
