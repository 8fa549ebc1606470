/**
 * Design panel state and transitions.
 *
 * The panel holds raw string values only. Numbers are parsed in exactly two
 * places, both for presentation rather than computation: interval sanity
 * checks (lower <= point <= upper) and pinboard ordering. Everything shown
 * to the user is the service's own string, unchanged.
 */
import { KvDoc } from "./kv.js";

export type Tri = "keep" | "on" | "off";
export type NoiseLevel = "none" | "period" | "contest";

export const DEFAULT_N_BOOT = "200";

/** A simulation result frozen onto the comparison pinboard. */
export interface PinnedResult {
  readonly label: string;
  readonly doc: Readonly<KvDoc>;
}

export interface DesignPanelState {
  /** Last /contests listing document, null until loaded. */
  contests: KvDoc | null;
  selectedContest: string | null;
  /** /contests/<id> document for the selected contest. */
  detail: KvDoc | null;
  captainBonus: Tri;
  rewardFifth: Tri;
  includeWorst: Tri;
  /** Raw text inputs; "" keeps the contest's as-run value. */
  groupSize: string;
  prizeSchedule: string;
  noiseLevel: NoiseLevel;
  nBoot: string;
  seed: string;
  /** Token of the newest simulate request; older responses are dropped. */
  requestToken: number;
  lastResult: KvDoc | null;
  /** The as-run design's result, pinned once when the contest loads. */
  originalPin: PinnedResult | null;
  pinboard: PinnedResult[];
  /** Connectivity failure banner (listing could not load). */
  banner: string | null;
  /** Inline message under the run controls (rejected request, bad interval). */
  notice: string | null;
}

export function initialState(): DesignPanelState {
  return {
    contests: null,
    selectedContest: null,
    detail: null,
    captainBonus: "keep",
    rewardFifth: "keep",
    includeWorst: "keep",
    groupSize: "",
    prizeSchedule: "",
    noiseLevel: "none",
    nBoot: DEFAULT_N_BOOT,
    seed: "0",
    requestToken: 0,
    lastResult: null,
    originalPin: null,
    pinboard: [],
    banner: null,
    notice: null,
  };
}

/** Back to "keep everything"; bootstrap settings stay as the user left them. */
export function resetOverrides(state: DesignPanelState): void {
  state.captainBonus = "keep";
  state.rewardFifth = "keep";
  state.includeWorst = "keep";
  state.groupSize = "";
  state.prizeSchedule = "";
  state.noiseLevel = "none";
}

export function selectContest(state: DesignPanelState, contestId: string): void {
  state.selectedContest = contestId;
  state.detail = null;
  state.lastResult = null;
  state.originalPin = null;
  state.pinboard = [];
  state.notice = null;
  resetOverrides(state);
}

/**
 * The full request body for the current panel settings. Every key is always
 * present; "" and "keep" mean "leave that part of the design as run".
 */
export function requestBody(state: DesignPanelState): KvDoc {
  if (state.selectedContest === null) {
    throw new Error("no contest selected");
  }
  return {
    contest_id: state.selectedContest,
    captain_bonus: state.captainBonus,
    reward_fifth: state.rewardFifth,
    include_worst: state.includeWorst,
    group_size: state.groupSize.trim(),
    prize_schedule: state.prizeSchedule.trim(),
    noise_level: state.noiseLevel,
    n_boot: state.nBoot.trim(),
    seed: state.seed.trim(),
  };
}

/** Start a new simulate request; the returned token claims the response slot. */
export function beginSimulate(state: DesignPanelState): number {
  state.notice = null;
  return ++state.requestToken;
}

/**
 * Check the interval invariant on a result document: every CI pair shown must
 * satisfy lower <= point <= upper. Returns a message on violation, else null.
 */
export function intervalViolation(doc: KvDoc): string | null {
  const triples: [string, string, string][] = [
    ["ci_low", "ate", "ci_high"],
    ["roi_ci_low", "roi", "roi_ci_high"],
  ];
  for (const [lowKey, pointKey, highKey] of triples) {
    if (!(lowKey in doc) || !(pointKey in doc) || !(highKey in doc)) continue;
    const low = Number(doc[lowKey]);
    const point = Number(doc[pointKey]);
    const high = Number(doc[highKey]);
    if (Number.isNaN(low) || Number.isNaN(point) || Number.isNaN(high)) {
      return `service sent a non-numeric interval (${lowKey}, ${pointKey}, ${highKey})`;
    }
    if (!(low <= point && point <= high)) {
      return `service sent an inverted interval: ${lowKey} <= ${pointKey} <= ${highKey} fails`;
    }
  }
  return null;
}

/**
 * Fold a simulate response into the panel. Returns true when the result was
 * accepted as the new lastResult. A token older than the newest request is
 * ignored so an out-of-order response never overwrites a newer rendering.
 */
export function applyResult(
  state: DesignPanelState,
  token: number,
  status: number,
  doc: KvDoc,
): boolean {
  if (token !== state.requestToken) return false;
  if (status === 200) {
    const violation = intervalViolation(doc);
    if (violation !== null) {
      state.notice = violation;
      return false;
    }
    state.lastResult = doc;
    return true;
  }
  const message = doc["error"] ?? `request failed with status ${status}`;
  state.notice =
    status === 429 ? `${message} (try a lower n_boot)` : message;
  return false;
}

function freeze(doc: KvDoc): PinnedResult {
  return Object.freeze({
    label: doc["design"] ?? "",
    doc: Object.freeze({ ...doc }),
  });
}

/** Pin the as-run result; called once after the contest's identity run. */
export function pinOriginal(state: DesignPanelState): void {
  if (state.lastResult === null) {
    throw new Error("nothing to pin");
  }
  state.originalPin = freeze(state.lastResult);
}

/** Append the last result to the comparison pinboard. */
export function pinResult(state: DesignPanelState): void {
  if (state.lastResult === null) {
    throw new Error("nothing to pin");
  }
  state.pinboard.push(freeze(state.lastResult));
}

/**
 * Pins ordered best to worst: descending estimated effect, ties broken by
 * design label. This mirrors how the service itself ranks design variants,
 * so the board reads the same as a server-side enumeration.
 */
export function rankedPins(state: DesignPanelState): PinnedResult[] {
  return [...state.pinboard].sort((a, b) => {
    const ateA = Number(a.doc["ate"]);
    const ateB = Number(b.doc["ate"]);
    if (ateA !== ateB) return ateB - ateA;
    return a.label < b.label ? -1 : a.label > b.label ? 1 : 0;
  });
}
