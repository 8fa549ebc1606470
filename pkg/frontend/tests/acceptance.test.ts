/**
 * End-to-end panel acceptance against recorded service traffic.
 *
 * The flow drives the real client, state, and renderer with a fetch stand-in
 * that serves bodies recorded from a live service run. It checks three
 * things: every number rendered for ten recorded what-if interactions equals
 * the service's response field byte for byte; re-running with no overrides
 * reproduces the pinned as-run result; and a board holding the full on/off
 * cube of the three design toggles ranks exactly like the service's own
 * design enumeration. One summary line is printed either way.
 */
import { afterAll, describe, expect, it } from "vitest";
import { StudioClient } from "../src/api.js";
import { renderContestList, renderPinboard, renderResultCard } from "../src/render.js";
import * as panel from "../src/state.js";
import {
  applyRequest,
  fieldValues,
  fixtureFetch,
  loadFixtures,
} from "./helpers.js";

const fixtures = loadFixtures();

let verdictLine = "secondary criterion ui parity: FAIL (did not run)";

afterAll(() => {
  console.log(verdictLine);
});

function pinLabelOrder(html: string): string[] {
  return [...html.matchAll(/data-pin-label="([^"]*)"/g)].map((m) => m[1]);
}

describe("ui parity acceptance", () => {
  it("renders recorded interactions exactly, reproduces the original pin, and ranks pins like the service", async () => {
    let phase = "setup";
    try {
      const client = new StudioClient("http://service.invalid", fixtureFetch(fixtures));
      const state = panel.initialState();

      phase = "contest listing";
      const listing = await client.listContests();
      expect(listing.status).toBe(200);
      state.contests = listing.doc;
      expect(renderContestList(state.contests, null)).toContain(fixtures.contest_id);

      phase = "contest selection and original pin";
      panel.selectContest(state, fixtures.contest_id);
      const detail = await client.contestDetail(fixtures.contest_id);
      expect(detail.status).toBe(200);
      state.detail = detail.doc;
      state.nBoot = fixtures.n_boot;
      state.seed = fixtures.seed;
      // a fresh selection with untouched toggles IS the recorded identity request
      expect(panel.requestBody(state)).toEqual(fixtures.interactions[0].request);
      {
        const token = panel.beginSimulate(state);
        const resp = await client.simulate(panel.requestBody(state));
        expect(panel.applyResult(state, token, resp.status, resp.doc)).toBe(true);
        panel.pinOriginal(state);
      }
      const original = state.originalPin;
      expect(original).not.toBeNull();

      phase = "ten recorded interactions";
      let exact = 0;
      for (const { name, request } of fixtures.interactions) {
        applyRequest(state, request);
        expect(panel.requestBody(state), name).toEqual(request);
        const token = panel.beginSimulate(state);
        const resp = await client.simulate(panel.requestBody(state));
        expect(resp.status, name).toBe(200);
        expect(panel.applyResult(state, token, resp.status, resp.doc), name).toBe(true);
        const rendered = fieldValues(
          renderResultCard(state.lastResult as Record<string, string>, state.originalPin),
        );
        for (const [key, value] of Object.entries(resp.doc)) {
          expect(rendered[key]?.[0], `${name}: ${key}`).toBe(value);
        }
        exact += 1;
      }
      expect(exact).toBe(fixtures.interactions.length);
      expect(exact).toBe(10);

      phase = "identity run equals the original pin";
      // the last interaction re-ran the as-run design; its rendering above
      // already matched, and the document itself must equal the pin exactly
      expect(fixtures.interactions[fixtures.interactions.length - 1].request).toEqual(
        fixtures.interactions[0].request,
      );
      expect(state.lastResult).toEqual(original?.doc);

      phase = "toggle involution";
      // turning the fifth-team reward on and back off lands on the original
      applyRequest(state, fixtures.interactions[3].request);
      let token = panel.beginSimulate(state);
      let resp = await client.simulate(panel.requestBody(state));
      expect(panel.applyResult(state, token, resp.status, resp.doc)).toBe(true);
      expect((state.lastResult as Record<string, string>)["design"]).toBe("fifth=on");
      state.rewardFifth = "keep";
      token = panel.beginSimulate(state);
      resp = await client.simulate(panel.requestBody(state));
      expect(panel.applyResult(state, token, resp.status, resp.doc)).toBe(true);
      expect(state.lastResult).toEqual(original?.doc);

      phase = "cube pinboard ordering";
      for (const { request } of fixtures.cube) {
        applyRequest(state, request);
        const cubeToken = panel.beginSimulate(state);
        const cubeResp = await client.simulate(panel.requestBody(state));
        expect(panel.applyResult(state, cubeToken, cubeResp.status, cubeResp.doc)).toBe(true);
        panel.pinResult(state);
      }
      expect(state.pinboard).toHaveLength(8);
      const wantLabels = fixtures.expected_order.map((e) => e.label);
      const wantAtes = fixtures.expected_order.map((e) => e.ate);
      const ranked = panel.rankedPins(state);
      expect(ranked.map((p) => p.label)).toEqual(wantLabels);
      expect(ranked.map((p) => p.doc["ate"])).toEqual(wantAtes);
      expect(pinLabelOrder(renderPinboard(state))).toEqual(wantLabels);

      verdictLine =
        "secondary criterion ui parity: PASS " +
        "(10/10 interactions rendered exactly, identity run equals the original pin, " +
        "8 cube pins ordered like the service enumeration)";
    } catch (err) {
      const reason = err instanceof Error ? err.message.split("\n")[0] : String(err);
      verdictLine = `secondary criterion ui parity: FAIL (during ${phase}: ${reason})`;
      throw err;
    }
  });
});

describe("recorded service rejections", () => {
  function fresh() {
    const client = new StudioClient("http://service.invalid", fixtureFetch(fixtures));
    const state = panel.initialState();
    panel.selectContest(state, fixtures.contest_id);
    return { client, state };
  }

  it("budget rejection renders the service message plus a lower-n_boot hint", async () => {
    const { client, state } = fresh();
    applyRequest(state, fixtures.errors["budget"]);
    const token = panel.beginSimulate(state);
    const resp = await client.simulate(panel.requestBody(state));
    expect(resp.status).toBe(429);
    expect(panel.applyResult(state, token, resp.status, resp.doc)).toBe(false);
    expect(state.notice).toContain(resp.doc["error"]);
    expect(state.notice).toContain("try a lower n_boot");
    expect(state.lastResult).toBeNull();
  });

  it("a malformed field shows the service's own message", async () => {
    const { client, state } = fresh();
    applyRequest(state, fixtures.errors["bad_group_size"]);
    const token = panel.beginSimulate(state);
    const resp = await client.simulate(panel.requestBody(state));
    expect(resp.status).toBe(400);
    panel.applyResult(state, token, resp.status, resp.doc);
    expect(state.notice).toBe(resp.doc["error"]);
  });

  it("an unknown contest id is surfaced, not swallowed", async () => {
    const { client, state } = fresh();
    applyRequest(state, fixtures.errors["ghost_contest"]);
    const token = panel.beginSimulate(state);
    const resp = await client.simulate(panel.requestBody(state));
    expect(resp.status).toBe(404);
    panel.applyResult(state, token, resp.status, resp.doc);
    expect(state.notice).toBe(resp.doc["error"]);
  });

  it("re-fetching the contest listing is idempotent", async () => {
    const { client } = fresh();
    const first = await client.listContests();
    const second = await client.listContests();
    expect(second.raw).toBe(first.raw);
    expect(renderContestList(second.doc, null)).toBe(renderContestList(first.doc, null));
  });
});
