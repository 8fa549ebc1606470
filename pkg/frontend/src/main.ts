/**
 * Browser entry point: wires the panel state to the page.
 *
 * The service address comes from the `api` query parameter and defaults to
 * the service's stock local address, e.g. index.html?api=http://127.0.0.1:8777
 */
import { StudioClient } from "./api.js";
import * as panel from "./state.js";
import * as ui from "./render.js";

const apiBase =
  new URLSearchParams(window.location.search).get("api") ?? "http://127.0.0.1:8777";
const client = new StudioClient(apiBase);
const state = panel.initialState();

function section(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing section #${id}`);
  return node;
}

// ---------------------------------------------------------------------------
// Drawing
// ---------------------------------------------------------------------------

function drawMessages(): void {
  section("banner").innerHTML = state.banner === null ? "" : ui.renderBanner(state.banner);
  section("notice").innerHTML = state.notice === null ? "" : ui.renderNotice(state.notice);
}

function drawContests(): void {
  section("contests").innerHTML =
    state.contests === null ? "" : ui.renderContestList(state.contests, state.selectedContest);
}

function drawDetail(): void {
  section("detail").innerHTML =
    state.detail === null ? "" : ui.renderContestDetail(state.detail);
}

function drawResult(): void {
  section("result").innerHTML =
    state.lastResult === null ? "" : ui.renderResultCard(state.lastResult, state.originalPin);
}

function drawPinboard(): void {
  section("pinboard").innerHTML = ui.renderPinboard(state);
}

const TRI_CONTROLS: ["captainBonus" | "rewardFifth" | "includeWorst", string][] = [
  ["captainBonus", "captain bonus"],
  ["rewardFifth", "reward 5th team"],
  ["includeWorst", "include worst member"],
];

function triSelect(name: string, label: string, value: panel.Tri): string {
  const options = (["keep", "on", "off"] as const)
    .map((v) => `<option value="${v}"${v === value ? " selected" : ""}>${v}</option>`)
    .join("");
  return (
    `<label>${label}` +
    `<select data-control="${name}">${options}</select></label>`
  );
}

function drawControls(): void {
  if (state.selectedContest === null) {
    section("controls").innerHTML = "";
    return;
  }
  const tris = TRI_CONTROLS.map(([name, label]) =>
    triSelect(name, label, state[name]),
  ).join("");
  const noise = (["none", "period", "contest"] as const)
    .map((v) => `<option value="${v}"${v === state.noiseLevel ? " selected" : ""}>${v}</option>`)
    .join("");
  section("controls").innerHTML =
    `<fieldset><legend>What-if overrides</legend>` +
    tris +
    `<label>group size <input data-control="groupSize" value="${ui.escapeHtml(state.groupSize)}" placeholder="keep"></label>` +
    `<label>prize schedule <input data-control="prizeSchedule" value="${ui.escapeHtml(state.prizeSchedule)}" placeholder="keep, e.g. 900/500/300/200/100"></label>` +
    `<label>noise <select data-control="noiseLevel">${noise}</select></label>` +
    `<label>n_boot <input data-control="nBoot" value="${ui.escapeHtml(state.nBoot)}"></label>` +
    `<label>seed <input data-control="seed" value="${ui.escapeHtml(state.seed)}"></label>` +
    `<button data-action="run">Simulate</button>` +
    `</fieldset>`;
}

function drawAll(): void {
  drawMessages();
  drawContests();
  drawDetail();
  drawControls();
  drawResult();
  drawPinboard();
}

// ---------------------------------------------------------------------------
// Actions
// ---------------------------------------------------------------------------

async function loadContests(): Promise<void> {
  try {
    const resp = await client.listContests();
    state.contests = resp.doc;
    state.banner = null;
  } catch {
    state.banner = `service at ${apiBase} is unreachable`;
  }
  try {
    const model = await client.modelInfo();
    section("model").innerHTML = ui.renderModelRibbon(model.doc);
  } catch {
    section("model").innerHTML = "";
  }
  drawAll();
}

async function chooseContest(contestId: string): Promise<void> {
  panel.selectContest(state, contestId);
  drawAll();
  try {
    const detail = await client.contestDetail(contestId);
    if (detail.status === 200) state.detail = detail.doc;
    // The as-run baseline: simulate with everything kept, pin it.
    const token = panel.beginSimulate(state);
    const resp = await client.simulate(panel.requestBody(state));
    if (panel.applyResult(state, token, resp.status, resp.doc)) {
      panel.pinOriginal(state);
    }
  } catch {
    state.notice = "simulation request failed; is the service still up?";
  }
  drawAll();
}

async function runSimulation(): Promise<void> {
  if (state.selectedContest === null) return;
  const token = panel.beginSimulate(state);
  try {
    const resp = await client.simulate(panel.requestBody(state));
    panel.applyResult(state, token, resp.status, resp.doc);
  } catch {
    if (token === state.requestToken) {
      state.notice = "simulation request failed; is the service still up?";
    }
  }
  drawMessages();
  drawResult();
}

document.addEventListener("click", (event) => {
  const target = (event.target as HTMLElement).closest("[data-action]");
  if (target === null) return;
  const action = target.getAttribute("data-action");
  if (action === "retry") void loadContests();
  if (action === "select") void chooseContest(target.getAttribute("data-contest") ?? "");
  if (action === "run") void runSimulation();
  if (action === "pin" && state.lastResult !== null) {
    panel.pinResult(state);
    drawPinboard();
  }
});

document.addEventListener("change", (event) => {
  const target = event.target as HTMLInputElement | HTMLSelectElement;
  const control = target.getAttribute("data-control");
  if (control === null) return;
  switch (control) {
    case "captainBonus":
      state.captainBonus = target.value as panel.Tri;
      break;
    case "rewardFifth":
      state.rewardFifth = target.value as panel.Tri;
      break;
    case "includeWorst":
      state.includeWorst = target.value as panel.Tri;
      break;
    case "groupSize":
      state.groupSize = target.value;
      break;
    case "prizeSchedule":
      state.prizeSchedule = target.value;
      break;
    case "noiseLevel":
      state.noiseLevel = target.value as panel.NoiseLevel;
      break;
    case "nBoot":
      state.nBoot = target.value;
      break;
    case "seed":
      state.seed = target.value;
      break;
  }
});

void loadContests();
