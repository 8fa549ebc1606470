/**
 * HTML builders for the design panel.
 *
 * Every value cell carries a data-field attribute and shows the service's
 * string verbatim; the tests assert that round-trip exactly. Numbers are
 * parsed here only to place interval bars on a shared axis, never to change
 * what is displayed.
 */
import { KvDoc, kvGroups } from "./kv.js";
import { DesignPanelState, PinnedResult, rankedPins } from "./state.js";

export function escapeHtml(value: string): string {
  return value
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function field(name: string, value: string | undefined, extra = ""): string {
  return `<span class="value" data-field="${escapeHtml(name)}"${extra}>${escapeHtml(value ?? "")}</span>`;
}

// ---------------------------------------------------------------------------
// Contest listing
// ---------------------------------------------------------------------------

export function renderContestList(doc: KvDoc, selected: string | null): string {
  const rows = kvGroups(doc, "contest");
  if (doc["count"] === "0" || rows.length === 0) {
    return `<p class="empty" data-role="empty-contests">No contests in this run. Generate a dataset, then reload.</p>`;
  }
  const body = rows
    .map((row) => {
      const id = row["id"] ?? "";
      const cls = id === selected ? ` class="selected"` : "";
      return (
        `<tr${cls} data-contest-row="${escapeHtml(id)}">` +
        `<td><button data-action="select" data-contest="${escapeHtml(id)}">${escapeHtml(id)}</button></td>` +
        `<td>${field("city", row["city"])}</td>` +
        `<td>${field("start", row["start"])} to ${field("end", row["end"])}</td>` +
        `<td>${field("n_drivers", row["n_drivers"])}</td>` +
        `<td>${field("n_teams", row["n_teams"])}</td>` +
        `<td>${field("split", row["split"])}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="contests"><thead><tr>` +
    `<th>contest</th><th>city</th><th>window</th><th>drivers</th><th>teams</th><th>split</th>` +
    `</tr></thead><tbody>${body}</tbody></table>`
  );
}

// ---------------------------------------------------------------------------
// Selected contest: as-run design summary
// ---------------------------------------------------------------------------

const DETAIL_FIELDS: [string, string][] = [
  ["city", "city"],
  ["split", "split"],
  ["start", "contest start"],
  ["end", "contest end"],
  ["design.team_size", "team size"],
  ["design.group_size", "group size"],
  ["design.captain_bonus", "captain bonus"],
  ["design.captain_bonus_amount", "bonus amount"],
  ["design.exclude_worst_member", "worst member excluded"],
  ["design.prize_schedule", "prize schedule"],
  ["design.performance_metric", "metric"],
  ["counts.teams", "teams"],
  ["counts.drivers", "drivers"],
  ["atet", "estimated uplift (as run)"],
  ["atet_se", "uplift standard error"],
  ["n_treated", "treated drivers"],
  ["n_control", "control drivers"],
];

export function renderContestDetail(doc: KvDoc): string {
  const rows = DETAIL_FIELDS.filter(([key]) => key in doc)
    .map(
      ([key, label]) =>
        `<tr><th>${escapeHtml(label)}</th><td>${field(key, doc[key])}</td></tr>`,
    )
    .join("");
  return (
    `<h3>Contest ${field("id", doc["id"])}</h3>` +
    `<table class="detail"><tbody>${rows}</tbody></table>`
  );
}

// ---------------------------------------------------------------------------
// Interval bars (geometry only; labels stay verbatim)
// ---------------------------------------------------------------------------

/** Common axis across several results so bars are comparable. */
export function ciDomain(docs: readonly KvDoc[]): [number, number] {
  let low = Infinity;
  let high = -Infinity;
  for (const doc of docs) {
    const lo = Number(doc["ci_low"]);
    const hi = Number(doc["ci_high"]);
    if (!Number.isNaN(lo)) low = Math.min(low, lo);
    if (!Number.isNaN(hi)) high = Math.max(high, hi);
  }
  if (low === Infinity || high === -Infinity) return [0, 1];
  if (low === high) return [low - 0.5, high + 0.5];
  return [low, high];
}

export function renderCiBar(
  low: string,
  point: string,
  high: string,
  domain: [number, number],
): string {
  const span = domain[1] - domain[0];
  const pct = (x: number) =>
    Math.max(0, Math.min(100, ((x - domain[0]) / span) * 100));
  const lo = pct(Number(low));
  const pt = pct(Number(point));
  const hi = pct(Number(high));
  return (
    `<span class="ci-bar" title="${escapeHtml(low)} .. ${escapeHtml(high)}">` +
    `<span class="ci-range" style="left:${lo}%;width:${hi - lo}%"></span>` +
    `<span class="ci-point" style="left:${pt}%"></span>` +
    `</span>`
  );
}

// ---------------------------------------------------------------------------
// Simulation result card
// ---------------------------------------------------------------------------

const RESULT_FIELDS: [string, string][] = [
  ["design", "design"],
  ["ate", "estimated effect (ate)"],
  ["ci_low", "ci low"],
  ["ci_high", "ci high"],
  ["roi", "roi"],
  ["roi_ci_low", "roi ci low"],
  ["roi_ci_high", "roi ci high"],
  ["mean_prediction", "mean predicted outcome"],
  ["revenue_gain", "revenue gain"],
  ["prize_cost", "prize cost"],
  ["n_drivers", "drivers simulated"],
  ["noise_level", "noise level"],
  ["noise_mean", "noise mean"],
  ["noise_sd", "noise sd"],
  ["n_boot", "bootstrap draws"],
  ["seed", "seed"],
  ["contest_id", "contest"],
];

/**
 * The current result next to the pinned as-run result, field by field.
 * Shows every field the service returned, each one verbatim.
 */
export function renderResultCard(doc: KvDoc, original: PinnedResult | null): string {
  const domain = ciDomain(original === null ? [doc] : [doc, original.doc]);
  const originalHeader = original === null ? "" : `<th>as run (pinned)</th>`;
  const rows = RESULT_FIELDS.filter(([key]) => key in doc)
    .map(([key, label]) => {
      const mine = field(key, doc[key]);
      const theirs =
        original === null
          ? ""
          : `<td>${field(key, original.doc[key], ` data-column="original"`)}</td>`;
      return `<tr><th>${escapeHtml(label)}</th><td>${mine}</td>${theirs}</tr>`;
    })
    .join("");
  const bars =
    `<tr><th>effect interval</th>` +
    `<td>${renderCiBar(doc["ci_low"], doc["ate"], doc["ci_high"], domain)}</td>` +
    (original === null
      ? ""
      : `<td>${renderCiBar(
          original.doc["ci_low"],
          original.doc["ate"],
          original.doc["ci_high"],
          domain,
        )}</td>`) +
    `</tr>`;
  return (
    `<table class="result"><thead><tr><th></th><th>this design</th>${originalHeader}</tr></thead>` +
    `<tbody>${rows}${bars}</tbody></table>` +
    `<button data-action="pin">Pin to board</button>`
  );
}

// ---------------------------------------------------------------------------
// Comparison pinboard
// ---------------------------------------------------------------------------

export function renderPinboard(state: DesignPanelState): string {
  const pins = rankedPins(state);
  if (pins.length === 0) {
    return `<p class="empty" data-role="empty-pinboard">Nothing pinned yet. Run a design and pin it to compare.</p>`;
  }
  const domain = ciDomain(pins.map((p) => p.doc));
  const rows = pins
    .map((pin, rank) => {
      const badge = rank === 0 ? ` <span class="badge">best</span>` : "";
      return (
        `<tr data-pin-label="${escapeHtml(pin.label)}">` +
        `<td>${rank + 1}${badge}</td>` +
        `<td>${field("design", pin.label)}</td>` +
        `<td>${field("ate", pin.doc["ate"])}</td>` +
        `<td>${renderCiBar(pin.doc["ci_low"], pin.doc["ate"], pin.doc["ci_high"], domain)}</td>` +
        `<td>${field("ci_low", pin.doc["ci_low"])}</td>` +
        `<td>${field("ci_high", pin.doc["ci_high"])}</td>` +
        `<td>${field("roi", pin.doc["roi"])}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table class="pinboard"><thead><tr>` +
    `<th>rank</th><th>design</th><th>ate</th><th>interval</th><th>ci low</th><th>ci high</th><th>roi</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

// ---------------------------------------------------------------------------
// Messages
// ---------------------------------------------------------------------------

export function renderBanner(message: string): string {
  return (
    `<div class="banner" data-role="banner">` +
    `<span>${escapeHtml(message)}</span> ` +
    `<button data-action="retry">Retry</button>` +
    `</div>`
  );
}

export function renderNotice(message: string): string {
  return `<p class="notice" data-role="notice">${escapeHtml(message)}</p>`;
}

// ---------------------------------------------------------------------------
// Model ribbon
// ---------------------------------------------------------------------------

export function renderModelRibbon(doc: KvDoc): string {
  const bits = [
    `model ${field("family", doc["family"])}`,
    `test rmse ${field("final_test_rmse", doc["final_test_rmse"])}`,
    `features ${field("n_features", doc["n_features"])}`,
  ];
  return `<p class="ribbon">${bits.join(" | ")}</p>`;
}
