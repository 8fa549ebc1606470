/**
 * Attribute-value wire format shared with the simulation service.
 *
 * Documents are plain text, one `key = value` per line. Each line splits on
 * the FIRST equals sign with both sides trimmed, so values may themselves
 * contain equals signs (design labels like "bonus=on,fifth=off" survive).
 * Blank lines and lines starting with '#' are skipped. These rules must stay
 * byte-compatible with the service's own reader and writer.
 */

export type KvDoc = Record<string, string>;

export function parseKv(text: string): KvDoc {
  const doc: KvDoc = {};
  const lines = text.split(/\r?\n/);
  for (let i = 0; i < lines.length; i++) {
    const line = lines[i].trim();
    if (line === "" || line.startsWith("#")) continue;
    const sep = line.indexOf("=");
    if (sep < 0) {
      throw new Error(`line ${i + 1}: expected 'key = value', got ${JSON.stringify(lines[i])}`);
    }
    const key = line.slice(0, sep).trim();
    if (key === "") {
      throw new Error(`line ${i + 1}: empty key`);
    }
    doc[key] = line.slice(sep + 1).trim();
  }
  return doc;
}

export function renderKv(doc: KvDoc): string {
  const lines: string[] = [];
  for (const [key, value] of Object.entries(doc)) {
    if (key.includes("\n") || value.includes("\n")) {
      throw new Error(`kv entries must be single-line: ${key}`);
    }
    lines.push(`${key} = ${value}`);
  }
  return lines.join("\n") + "\n";
}

/**
 * Collect `prefix.N.field` rows into one record per index, in index order.
 * Listing documents encode repeated rows this way (contest.0.id, ...).
 */
export function kvGroups(doc: KvDoc, prefix: string): KvDoc[] {
  const groups: KvDoc[] = [];
  const head = prefix + ".";
  for (const [key, value] of Object.entries(doc)) {
    if (!key.startsWith(head)) continue;
    const rest = key.slice(head.length);
    const dot = rest.indexOf(".");
    if (dot <= 0) continue;
    const index = Number(rest.slice(0, dot));
    if (!Number.isInteger(index) || index < 0) continue;
    while (groups.length <= index) groups.push({});
    groups[index][rest.slice(dot + 1)] = value;
  }
  return groups;
}
