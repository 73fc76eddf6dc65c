/** DOM shell around ReviewSession: highlights, shortcuts, dashboard.
 *
 * Usage: open index.html?api=http://127.0.0.1:8234&project=p1
 * Shortcuts: a = accept all proposals, Enter = submit & next,
 * 1-8 = set the selected span's type, Backspace = delete selected span.
 */

import { ApiClient } from "./api.js";
import { ReviewSession, activePass } from "./session.js";
import { ENTITY_TYPES, type EntityType } from "./types.js";

const params = new URLSearchParams(window.location.search);
const api = new ApiClient(params.get("api") ?? "http://127.0.0.1:8234");
const projectId = params.get("project") ?? "";

const session = new ReviewSession(api, projectId);
let currentType: EntityType = "SKILL";
let selectedSpan = -1;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderBanner(): void {
  const view = session.view;
  el("banner").textContent = view
    ? `${view.project_id} — ${view.state}${view.busy ? " (busy)" : ""}`
    : "no project loaded";
  const p1 = view?.progress.pass1 ?? { done: 0, total: 0 };
  const p2 = view?.progress.pass2 ?? { done: 0, total: 0 };
  el("progress1").textContent = `pass 1: ${p1.done}/${p1.total}`;
  el<HTMLProgressElement>("bar1").max = Math.max(p1.total, 1);
  el<HTMLProgressElement>("bar1").value = p1.done;
  el("progress2").textContent = `pass 2: ${p2.done}/${p2.total}`;
  el<HTMLProgressElement>("bar2").max = Math.max(p2.total, 1);
  el<HTMLProgressElement>("bar2").value = p2.done;

  const summary = view?.last_train_summary;
  el("devf1").textContent = summary
    ? `dev micro F1 ${summary.dev_f1.toFixed(2)} (best epoch ${summary.best_epoch})`
    : "";

  const counts = Object.entries(session.submittedCounts)
    .map(([type, n]) => `${type}: ${n}`)
    .join("  ");
  el("typecounts").textContent = counts ? `reviewed spans — ${counts}` : "";

  const state = view?.state ?? "";
  el<HTMLButtonElement>("btn-seed").disabled = state !== "CREATED" || !!view?.busy;
  el<HTMLButtonElement>("btn-train").disabled = state !== "REVIEW1_DONE" || !!view?.busy;
  el<HTMLButtonElement>("btn-annotate").disabled = state !== "MODEL_TRAINED" || !!view?.busy;
  el<HTMLButtonElement>("btn-finalize").disabled = state !== "FINALIZED" || !!view?.busy;
  const link = el<HTMLAnchorElement>("export-link");
  link.style.display = state === "FINALIZED" ? "inline" : "none";
  link.href = api.exportUrl(projectId);
}

function renderText(): void {
  const container = el("text");
  container.textContent = "";
  const item = session.item;
  const editor = session.editor;
  if (!item || !editor) {
    el("item-meta").textContent =
      session.phase === "queue-exhausted"
        ? "queue exhausted — advance the stage when ready"
        : session.phase === "finalized"
          ? "project finalized"
          : "";
    return;
  }
  el("item-meta").textContent =
    `${item.section_id} (${item.kind}, pass ${item.pass}, revision ${item.revision})`;
  const text = item.text;
  let cursor = 0;
  editor.working.forEach((span, index) => {
    if (span.start > cursor) {
      container.appendChild(document.createTextNode(text.slice(cursor, span.start)));
    }
    const mark = document.createElement("mark");
    mark.className = `etype-${span.type}${index === selectedSpan ? " selected" : ""}`;
    mark.textContent = text.slice(span.start, span.end);
    mark.title = span.type;
    mark.dataset.index = String(index);
    const badge = document.createElement("sup");
    badge.textContent = span.type;
    mark.appendChild(badge);
    container.appendChild(mark);
    cursor = span.end;
  });
  if (cursor < text.length) {
    container.appendChild(document.createTextNode(text.slice(cursor)));
  }
  el("proposals").textContent = item.proposals
    .map((p) => `${p.provenance}:${p.type}@${p.start}-${p.end}`)
    .join("  ");
  el("status").textContent = session.lastError ?? "";
}

function render(): void {
  renderBanner();
  renderText();
}

/** Character offset of a DOM point inside the text container. */
function offsetWithin(container: Node, node: Node, offset: number): number {
  let total = 0;
  const walk = (current: Node): boolean => {
    if (current === node) {
      total += current.nodeType === Node.TEXT_NODE ? offset : 0;
      return true;
    }
    if (current.nodeType === Node.TEXT_NODE) {
      total += (current.textContent ?? "").length;
      return false;
    }
    if (current instanceof HTMLElement && current.tagName === "SUP") {
      return false; // badges are not section text
    }
    for (const child of Array.from(current.childNodes)) {
      if (walk(child)) return true;
    }
    return false;
  };
  walk(container);
  return total;
}

function handleSelection(): void {
  const editor = session.editor;
  const selection = window.getSelection();
  if (!editor || !selection || selection.rangeCount === 0 || selection.isCollapsed) {
    return;
  }
  const range = selection.getRangeAt(0);
  const container = el("text");
  if (!container.contains(range.startContainer) || !container.contains(range.endContainer)) {
    return;
  }
  const start = offsetWithin(container, range.startContainer, range.startOffset);
  const end = offsetWithin(container, range.endContainer, range.endOffset);
  const result = editor.add(start, end, currentType);
  session.lastError = result.ok ? null : result.reason;
  selection.removeAllRanges();
  render();
}

async function guard(action: () => Promise<void>): Promise<void> {
  try {
    await action();
    session.lastError = null;
  } catch (error) {
    session.lastError = error instanceof Error ? error.message : String(error);
  }
  render();
}

function wireUp(): void {
  const picker = el("types");
  ENTITY_TYPES.forEach((etype, index) => {
    const button = document.createElement("button");
    button.textContent = `${index + 1} ${etype}`;
    button.className = `etype-${etype}`;
    button.addEventListener("click", () => {
      currentType = etype;
      if (selectedSpan >= 0) session.editor?.retype(selectedSpan, etype);
      render();
    });
    picker.appendChild(button);
  });

  el("text").addEventListener("mouseup", handleSelection);
  el("text").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const mark = target.closest("mark");
    selectedSpan = mark?.dataset.index ? Number(mark.dataset.index) : -1;
    render();
  });

  el("btn-accept").addEventListener("click", () =>
    guard(async () => {
      session.editor?.acceptAll();
    }),
  );
  el("btn-clear").addEventListener("click", () =>
    guard(async () => {
      session.editor?.clear();
    }),
  );
  el("btn-submit").addEventListener("click", () =>
    guard(async () => {
      const outcome = await session.submit();
      if (outcome.accepted) {
        await session.loadNext();
        await session.refresh();
        selectedSpan = -1;
      }
    }),
  );
  el("btn-reload").addEventListener("click", () =>
    guard(async () => {
      await session.loadNext();
      selectedSpan = -1;
    }),
  );
  el("btn-seed").addEventListener("click", () =>
    guard(async () => {
      await session.runStage("seed-annotate");
      await session.loadNext();
    }),
  );
  el("btn-train").addEventListener("click", () =>
    guard(async () => {
      await session.train();
    }),
  );
  el("btn-annotate").addEventListener("click", () =>
    guard(async () => {
      await session.runStage("model-annotate");
      await session.loadNext();
    }),
  );
  el("btn-finalize").addEventListener("click", () =>
    guard(async () => {
      await session.runStage("finalize");
    }),
  );

  document.addEventListener("keydown", (event) => {
    if (event.target instanceof HTMLInputElement) return;
    if (event.key === "a") {
      event.preventDefault();
      session.editor?.acceptAll();
      render();
    } else if (event.key === "Enter" || event.key === "n") {
      event.preventDefault();
      el<HTMLButtonElement>("btn-submit").click();
    } else if (event.key >= "1" && event.key <= "8") {
      const etype = ENTITY_TYPES[Number(event.key) - 1];
      if (etype) {
        currentType = etype;
        if (selectedSpan >= 0) session.editor?.retype(selectedSpan, etype);
      }
      render();
    } else if (event.key === "Backspace" && selectedSpan >= 0) {
      event.preventDefault();
      session.editor?.remove(selectedSpan);
      selectedSpan = -1;
      render();
    }
  });
}

async function start(): Promise<void> {
  wireUp();
  if (!projectId) {
    el("banner").textContent = "add ?project=<id> (and optionally &api=<url>) to the URL";
    return;
  }
  await guard(async () => {
    await session.refresh();
    const view = session.view;
    if (view && view.state !== "CREATED" && activePass(view.state) >= 1) {
      await session.loadNext();
    }
  });
  // keep the banner live while training or another client works
  setInterval(() => guard(async () => void (await session.refresh())), 4000);
}

void start();
