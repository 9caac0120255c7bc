import { MatchAuditBuilder } from "./matchAudit.js";
import { canSubmitCandidate, canSubmitProbe } from "./interactions.js";
import type {
  CandidateItem,
  MatchAuditItem,
  Progress,
  ReviewItem,
  SessionDescriptor,
  Verdict,
} from "./types.js";
import { CATEGORY_SETS, VERDICTS } from "./types.js";

type Submit = (decision: Record<string, unknown>) => void;

const VERDICT_LABELS: Record<Verdict, string> = {
  already_annotated: "1 · Already annotated",
  new_valid: "2 · New valid error",
  invalid: "3 · Not an inconsistency",
  undecidable: "4 · Undecidable…",
};

function h<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

export function renderProgress(progress: Progress): HTMLElement {
  const wrap = h("div", "progress");
  wrap.append(h("span", "", `${progress.decided} / ${progress.total} decided`));
  const meter = h("div", "meter");
  const fill = h("div", "meter-fill");
  const pct = progress.total > 0 ? (100 * progress.decided) / progress.total : 0;
  fill.style.width = `${pct}%`;
  meter.append(fill);
  wrap.append(meter);
  return wrap;
}

function rejectionBanner(rejection: string | null): HTMLElement | null {
  if (!rejection) return null;
  return h("div", "error", `Rejected: ${rejection}`);
}

function textBlock(title: string, body: string): HTMLElement {
  const col = h("div", "col");
  col.append(h("h3", "", title));
  col.append(h("pre", "doc", body));
  return col;
}

/** Candidate screen: document and summary side by side, the candidate's
 * fact/description highlighted, one button per verdict. Undecidable opens
 * a note field and stays disabled until the note is non-blank. */
export function renderCandidate(
  item: CandidateItem,
  submit: Submit,
  rejection: string | null,
): HTMLElement {
  const pane = h("section", "pane candidate-pane");
  const banner = rejectionBanner(rejection);
  if (banner) pane.append(banner);

  const columns = h("div", "columns");
  columns.append(textBlock("Document", item.document));
  columns.append(textBlock("Summary", item.summary));
  pane.append(columns);

  const focus = h("div", "focus");
  const factRow = h("p", "focus-row");
  factRow.append(h("span", "focus-label", "Fact: "));
  factRow.append(h("mark", "", item.fact));
  const descRow = h("p", "focus-row");
  descRow.append(h("span", "focus-label", "Proposed error: "));
  descRow.append(h("mark", "", item.description));
  focus.append(factRow, descRow);
  pane.append(focus);

  const noteRow = h("div", "note-row hidden");
  const noteInput = h("input", "note-input");
  noteInput.placeholder = "Why is this undecidable?";
  const noteSubmit = h("button", "verdict-submit", "Submit undecidable");
  noteSubmit.disabled = true;
  noteInput.addEventListener("input", () => {
    noteSubmit.disabled = !canSubmitCandidate("undecidable", noteInput.value);
  });
  noteSubmit.addEventListener("click", () => {
    submit({
      candidate_id: item.candidate_id,
      verdict: "undecidable",
      note: noteInput.value.trim(),
    });
  });
  noteRow.append(noteInput, noteSubmit);

  const buttons = h("div", "verdicts");
  for (const verdict of VERDICTS) {
    const button = h("button", "verdict", VERDICT_LABELS[verdict]);
    button.dataset.verdict = verdict;
    button.addEventListener("click", () => {
      if (verdict === "undecidable") {
        noteRow.classList.remove("hidden");
        noteInput.focus();
        return;
      }
      submit({ candidate_id: item.candidate_id, verdict });
    });
    buttons.append(button);
  }
  pane.append(buttons, noteRow);
  return pane;
}

/** Match-audit screen: the verbatim matching instructions, both description
 * lists, and one gold selector per predicted description. Submit unlocks
 * only when every predicted description has an explicit choice. */
export function renderMatchAudit(
  item: MatchAuditItem,
  instructions: string | null,
  submit: Submit,
  rejection: string | null,
): HTMLElement {
  const pane = h("section", "pane audit-pane");
  const banner = rejectionBanner(rejection);
  if (banner) pane.append(banner);

  if (instructions) {
    const details = h("details", "instructions");
    details.open = true;
    details.append(h("summary", "", "Matching instructions"));
    details.append(h("pre", "doc", instructions));
    pane.append(details);
  }

  const summaryText = item["summary"];
  if (typeof summaryText === "string" && summaryText) {
    pane.append(textBlock("Summary under review", summaryText));
  }

  const goldList = h("div", "gold-list");
  goldList.append(h("h3", "", "Gold error descriptions"));
  for (const gold of item.gold) {
    goldList.append(h("p", "desc", `${gold.id}. ${gold.text}`));
  }
  pane.append(goldList);

  const builder = new MatchAuditBuilder(item.predicted, item.gold);
  const submitButton = h("button", "verdict-submit", "Submit assignment");
  submitButton.disabled = !builder.complete;

  const table = h("div", "assign-table");
  table.append(h("h3", "", "Predicted error descriptions"));
  for (const pred of item.predicted) {
    const row = h("div", "assign-row");
    row.append(h("p", "desc", `${pred.id}. ${pred.text}`));
    const select = h("select", "gold-select");
    const placeholder = h("option", "", "— choose a match —");
    placeholder.value = "";
    select.append(placeholder);
    const none = h("option", "", "no matching gold error");
    none.value = "__none__";
    select.append(none);
    for (const gold of item.gold) {
      const option = h("option", "", `${gold.id}. ${gold.text.slice(0, 90)}`);
      option.value = gold.id;
      select.append(option);
    }
    select.addEventListener("change", () => {
      if (select.value === "") return;
      builder.assign(pred.id, select.value === "__none__" ? null : select.value);
      submitButton.disabled = !builder.complete;
    });
    row.append(select);
    table.append(row);
  }
  pane.append(table);

  submitButton.addEventListener("click", () => {
    submit({ example_id: item.example_id, assignment: builder.build() });
  });
  pane.append(submitButton);
  return pane;
}

/** Category screen for false-negative / false-positive labeling. */
export function renderCategory(
  item: ReviewItem,
  submit: Submit,
  rejection: string | null,
): HTMLElement {
  const pane = h("section", "pane category-pane");
  const banner = rejectionBanner(rejection);
  if (banner) pane.append(banner);

  for (const field of ["document", "summary", "description", "text"]) {
    const value = item[field];
    if (typeof value === "string" && value) {
      pane.append(textBlock(field[0].toUpperCase() + field.slice(1), value));
    }
  }

  const itemKind = typeof item["kind"] === "string" ? (item["kind"] as string) : "";
  const kinds = itemKind ? [itemKind] : Object.keys(CATEGORY_SETS);
  for (const kind of kinds) {
    const group = h("div", "category-group");
    group.append(h("h3", "", kind.replace("_", " ")));
    for (const category of CATEGORY_SETS[kind] ?? []) {
      const button = h("button", "verdict", category.replace(/_/g, " "));
      button.addEventListener("click", () => {
        submit({ item_id: item["item_id"], kind, category });
      });
      group.append(button);
    }
    pane.append(group);
  }
  return pane;
}

/** Probe-authoring screen: question and answer, both required. */
export function renderProbe(
  item: ReviewItem,
  submit: Submit,
  rejection: string | null,
): HTMLElement {
  const pane = h("section", "pane probe-pane");
  const banner = rejectionBanner(rejection);
  if (banner) pane.append(banner);

  for (const field of ["document", "summary", "fact"]) {
    const value = item[field];
    if (typeof value === "string" && value) {
      pane.append(textBlock(field[0].toUpperCase() + field.slice(1), value));
    }
  }

  const question = h("textarea", "probe-input");
  question.placeholder = "Question probing the flagged fact";
  const answer = h("textarea", "probe-input");
  answer.placeholder = "Reference answer";
  const submitButton = h("button", "verdict-submit", "Submit probe");
  submitButton.disabled = true;
  const refresh = () => {
    submitButton.disabled = !canSubmitProbe(question.value, answer.value);
  };
  question.addEventListener("input", refresh);
  answer.addEventListener("input", refresh);
  submitButton.addEventListener("click", () => {
    submit({
      probe_id: item["probe_id"],
      question: question.value.trim(),
      answer: answer.value.trim(),
    });
  });
  pane.append(question, answer, submitButton);
  return pane;
}

export function renderDone(
  progress: Progress,
  fetchExport: () => Promise<string>,
): HTMLElement {
  const pane = h("section", "pane done-pane");
  pane.append(h("h2", "", "Session complete"));
  pane.append(h("p", "", `All ${progress.total} items decided.`));
  const exportButton = h("button", "verdict-submit", "Export decisions");
  const output = h("pre", "doc export-output");
  exportButton.addEventListener("click", () => {
    void fetchExport().then(
      (text) => {
        output.textContent = text;
        const blob = new Blob([text], { type: "application/x-ndjson" });
        const link = h("a", "download-link", "Download NDJSON");
        link.href = URL.createObjectURL(blob);
        link.download = "decisions.jsonl";
        pane.append(link);
      },
      (exc: unknown) => {
        output.textContent = `Export failed: ${exc instanceof Error ? exc.message : exc}`;
      },
    );
  });
  pane.append(exportButton, output);
  return pane;
}

export function renderFailed(message: string, retry: () => void): HTMLElement {
  const pane = h("section", "pane failed-pane");
  pane.append(h("div", "error", `Connection problem: ${message}`));
  const button = h("button", "verdict-submit", "Retry");
  button.addEventListener("click", retry);
  pane.append(button);
  return pane;
}

export function renderSessionRow(
  descriptor: SessionDescriptor,
  open: () => void,
): HTMLElement {
  const row = h("div", "session-row");
  row.append(h("span", "session-kind", descriptor.kind));
  row.append(h("code", "", descriptor.session_id));
  row.append(
    h(
      "span",
      "session-progress",
      `${descriptor.progress.decided}/${descriptor.progress.total}`,
    ),
  );
  const button = h("button", "verdict", "Open");
  button.addEventListener("click", open);
  row.append(button);
  return row;
}
