import { ApiClient } from "./api.js";
import { SessionController, type FlowState } from "./controller.js";
import { verdictForKey } from "./interactions.js";
import type { CandidateItem, MatchAuditItem, SessionDescriptor } from "./types.js";
import {
  renderCandidate,
  renderCategory,
  renderDone,
  renderFailed,
  renderMatchAudit,
  renderProbe,
  renderProgress,
  renderSessionRow,
} from "./views.js";

const client = new ApiClient("");
const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

let activeSession: SessionDescriptor | null = null;
let activeController: SessionController | null = null;
let matchInstructions: string | null = null;

function annotatorName(): string {
  return localStorage.getItem("halloc.annotator") ?? "";
}

function clear(node: HTMLElement): void {
  while (node.firstChild) node.removeChild(node.firstChild);
}

function header(title: string, progressNode: HTMLElement | null): HTMLElement {
  const head = document.createElement("header");
  const heading = document.createElement("h1");
  heading.textContent = title;
  head.append(heading);
  if (progressNode) head.append(progressNode);
  if (activeSession) {
    const back = document.createElement("button");
    back.className = "verdict back";
    back.textContent = "Sessions";
    back.addEventListener("click", () => {
      activeSession = null;
      activeController = null;
      void showPicker();
    });
    head.append(back);
  }
  return head;
}

async function showPicker(): Promise<void> {
  clear(root!);
  root!.append(header("Review sessions", null));

  const annotatorRow = document.createElement("div");
  annotatorRow.className = "annotator-row";
  const label = document.createElement("label");
  label.textContent = "Annotator id: ";
  const input = document.createElement("input");
  input.value = annotatorName();
  input.placeholder = "e.g. ann1";
  input.addEventListener("input", () => {
    localStorage.setItem("halloc.annotator", input.value.trim());
  });
  label.append(input);
  annotatorRow.append(label);
  root!.append(annotatorRow);

  const list = document.createElement("div");
  list.className = "session-list";
  root!.append(list);
  try {
    const sessions = await client.listSessions();
    if (sessions.length === 0) {
      list.textContent = "No sessions yet. Create one with the sessions API.";
    }
    for (const descriptor of sessions) {
      list.append(
        renderSessionRow(descriptor, () => {
          void openSession(descriptor);
        }),
      );
    }
  } catch (exc) {
    list.append(
      renderFailed(exc instanceof Error ? exc.message : String(exc), () => {
        void showPicker();
      }),
    );
  }
}

async function openSession(descriptor: SessionDescriptor): Promise<void> {
  const annotator = annotatorName();
  if (!annotator) {
    window.alert("Set an annotator id first.");
    return;
  }
  activeSession = descriptor;
  matchInstructions = null;
  if (descriptor.kind === "match_audit") {
    try {
      matchInstructions = (await client.template("judge.match")).body;
    } catch {
      matchInstructions = null; // instructions pane is best-effort
    }
  }
  const controller = new SessionController(client, descriptor.session_id, annotator);
  activeController = controller;
  controller.onChange((state) => renderFlow(controller, state));
  await controller.start();
}

function renderFlow(controller: SessionController, state: FlowState): void {
  if (controller !== activeController || !activeSession) return;
  clear(root!);
  const kind = activeSession.kind;
  const progressNode =
    state.phase === "reviewing" || state.phase === "done"
      ? renderProgress(state.progress)
      : null;
  root!.append(header(`${kind.replace(/_/g, " ")} — ${controller.annotator}`, progressNode));

  const submit = (decision: Record<string, unknown>) => {
    void controller.submit(decision);
  };

  switch (state.phase) {
    case "loading": {
      const note = document.createElement("p");
      note.className = "loading";
      note.textContent = "Loading…";
      root!.append(note);
      break;
    }
    case "reviewing": {
      if (kind === "candidate_review") {
        root!.append(
          renderCandidate(state.item as CandidateItem, submit, state.rejection),
        );
      } else if (kind === "match_audit") {
        root!.append(
          renderMatchAudit(
            state.item as MatchAuditItem,
            matchInstructions,
            submit,
            state.rejection,
          ),
        );
      } else if (kind === "category_labeling") {
        root!.append(renderCategory(state.item, submit, state.rejection));
      } else {
        root!.append(renderProbe(state.item, submit, state.rejection));
      }
      break;
    }
    case "done": {
      root!.append(
        renderDone(state.progress, () => client.exportSession(controller.sessionId)),
      );
      break;
    }
    case "failed": {
      root!.append(
        renderFailed(state.message, () => {
          void controller.retry();
        }),
      );
      break;
    }
  }
}

// Keyboard shortcuts for candidate review: dispatch to the verdict buttons
// so the note-for-undecidable path stays identical to a click.
document.addEventListener("keydown", (event) => {
  const target = event.target as HTMLElement | null;
  if (
    target &&
    (target.tagName === "INPUT" ||
      target.tagName === "TEXTAREA" ||
      target.tagName === "SELECT")
  ) {
    return;
  }
  const verdict = verdictForKey(event.key);
  if (!verdict) return;
  const button = document.querySelector<HTMLButtonElement>(
    `button[data-verdict="${verdict}"]`,
  );
  if (button) {
    event.preventDefault();
    button.click();
  }
});

void showPicker();
