import { ApiClient, ApiError } from "./api.js";
import type { Progress, ReviewItem } from "./types.js";

/**
 * Review-flow state. The server is authoritative: item and progress always
 * come from the latest /next or /decisions response, so a reloaded page
 * reconstructs exactly where the annotator left off.
 */
export type FlowState =
  | { phase: "loading" }
  | {
      phase: "reviewing";
      item: ReviewItem;
      progress: Progress;
      /** Set when the last POST was rejected; the item stays on display. */
      rejection: string | null;
    }
  | { phase: "done"; progress: Progress }
  | { phase: "failed"; message: string };

function describe(exc: unknown): string {
  if (exc instanceof ApiError) return exc.detail;
  if (exc instanceof Error) return exc.message;
  return String(exc);
}

/**
 * Drives one annotator through one session: fetch-next, display, decide,
 * POST, advance. Rejected POSTs keep the current item on display with the
 * rejection message; network failures park the flow in "failed" until
 * retry() is called.
 */
export class SessionController {
  private current: FlowState = { phase: "loading" };
  private readonly listeners: Array<(state: FlowState) => void> = [];

  constructor(
    private readonly client: ApiClient,
    readonly sessionId: string,
    readonly annotator: string,
  ) {}

  get state(): FlowState {
    return this.current;
  }

  onChange(listener: (state: FlowState) => void): void {
    this.listeners.push(listener);
  }

  private setState(next: FlowState): void {
    this.current = next;
    for (const listener of this.listeners) listener(next);
  }

  async start(): Promise<void> {
    await this.advance();
  }

  /** Re-fetch the next pending item after a failure. */
  async retry(): Promise<void> {
    await this.advance();
  }

  private async advance(): Promise<void> {
    this.setState({ phase: "loading" });
    try {
      const next = await this.client.nextItem(this.sessionId, this.annotator);
      if (next.done || next.item === null) {
        this.setState({ phase: "done", progress: next.progress });
      } else {
        this.setState({
          phase: "reviewing",
          item: next.item,
          progress: next.progress,
          rejection: null,
        });
      }
    } catch (exc) {
      this.setState({ phase: "failed", message: describe(exc) });
    }
  }

  /**
   * POST a decision for the item on display. Returns true and advances on
   * success; on rejection returns false and re-displays the same item with
   * the server's message.
   */
  async submit(decision: Record<string, unknown>): Promise<boolean> {
    if (this.current.phase !== "reviewing") {
      throw new Error(`no item on display (phase: ${this.current.phase})`);
    }
    const displayed = this.current;
    try {
      await this.client.postDecision(this.sessionId, this.annotator, decision);
    } catch (exc) {
      this.setState({ ...displayed, rejection: describe(exc) });
      return false;
    }
    await this.advance();
    return true;
  }
}
