/** The rating view's state machine.
 *
 * Pure transitions over a small immutable state object; the DOM layer
 * only reads the state and forwards events. Server progress counters are
 * the single source of truth, so a refresh resumes wherever the server's
 * cursor points.
 */

import { ProjectionPayload } from "./types.js";

export type Phase = "login" | "loading" | "rating" | "done" | "failed";

export interface ViewState {
  phase: Phase;
  payload: ProjectionPayload | null;
  selectedScore: number | null;
  rated: number;
  total: number;
  guidelinesOpen: boolean;
  inFlight: boolean;
  /** inline problem with the last action; does not leave the rating phase */
  notice: string | null;
  /** fatal problem; switches to the failed phase */
  error: string | null;
}

export const INITIAL: ViewState = {
  phase: "login",
  payload: null,
  selectedScore: null,
  rated: 0,
  total: 0,
  guidelinesOpen: true,
  inFlight: false,
  notice: null,
  error: null,
};

export type Event =
  | { type: "session_opened" }
  | { type: "payload"; payload: ProjectionPayload }
  | { type: "finished"; rated: number; total: number }
  | { type: "select_score"; score: number }
  | { type: "toggle_guidelines" }
  | { type: "submit_started" }
  | { type: "submit_ok" }
  | { type: "submit_rejected"; message: string }
  | { type: "failed"; message: string };

export function canSubmit(state: ViewState): boolean {
  return (
    state.phase === "rating" &&
    state.payload !== null &&
    state.selectedScore !== null &&
    !state.inFlight
  );
}

function clampProgress(rated: number, total: number): { rated: number; total: number } {
  const t = Math.max(0, total);
  return { rated: Math.min(Math.max(0, rated), t), total: t };
}

export function reduce(state: ViewState, event: Event): ViewState {
  switch (event.type) {
    case "session_opened":
      return { ...state, phase: "loading", error: null, notice: null };
    case "payload": {
      const progress = clampProgress(event.payload.rated, event.payload.total);
      return {
        ...state,
        phase: "rating",
        payload: event.payload,
        selectedScore: null,
        ...progress,
        inFlight: false,
        notice: null,
        error: null,
      };
    }
    case "finished": {
      const progress = clampProgress(event.rated, event.total);
      return {
        ...state,
        phase: "done",
        payload: null,
        selectedScore: null,
        ...progress,
        inFlight: false,
        notice: null,
      };
    }
    case "select_score": {
      if (state.phase !== "rating" || state.inFlight) return state;
      if (!Number.isInteger(event.score) || event.score < 1 || event.score > 5) {
        return state; // out-of-range keys are ignored, not errors
      }
      return { ...state, selectedScore: event.score, notice: null };
    }
    case "toggle_guidelines":
      return { ...state, guidelinesOpen: !state.guidelinesOpen };
    case "submit_started":
      if (!canSubmit(state)) return state;
      return { ...state, inFlight: true, notice: null };
    case "submit_ok":
      return { ...state, inFlight: false };
    case "submit_rejected":
      // stay on the current item; surface the reason inline
      return { ...state, inFlight: false, notice: event.message };
    case "failed":
      return { ...state, phase: "failed", inFlight: false, error: event.message };
  }
}

/** Progress line under the plot; never mentions what made the projection. */
export function progressText(state: ViewState): string {
  return `${state.rated} of ${state.total} rated`;
}
