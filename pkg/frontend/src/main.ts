/** Browser entry point. Wires the pure modules to the DOM.
 *
 * The session cursor lives on the server, so this file keeps almost
 * nothing: a user id in the URL fragment (to survive refresh), a session
 * token, and the current ViewState. Everything else is re-fetched.
 */

import { ApiError, BusyError, RatingClient } from "./api.js";
import { intentForKey } from "./keyboard.js";
import { layoutScatter, Viewport } from "./layout.js";
import { drawScene } from "./render.js";
import {
  canSubmit,
  Event,
  INITIAL,
  progressText,
  reduce,
  ViewState,
} from "./state.js";
import { PayloadError } from "./types.js";

function must<T extends Element>(selector: string): T {
  const el = document.querySelector(selector);
  if (el === null) throw new Error(`markup is missing ${selector}`);
  return el as T;
}

const loginView = must<HTMLElement>("#login-view");
const ratingView = must<HTMLElement>("#rating-view");
const doneView = must<HTMLElement>("#done-view");
const failedView = must<HTMLElement>("#failed-view");

const loginForm = must<HTMLFormElement>("#login-form");
const userInput = must<HTMLInputElement>("#user-id");
const loginError = must<HTMLElement>("#login-error");

const progressEl = must<HTMLElement>("#progress");
const guidelinesToggle = must<HTMLButtonElement>("#guidelines-toggle");
const guidelinesPanel = must<HTMLElement>("#guidelines");
const canvas = must<HTMLCanvasElement>("#plot");
const scoreButtons = Array.from(
  document.querySelectorAll<HTMLButtonElement>("button.score"),
);
const submitButton = must<HTMLButtonElement>("#submit");
const noticeEl = must<HTMLElement>("#notice");

const doneSummary = must<HTMLElement>("#done-summary");
const exportLink = must<HTMLAnchorElement>("#export-link");
const failureDetail = must<HTMLElement>("#failure-detail");

const client = new RatingClient((input, init) => fetch(input, init));

let state: ViewState = INITIAL;
let sessionId: string | null = null;
let userId: string | null = null;

function dispatch(event: Event): void {
  state = reduce(state, event);
  render(state);
}

function render(s: ViewState): void {
  loginView.hidden = s.phase !== "login";
  ratingView.hidden = s.phase !== "rating" && s.phase !== "loading";
  doneView.hidden = s.phase !== "done";
  failedView.hidden = s.phase !== "failed";

  progressEl.textContent = progressText(s);
  guidelinesPanel.hidden = !s.guidelinesOpen;
  guidelinesPanel.textContent = s.payload?.guidelines ?? "";

  for (const button of scoreButtons) {
    const score = Number(button.dataset["score"]);
    button.classList.toggle("selected", s.selectedScore === score);
    button.disabled = s.phase !== "rating" || s.inFlight;
  }
  submitButton.disabled = !canSubmit(s);
  submitButton.textContent = s.inFlight ? "Sending..." : "Submit rating";

  noticeEl.hidden = s.notice === null;
  noticeEl.textContent = s.notice ?? "";

  if (s.phase === "rating" && s.payload !== null) {
    const view: Viewport = { width: canvas.width, height: canvas.height, padding: 24 };
    const scene = layoutScatter(s.payload, view);
    const ctx = canvas.getContext("2d");
    if (ctx !== null) drawScene(ctx, scene, canvas.width, canvas.height);
  }

  if (s.phase === "done") {
    doneSummary.textContent = `Thank you: ${progressText(s)}.`;
    if (userId !== null) exportLink.href = client.exportUrl(userId);
  }
  if (s.phase === "failed") {
    failureDetail.textContent = s.error ?? "unknown error";
  }
}

function fatal(err: unknown): void {
  const message =
    err instanceof PayloadError
      ? `the server sent a malformed projection payload (${err.message})`
      : err instanceof ApiError
        ? err.detail
        : String(err);
  dispatch({ type: "failed", message });
}

async function fetchNext(): Promise<void> {
  if (sessionId === null) return;
  try {
    const next = await client.next(sessionId);
    if (next.kind === "done") {
      dispatch({ type: "finished", rated: next.rated, total: next.total });
    } else {
      dispatch({ type: "payload", payload: next.payload });
    }
  } catch (err) {
    fatal(err);
  }
}

async function start(id: string): Promise<void> {
  userId = id;
  location.hash = `u=${encodeURIComponent(id)}`;
  dispatch({ type: "session_opened" });
  try {
    const info = await client.openSession(id, 0);
    sessionId = info.session_id;
  } catch (err) {
    if (err instanceof ApiError && err.status === 400) {
      // bad user id: stay on the login form instead of a fatal screen
      state = INITIAL;
      render(state);
      loginError.hidden = false;
      loginError.textContent = err.detail;
      return;
    }
    fatal(err);
    return;
  }
  await fetchNext();
}

async function submitCurrent(): Promise<void> {
  if (!canSubmit(state) || sessionId === null) return;
  const payload = state.payload;
  const score = state.selectedScore;
  if (payload === null || score === null) return;
  dispatch({ type: "submit_started" });
  try {
    await client.submit(sessionId, payload.projection_id, score);
    dispatch({ type: "submit_ok" });
    await fetchNext();
  } catch (err) {
    if (err instanceof BusyError) return;
    if (err instanceof ApiError) {
      // service said no: stay on this item and show why
      dispatch({ type: "submit_rejected", message: err.detail });
    } else {
      fatal(err);
    }
  }
}

loginForm.addEventListener("submit", (e) => {
  e.preventDefault();
  const id = userInput.value.trim();
  if (id.length === 0) {
    loginError.hidden = false;
    loginError.textContent = "enter a rater id";
    return;
  }
  loginError.hidden = true;
  void start(id);
});

for (const button of scoreButtons) {
  button.addEventListener("click", () => {
    dispatch({ type: "select_score", score: Number(button.dataset["score"]) });
  });
}

submitButton.addEventListener("click", () => void submitCurrent());
guidelinesToggle.addEventListener("click", () => dispatch({ type: "toggle_guidelines" }));

document.addEventListener("keydown", (e) => {
  if (e.target instanceof HTMLInputElement) return;
  const intent = intentForKey(e.key);
  if (intent === null) return;
  if (intent.kind === "select") dispatch({ type: "select_score", score: intent.score });
  else if (intent.kind === "submit") void submitCurrent();
  else dispatch({ type: "toggle_guidelines" });
});

function boot(): void {
  const match = /^#u=(.+)$/.exec(location.hash);
  if (match !== null && match[1] !== undefined) {
    void start(decodeURIComponent(match[1]));
  } else {
    render(state);
  }
}

boot();
