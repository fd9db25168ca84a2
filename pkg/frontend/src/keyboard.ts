/** Keyboard mapping: digits 1..5 select a score, Enter submits,
 * g toggles the guidelines panel. Everything else is ignored.
 *
 * The mapper returns an intent, not a state event: whether a submit
 * intent actually fires a request is decided by the caller against
 * the current view state.
 */

export type KeyIntent =
  | { kind: "select"; score: number }
  | { kind: "submit" }
  | { kind: "guidelines" };

export function intentForKey(key: string): KeyIntent | null {
  if (key.length === 1 && key >= "1" && key <= "5") {
    return { kind: "select", score: Number(key) };
  }
  if (key === "Enter") {
    return { kind: "submit" };
  }
  if (key === "g" || key === "G") {
    return { kind: "guidelines" };
  }
  return null;
}
