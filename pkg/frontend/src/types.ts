/** Shapes of the rating-service JSON API, plus strict payload validation.
 *
 * Validation is deliberately a whitelist: the projection payload carries
 * only what a blind rater may see, and anything else a server might add
 * is dropped on the floor before it can reach the screen.
 */

export interface SessionInfo {
  session_id: string;
  user_id: string;
  rated: number;
  total: number;
}

export interface ProjectionPayload {
  projection_id: string;
  dataset_id: string;
  coords: [number, number][];
  labels: number[];
  guidelines: string;
  rated: number;
  total: number;
}

export interface DoneMarker {
  done: true;
  rated: number;
  total: number;
}

export type NextResponse =
  | { kind: "projection"; payload: ProjectionPayload }
  | { kind: "done"; rated: number; total: number };

export class PayloadError extends Error {}

function isFiniteNumber(v: unknown): v is number {
  return typeof v === "number" && Number.isFinite(v);
}

/** Validate and strip a /next projection payload down to the known fields. */
export function parsePayload(raw: unknown): ProjectionPayload {
  if (typeof raw !== "object" || raw === null) {
    throw new PayloadError("payload is not an object");
  }
  const obj = raw as Record<string, unknown>;
  const { projection_id, dataset_id, coords, labels, guidelines, rated, total } = obj;
  if (typeof projection_id !== "string" || projection_id.length === 0) {
    throw new PayloadError("missing projection_id");
  }
  if (typeof dataset_id !== "string") {
    throw new PayloadError("missing dataset_id");
  }
  if (typeof guidelines !== "string") {
    throw new PayloadError("missing guidelines");
  }
  if (!Array.isArray(coords) || coords.length === 0) {
    throw new PayloadError("payload has no points");
  }
  if (!Array.isArray(labels) || labels.length !== coords.length) {
    throw new PayloadError("labels do not match coords");
  }
  const points: [number, number][] = coords.map((row, i) => {
    if (!Array.isArray(row) || row.length !== 2 || !isFiniteNumber(row[0]) || !isFiniteNumber(row[1])) {
      throw new PayloadError(`bad coordinate at index ${i}`);
    }
    return [row[0], row[1]];
  });
  const classIndices = labels.map((v, i) => {
    if (!isFiniteNumber(v) || v < 0 || !Number.isInteger(v)) {
      throw new PayloadError(`bad label at index ${i}`);
    }
    return v;
  });
  if (!isFiniteNumber(rated) || !isFiniteNumber(total) || rated < 0 || total < 0 || rated > total) {
    throw new PayloadError("bad progress counters");
  }
  // whitelist: rebuild the object, never spread the raw one
  return {
    projection_id,
    dataset_id,
    coords: points,
    labels: classIndices,
    guidelines,
    rated,
    total,
  };
}

export function parseNext(raw: unknown): NextResponse {
  if (typeof raw === "object" && raw !== null && (raw as Record<string, unknown>)["done"] === true) {
    const obj = raw as Record<string, unknown>;
    const rated = obj["rated"];
    const total = obj["total"];
    if (!isFiniteNumber(rated) || !isFiniteNumber(total)) {
      throw new PayloadError("bad done marker");
    }
    return { kind: "done", rated, total };
  }
  return { kind: "projection", payload: parsePayload(raw) };
}
