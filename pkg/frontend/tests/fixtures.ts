/** Shared builders for test payloads. */

import { ProjectionPayload, parsePayload } from "../src/types.js";

/** Raw server-shaped document; fields can be overridden or extended. */
export function payloadDoc(
  n = 150,
  classes = 3,
  extra: Record<string, unknown> = {},
): Record<string, unknown> {
  const coords = Array.from({ length: n }, (_, i) => [
    Math.cos(i * 0.7) * (1 + (i % 5)),
    Math.sin(i * 0.3) * 2 + (i % classes),
  ]);
  const labels = Array.from({ length: n }, (_, i) => i % classes);
  return {
    projection_id: "p0123456789ab",
    dataset_id: "iris",
    coords,
    labels,
    guidelines: "Rate the plot from 1 (poor) to 5 (excellent).",
    rated: 2,
    total: 12,
    ...extra,
  };
}

export function payload(n = 150, classes = 3): ProjectionPayload {
  return parsePayload(payloadDoc(n, classes));
}
