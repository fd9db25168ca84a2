/** Fixed categorical palette (Okabe-Ito plus two fillers for 10 classes).
 * Class index -> color is a pure lookup, so two renders of one payload
 * always pick identical colors.
 */

export const PALETTE: readonly string[] = [
  "#0072b2", // blue
  "#e69f00", // orange
  "#009e73", // green
  "#d55e00", // vermilion
  "#cc79a7", // purple-pink
  "#56b4e9", // sky
  "#f0e442", // yellow
  "#000000", // black
  "#999999", // grey
  "#8c510a", // brown
];

export function colorFor(classIndex: number): string {
  const color = PALETTE[((classIndex % PALETTE.length) + PALETTE.length) % PALETTE.length];
  return color ?? "#000000";
}
