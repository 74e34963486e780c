/** Sparkline geometry for per-device traffic. Pure string/number work so the
 * exact-values rule (plot what the API said, nothing resampled) is testable.
 */

export interface ChartGeometry {
  width: number;
  height: number;
  /** SVG path for bytes out, one vertex per series row */
  outPath: string;
  /** SVG path for bytes in */
  inPath: string;
  /** largest single value drawn, 0 for an empty chart */
  peak: number;
}

/** Map series rows onto an SVG coordinate box.
 *
 * X spans [windowStart, windowEnd] in seconds; Y is linear from zero to the
 * series peak. Every row becomes exactly one vertex: no buckets, no
 * averaging, so vertex count equals row count and heights are proportional
 * to the exact byte values.
 */
export function chartGeometry(
  series: [number, number, number][],
  windowEnd: number,
  windowS: number,
  width = 300,
  height = 60,
): ChartGeometry {
  const windowStart = windowEnd - windowS;
  const peak = series.reduce((m, row) => Math.max(m, row[1], row[2]), 0);
  const x = (t: number) => ((t - windowStart) / windowS) * width;
  const y = (v: number) => (peak === 0 ? height : height - (v / peak) * height);

  const path = (pick: (row: [number, number, number]) => number) =>
    series
      .map((row, i) => `${i === 0 ? "M" : "L"}${x(row[0]).toFixed(1)},${y(pick(row)).toFixed(1)}`)
      .join(" ");

  return {
    width,
    height,
    outPath: path((r) => r[1]),
    inPath: path((r) => r[2]),
    peak,
  };
}

export function chartSvg(geom: ChartGeometry): string {
  return (
    `<svg viewBox="0 0 ${geom.width} ${geom.height}" preserveAspectRatio="none" class="spark">` +
    `<path class="spark-in" d="${geom.inPath}" fill="none"/>` +
    `<path class="spark-out" d="${geom.outPath}" fill="none"/>` +
    `</svg>`
  );
}
