// Pure chart model + SVG string rendering, no DOM needed. Observed years
// get open markers, forecast years filled ones, and a dashed rule sits on
// each series' split year (its last observed year). Every data-* attribute
// is String(value) of the API number, untouched; tooltips round to one
// decimal for display only.

import { TopicForecast } from "./api";

export interface SeriesPoint {
  year: number;
  value: number;
  raw: number;
}

export interface ChartSeries {
  topicId: string;
  label: string;
  splitYear: number;
  observed: SeriesPoint[];
  forecast: SeriesPoint[];
}

export function toChartSeries(entry: TopicForecast): ChartSeries {
  const split = entry.base_year;
  for (const h of entry.history) {
    if (h.year > split) {
      throw new Error(
        `observed year ${h.year} after split year ${split} for ${entry.topic}`,
      );
    }
  }
  for (const f of entry.forecast) {
    if (f.year <= split) {
      throw new Error(
        `forecast year ${f.year} not after split year ${split} for ${entry.topic}`,
      );
    }
  }
  return {
    topicId: entry.topic,
    label: entry.display_name,
    splitYear: split,
    observed: entry.history.map((h) => ({
      year: h.year,
      value: h.popularity,
      raw: h.popularity,
    })),
    forecast: entry.forecast.map((f) => ({
      year: f.year,
      value: f.popularity,
      raw: f.raw,
    })),
  };
}

const PALETTE = [
  "#3366cc", "#dc3912", "#ff9900", "#109618", "#990099",
  "#0099c6", "#dd4477", "#66aa00", "#b82e2e", "#316395",
];

const MARGIN = { top: 16, right: 20, bottom: 32, left: 52 };

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

interface Scale {
  (v: number): number;
}

function linearScale(d0: number, d1: number, r0: number, r1: number): Scale {
  if (d0 === d1) {
    // degenerate extent: pad so a lone point lands mid-range
    d0 -= 1;
    d1 += 1;
  }
  const k = (r1 - r0) / (d1 - d0);
  return (v) => r0 + (v - d0) * k;
}

function pathFor(points: SeriesPoint[], x: Scale, y: Scale): string {
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${x(p.year).toFixed(2)},${y(p.value).toFixed(2)}`)
    .join("");
}

function markers(
  points: SeriesPoint[],
  kind: "observed" | "forecast",
  s: ChartSeries,
  color: string,
  x: Scale,
  y: Scale,
): string {
  const fill = kind === "observed" ? "#ffffff" : color;
  return points
    .map((p) => {
      const tip = `${escapeXml(s.label)} ${p.year}: ${p.value.toFixed(1)}`;
      const raw = kind === "forecast" ? ` data-raw="${String(p.raw)}"` : "";
      return (
        `<circle class="pt pt-${kind}" cx="${x(p.year).toFixed(2)}" cy="${y(p.value).toFixed(2)}"` +
        ` r="3.5" fill="${fill}" stroke="${color}" stroke-width="1.5"` +
        ` data-topic="${escapeXml(s.topicId)}" data-year="${p.year}"` +
        ` data-value="${String(p.value)}"${raw}><title>${tip}</title></circle>`
      );
    })
    .join("");
}

/** Render a multi-series history+forecast chart as a standalone SVG string. */
export function renderChart(series: ChartSeries[], width = 760, height = 380): string {
  if (series.length === 0) {
    return (
      `<svg class="chart" viewBox="0 0 ${width} ${height}" role="img">` +
      `<text x="${width / 2}" y="${height / 2}" text-anchor="middle" fill="#888">no data</text></svg>`
    );
  }

  const pts = series.flatMap((s) => [...s.observed, ...s.forecast]);
  const years = pts.map((p) => p.year);
  const values = pts.map((p) => p.value);
  const yMax = Math.max(...values, 0);
  const x = linearScale(
    Math.min(...years),
    Math.max(...years),
    MARGIN.left,
    width - MARGIN.right,
  );
  const y = linearScale(0, yMax === 0 ? 1 : yMax * 1.05, height - MARGIN.bottom, MARGIN.top);

  const parts: string[] = [];
  parts.push(`<svg class="chart" viewBox="0 0 ${width} ${height}" role="img">`);

  // axes: a baseline plus x tick labels every few years and 4 y guides
  const x0 = MARGIN.left;
  const x1 = width - MARGIN.right;
  const yBase = height - MARGIN.bottom;
  parts.push(`<g class="axis">`);
  parts.push(
    `<line x1="${x0}" y1="${yBase}" x2="${x1}" y2="${yBase}" stroke="#999"/>`,
  );
  const yearMin = Math.min(...years);
  const yearMax = Math.max(...years);
  const step = Math.max(1, Math.ceil((yearMax - yearMin) / 8));
  for (let yr = yearMin; yr <= yearMax; yr += step) {
    parts.push(
      `<text class="tick" x="${x(yr).toFixed(2)}" y="${yBase + 16}" text-anchor="middle" font-size="11" fill="#555">${yr}</text>`,
    );
  }
  for (let i = 1; i <= 4; i++) {
    const v = (yMax === 0 ? 1 : yMax * 1.05) * (i / 4);
    parts.push(
      `<line x1="${x0}" y1="${y(v).toFixed(2)}" x2="${x1}" y2="${y(v).toFixed(2)}" stroke="#eee"/>`,
    );
    parts.push(
      `<text class="tick" x="${x0 - 6}" y="${(y(v) + 4).toFixed(2)}" text-anchor="end" font-size="11" fill="#555">${Number(v.toPrecision(3))}</text>`,
    );
  }
  parts.push(`</g>`);

  for (const splitYear of [...new Set(series.map((s) => s.splitYear))]) {
    parts.push(
      `<line class="split-rule" data-year="${splitYear}" x1="${x(splitYear).toFixed(2)}" y1="${MARGIN.top}"` +
        ` x2="${x(splitYear).toFixed(2)}" y2="${yBase}" stroke="#666" stroke-dasharray="5,4"/>`,
    );
  }

  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length]!;
    parts.push(`<g class="series" data-topic="${escapeXml(s.topicId)}">`);
    if (s.observed.length > 0) {
      parts.push(
        `<path class="line-observed" d="${pathFor(s.observed, x, y)}" fill="none" stroke="${color}" stroke-width="1.8"/>`,
      );
    }
    // bridge the last observed point into the forecast so the line reads
    // as one series across the rule
    const tail = s.observed.length > 0 ? [s.observed[s.observed.length - 1]!] : [];
    if (s.forecast.length > 0) {
      parts.push(
        `<path class="line-forecast" d="${pathFor([...tail, ...s.forecast], x, y)}"` +
          ` fill="none" stroke="${color}" stroke-width="1.8" stroke-dasharray="3,3"/>`,
      );
    }
    parts.push(markers(s.observed, "observed", s, color, x, y));
    parts.push(markers(s.forecast, "forecast", s, color, x, y));
    parts.push(`</g>`);
  });

  parts.push(`<g class="legend">`);
  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length]!;
    const lx = x1 - 150;
    const ly = MARGIN.top + 8 + i * 16;
    parts.push(
      `<rect x="${lx}" y="${ly - 8}" width="10" height="10" fill="${color}"/>` +
        `<text x="${lx + 15}" y="${ly + 1}" font-size="11" fill="#333">${escapeXml(s.label)}</text>`,
    );
  });
  parts.push(`</g></svg>`);
  return parts.join("");
}
