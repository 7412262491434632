// Typed client for the trendcast service. The UI never computes numbers:
// everything plotted comes straight out of these response fields.

export interface TopicInfo {
  topic_id: string;
  display_name: string;
  domain_tag: string | null;
  first_occurrence_year: number | null;
  first_valid_year: number | null;
  training_start_year: number | null;
}

export interface HistoryPoint {
  year: number;
  popularity: number;
  review_popularity: number;
  research_popularity: number;
  patent_count: number;
}

export interface ForecastPoint {
  horizon: number;
  year: number;
  popularity: number;
  raw: number;
  pct_change: number;
  direction: "up" | "down";
}

export interface TopicForecast {
  topic: string;
  display_name: string;
  base_year: number;
  history: HistoryPoint[];
  forecast: ForecastPoint[];
}

export interface TopicFailure {
  topic: string;
  error: string;
}

export type ForecastEntry = TopicForecast | TopicFailure;

export function isFailure(entry: ForecastEntry): entry is TopicFailure {
  return "error" in entry;
}

export const MAX_TOPICS = 10;
export const MAX_HORIZON = 6;

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn: FetchLike = (...a) => fetch(...a)) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn;
  }

  async topics(): Promise<TopicInfo[]> {
    const res = await this.fetchFn(`${this.baseUrl}/topics`);
    if (!res.ok) throw new Error(`GET /topics failed: HTTP ${res.status}`);
    return (await res.json()) as TopicInfo[];
  }

  async forecast(topics: string[], maxHorizon: number): Promise<ForecastEntry[]> {
    const res = await this.fetchFn(`${this.baseUrl}/forecast`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ topics, max_horizon: maxHorizon }),
    });
    if (!res.ok) throw new Error(`POST /forecast failed: HTTP ${res.status}`);
    const body = (await res.json()) as { results: ForecastEntry[] };
    return body.results;
  }
}
