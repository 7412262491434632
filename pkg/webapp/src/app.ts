// DOM wiring: a query builder (up to 10 topic chips + horizon selector),
// a browsable topic list, and the shared chart pane. One forecast request
// in flight at a time; a monotone token drops responses that a newer
// query has superseded.

import {
  ApiClient,
  ForecastEntry,
  isFailure,
  MAX_HORIZON,
  MAX_TOPICS,
  TopicForecast,
  TopicInfo,
} from "./api";
import { renderChart, toChartSeries } from "./chart";

export interface AppOptions {
  baseUrl?: string;
  fetchFn?: (input: string, init?: RequestInit) => Promise<Response>;
}

export interface AppHandle {
  /** Resolves once no forecast or topic-list request is in flight. */
  pending(): Promise<void>;
}

const TEMPLATE = `
<div class="layout">
  <aside>
    <form id="query-form">
      <div id="chips" class="chips"></div>
      <div class="row">
        <input id="topic-input" type="text" placeholder="add a topic" autocomplete="off">
        <button id="add-btn" type="button">add</button>
      </div>
      <p id="limit-note" class="note" hidden>Limit of ${MAX_TOPICS} topics per query; remove one to add another.</p>
      <div class="row">
        <label for="horizon">horizon</label>
        <select id="horizon"></select>
        <button id="go-btn" type="submit" disabled>forecast</button>
      </div>
    </form>
    <section id="browse">
      <h2>topics</h2>
      <input id="search" type="text" placeholder="filter" autocomplete="off">
      <ul id="topic-list"></ul>
      <p id="browse-empty" class="note" hidden>Could not load the topic list. <button id="browse-retry" type="button">retry</button></p>
    </section>
  </aside>
  <main>
    <div id="banner" class="banner" hidden>Request failed. <button id="retry-btn" type="button">retry</button></div>
    <div id="badges" class="badges"></div>
    <div id="chart-pane"></div>
  </main>
</div>`;

export function initApp(root: HTMLElement, opts: AppOptions = {}): AppHandle {
  const api = new ApiClient(opts.baseUrl ?? "", opts.fetchFn);
  root.innerHTML = TEMPLATE;

  const el = <T extends HTMLElement>(id: string): T => {
    const node = root.querySelector<T>(`#${id}`);
    if (!node) throw new Error(`missing #${id}`);
    return node;
  };

  const form = el<HTMLFormElement>("query-form");
  const chipsBox = el<HTMLDivElement>("chips");
  const topicInput = el<HTMLInputElement>("topic-input");
  const addBtn = el<HTMLButtonElement>("add-btn");
  const limitNote = el<HTMLParagraphElement>("limit-note");
  const horizonSel = el<HTMLSelectElement>("horizon");
  const goBtn = el<HTMLButtonElement>("go-btn");
  const searchInput = el<HTMLInputElement>("search");
  const topicList = el<HTMLUListElement>("topic-list");
  const browseEmpty = el<HTMLParagraphElement>("browse-empty");
  const banner = el<HTMLDivElement>("banner");
  const badges = el<HTMLDivElement>("badges");
  const chartPane = el<HTMLDivElement>("chart-pane");

  for (let h = 1; h <= MAX_HORIZON; h++) {
    const o = document.createElement("option");
    o.value = String(h);
    o.textContent = `${h} year${h > 1 ? "s" : ""}`;
    if (h === MAX_HORIZON) o.selected = true;
    horizonSel.appendChild(o);
  }

  let topics: string[] = [];
  let allTopics: TopicInfo[] = [];
  let requestToken = 0;
  let inFlight: Promise<void> = Promise.resolve();

  function syncControls(): void {
    chipsBox.innerHTML = "";
    for (const t of topics) {
      const chip = document.createElement("span");
      chip.className = "chip";
      chip.dataset.topic = t;
      chip.textContent = t;
      const x = document.createElement("button");
      x.type = "button";
      x.className = "chip-remove";
      x.textContent = "×";
      x.addEventListener("click", () => {
        topics = topics.filter((u) => u !== t);
        syncControls();
      });
      chip.appendChild(x);
      chipsBox.appendChild(chip);
    }
    const full = topics.length >= MAX_TOPICS;
    topicInput.disabled = full;
    addBtn.disabled = full;
    limitNote.hidden = !full;
    goBtn.disabled = topics.length === 0;
  }

  function addTopic(raw: string): void {
    const name = raw.trim();
    if (!name || topics.length >= MAX_TOPICS || topics.includes(name)) return;
    topics = [...topics, name];
    topicInput.value = "";
    syncControls();
  }

  function showResults(entries: ForecastEntry[]): void {
    banner.hidden = true;
    badges.innerHTML = "";
    for (const entry of entries) {
      if (isFailure(entry)) {
        const b = document.createElement("span");
        b.className = "badge";
        b.dataset.topic = entry.topic;
        b.textContent = `${entry.topic}: ${entry.error.replace(/_/g, " ")}`;
        badges.appendChild(b);
      }
    }
    const ok = entries.filter((e): e is TopicForecast => !isFailure(e));
    chartPane.innerHTML = renderChart(ok.map(toChartSeries));
  }

  function submit(): void {
    if (topics.length === 0) return;
    const token = ++requestToken;
    const query = [...topics];
    const horizon = Number(horizonSel.value);
    inFlight = api
      .forecast(query, horizon)
      .then((entries) => {
        if (token !== requestToken) return; // superseded, drop it
        showResults(entries);
      })
      .catch(() => {
        if (token !== requestToken) return;
        banner.hidden = false;
      });
  }

  function renderTopicList(): void {
    const needle = searchInput.value.trim().toLowerCase();
    topicList.innerHTML = "";
    for (const t of allTopics) {
      if (needle && !t.display_name.toLowerCase().includes(needle)) continue;
      const li = document.createElement("li");
      li.dataset.topicId = t.topic_id;
      li.textContent = t.display_name;
      li.addEventListener("click", () => {
        topics = [t.topic_id];
        syncControls();
        submit();
      });
      topicList.appendChild(li);
    }
  }

  function loadTopics(): void {
    inFlight = api
      .topics()
      .then((list) => {
        allTopics = [...list].sort((a, b) =>
          a.display_name.toLowerCase() < b.display_name.toLowerCase() ? -1 : 1,
        );
        browseEmpty.hidden = true;
        renderTopicList();
      })
      .catch(() => {
        allTopics = [];
        topicList.innerHTML = "";
        browseEmpty.hidden = false;
      });
  }

  addBtn.addEventListener("click", () => addTopic(topicInput.value));
  topicInput.addEventListener("keydown", (ev) => {
    if (ev.key === "Enter") {
      ev.preventDefault();
      addTopic(topicInput.value);
    }
  });
  form.addEventListener("submit", (ev) => {
    ev.preventDefault();
    submit();
  });
  el<HTMLButtonElement>("retry-btn").addEventListener("click", () => submit());
  el<HTMLButtonElement>("browse-retry").addEventListener("click", () => loadTopics());
  searchInput.addEventListener("input", () => renderTopicList());

  syncControls();
  loadTopics();

  return {
    pending: () => inFlight,
  };
}
