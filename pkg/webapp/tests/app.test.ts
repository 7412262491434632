import { describe, expect, it } from "vitest";

import { TopicInfo } from "../src/api";
import { initApp } from "../src/app";
import {
  addTopicViaInput,
  flushMicrotasks,
  jsonResponse,
  mockFetch,
  mountRoot,
  submitForm,
} from "./helpers";
import forecastMixed from "./fixtures/forecast_mixed.json";
import forecastTen from "./fixtures/forecast_ten.json";
import topicsFixture from "./fixtures/topics.json";

const topicInfos = topicsFixture as TopicInfo[];

function oneTopicBody(i: number) {
  return { results: [forecastTen.results[i]!] };
}

describe("topic browser", () => {
  it("lists topics alphabetically even when the API is unsorted", async () => {
    const reversed = [...topicInfos].reverse();
    const { fn } = mockFetch({ "GET /topics": () => jsonResponse(reversed) });
    const root = mountRoot();
    const app = initApp(root, { fetchFn: fn });
    await app.pending();
    const names = [...root.querySelectorAll("#topic-list li")].map((li) => li.textContent);
    expect(names).toEqual(topicInfos.map((t) => t.display_name));
  });

  it("filters case-insensitively as the search box changes", async () => {
    const { fn } = mockFetch({ "GET /topics": () => jsonResponse(topicInfos) });
    const root = mountRoot();
    const app = initApp(root, { fetchFn: fn });
    await app.pending();
    const search = root.querySelector<HTMLInputElement>("#search")!;
    search.value = "TOPIC1";
    search.dispatchEvent(new Event("input", { bubbles: true }));
    const names = [...root.querySelectorAll("#topic-list li")].map((li) => li.textContent);
    expect(names).toEqual(["topic10", "topic11"]);
    search.value = "";
    search.dispatchEvent(new Event("input", { bubbles: true }));
    expect(root.querySelectorAll("#topic-list li").length).toBe(topicInfos.length);
  });

  it("clicking a topic queries just that topic and renders its chart", async () => {
    const { fn, calls } = mockFetch({
      "GET /topics": () => jsonResponse(topicInfos),
      "POST /forecast": () => jsonResponse(oneTopicBody(3)),
    });
    const root = mountRoot();
    const app = initApp(root, { fetchFn: fn });
    await app.pending();
    root.querySelector<HTMLLIElement>('#topic-list li[data-topic-id="topic03"]')!.click();
    await app.pending();
    const body = JSON.parse(String(calls[calls.length - 1]!.init?.body));
    expect(body.topics).toEqual(["topic03"]);
    expect(root.querySelectorAll("g.series").length).toBe(1);
    expect(root.querySelector(".chip")!.textContent).toContain("topic03");
  });

  it("shows an empty-state with retry when the topic list fails, then recovers", async () => {
    let fail = true;
    const { fn } = mockFetch({
      "GET /topics": () => {
        if (fail) throw new Error("down");
        return jsonResponse(topicInfos);
      },
    });
    const root = mountRoot();
    const app = initApp(root, { fetchFn: fn });
    await app.pending();
    expect(root.querySelector<HTMLElement>("#browse-empty")!.hidden).toBe(false);
    expect(root.querySelectorAll("#topic-list li").length).toBe(0);
    fail = false;
    root.querySelector<HTMLButtonElement>("#browse-retry")!.click();
    await app.pending();
    expect(root.querySelector<HTMLElement>("#browse-empty")!.hidden).toBe(true);
    expect(root.querySelectorAll("#topic-list li").length).toBe(topicInfos.length);
  });
});

describe("query builder", () => {
  async function mounted(routes: Parameters<typeof mockFetch>[0]) {
    const { fn, calls } = mockFetch({
      "GET /topics": () => jsonResponse(topicInfos),
      ...routes,
    });
    const root = mountRoot();
    const app = initApp(root, { fetchFn: fn });
    await app.pending();
    return { root, app, calls };
  }

  it("keeps the forecast button disabled until a topic is added", async () => {
    const { root } = await mounted({});
    const go = root.querySelector<HTMLButtonElement>("#go-btn")!;
    expect(go.disabled).toBe(true);
    addTopicViaInput(root, "topic00");
    expect(go.disabled).toBe(false);
  });

  it("deduplicates and trims typed topics", async () => {
    const { root } = await mounted({});
    addTopicViaInput(root, "  topic00  ");
    addTopicViaInput(root, "topic00");
    addTopicViaInput(root, "   ");
    expect(root.querySelectorAll(".chip").length).toBe(1);
  });

  it("removing a chip re-enables a full input", async () => {
    const { root } = await mounted({});
    for (let i = 0; i < 10; i++) addTopicViaInput(root, `t${i}`);
    const input = root.querySelector<HTMLInputElement>("#topic-input")!;
    expect(input.disabled).toBe(true);
    root.querySelector<HTMLButtonElement>(".chip-remove")!.click();
    expect(input.disabled).toBe(false);
    expect(root.querySelector<HTMLElement>("#limit-note")!.hidden).toBe(true);
  });

  it("defaults the horizon selector to 6 and sends the chosen horizon", async () => {
    const { root, app, calls } = await mounted({
      "POST /forecast": () => jsonResponse(oneTopicBody(0)),
    });
    const sel = root.querySelector<HTMLSelectElement>("#horizon")!;
    expect(sel.value).toBe("6");
    expect([...sel.options].map((o) => o.value)).toEqual(["1", "2", "3", "4", "5", "6"]);
    sel.value = "2";
    addTopicViaInput(root, "topic00");
    submitForm(root);
    await app.pending();
    const body = JSON.parse(String(calls[calls.length - 1]!.init?.body));
    expect(body).toEqual({ topics: ["topic00"], max_horizon: 2 });
  });

  it("renders inline badges for failed topics alongside the successful ones", async () => {
    const { root, app } = await mounted({
      "POST /forecast": () => jsonResponse(forecastMixed),
    });
    addTopicViaInput(root, "topic03");
    addTopicViaInput(root, "no such topic");
    submitForm(root);
    await app.pending();
    expect(root.querySelectorAll("g.series").length).toBe(1);
    const badge = root.querySelector(".badge")!;
    expect(badge.textContent).toContain("no such topic");
    expect(badge.textContent).toContain("unknown topic");
  });

  it("shows a retry banner on network failure and resubmits from it", async () => {
    let fail = true;
    const { root, app, calls } = await mounted({
      "POST /forecast": () => {
        if (fail) throw new Error("offline");
        return jsonResponse(oneTopicBody(0));
      },
    });
    addTopicViaInput(root, "topic00");
    submitForm(root);
    await app.pending();
    const banner = root.querySelector<HTMLElement>("#banner")!;
    expect(banner.hidden).toBe(false);
    fail = false;
    root.querySelector<HTMLButtonElement>("#retry-btn")!.click();
    await app.pending();
    expect(banner.hidden).toBe(true);
    expect(root.querySelectorAll("g.series").length).toBe(1);
    const posts = calls.filter((c) => c.init?.method === "POST");
    expect(posts.length).toBe(2);
    expect(posts[0]!.init?.body).toBe(posts[1]!.init?.body);
  });

  it("drops a stale response when a newer query has been submitted", async () => {
    let release: (r: Response) => void = () => {};
    const slow = new Promise<Response>((resolve) => {
      release = resolve;
    });
    let post = 0;
    const { root, app } = await mounted({
      "POST /forecast": () => {
        post += 1;
        return post === 1 ? slow : jsonResponse(oneTopicBody(3));
      },
    });

    addTopicViaInput(root, "topic00");
    submitForm(root); // stays in flight
    root.querySelector<HTMLButtonElement>(".chip-remove")!.click();
    addTopicViaInput(root, "topic03");
    submitForm(root);
    await app.pending();
    expect(
      root.querySelector('g.series[data-topic="topic03"]'),
    ).not.toBeNull();

    release(jsonResponse(oneTopicBody(0))); // the superseded answer lands late
    await flushMicrotasks();
    expect(root.querySelector('g.series[data-topic="topic00"]')).toBeNull();
    expect(root.querySelector('g.series[data-topic="topic03"]')).not.toBeNull();
  });
});
