// Fixtures under tests/fixtures/ are verbatim recordings of a running
// trendcast service (bundled synthetic demo corpus, six-horizon registry),
// captured over plain HTTP. Tests treat them as the ground truth the UI
// must reproduce exactly.

export type RouteHandler = (init?: RequestInit) => Response | Promise<Response>;

export interface FetchCall {
  url: string;
  init?: RequestInit;
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

/** Route-keyed fetch stub, keys like "GET /topics". Records every call. */
export function mockFetch(routes: Record<string, RouteHandler>) {
  const calls: FetchCall[] = [];
  const fn = async (url: string, init?: RequestInit): Promise<Response> => {
    calls.push({ url, init });
    const key = `${init?.method ?? "GET"} ${url}`;
    const handler = routes[key];
    if (!handler) throw new Error(`unmocked route: ${key}`);
    return handler(init);
  };
  return { fn, calls, routes };
}

export function mountRoot(): HTMLElement {
  document.body.innerHTML = '<div id="root"></div>';
  return document.getElementById("root")!;
}

export function submitForm(root: HTMLElement): void {
  root
    .querySelector<HTMLFormElement>("#query-form")!
    .dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

export function addTopicViaInput(root: HTMLElement, name: string): void {
  const input = root.querySelector<HTMLInputElement>("#topic-input")!;
  input.value = name;
  root.querySelector<HTMLButtonElement>("#add-btn")!.click();
}

/** Parse an SVG string the way the app injects it. */
export function parseSvg(svg: string): HTMLElement {
  const host = document.createElement("div");
  host.innerHTML = svg;
  return host;
}

export async function flushMicrotasks(): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, 0));
}
