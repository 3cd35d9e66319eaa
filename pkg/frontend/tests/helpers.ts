import { readFileSync } from "node:fs";
import { join } from "node:path";

import { ApiClient, FetchLike } from "../src/api.js";

export function fixture<T>(name: string): T {
  const path = join(__dirname, "fixtures", name);
  return JSON.parse(readFileSync(path, "utf-8")) as T;
}

export interface RecordedCall {
  url: string;
  method: string;
  body: unknown;
}

/** fetch stub that records calls and replays canned responses per URL suffix. */
export function mockFetch(
  routes: Record<string, unknown | ((body: unknown) => unknown)>,
  calls: RecordedCall[] = [],
): { fetchFn: FetchLike; calls: RecordedCall[] } {
  const fetchFn: FetchLike = async (url, init) => {
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    calls.push({ url, method: init?.method ?? "GET", body });
    for (const [suffix, response] of Object.entries(routes)) {
      if (url.includes(suffix)) {
        const payload = typeof response === "function" ? response(body) : response;
        if (payload instanceof Error) {
          return new Response(JSON.stringify({ detail: payload.message }), {
            status: 422,
          });
        }
        return new Response(JSON.stringify(payload), { status: 200 });
      }
    }
    return new Response(JSON.stringify({ detail: "not found" }), { status: 404 });
  };
  return { fetchFn, calls };
}

export function clientWith(
  routes: Record<string, unknown | ((body: unknown) => unknown)>,
): { api: ApiClient; calls: RecordedCall[] } {
  const { fetchFn, calls } = mockFetch(routes);
  return { api: new ApiClient("", fetchFn), calls };
}
