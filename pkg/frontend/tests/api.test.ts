import { describe, expect, it } from "vitest";

import { ApiError, StudioClient } from "../src/api.js";

function fakeFetch(handler: (url: string, init?: RequestInit) => Response) {
  const calls: Array<{ url: string; init?: RequestInit }> = [];
  const impl = (async (url: any, init?: any) => {
    calls.push({ url: String(url), init });
    return handler(String(url), init);
  }) as typeof fetch;
  return { impl, calls };
}

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("StudioClient", () => {
  it("lists styles", async () => {
    const { impl, calls } = fakeFetch(() => jsonResponse(["mono", "serif"]));
    const client = new StudioClient("http://x", impl);
    expect(await client.styles()).toEqual(["mono", "serif"]);
    expect(calls[0].url).toBe("http://x/styles");
  });

  it("maps generate responses", async () => {
    const { impl, calls } = fakeFetch(() =>
      jsonResponse({ image: "QUJD", reference_charcode: "U+0041" })
    );
    const client = new StudioClient("http://x", impl);
    const result = await client.generate({ content: "cc", style: "mono", useRag: true });
    expect(result).toEqual({ imageBase64: "QUJD", referenceCharcode: "U+0041" });
    const sent = JSON.parse(String(calls[0].init?.body));
    expect(sent).toEqual({ content: "cc", style: "mono", use_rag: true });
  });

  it("omits provenance when the server sends none", async () => {
    const { impl } = fakeFetch(() => jsonResponse({ image: "QUJD" }));
    const client = new StudioClient("http://x", impl);
    const result = await client.generate({ content: "cc", style: "base64png" });
    expect(result.referenceCharcode).toBeUndefined();
  });

  it("surfaces unknown-style 404s as ApiError with detail", async () => {
    const { impl } = fakeFetch(() => jsonResponse({ detail: "unknown style 'nope'" }, 404));
    const client = new StudioClient("http://x", impl);
    const err = await client
      .generate({ content: "cc", style: "nope" })
      .catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(404);
    expect((err as ApiError).message).toContain("unknown style");
  });

  it("retrieves ranked references", async () => {
    const { impl, calls } = fakeFetch(() =>
      jsonResponse({ results: [{ charcode: 65, label: "U+0041", distance: 0.1 }] })
    );
    const client = new StudioClient("http://x", impl);
    const rows = await client.retrieve("cc", "mono", 3);
    expect(rows[0].label).toBe("U+0041");
    expect(JSON.parse(String(calls[0].init?.body))).toEqual({
      content: "cc",
      style_id: "mono",
      k: 3,
    });
  });

  it("health is false when the server is unreachable", async () => {
    const impl = (async () => {
      throw new Error("ECONNREFUSED");
    }) as unknown as typeof fetch;
    const client = new StudioClient("http://x", impl);
    expect(await client.health()).toBe(false);
  });
});
