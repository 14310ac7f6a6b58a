/** Typed client for the fontstyler serve API. The UI performs no model
 * computation; every output comes from these endpoints. */

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export interface GenerateRequest {
  /** base64 PNG of the content glyph */
  content: string;
  /** style id from /styles, or a base64 PNG style reference */
  style: string;
  useRag?: boolean;
}

export interface GenerateResult {
  imageBase64: string;
  referenceCharcode?: string;
}

export interface RetrievedReference {
  charcode: number;
  label: string;
  distance: number;
}

type FetchLike = typeof fetch;

async function readDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") return body.detail;
    return JSON.stringify(body);
  } catch {
    return res.statusText || `HTTP ${res.status}`;
  }
}

export class StudioClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = globalThis.fetch
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!res.ok) {
      throw new ApiError(res.status, await readDetail(res));
    }
    return res;
  }

  async health(): Promise<boolean> {
    try {
      const res = await this.fetchImpl(`${this.baseUrl}/health`);
      return res.ok;
    } catch {
      return false;
    }
  }

  async styles(): Promise<string[]> {
    const res = await this.request("/styles");
    return (await res.json()) as string[];
  }

  async generate(req: GenerateRequest, signal?: AbortSignal): Promise<GenerateResult> {
    const res = await this.request("/generate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({
        content: req.content,
        style: req.style,
        use_rag: req.useRag ?? false,
      }),
      signal,
    });
    const body = await res.json();
    return {
      imageBase64: body.image,
      referenceCharcode: body.reference_charcode,
    };
  }

  async retrieve(content: string, styleId: string, k: number): Promise<RetrievedReference[]> {
    const res = await this.request("/retrieve", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ content, style_id: styleId, k }),
    });
    const body = await res.json();
    return body.results as RetrievedReference[];
  }
}
