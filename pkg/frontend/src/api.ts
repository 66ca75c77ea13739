// Typed client for the review service. All edit semantics live server-side;
// this layer only moves JSON and turns error envelopes into ApiError.

import type {
  AnnotationsResponse,
  ApproveResponse,
  Edit,
  EpisodeSummary,
  SignalsResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  private fetchImpl: FetchLike;

  constructor(
    private base: string = "",
    fetchImpl?: FetchLike,
  ) {
    // keep fetch unbound from `this` (browsers require the global receiver)
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(this.base + path, init);
    if (!response.ok) {
      let code = "http-error";
      let message = `${response.status} on ${path}`;
      try {
        const body = await response.json();
        if (body && typeof body.detail === "object" && body.detail !== null) {
          code = body.detail.code ?? code;
          message = body.detail.message ?? message;
        } else if (body && typeof body.detail === "string") {
          message = body.detail;
        }
      } catch {
        // non-JSON error body; keep defaults
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  listEpisodes(): Promise<EpisodeSummary[]> {
    return this.request("/episodes");
  }

  getSignals(
    id: string,
    channels: string[],
    decimate: number = 1,
  ): Promise<SignalsResponse> {
    const params = new URLSearchParams({
      channels: channels.join(","),
      decimate: String(decimate),
    });
    return this.request(`/episodes/${id}/signals?${params}`);
  }

  getAnnotations(id: string): Promise<AnnotationsResponse> {
    return this.request(`/episodes/${id}/annotations`);
  }

  putEdits(id: string, edits: Edit[]): Promise<AnnotationsResponse> {
    return this.request(`/episodes/${id}/annotations`, {
      method: "PUT",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ edits }),
    });
  }

  approve(id: string): Promise<ApproveResponse> {
    return this.request(`/episodes/${id}/approve`, { method: "POST" });
  }
}
