/** Typed client over the ingest-service HTTP API (the dashboard's only
 * access path to traces; it never touches the repository directly). */

import type {
  ParticipationDoc,
  ReadingDoc,
  SphereTimelineDoc,
  TraceDoc,
} from "../shared/wire";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    detail: string,
  ) {
    super(detail);
  }
}

export interface WhoAmI {
  role: "instructor" | "student";
  actor_id: string | null;
}

export interface ModelDoc {
  version: number;
  model: {
    activities: Array<{
      name: string;
      observables: Array<{ object_id: string; object_class: string; events: string[] }>;
    }>;
    rules: Array<{ from: string; object_id: string; kind: string; to: string }>;
    initial: string[];
  };
}

export interface SphereQueryParams {
  message_id?: string;
  from_ms: number;
  to_ms: number;
  scale_k?: number;
  scale_t?: number;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private token: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(
    method: string,
    path: string,
    params?: Record<string, string | number | undefined>,
    body?: unknown,
  ): Promise<T> {
    let url = `${this.baseUrl}${path}`;
    if (params) {
      const query = new URLSearchParams();
      for (const [key, value] of Object.entries(params)) {
        if (value !== undefined) query.set(key, String(value));
      }
      const rendered = query.toString();
      if (rendered) url += `?${rendered}`;
    }
    let response: Response;
    try {
      response = await this.fetchFn(url, {
        method,
        headers: {
          Authorization: `Bearer ${this.token}`,
          ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
        },
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (error) {
      throw new ApiError(0, `network error: ${String(error)}`);
    }
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const doc = (await response.json()) as { detail?: string };
        if (doc.detail) detail = doc.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  whoami(): Promise<WhoAmI> {
    return this.request<WhoAmI>("GET", "/api/v1/auth/whoami");
  }

  sphereTimeline(params: SphereQueryParams): Promise<SphereTimelineDoc> {
    return this.request<SphereTimelineDoc>("GET", "/api/v1/viz/spheres", { ...params });
  }

  readings(params: SphereQueryParams): Promise<ReadingDoc[]> {
    return this.request<ReadingDoc[]>("GET", "/api/v1/analysis/readings", {
      message_id: params.message_id,
      from_ms: params.from_ms,
      to_ms: params.to_ms,
    });
  }

  lurkers(from_ms: number, to_ms: number): Promise<string[]> {
    return this.request<string[]>("GET", "/api/v1/analysis/lurkers", { from_ms, to_ms });
  }

  participation(from_ms: number, to_ms: number): Promise<ParticipationDoc[]> {
    return this.request<ParticipationDoc[]>("GET", "/api/v1/analysis/participation", {
      from_ms,
      to_ms,
    });
  }

  traces(params: {
    actor?: string;
    activity?: string;
    message_id?: string;
    from_ms?: number;
    to_ms?: number;
  }): Promise<TraceDoc[]> {
    return this.request<TraceDoc[]>("GET", "/api/v1/traces", { ...params });
  }

  model(): Promise<ModelDoc> {
    return this.request<ModelDoc>("GET", "/api/v1/admin/activities");
  }

  addActivity(doc: {
    name: string;
    observables: Array<{ object_id: string; object_class: string; events: string[] }>;
  }): Promise<{ version: number }> {
    return this.request<{ version: number }>("POST", "/api/v1/admin/activities", undefined, doc);
  }

  removeActivity(name: string): Promise<{ version: number }> {
    return this.request<{ version: number }>(
      "DELETE",
      `/api/v1/admin/activities/${encodeURIComponent(name)}`,
    );
  }
}
