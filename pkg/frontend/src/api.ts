/**
 * Thin client for the reshaping service. The UI never touches flow data —
 * every rendered pixel comes back from the service, so the server stays the
 * single source of truth.
 */

export interface FlowStats {
  width: number;
  height: number;
  mean_px: number;
  max_px: number;
}

export interface SessionInfo {
  session_id: string;
  flow_stats: FlowStats;
}

/** What the controller needs from the service; swapped out in tests. */
export interface ReshapeApi {
  createSession(image: File, keypoints: File): Promise<SessionInfo>;
  reshape(sessionId: string, mu: number): Promise<Blob>;
  flowPng(sessionId: string): Promise<Blob>;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = "ApiError";
  }
}

async function failWith(res: Response): Promise<never> {
  let detail = `${res.status} ${res.statusText}`;
  try {
    const body = await res.json();
    // FastAPI error bodies carry the reason under "detail"
    if (typeof body?.detail === "string") detail = body.detail;
  } catch {
    /* non-JSON error body; keep the status line */
  }
  throw new ApiError(res.status, detail);
}

export function httpApi(base = ""): ReshapeApi {
  return {
    async createSession(image: File, keypoints: File): Promise<SessionInfo> {
      const form = new FormData();
      form.append("image", image);
      form.append("keypoints", keypoints);
      const res = await fetch(`${base}/sessions`, { method: "POST", body: form });
      if (!res.ok) return failWith(res);
      return res.json();
    },

    async reshape(sessionId: string, mu: number): Promise<Blob> {
      const res = await fetch(`${base}/sessions/${sessionId}/reshape`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ mu }),
      });
      if (!res.ok) return failWith(res);
      return res.blob();
    },

    async flowPng(sessionId: string): Promise<Blob> {
      const res = await fetch(`${base}/sessions/${sessionId}/flow?format=png`);
      if (!res.ok) return failWith(res);
      return res.blob();
    },
  };
}
