/** Solve-service client with per-vehicle latest-wins cancellation. */

import type { PriorsListing, SolveRequest, SolveResponse } from "./types.js";

export class SolveError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class SolveClient {
  private inflight = new Map<string, AbortController>();

  constructor(public baseUrl: string = "http://127.0.0.1:8711") {}

  async health(): Promise<boolean> {
    try {
      const r = await fetch(`${this.baseUrl}/health`);
      return r.ok;
    } catch {
      return false;
    }
  }

  async listPriors(): Promise<PriorsListing> {
    const r = await fetch(`${this.baseUrl}/priors`);
    if (!r.ok) throw new SolveError(r.status, "cannot list priors");
    return (await r.json()) as PriorsListing;
  }

  /**
   * POST /solve for one vehicle.  A newer request for the same vehicle id
   * aborts the one in flight (latest wins); aborted calls return null.
   */
  async solve(req: SolveRequest, vehicleId = "default"): Promise<SolveResponse | null> {
    this.inflight.get(vehicleId)?.abort();
    const controller = new AbortController();
    this.inflight.set(vehicleId, controller);
    let resp: Response;
    try {
      resp = await fetch(`${this.baseUrl}/solve`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(req),
        signal: controller.signal,
      });
    } catch (err) {
      if ((err as Error).name === "AbortError") return null;
      throw err;
    } finally {
      if (this.inflight.get(vehicleId) === controller) this.inflight.delete(vehicleId);
    }
    const payload = (await resp.json()) as SolveResponse;
    if (resp.status === 200) return payload;
    if (resp.status === 422) return payload; // solver diagnostics, still renderable
    throw new SolveError(resp.status, payload.detail ?? `solve failed (${resp.status})`);
  }
}
