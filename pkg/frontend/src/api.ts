/** Thin typed client over the review service HTTP API.
 *
 * Every number shown in the UI comes through here; the client does no
 * uncertainty math of its own.  Non-2xx responses raise ApiError carrying
 * the service's `detail` string verbatim so forms can surface it.
 */

import type {
  CaseDetail,
  CaseSummary,
  DecisionBody,
  DecisionResponse,
  LayerPayload,
} from "./types.js";

export class ApiError extends Error {
  status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.status = status;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  if (!response.ok) {
    let detail = `${response.status} ${response.statusText}`;
    try {
      const body = await response.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // non-JSON error body, keep the status line
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export function listPendingCases(): Promise<CaseSummary[]> {
  return request("/api/cases?sort=uncertainty&order=desc&status=pending");
}

export function getCase(caseId: string): Promise<CaseDetail> {
  return request(`/api/cases/${encodeURIComponent(caseId)}`);
}

export function getLayer(caseId: string, name: string): Promise<LayerPayload> {
  return request(
    `/api/cases/${encodeURIComponent(caseId)}/layers/${encodeURIComponent(name)}`,
  );
}

export function postDecision(
  caseId: string,
  body: DecisionBody,
): Promise<DecisionResponse> {
  return request(`/api/cases/${encodeURIComponent(caseId)}/decision`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(body),
  });
}
