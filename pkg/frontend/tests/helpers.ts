/** A scripted stand-in for the review service, driving global fetch. */

import { vi } from "vitest";
import type { CaseSummary } from "../src/types.js";

export function summary(overrides: Partial<CaseSummary> & { case_id: string }): CaseSummary {
  return {
    modality: "head",
    method: "tta",
    measurement_mm: 26.7,
    uncertainty_score: 0.5,
    ood_flag: false,
    error: null,
    decision_status: "pending",
    ...overrides,
  };
}

export function detailFor(s: CaseSummary) {
  return {
    case_id: s.case_id,
    modality: s.modality,
    method: s.method ?? "tta",
    pixel_size_mm: 0.1,
    measurement: s.measurement_mm == null ? null : {
      kind: "head_circumference",
      value_mm: s.measurement_mm,
      value_px: s.measurement_mm * 10,
      fit: { kind: "ellipse", center: [8, 8] as [number, number], orientation_deg: 0 },
    },
    gt_measurement_mm: s.case_id.endsWith("nogt") ? null : 27.1,
    abs_error_mm: s.case_id.endsWith("nogt") ? null : 0.4,
    rel_error_pct: s.case_id.endsWith("nogt") ? null : 1.5,
    iou: 0.98,
    uncertainty_score: s.uncertainty_score,
    ood_flag: s.ood_flag,
    error: s.error,
    uncertainty_paths: {
      data: "unc_data.uqp", model: "unc_model.uqp", total: "unc_total.uqp",
      ekl: "unc_ekl.uqp", variance: "unc_variance.uqp",
    },
    decision: { action: "pending" },
    decision_status: s.decision_status,
  };
}

const TINY_LAYER = { width: 2, height: 2, values: [0, 0.25, 0.5, 1] };

export interface FakeService {
  fetchMock: ReturnType<typeof vi.fn>;
  cases: CaseSummary[];
  decisions: Array<{ caseId: string; body: Record<string, unknown> }>;
  /** calls made per url substring, for refetch assertions */
  calls(substring: string): number;
}

function json(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export function installFakeService(cases: CaseSummary[]): FakeService {
  const decisions: FakeService["decisions"] = [];
  const log: string[] = [];

  const fetchMock = vi.fn(async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = String(input);
    log.push(url);
    const layerMatch = url.match(/\/api\/cases\/([^/]+)\/layers\/([^/?]+)/);
    const decisionMatch = url.match(/\/api\/cases\/([^/]+)\/decision/);
    const caseMatch = url.match(/\/api\/cases\/([^/?]+)$/);

    if (url.includes("/api/cases?")) {
      const pending = cases.filter((c) => c.decision_status === "pending");
      return json(pending);
    }
    if (layerMatch) {
      const known = cases.some((c) => c.case_id === decodeURIComponent(layerMatch[1]!));
      return known ? json(TINY_LAYER) : json({ detail: "unknown case" }, 404);
    }
    if (decisionMatch && init?.method === "POST") {
      const caseId = decodeURIComponent(decisionMatch[1]!);
      const found = cases.find((c) => c.case_id === caseId);
      if (!found) return json({ detail: `unknown case '${caseId}'` }, 404);
      const body = JSON.parse(String(init.body));
      if (body.action === "override" && !(typeof body.value_mm === "number" && body.value_mm > 0)) {
        return json({ detail: "override requires value_mm > 0" }, 400);
      }
      decisions.push({ caseId, body });
      found.decision_status = body.action === "accept" ? "accepted"
        : body.action === "override" ? "overridden" : "rejected";
      return json({
        case_id: caseId,
        decision_status: found.decision_status,
        decision: { action: found.decision_status, ...body },
      });
    }
    if (caseMatch) {
      const found = cases.find((c) => c.case_id === decodeURIComponent(caseMatch[1]!));
      if (!found) return json({ detail: `unknown case` }, 404);
      return json(detailFor(found));
    }
    return json({ detail: `no route for ${url}` }, 404);
  });

  vi.stubGlobal("fetch", fetchMock);
  return {
    fetchMock,
    cases,
    decisions,
    calls: (substring) => log.filter((u) => u.includes(substring)).length,
  };
}
