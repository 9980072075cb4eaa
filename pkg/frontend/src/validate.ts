/** Client-side decision validation, mirroring the service's rules.
 *
 * An invalid form never produces a request: the triage loop requires an
 * Override without a value to be blocked in the browser as well as by the
 * service's 400.
 */

import type { DecisionAction, DecisionBody } from "./types.js";

export type Validation =
  | { ok: true; body: DecisionBody }
  | { ok: false; message: string };

export function validateDecision(
  action: DecisionAction,
  valueMm: string,
  note: string,
  reviewer: string,
): Validation {
  const body: DecisionBody = { action, note: note.trim(), reviewer: reviewer.trim() };
  if (action === "override") {
    const trimmed = valueMm.trim();
    const value = Number(trimmed);
    if (trimmed === "" || !Number.isFinite(value) || value <= 0) {
      return { ok: false, message: "override needs a measurement in mm (> 0)" };
    }
    body.value_mm = value;
  } else if (valueMm.trim() !== "") {
    return { ok: false, message: `${action} does not take a value` };
  }
  if (action === "reject" && body.note === "") {
    return { ok: false, message: "reject needs a note explaining why" };
  }
  return { ok: true, body };
}
