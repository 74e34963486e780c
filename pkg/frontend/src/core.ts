/** Pure view-model layer: snapshot merging, optimistic action state, the
 * stale/backoff machine, and recurring-rule arithmetic. No DOM, no fetch,
 * so every rule here is unit-testable with plain data.
 */

import type { Rule, TrafficDevice, TrafficSnapshot } from "./api.js";

/** Chart window: only this many trailing seconds of the series are drawn. */
export const SERIES_WINDOW_S = 600;

export const POLL_INTERVAL_MS = 1000;
export const MAX_BACKOFF_MS = 8000;

export interface DeviceViewModel {
  id: string;
  name: string;
  vendor: string;
  mac: string;
  ip: string;
  /** blocked flag as displayed; optimistic while an action is in flight */
  blocked: boolean;
  /** blocked flag as last reported by the API */
  apiBlocked: boolean;
  /** optimistic value held until a snapshot confirms it, null when settled */
  holdBlocked: boolean | null;
  pendingAction: "block" | "unblock" | "schedule" | null;
  trackerCount: number;
  trackerHosts: string[];
  /** trailing window of the API series, values untouched */
  series: [number, number, number][];
  /** sums over the FULL API series, not the trimmed window */
  totalOut: number;
  totalIn: number;
  /** inline error from the last failed action, cleared on the next one */
  error: string | null;
}

export interface DashboardState {
  devices: DeviceViewModel[];
  generatedAt: number | null;
  stale: boolean;
  consecutiveFailures: number;
}

export function initialState(): DashboardState {
  return { devices: [], generatedAt: null, stale: false, consecutiveFailures: 0 };
}

function toViewModel(d: TrafficDevice, generatedAt: number, prev?: DeviceViewModel): DeviceViewModel {
  const cutoff = generatedAt - SERIES_WINDOW_S;
  let holdBlocked = prev?.holdBlocked ?? null;
  if (holdBlocked !== null && holdBlocked === d.blocked) {
    holdBlocked = null; // the API caught up with the optimistic flip
  }
  return {
    id: d.device_id,
    name: d.name,
    vendor: d.vendor,
    mac: d.mac,
    ip: d.ip,
    blocked: holdBlocked !== null ? holdBlocked : d.blocked,
    apiBlocked: d.blocked,
    holdBlocked,
    pendingAction: prev?.pendingAction ?? null,
    trackerCount: d.tracker_count,
    trackerHosts: d.tracker_hosts,
    series: d.series.filter((row) => row[0] >= cutoff),
    totalOut: d.series.reduce((acc, row) => acc + row[1], 0),
    totalIn: d.series.reduce((acc, row) => acc + row[2], 0),
    error: prev?.error ?? null,
  };
}

/** Merge a fresh /get_traffic answer, preserving per-device action state. */
export function applySnapshot(state: DashboardState, snap: TrafficSnapshot): DashboardState {
  const prevById = new Map(state.devices.map((d) => [d.id, d]));
  const devices = snap.devices
    .map((d) => toViewModel(d, snap.generated_at, prevById.get(d.device_id)))
    .sort((a, b) => a.name.localeCompare(b.name) || a.id.localeCompare(b.id));
  return { devices, generatedAt: snap.generated_at, stale: false, consecutiveFailures: 0 };
}

/** A poll failed: raise the banner and lengthen the retry delay. */
export function applyPollFailure(state: DashboardState): DashboardState {
  return { ...state, stale: true, consecutiveFailures: state.consecutiveFailures + 1 };
}

/** Delay before the next poll attempt: 1 s normally, doubling per failure. */
export function backoffDelayMs(consecutiveFailures: number): number {
  if (consecutiveFailures === 0) return POLL_INTERVAL_MS;
  return Math.min(POLL_INTERVAL_MS * 2 ** consecutiveFailures, MAX_BACKOFF_MS);
}

export function nextPollDelayMs(state: DashboardState): number {
  return backoffDelayMs(state.consecutiveFailures);
}

function withDevice(
  state: DashboardState,
  deviceId: string,
  update: (d: DeviceViewModel) => DeviceViewModel,
): DashboardState {
  return {
    ...state,
    devices: state.devices.map((d) => (d.id === deviceId ? update(d) : d)),
  };
}

/** An action just started: flip the badge optimistically and remember why. */
export function beginAction(
  state: DashboardState,
  deviceId: string,
  action: "block" | "unblock" | "schedule",
): DashboardState {
  return withDevice(state, deviceId, (d) => ({
    ...d,
    pendingAction: action,
    error: null,
    // scheduling a future window changes nothing right now
    blocked: action === "schedule" ? d.blocked : action === "block",
    holdBlocked: action === "schedule" ? d.holdBlocked : action === "block",
  }));
}

/** The API accepted the action; keep the optimistic value until a poll agrees. */
export function actionSucceeded(state: DashboardState, deviceId: string): DashboardState {
  return withDevice(state, deviceId, (d) => ({ ...d, pendingAction: null }));
}

/** The API refused: revert the badge and surface the error inline. */
export function actionFailed(state: DashboardState, deviceId: string, message: string): DashboardState {
  return withDevice(state, deviceId, (d) => ({
    ...d,
    pendingAction: null,
    blocked: d.apiBlocked,
    holdBlocked: null,
    error: message,
  }));
}

/** Next UTC epoch second at which a daily HH:MM boundary occurs, strictly after now. */
export function nextDailyOccurrence(hhmm: string, nowEpochS: number): number {
  const [hh = 0, mm = 0] = hhmm.split(":").map(Number);
  const dayStart = Math.floor(nowEpochS / 86400) * 86400;
  const today = dayStart + hh * 3600 + mm * 60;
  return today > nowEpochS ? today : today + 86400;
}

/** When a rule next starts blocking; null when that never happens again. */
export function nextActivation(rule: Rule, nowEpochS: number): number | null {
  if (rule.kind === "recurring") return nextDailyOccurrence(rule.start_hhmm, nowEpochS);
  if (rule.active) return null; // already on
  if (rule.block_at > nowEpochS) return rule.block_at;
  return null; // window already over
}

export function formatBytes(n: number): string {
  if (n < 1024) return `${n} B`;
  if (n < 1024 * 1024) return `${(n / 1024).toFixed(1)} KiB`;
  return `${(n / (1024 * 1024)).toFixed(1)} MiB`;
}

export function formatEpoch(epochS: number): string {
  return new Date(epochS * 1000).toISOString().replace("T", " ").slice(0, 19) + " UTC";
}
