/** Typed client for the leakscope REST API.
 *
 * Every request the dashboard ever makes is built here, and only from the
 * endpoint table below. Nothing else in the app touches fetch, which is
 * what the contract tests pin down.
 */

export interface SeriesRow extends Array<number> {
  0: number; // epoch second
  1: number; // bytes out
  2: number; // bytes in
}

export interface TrafficDevice {
  device_id: string;
  name: string;
  vendor: string;
  mac: string;
  ip: string;
  blocked: boolean;
  tracker_count: number;
  tracker_hosts: string[];
  series: [number, number, number][];
}

export interface TrafficSnapshot {
  generated_at: number;
  devices: TrafficDevice[];
}

export interface RuleCreated {
  rule_id: string;
}

export interface RuleCancelled {
  rule_id: string;
  cancelled: boolean;
}

export interface WindowRule {
  rule_id: string;
  device_id: string;
  kind: "window";
  block_at: number;
  unblock_at: number;
  active: boolean;
}

export interface RecurringRule {
  rule_id: string;
  device_id: string;
  kind: "recurring";
  start_hhmm: string;
  end_hhmm: string;
  active: boolean;
}

export type Rule = WindowRule | RecurringRule;

export interface DeviceInfo {
  device_id: string;
  name: string;
  device_class: string;
  categories: string[];
  blurbs: Record<string, string>;
}

export interface ApiError {
  code: string;
  message: string;
}

/** Thrown for non-2xx responses; carries the server's error body when parseable. */
export class RequestFailed extends Error {
  constructor(
    readonly status: number,
    readonly body: ApiError | null,
  ) {
    super(body ? `${body.code}: ${body.message}` : `HTTP ${status}`);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** The documented surface, one row per endpoint the dashboard may call. */
export const ENDPOINTS: ReadonlyArray<{ method: string; path: RegExp }> = [
  { method: "GET", path: /^\/get_traffic$/ },
  { method: "GET", path: /^\/block\/[0-9a-f]{12}\/\d+\/\d+$/ },
  { method: "GET", path: /^\/rules$/ },
  { method: "POST", path: /^\/rules$/ },
  { method: "DELETE", path: /^\/rules\/rule-\d+$/ },
  { method: "GET", path: /^\/device_info\/[0-9a-f]{12}$/ },
];

function assertDocumented(method: string, path: string): void {
  if (!ENDPOINTS.some((e) => e.method === method && e.path.test(path))) {
    throw new Error(`undocumented API call: ${method} ${path}`);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    assertDocumented(method, path);
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.body = JSON.stringify(body);
      init.headers = { "content-type": "application/json" };
    }
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let parsed: ApiError | null = null;
      try {
        parsed = (await resp.json()) as ApiError;
      } catch {
        parsed = null;
      }
      throw new RequestFailed(resp.status, parsed);
    }
    return (await resp.json()) as T;
  }

  getTraffic(): Promise<TrafficSnapshot> {
    return this.request("GET", "/get_traffic");
  }

  /** Indefinite block starting now: both bounds zero. */
  blockNow(deviceId: string): Promise<RuleCreated> {
    return this.request("GET", `/block/${deviceId}/0/0`);
  }

  blockWindow(deviceId: string, blockAt: number, unblockAt: number): Promise<RuleCreated> {
    return this.request("GET", `/block/${deviceId}/${blockAt}/${unblockAt}`);
  }

  listRules(): Promise<{ rules: Rule[] }> {
    return this.request("GET", "/rules");
  }

  scheduleDaily(deviceId: string, startHhmm: string, endHhmm: string): Promise<RuleCreated> {
    return this.request("POST", "/rules", {
      device_id: deviceId,
      start_hhmm: startHhmm,
      end_hhmm: endHhmm,
    });
  }

  deleteRule(ruleId: string): Promise<RuleCancelled> {
    return this.request("DELETE", `/rules/${ruleId}`);
  }

  deviceInfo(deviceId: string): Promise<DeviceInfo> {
    return this.request("GET", `/device_info/${deviceId}`);
  }
}
