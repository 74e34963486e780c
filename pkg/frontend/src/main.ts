/** DOM wiring. Cards are created once per device and mutated in place so
 * polling never steals focus from the schedule inputs or closes an open
 * privacy panel.
 */

import { ApiClient, RequestFailed } from "./api.js";
import type { Rule, TrafficSnapshot } from "./api.js";
import {
  DashboardState,
  DeviceViewModel,
  actionFailed,
  actionSucceeded,
  applyPollFailure,
  applySnapshot,
  beginAction,
  formatBytes,
  formatEpoch,
  initialState,
  nextActivation,
  SERIES_WINDOW_S,
} from "./core.js";
import { chartGeometry, chartSvg } from "./charts.js";
import { buildPanel, PrivacyPanel } from "./privacy.js";
import { ActionQueue } from "./queue.js";
import { Poller, PollerOptions } from "./poller.js";

interface CardRefs {
  card: HTMLElement;
  badge: HTMLElement;
  totals: HTMLElement;
  chart: HTMLElement;
  trackers: HTMLElement;
  error: HTMLElement;
  blockBtn: HTMLButtonElement;
  unblockBtn: HTMLButtonElement;
  scheduleBtn: HTMLButtonElement;
  startInput: HTMLInputElement;
  endInput: HTMLInputElement;
  infoBtn: HTMLButtonElement;
  panel: HTMLElement;
}

export interface Dashboard {
  start(): void;
  stop(): void;
  readonly state: DashboardState;
}

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function errorText(err: unknown): string {
  if (err instanceof RequestFailed) return err.message;
  return "request failed";
}

export function initDashboard(
  root: HTMLElement,
  api: ApiClient,
  pollerOpts: PollerOptions = {},
): Dashboard {
  const doc = root.ownerDocument;
  let state = initialState();
  const queue = new ActionQueue();
  const cards = new Map<string, CardRefs>();
  const panels = new Map<string, PrivacyPanel>();
  let lastRules: Rule[] = [];

  root.textContent = "";
  const banner = el(doc, "div", "stale-banner hidden", "data stale, retrying");
  const deviceList = el(doc, "div", "devices");
  const rulesBox = el(doc, "section", "rules");
  rulesBox.append(el(doc, "h2", undefined, "Block rules"));
  const rulesBody = el(doc, "div", "rules-body", "none");
  rulesBox.append(rulesBody);
  root.append(banner, deviceList, rulesBox);

  function setState(next: DashboardState): void {
    state = next;
    render();
  }

  function runAction(
    deviceId: string,
    kind: "block" | "unblock" | "schedule",
    task: () => Promise<unknown>,
  ): void {
    setState(beginAction(state, deviceId, kind));
    void queue
      .run(task)
      .then(() => {
        setState(actionSucceeded(state, deviceId));
        void refreshRules();
      })
      .catch((err) => setState(actionFailed(state, deviceId, errorText(err))));
  }

  async function unblockEverything(deviceId: string): Promise<void> {
    const listed = await api.listRules();
    for (const rule of listed.rules) {
      if (rule.device_id === deviceId) {
        await api.deleteRule(rule.rule_id);
      }
    }
  }

  async function refreshRules(): Promise<void> {
    try {
      lastRules = (await api.listRules()).rules;
    } catch {
      return; // rules panel just goes stale; the banner tracks /get_traffic
    }
    renderRules();
  }

  function togglePanel(vm: DeviceViewModel, refs: CardRefs): void {
    if (!refs.panel.classList.contains("hidden")) {
      refs.panel.classList.add("hidden");
      return;
    }
    refs.panel.classList.remove("hidden");
    const cached = panels.get(vm.id);
    if (cached) {
      renderPanel(refs.panel, cached);
      return;
    }
    refs.panel.textContent = "loading";
    void api
      .deviceInfo(vm.id)
      .then((info) => buildPanel(info))
      .catch(() => buildPanel(null))
      .then((panel) => {
        panels.set(vm.id, panel);
        renderPanel(refs.panel, panel);
      });
  }

  function renderPanel(node: HTMLElement, panel: PrivacyPanel): void {
    node.textContent = "";
    node.append(el(doc, "h3", undefined, panel.title));
    const list = el(doc, "ul", panel.generic ? "privacy generic" : "privacy");
    for (const row of panel.rows) {
      const item = el(doc, "li", `privacy-row privacy-${row.category}`);
      item.append(
        el(doc, "span", "privacy-icon", row.icon),
        el(doc, "span", "privacy-blurb", row.blurb),
      );
      list.append(item);
    }
    node.append(list);
  }

  function ensureCard(vm: DeviceViewModel): CardRefs {
    const existing = cards.get(vm.id);
    if (existing) return existing;

    const card = el(doc, "article", "device-card");
    card.dataset.deviceId = vm.id;

    const head = el(doc, "header");
    head.append(
      el(doc, "h2", "device-name", vm.name),
      el(doc, "span", "device-meta", `${vm.vendor} | ${vm.ip} | ${vm.mac}`),
    );
    const badge = el(doc, "span", "badge hidden", "BLOCKED");
    head.append(badge);

    const chart = el(doc, "div", "chart");
    const totals = el(doc, "div", "totals");
    const trackers = el(doc, "div", "trackers");
    const error = el(doc, "div", "action-error hidden");

    const controls = el(doc, "div", "controls");
    const blockBtn = el(doc, "button", "block-now", "Block now");
    const unblockBtn = el(doc, "button", "unblock", "Unblock");
    const startInput = el(doc, "input") as HTMLInputElement;
    startInput.type = "time";
    startInput.value = "22:00";
    startInput.className = "sched-start";
    const endInput = el(doc, "input") as HTMLInputElement;
    endInput.type = "time";
    endInput.value = "06:00";
    endInput.className = "sched-end";
    const scheduleBtn = el(doc, "button", "schedule", "Schedule");
    const infoBtn = el(doc, "button", "info", "Privacy");
    controls.append(blockBtn, unblockBtn, startInput, endInput, scheduleBtn, infoBtn);

    const panel = el(doc, "div", "privacy-panel hidden");

    card.append(head, chart, totals, trackers, error, controls, panel);
    deviceList.append(card);

    const refs: CardRefs = {
      card,
      badge,
      totals,
      chart,
      trackers,
      error,
      blockBtn,
      unblockBtn,
      scheduleBtn,
      startInput,
      endInput,
      infoBtn,
      panel,
    };
    cards.set(vm.id, refs);

    blockBtn.addEventListener("click", () => {
      runAction(vm.id, "block", () => api.blockNow(vm.id));
    });
    unblockBtn.addEventListener("click", () => {
      runAction(vm.id, "unblock", () => unblockEverything(vm.id));
    });
    scheduleBtn.addEventListener("click", () => {
      runAction(vm.id, "schedule", () =>
        api.scheduleDaily(vm.id, startInput.value, endInput.value),
      );
    });
    infoBtn.addEventListener("click", () => {
      const current = state.devices.find((d) => d.id === vm.id) ?? vm;
      togglePanel(current, refs);
    });
    return refs;
  }

  function updateCard(vm: DeviceViewModel): void {
    const refs = ensureCard(vm);
    refs.badge.classList.toggle("hidden", !vm.blocked);
    refs.card.classList.toggle("blocked", vm.blocked);
    refs.totals.textContent = `out ${formatBytes(vm.totalOut)} | in ${formatBytes(vm.totalIn)}`;
    refs.totals.dataset.totalOut = String(vm.totalOut);
    refs.totals.dataset.totalIn = String(vm.totalIn);

    const geom = chartGeometry(vm.series, state.generatedAt ?? 0, SERIES_WINDOW_S);
    refs.chart.innerHTML = chartSvg(geom);

    refs.trackers.classList.toggle("tracker-alert", vm.trackerCount > 0);
    refs.trackers.textContent =
      vm.trackerCount > 0
        ? `trackers: ${vm.trackerCount} (${vm.trackerHosts.join(", ")})`
        : "trackers: 0";

    refs.error.classList.toggle("hidden", vm.error === null);
    refs.error.textContent = vm.error ?? "";

    const busy = vm.pendingAction !== null;
    refs.blockBtn.disabled = busy;
    refs.unblockBtn.disabled = busy;
    refs.scheduleBtn.disabled = busy;
  }

  function render(): void {
    banner.classList.toggle("hidden", !state.stale);
    const alive = new Set(state.devices.map((d) => d.id));
    for (const [id, refs] of cards) {
      if (!alive.has(id)) {
        refs.card.remove();
        cards.delete(id);
      }
    }
    for (const vm of state.devices) updateCard(vm);
  }

  function renderRules(): void {
    rulesBody.textContent = "";
    if (lastRules.length === 0) {
      rulesBody.textContent = "none";
      return;
    }
    const now = state.generatedAt ?? 0;
    const names = new Map(state.devices.map((d) => [d.id, d.name]));
    const list = el(doc, "ul");
    for (const rule of lastRules) {
      const who = names.get(rule.device_id) ?? rule.device_id;
      const span =
        rule.kind === "window"
          ? `${rule.block_at || "now"} to ${rule.unblock_at || "forever"}`
          : `daily ${rule.start_hhmm} to ${rule.end_hhmm}`;
      const next = nextActivation(rule, now);
      const suffix = rule.active
        ? "active now"
        : next !== null
          ? `next at ${formatEpoch(next)}`
          : "expired";
      const item = el(doc, "li", "rule-row", `${rule.rule_id}: ${who}, ${span}, ${suffix}`);
      item.dataset.ruleId = rule.rule_id;
      list.append(item);
    }
    rulesBody.append(list);
  }

  const poller = new Poller(
    () => api.getTraffic(),
    (snap: TrafficSnapshot) => {
      setState(applySnapshot(state, snap));
      renderRules();
      void refreshRules();
    },
    () => setState(applyPollFailure(state)),
    pollerOpts,
  );

  return {
    start: () => poller.start(),
    stop: () => poller.stop(),
    get state() {
      return state;
    },
  };
}

/** Entry point for the real page; tests call initDashboard directly. */
export function bootFromDocument(doc: Document): Dashboard | null {
  const root = doc.getElementById("app");
  if (!root) return null;
  const params = new URLSearchParams(doc.defaultView?.location.search ?? "");
  const base = params.get("api") ?? "";
  const dash = initDashboard(root, new ApiClient(base));
  dash.start();
  return dash;
}

declare const process: unknown;
if (typeof process === "undefined" && typeof document !== "undefined") {
  bootFromDocument(document);
}
