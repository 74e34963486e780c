/** Privacy panel data: turn a /device_info answer into icon+blurb rows,
 * falling back to a generic panel when the catalog has nothing to say.
 */

import type { DeviceInfo } from "./api.js";

export const CATEGORY_ICONS: Record<string, string> = {
  location: "\u{1F4CD}", // pushpin
  activity: "\u{1F463}", // footprints
  screen: "\u{1F4FA}", // television
  identity: "\u{1FAAA}", // id card
  shopping: "\u{1F6D2}", // cart
  health: "\u{2764}\u{FE0F}", // heart
};

export interface PanelRow {
  category: string;
  icon: string;
  blurb: string;
}

export interface PrivacyPanel {
  title: string;
  generic: boolean;
  rows: PanelRow[];
}

const GENERIC_TEXT =
  "No specific guidance for this device type. Any networked device can " +
  "reveal when your home is occupied through its traffic patterns alone.";

export function buildPanel(info: DeviceInfo | null): PrivacyPanel {
  if (info === null || info.categories.length === 0) {
    return {
      title: "What this device can reveal",
      generic: true,
      rows: [{ category: "general", icon: "\u{2139}\u{FE0F}", blurb: GENERIC_TEXT }],
    };
  }
  return {
    title: `What a ${info.device_class.replace("_", " ")} can reveal`,
    generic: false,
    rows: info.categories.map((cat) => ({
      category: cat,
      icon: CATEGORY_ICONS[cat] ?? "\u{2753}",
      blurb: info.blurbs[cat] ?? "",
    })),
  };
}
