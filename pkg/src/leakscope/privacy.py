"""What a device class can leak: the catalog behind /device_info.

The catalog is data, not code: a JSON file maps each device class to the
exposure categories it touches and a short blurb per category. Device class
is guessed from the friendly device name, since that is the only identity
signal the registry has.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

DEVICE_CLASSES = frozenset({"voice_assistant", "smart_tv", "camera", "fridge", "other"})
CATEGORIES = frozenset({"location", "activity", "screen", "identity", "shopping", "health"})


@dataclass(frozen=True)
class PrivacyCatalogEntry:
    device_class: str
    categories: tuple[str, ...]
    blurbs: dict


def load_catalog(path: str | Path | None = None) -> dict[str, PrivacyCatalogEntry]:
    """Read the catalog; defaults to the copy shipped inside the package."""
    if path is None:
        text = resources.files("leakscope").joinpath("data/privacy_catalog.json").read_text()
    else:
        text = Path(path).read_text()
    raw = json.loads(text)
    catalog: dict[str, PrivacyCatalogEntry] = {}
    for device_class, entry in raw.items():
        if device_class not in DEVICE_CLASSES:
            raise ValueError(f"unknown device class in catalog: {device_class!r}")
        categories = tuple(entry["categories"])
        bad = set(categories) - CATEGORIES
        if bad:
            raise ValueError(f"unknown categories for {device_class}: {sorted(bad)}")
        blurbs = dict(entry["blurbs"])
        if set(blurbs) != set(categories):
            raise ValueError(f"blurbs must cover exactly the categories for {device_class}")
        catalog[device_class] = PrivacyCatalogEntry(device_class, categories, blurbs)
    if "other" not in catalog:
        raise ValueError("catalog needs an 'other' fallback entry")
    return catalog


# keyword → class; first hit wins, so put the most specific words first
_CLASS_HINTS = (
    (("camera", "cam", "doorbell"), "camera"),
    (("tv", "television", "chromecast", "roku"), "smart_tv"),
    (("echo", "alexa", "assistant", "speaker", "homepod"), "voice_assistant"),
    (("fridge", "refrigerator"), "fridge"),
)


def classify_device(name: str) -> str:
    words = name.lower()
    for keywords, device_class in _CLASS_HINTS:
        if any(k in words for k in keywords):
            return device_class
    return "other"


def device_info(device_id: str, name: str,
                catalog: dict[str, PrivacyCatalogEntry]) -> dict:
    device_class = classify_device(name)
    entry = catalog.get(device_class) or catalog["other"]
    return {
        "device_id": device_id,
        "name": name,
        "device_class": entry.device_class,
        "categories": list(entry.categories),
        "blurbs": dict(entry.blurbs),
    }
