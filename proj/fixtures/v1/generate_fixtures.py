#!/usr/bin/env python3
"""Regenerates the app, suite and evaluation fixtures under fixtures/v1.

Usage: python3 fixtures/v1/generate_fixtures.py
Output is deterministic; re-running must leave git clean.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent
W, H = 1080, 2400


def dump(path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def row(i, top=200, pitch=180, height=140):
    y = top + i * pitch
    return [60, y, W - 60, y + height]


def widget(wid, label, text, i, **extra):
    w = {"id": wid, "label": label, "text": text, "bbox": row(i)}
    w.update(extra)
    return w


def click(src, target, to=None, **kw):
    t = {"from": src, "on": {"action": "click", "target": target}}
    if to:
        t["to"] = to
    t.update(kw)
    return t


# ---------------------------------------------------------------------------
# Base apps

def settings_app():
    return {
        "name": "settings",
        "screen": [W, H],
        "initial_screen": "home",
        "vars": {"wifi": "off"},
        "screens": {
            "home": {"elements": [
                widget("title", "text", "Settings", 0),
                widget("help", "button", "Help", 1),
                widget("about", "button", "About", 2),
                widget("wifi", "switch", "Wi-Fi {{wifi}}", 3),
            ]},
            "help": {"elements": [
                widget("title", "text", "Help", 0),
                widget("faq", "button", "FAQ", 1),
                widget("back", "button", "Back", 2),
            ]},
            "faq": {"elements": [
                widget("title", "text", "Frequently asked questions", 0),
                widget("q1", "text", "How do I reset my phone?", 1),
                widget("back", "button", "Back", 2),
            ]},
            "about": {"elements": [
                widget("title", "text", "About phone", 0),
                widget("version", "text", "Version 14", 1),
                widget("back", "button", "Back", 2),
            ]},
        },
        "transitions": [
            click("home", "help", "help"),
            click("home", "about", "about"),
            click("home", "wifi", set={"wifi": "on"}),
            click("help", "faq", "faq"),
            click("help", "back", "home"),
            click("faq", "back", "help"),
            click("about", "back", "home"),
        ],
    }


def shopping_app():
    return {
        "name": "shopping",
        "screen": [W, H],
        "initial_screen": "list",
        "vars": {"item": "", "saved": ""},
        "screens": {
            "list": {"elements": [
                widget("title", "text", "Shopping list", 0),
                widget("field", "input", "{{item}}", 1, focus="item"),
                widget("add", "button", "Add", 2),
                widget("saved", "text", "{{saved}}", 3),
            ]},
        },
        "transitions": [
            click("list", "add", set={"saved": "{{item}}", "item": ""}),
        ],
    }


def longlist_app():
    items = [{"id": f"item{i}", "label": "text", "text": f"Item {i}"} for i in range(1, 13)]
    return {
        "name": "longlist",
        "screen": [W, H],
        "initial_screen": "inbox",
        "vars": {"opened": ""},
        "screens": {
            "inbox": {
                "elements": [widget("title", "text", "Inbox", 0)],
                "list": {"area": [0, 400, W, 1600], "item_height": 200, "items": items},
            },
        },
        "transitions": [
            click("inbox", f"item{i}", set={"opened": f"Item {i}"}) for i in range(1, 13)
        ],
    }


# ---------------------------------------------------------------------------
# Greedy-trap suite
#
# Each trap app has a home screen whose top-ranked element (most goal words)
# leads to a dead end. The right path starts at an element with no goal
# words; the goal words only show up one level further down.

TRAPS = [
    # id, goal, decoy, dead-end hint, path button, fillers, control template, before, after
    ("dark_mode", "Turn on dark mode", "Dark mode tips", "Dark themes save battery", "Display",
     ["Sound"], "Dark mode: {{v}}", "off", "on"),
    ("alarm", "Set the alarm to 7 AM", "Set alarm tone", "Alarm tones are in Sounds", "Clock",
     ["Timer"], "Alarm time: {{v}}", "6 AM", "7 AM"),
    ("group_chat", "Make group chat notifications silent", "Group chat stickers", "Send stickers to groups",
     "Chats", ["Calls"], "Group chat notifications: {{v}}", "loud", "silent"),
    ("font_size", "Change font size to large", "Font size guide", "Fonts can be changed later", "Display",
     ["Battery"], "Font size: {{v}}", "normal", "large"),
    ("bluetooth", "Turn bluetooth on", "Bluetooth troubleshooting", "Try restarting bluetooth", "Connections",
     ["Privacy"], "Bluetooth: {{v}}", "off", "on"),
    ("ringtone", "Set ringtone to marimba", "Ringtone store", "Buy new ringtones", "Sounds",
     ["Display"], "Ringtone: {{v}}", "chimes", "marimba"),
    ("language", "Switch app language to french", "App language news", "New languages coming soon", "System",
     ["Storage"], "App language: {{v}}", "english", "french"),
    ("autoplay", "Set video autoplay to disabled", "Video autoplay explained", "Autoplay starts videos", "Media",
     ["Account"], "Video autoplay: {{v}}", "enabled", "disabled"),
    ("units", "Use metric units for distance", "Distance units history", "Units vary by country", "Preferences",
     ["Maps"], "Distance units: {{v}}", "imperial", "metric"),
    ("backup", "Enable cloud backup daily", "Cloud backup pricing", "Plans start at 1 dollar", "Accounts",
     ["Security"], "Cloud backup: {{v}}", "never", "daily"),
    ("keyboard", "Set keyboard vibration to strong", "Keyboard vibration tips", "Vibration uses battery",
     "Input", ["Gestures"], "Keyboard vibration: {{v}}", "weak", "strong"),
    ("location", "Turn location history off", "Location history map", "Your places appear here", "Privacy",
     ["Apps"], "Location history: {{v}}", "on", "off"),
]

# Three-level variants: the control sits one screen deeper, so the decoy only
# carries a single goal word.
DEEP_TRAPS = [
    ("hotspot", "Set hotspot band to 5 GHz", "Hotspot ideas", "Share your data", "Network", "Tethering",
     ["Sim"], "Hotspot band: {{v}}", "2.4 GHz", "5 GHz"),
]

CONTROLS = [
    ("ctl_wifi", "Turn on wifi", "Wifi", ["Sound", "Display"], "Wifi: {{v}}", "off", "on"),
    ("ctl_brightness", "Set brightness to auto", "Brightness", ["Sound", "Battery"], "Brightness: {{v}}", "manual",
     "auto"),
]


def trap_app(tid, decoy, hint, path, fillers, control, before, after):
    home = [widget("decoy", "button", decoy, 0), widget("path", "button", path, 1)]
    for k, f in enumerate(fillers):
        home.append(widget(f"filler{k}", "button", f, 2 + k))
    screens = {
        "home": {"elements": home},
        "dead_end": {"elements": [
            widget("title", "text", decoy, 0),
            widget("hint", "text", hint, 1),
            widget("back", "button", "Back", 2),
        ]},
        "detail": {"elements": [
            widget("title", "text", path, 0),
            widget("control", "switch", control, 1),
            widget("back", "button", "Back", 2),
        ]},
    }
    transitions = [
        click("home", "decoy", "dead_end"),
        click("home", "path", "detail"),
        click("dead_end", "back", "home"),
        click("detail", "control", set={"v": after}),
        click("detail", "back", "home"),
    ]
    for k, f in enumerate(fillers):
        screens[f"filler{k}"] = {"elements": [
            widget("title", "text", f, 0),
            widget("info", "text", "Nothing to change here", 1),
            widget("back", "button", "Back", 2),
        ]}
        transitions.append(click("home", f"filler{k}", f"filler{k}"))
        transitions.append(click(f"filler{k}", "back", "home"))
    return {"name": tid, "screen": [W, H], "initial_screen": "home", "vars": {"v": before},
            "screens": screens, "transitions": transitions}


def deep_trap_app(tid, decoy, hint, path, sub, fillers, control, before, after):
    app = trap_app(tid, decoy, hint, path, fillers, control, before, after)
    detail = app["screens"]["detail"]["elements"]
    detail[1] = widget("sub", "button", sub, 1)
    app["screens"]["sub"] = {"elements": [
        widget("title", "text", sub, 0),
        widget("control", "switch", control, 1),
        widget("back", "button", "Back", 2),
    ]}
    app["transitions"] = [t for t in app["transitions"] if t["from"] != "detail" or t["on"]["target"] != "control"]
    app["transitions"] += [
        click("detail", "sub", "sub"),
        click("sub", "control", set={"v": after}),
        click("sub", "back", "detail"),
    ]
    return app


def control_app(tid, path_text, fillers, control, before, after):
    home = [widget("path", "button", path_text, 0)]
    for k, f in enumerate(fillers):
        home.append(widget(f"filler{k}", "button", f, 1 + k))
    return {
        "name": tid, "screen": [W, H], "initial_screen": "home", "vars": {"v": before},
        "screens": {
            "home": {"elements": home},
            "detail": {"elements": [
                widget("title", "text", "Options", 0),
                widget("control", "switch", control, 1),
                widget("back", "button", "Back", 2),
            ]},
        },
        "transitions": [
            click("home", "path", "detail"),
            click("detail", "control", set={"v": after}),
            click("detail", "back", "home"),
        ],
    }


def task(tid, goal, after, kind):
    return {
        "id": tid,
        "goal": goal,
        "app": f"apps/{tid}.json",
        "kind": kind,
        "max_steps": 8,
        "success": {"type": "var_equals", "var": "v", "value": after},
    }


def write_suite():
    suite = ROOT / "suites" / "greedy_trap"
    for tid, goal, decoy, hint, path, fillers, control, before, after in TRAPS:
        dump(suite / "apps" / f"{tid}.json", trap_app(tid, decoy, hint, path, fillers, control, before, after))
        dump(suite / f"{tid}.task.json", task(tid, goal, after, "trap"))
    for tid, goal, decoy, hint, path, sub, fillers, control, before, after in DEEP_TRAPS:
        dump(suite / "apps" / f"{tid}.json", deep_trap_app(tid, decoy, hint, path, sub, fillers, control, before, after))
        dump(suite / f"{tid}.task.json", task(tid, goal, after, "trap"))
    for tid, goal, path, fillers, control, before, after in CONTROLS:
        dump(suite / "apps" / f"{tid}.json", control_app(tid, path, fillers, control, before, after))
        dump(suite / f"{tid}.task.json", task(tid, goal, after, "control"))


# ---------------------------------------------------------------------------
# Evaluation corpora

WORDS = ["Home", "Search", "Settings", "Wi-Fi", "Bluetooth", "Display", "Sound", "Battery", "Storage", "Privacy",
         "Milk", "Eggs", "Send", "Cancel", "OK", "Back", "Next", "Café", "Größe", "日本語", "Profile", "Inbox"]
LABELS = ["button", "checkbox", "icon", "image", "input", "switch", "tab", "text"]


def rand_box(rng):
    x1 = rng.randrange(0, W - 200)
    y1 = rng.randrange(0, H - 200)
    return [x1, y1, x1 + rng.randrange(60, 200), y1 + rng.randrange(40, 200)]


def rand_text(rng):
    n = rng.randrange(0, 4)
    return " ".join(rng.choice(WORDS) for _ in range(n))


def rand_state(rng, lo, hi):
    return {"elements": [{"label": rng.choice(LABELS), "text": rand_text(rng), "bbox": rand_box(rng)}
                         for _ in range(rng.randrange(lo, hi + 1))], "screen": [W, H]}


def mutate_text(rng, text):
    if not text or rng.random() < 0.5:
        return text
    chars = list(text)
    chars[rng.randrange(len(chars))] = rng.choice("xyzq")
    return "".join(chars)


def predict_from(rng, gt):
    out = []
    for e in gt["elements"]:
        r = rng.random()
        if r < 0.15:
            continue  # missed element
        x1, y1, x2, y2 = e["bbox"]
        d = rng.randrange(0, 40) if r < 0.6 else rng.randrange(0, 4)
        box = [max(0, x1 + rng.randint(-d, d)), max(0, y1 + rng.randint(-d, d)), x2 + rng.randint(-d, d),
               y2 + rng.randint(-d, d)]
        box[2] = max(box[2], box[0])
        box[3] = max(box[3], box[1])
        text = mutate_text(rng, e["text"]) if r < 0.8 else rand_text(rng)
        out.append({"label": e["label"], "text": text, "bbox": box})
    for _ in range(rng.randrange(0, 3)):
        out.append({"label": rng.choice(LABELS), "text": rand_text(rng), "bbox": rand_box(rng)})
    rng.shuffle(out)
    return {"elements": out, "screen": [W, H]}


def eval_records(seed, n, lo, hi):
    rng = random.Random(seed)
    gts, preds = [], []
    for i in range(n):
        traj, step = f"t{i // 4:04d}", i % 4
        pre = rand_state(rng, lo, hi)
        post = rand_state(rng, lo, hi)
        action = {"action": "click", "coordinate": [rng.randrange(W), rng.randrange(H)]}
        goal = f"synthetic goal {i // 4}"
        gts.append({"traj_id": traj, "step": step, "goal": goal, "pre": pre, "action": action, "post": post})
        preds.append({"traj_id": traj, "step": step, "pred": predict_from(rng, post)})
    return gts, preds


def write_jsonl(path, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n")


def micro_shift():
    """Pairs matched only through the IoU branch (boxes shifted by a few px,
    texts replaced), plus pairs matched only through the text branch."""
    gts, preds = [], []
    for i in range(4):
        g = [
            {"label": "button", "text": "Confirm purchase", "bbox": [100, 200, 300, 400]},
            {"label": "text", "text": "Total 12 EUR", "bbox": [100, 500, 900, 600]},
            {"label": "icon", "text": "Cart", "bbox": [800, 100, 900, 180]},
        ]
        p = [
            # IoU 39601/40399 ~ 0.980, text unrelated
            {"label": "button", "text": "Zzzz", "bbox": [101, 199, 301, 399]},
            # IoU 72000/88000 ~ 0.818, text unrelated
            {"label": "text", "text": "qqqq", "bbox": [100, 510, 900, 610]},
            # text identical, box far away
            {"label": "icon", "text": "Cart", "bbox": [0, 2000, 100, 2080]},
        ]
        gts.append({"traj_id": f"m{i}", "step": 0, "goal": "buy", "pre": {"elements": []},
                    "action": {"action": "wait"}, "post": {"elements": g, "screen": [W, H]}})
        preds.append({"traj_id": f"m{i}", "step": 0, "pred": {"elements": p, "screen": [W, H]}})
    return gts, preds


def main():
    dump(ROOT / "apps" / "settings.json", settings_app())
    dump(ROOT / "apps" / "shopping.json", shopping_app())
    dump(ROOT / "apps" / "longlist.json", longlist_app())
    write_suite()
    gts, preds = eval_records(20240611, 20, 0, 9)
    write_jsonl(ROOT / "eval" / "gt.jsonl", gts)
    write_jsonl(ROOT / "eval" / "pred.jsonl", preds)
    gts, preds = micro_shift()
    write_jsonl(ROOT / "eval" / "micro_shift_gt.jsonl", gts)
    write_jsonl(ROOT / "eval" / "micro_shift_pred.jsonl", preds)


if __name__ == "__main__":
    main()
