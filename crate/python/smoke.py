"""Smoke test for the easel extension.

Build and install it first:
    pip install maturin && pip install --no-build-isolation ./crates/py
or copy target/release/libeasel.so to python/easel.so.
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(Path(__file__).resolve().parent))

import easel  # noqa: E402

SCENES = str(ROOT / "fixtures" / "scenes")


def check(cond, what):
    if not cond:
        raise SystemExit(f"FAIL: {what}")
    print(f"ok  {what}")


def main():
    bits = [False, True, True, False, True, False]
    counts = easel.encode_rle(3, 2, bits)
    check(easel.decode_rle(3, 2, counts) == bits, "rle roundtrip")
    check(easel.fnv1a64(b"") == 0xCBF29CE484222325, "fnv1a64 offset basis")

    ed = easel.Editor(fixtures=SCENES, deterministic=True)
    check(ed.state == "NeedImage", "fresh editor needs an image")
    try:
        ed.execute(json.dumps({"op": "chat", "text": "hello"}))
        check(False, "chat before an image is rejected")
    except easel.EditError as e:
        check(e.args[0] == "no_image", "chat before an image is rejected")

    ed.execute(json.dumps({"op": "set_image", "fixture": "lake_scenery"}))
    first = ed.canvas_hash
    entry = json.loads(ed.execute(json.dumps({"op": "segment_by_text", "text": "dock"})))
    check(entry["status"] == "ok" and ed.masks(), "segment by text yields a mask")
    ed.execute(json.dumps({"op": "remove_object", "mask_id": ed.masks()[0]}))
    check(ed.canvas_hash != first, "remove changes the canvas")
    ed.undo()
    check(ed.canvas_hash == first, "undo restores the canvas")
    check(ed.canvas_png()[:8] == b"\x89PNG\r\n\x1a\n", "canvas exports as PNG")

    png = ed.canvas_png()
    filled = easel.fill_hole(png, easel.encode_rle(*_hole(ed)))
    check(filled[:8] == b"\x89PNG\r\n\x1a\n", "fallback fill returns PNG")

    script = (ROOT / "fixtures" / "scenarios" / "case_study.json").read_text()
    golden = json.loads((ROOT / "fixtures" / "scenarios" / "case_study.golden.json").read_text())
    passed, final, report = easel.replay(script, SCENES)
    check(passed, "case study replays")
    check(final == golden["final_canvas_hash"], "case study matches golden hash")
    check(easel.replay(script, SCENES)[2] == report, "replay is deterministic")
    print("smoke: all checks passed")


def _hole(ed):
    from struct import unpack

    png = ed.canvas_png()
    w, h = unpack(">II", png[16:24])
    bits = [False] * (w * h)
    for y in range(h // 4, h // 2):
        for x in range(w // 4, w // 2):
            bits[y * w + x] = True
    return w, h, bits


if __name__ == "__main__":
    main()
