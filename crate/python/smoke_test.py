#!/usr/bin/env python3
"""Smoke test for the rcards_py extension module.

Builds nothing itself: looks for the compiled cdylib under target/ and
copies it next to this script under the importable name.
"""

import json
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
ROOT = HERE.parent


def locate_extension():
    target = HERE / "rcards_py.so"
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("librcards_py.so", "rcards_py.so", "librcards_py.dylib")
    ]
    built = [p for p in candidates if p.exists()]
    if not built:
        sys.exit("no built extension found; run `cargo build -p rcards-py` first")
    newest = max(built, key=lambda p: p.stat().st_mtime)
    shutil.copy2(newest, target)
    return target


def main():
    locate_extension()
    sys.path.insert(0, str(HERE))
    import rcards_py as rc

    assert rc.sigma(2, 7) == 8
    assert rc.sigma(3, 49) == 2451

    report = rc.feasible(7, 1, 2, 2)
    assert report["feasible"] and report["b"] == 41, report

    assert rc.search_k(7, 1, 2) == 1
    assert rc.search_k(3, 1, 2) is None

    k, c, b, report = rc.suggest_params(49, "d3")
    assert (k, c, b) == (7, 171, 117429), (k, c, b)
    assert report["feasible"]

    transcript_json, deal_json = rc.run_protocol(7, 1, 2, 2, seed=42)
    transcript = json.loads(transcript_json)
    deal = json.loads(deal_json)
    assert transcript["params"]["a"] == 7
    assert sorted(transcript["claimed_C"]) == sorted(deal["C"])

    result = rc.verify(transcript_json, deal_json)
    assert result["executed"] and result["informative"] and result["safe"], result
    assert result["leaked_to_alice"] == []

    sampled = rc.verify(transcript_json, deal_json, sample=5)
    assert sampled["cards_checked"] == 5 and sampled["safe"]

    # determinism across calls
    again, _ = rc.run_protocol(7, 1, 2, 2, seed=42)
    assert again == transcript_json

    print("smoke test passed")


if __name__ == "__main__":
    main()
