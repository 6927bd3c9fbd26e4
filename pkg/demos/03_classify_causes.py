"""Pin a root cause on an unreproducible diff instead of just reporting it.

Most reproducibility defects fall into a handful of families: embedded
timestamps, captured build paths, filesystem readdir ordering, archive
metadata, leaked randomness, uninitialized memory, and locale or timezone
formatting.  The classifier walks a diff tree, runs one rule per family
over each differing node, and reports findings with evidence and a
confidence grade.

This demo classifies three synthetic diffs, one per common family.
"""

from __future__ import annotations

from reprokit.classify import classify, primary_finding
from reprokit.compare import compare_bytes


CASES = [
    ("embedded build time",
     b"release 1.4\nbuilt at 2020-09-13 12:26:40\n",
     b"release 1.4\nbuilt at 2022-03-15 09:00:00\n"),
    ("captured build path",
     b"debug info: /build/first-abc123/src/main.c\n",
     b"debug info: /build/second-xyz789/src/main.c\n"),
    ("leaked randomness",
     b"session token: 9f86d081884c7d659a2feaa0c55ad015\n",
     b"session token: 60303ae22b998861bce3b28f33eec1be\n"),
]


def main() -> None:
    for label, first, second in CASES:
        node = compare_bytes(first, second, path=label.replace(" ", "-"))
        findings = classify(node)
        primary = primary_finding(findings)
        print(f"== {label}")
        assert primary is not None
        print(f"   cause:      {primary.cause.value}")
        print(f"   confidence: {primary.confidence.value}")
        print(f"   evidence:   {primary.evidence}")
        print()


if __name__ == "__main__":
    main()
