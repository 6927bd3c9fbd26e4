"""Double-build a package under two hostile environments and compare the outputs.

A single build proves nothing about reproducibility: whatever the toolchain
leaked into the artifact is leaked consistently.  The trick is to build twice
while varying everything a correct build should not depend on (clock, build
path, filesystem ordering, locale, hostname) and then demand bit-for-bit
identical outputs.

This demo builds the bundled "timestamp" defect fixture, which stamps the
current time into its artifact, and shows the verdict diverging.  The
"control" fixture, built the same way, survives.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from reprokit.fixtures import FixtureKind, generate_fixture
from reprokit.runner import double_build


def show(kind: FixtureKind, workdir: Path) -> None:
    req = generate_fixture(kind, workdir / kind.value)
    verdict = double_build(req, staging_root=workdir / f"{kind.value}-stage")

    print(f"== fixture: {kind.value}")
    print(f"   built under profiles: {verdict.first.profile_name!r} "
          f"and {verdict.second.profile_name!r}")
    for entry in verdict.first.checksums:
        print(f"   first  {entry.filename}: {entry.sha256[:16]}...")
    for entry in verdict.second.checksums:
        print(f"   second {entry.filename}: {entry.sha256[:16]}...")
    if verdict.reproducible:
        print("   verdict: reproducible (bit-for-bit identical)")
    else:
        print(f"   verdict: NOT reproducible, differing files: "
              f"{', '.join(verdict.mismatched_files)}")
    print()


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        show(FixtureKind.CONTROL, workdir)
        show(FixtureKind.TIMESTAMP, workdir)


if __name__ == "__main__":
    main()
