"""Decide whether to trust a binary by polling independent rebuilders.

One reproducible build only proves two machines agree.  Real assurance
comes from k independent builders publishing signed attestations to a
shared store; a client then checks its local artifact against the tally.
A checksum reported by a unique majority of builders is authoritative:
matching it means Trusted, contradicting it means Rejected, and anything
short of a unique majority is Inconclusive.

This demo runs three rebuilders, one of them compromised, and shows the
verdict from each side.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

from reprokit.attestation import generate_signing_key, parse_buildinfo
from reprokit.consensus import AttestationStore, verdict as consensus_verdict
from reprokit.fixtures import FixtureKind, generate_fixture
from reprokit.runner import attest_build, double_build


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        store = AttestationStore(workdir / "store")

        # The timestamp fixture diverges between the two build profiles, so a
        # single double build hands us two genuinely different results: the
        # first plays the honest binary, the second the compromised one.
        req = generate_fixture(FixtureKind.TIMESTAMP, workdir / "src")
        verdict = double_build(req, staging_root=workdir / "stage")
        assert not verdict.reproducible
        artifact = verdict.mismatched_files[0]
        honest_sha = next(e.sha256 for e in verdict.first.checksums
                          if e.filename == artifact)
        divergent_sha = next(e.sha256 for e in verdict.second.checksums
                             if e.filename == artifact)

        results = {
            "rebuilder-alpha": verdict.first,
            "rebuilder-beta": verdict.first,
            "rebuilder-gamma": verdict.second,  # the compromised builder
        }
        for builder_id, result in results.items():
            private_key, public_key = generate_signing_key()
            store.register_builder(builder_id, public_key)
            store.submit(attest_build(result, req, builder_id, private_key))

        att = parse_buildinfo(attest_build(
            verdict.first, req, "rebuilder-alpha", generate_signing_key()[0]).body)
        tally = store.tally(att.source, att.version, att.architecture, artifact)
        print(f"tally for {artifact!r} across {tally.total_builders} builders:")
        for digest, votes in sorted(tally.counts.items()):
            print(f"  {digest[:20]}...: {votes} vote(s)")
        print()

        for label, local in (("honest client", honest_sha),
                             ("client holding the compromised binary", divergent_sha)):
            v = consensus_verdict(tally, local)
            print(f"{label}: {v.decision.value} "
                  f"({v.agreeing} of {v.total} builders agree with it)")


if __name__ == "__main__":
    main()
