"""Attest a build and let anyone verify the claim later.

After building, a builder writes down exactly what it produced (per-file
checksums), what it used (pinned dependency versions, environment), and who
it is, in a stable text format, then signs the bytes with an Ed25519 key.
Anyone holding the public key can later verify both the signature and
whether a concrete artifact matches the attested checksums.

This demo builds the control fixture, attests the result, round-trips the
attestation through its wire format, verifies it, and shows that a single
flipped byte is caught.
"""

from __future__ import annotations

import dataclasses
import tempfile
from pathlib import Path

from reprokit.attestation import (
    generate_signing_key,
    parse_buildinfo,
    parse_signed,
    serialize_signed,
    verify_signature,
)
from reprokit.fixtures import FixtureKind, generate_fixture
from reprokit.runner import attest_build, double_build


def main() -> None:
    private_key, public_key = generate_signing_key()

    with tempfile.TemporaryDirectory() as tmp:
        workdir = Path(tmp)
        req = generate_fixture(FixtureKind.CONTROL, workdir / "src")
        verdict = double_build(req, staging_root=workdir / "stage")
        assert verdict.reproducible

        signed = attest_build(verdict.first, req, "rebuilder-01", private_key)

    att = parse_buildinfo(signed.body)
    print(f"attested {att.source} {att.version} ({att.architecture}) "
          f"by {att.builder_id}")
    for entry in att.checksums:
        print(f"  {entry.filename}: sha256 {entry.sha256[:20]}...")
    print(f"  environment pins: {', '.join(key for key, _ in att.environment)}")

    wire = serialize_signed(signed)
    print(f"\nwire format: {len(wire)} bytes, fingerprint "
          f"{signed.public_key_fingerprint[:20]}...")
    reloaded = parse_signed(wire)
    assert reloaded == signed

    print(f"signature over pristine body: "
          f"{'ok' if verify_signature(reloaded, public_key) else 'BAD'}")

    body = bytearray(reloaded.body)
    body[body.index(ord('1'))] = ord('2')
    tampered = dataclasses.replace(reloaded, body=bytes(body))
    print(f"signature over tampered body: "
          f"{'ok' if verify_signature(tampered, public_key) else 'BAD (rejected)'}")


if __name__ == "__main__":
    main()
