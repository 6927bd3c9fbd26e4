"""Normalize archives so that equal content yields equal bytes.

Archive formats record more than content: owners, modes, timestamps, member
order, compression settings.  Two honest builds of the same tree can still
produce different tarballs.  The normalizer rewrites an archive into a
canonical form: members sorted, ownership zeroed, modes canonicalized, and
every timestamp clamped to a fixed epoch, descending into nested containers.

This demo writes the same two files into three differently-messy tarballs
and shows that normalization converges them to one byte sequence.
"""

from __future__ import annotations

import hashlib

from reprokit.formats import Member, parse_tar, write_tar
from reprokit.normalize import NormalizePolicy, normalize_bytes

EPOCH = 1_600_000_000

FILES = [("app.py", b"print('ok')\n"), ("data.txt", b"42\n")]


def messy_tar(order: list[int], uid: int, uname: str, mtime: int) -> bytes:
    return write_tar([
        Member(name=FILES[i][0], content=FILES[i][1],
               uid=uid, gid=uid, uname=uname, gname=uname,
               mtime=mtime, mode=0o664)
        for i in order
    ])


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:20]


def main() -> None:
    variants = [
        messy_tar([0, 1], uid=1000, uname="alice", mtime=1_700_000_000),
        messy_tar([1, 0], uid=2077, uname="builder", mtime=1_650_000_000),
        messy_tar([0, 1], uid=0, uname="root", mtime=1_680_000_123),
    ]
    policy = NormalizePolicy(epoch=EPOCH)

    print("before normalization:")
    for i, raw in enumerate(variants):
        print(f"  variant {i}: sha256 {digest(raw)}...")

    normalized = [normalize_bytes(raw, policy) for raw in variants]
    print("after normalization:")
    for i, data in enumerate(normalized):
        print(f"  variant {i}: sha256 {digest(data)}...")
    assert len({digest(d) for d in normalized}) == 1

    members = parse_tar(normalized[0])
    print()
    print("canonical form:")
    for m in members:
        print(f"  {m.name}: uid={m.uid} owner={m.uname!r} "
              f"mode={oct(m.mode)} mtime={m.mtime}")
    assert normalize_bytes(normalized[0], policy) == normalized[0]
    print()
    print("normalizing again changes nothing (idempotent).")


if __name__ == "__main__":
    main()
