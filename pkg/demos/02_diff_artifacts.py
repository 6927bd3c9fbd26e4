"""Recursively diff two build artifacts down to the bytes that differ.

A flat "files differ" answer is useless when the artifact is a compressed
archive of archives.  The comparator unpacks containers (gzip, tar, zip)
recursively, pairs members up, and reports differences where they live:
a changed line inside a file inside a tarball inside a gzip stream, or a
metadata field on the container itself.

This demo fabricates two tar.gz artifacts that differ in one source line
and in the gzip header timestamp, then prints the text report.
"""

from __future__ import annotations

from reprokit.compare import ReportStyle, compare_bytes, render_report
from reprokit.formats import Member, write_gzip, write_tar


def artifact(greeting: str, gzip_mtime: int) -> bytes:
    inner = write_tar([
        Member(name="bin/hello", content=f'print("{greeting}")\n'.encode(),
               mode=0o755),
        Member(name="share/notes.txt", content=b"identical in both builds\n"),
    ])
    return write_gzip(inner, mtime=gzip_mtime, filename="layer.tar")


def main() -> None:
    first = artifact("hello, world", gzip_mtime=1_650_000_000)
    second = artifact("hello, world!", gzip_mtime=1_650_000_031)

    node = compare_bytes(first, second, path="release.tar.gz")
    print(f"top-level status: {node.status.value}")
    print()
    print(render_report(node, ReportStyle.TEXT).decode(), end="")
    print()
    print("The same tree renders as JSON for tooling and as a standalone")
    print("HTML page for humans; all three are deterministic byte-for-byte.")


if __name__ == "__main__":
    main()
