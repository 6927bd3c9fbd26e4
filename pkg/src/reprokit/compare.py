"""Recursive artifact comparator.

Two byte strings go in; a difference tree comes out. Containers (gzip, tar,
zip) are unpacked and their members compared pairwise by name, so a one-line
change inside a tarball inside a gzip surfaces as a text diff three levels
down rather than as an opaque binary blob. Each tree node records where it
sits (a ``!``-separated descent path), what it is, whether it differs, and
one piece of evidence: unified text hunks, localized byte ranges, or a
metadata field table.

Reports render in three styles: an indented text tree, canonical JSON with
stable key order, and a self-contained HTML page with side-by-side hunks.
"""

from __future__ import annotations

import difflib
import enum
import html
import json
from collections.abc import Iterable
from dataclasses import dataclass

from .errors import FormatError
from .formats import Member, parse_gzip, parse_tar, parse_zip

DEFAULT_MAX_DEPTH = 8

#: Byte positions closer than this merge into one reported range.
_RESYNC_WINDOW = 64

#: Cap on the hex evidence excerpt kept per range side.
_EXCERPT_BYTES = 64

_MAX_RANGES = 32

_META_FIELDS = ("mtime", "uid", "gid", "uname", "gname", "mode")


class Format(enum.Enum):
    GZIP = "gzip"
    TAR = "tar"
    ZIP = "zip"
    TEXT = "text"
    BINARY = "binary"


class Status(enum.Enum):
    SAME = "same"
    DIFFERS = "differs"
    ONLY_IN_FIRST = "only_in_first"
    ONLY_IN_SECOND = "only_in_second"


@dataclass(frozen=True)
class TextDiff:
    """Unified-diff hunks (the ``@@`` lines and their bodies, no file headers)."""

    hunks: tuple[str, ...]


@dataclass(frozen=True)
class ByteRange:
    offset: int
    len_first: int
    len_second: int
    first_hex: str
    second_hex: str
    first_zero: bool
    second_zero: bool


@dataclass(frozen=True)
class ByteRanges:
    ranges: tuple[ByteRange, ...]


@dataclass(frozen=True)
class MetaDiff:
    """Differing metadata fields as (field, first, second) rows."""

    entries: tuple[tuple[str, str, str], ...]


Detail = TextDiff | ByteRanges | MetaDiff


@dataclass(frozen=True)
class DiffNode:
    path: str
    format: Format
    status: Status
    detail: Detail | None
    children: tuple[DiffNode, ...] = ()
    depth_limited: bool = False


def detect_format(data: bytes) -> Format:
    """Classify bytes by magic numbers; falls back to text, then binary."""
    if data[0:2] == b"\x1f\x8b":
        return Format.GZIP
    if data[0:4] == b"PK\x03\x04":
        return Format.ZIP
    if data[257:262] == b"ustar":
        return Format.TAR
    if b"\x00" not in data:
        try:
            data.decode("utf-8")
            return Format.TEXT
        except UnicodeDecodeError:
            pass
    return Format.BINARY


def unpack(data: bytes, fmt: Format) -> list[Member]:
    """Open one container level. Gzip yields a single pseudo-member."""
    if fmt is Format.GZIP:
        gs = parse_gzip(data)
        return [Member(name=gs.filename or "data", content=gs.payload, mtime=gs.mtime)]
    if fmt is Format.TAR:
        return parse_tar(data)
    if fmt is Format.ZIP:
        return parse_zip(data)
    raise FormatError(f"{fmt.value} is not a container format")


# -- byte-range localization ------------------------------------------------


def _all_zero(data: bytes) -> bool:
    return len(data) > 0 and data.strip(b"\x00") == b""


def _make_range(a: bytes, b: bytes, offset: int, la: int, lb: int) -> ByteRange:
    span_a = a[offset:offset + la]
    span_b = b[offset:offset + lb]
    return ByteRange(
        offset=offset,
        len_first=la,
        len_second=lb,
        first_hex=span_a[:_EXCERPT_BYTES].hex(),
        second_hex=span_b[:_EXCERPT_BYTES].hex(),
        first_zero=_all_zero(span_a),
        second_zero=_all_zero(span_b),
    )


def byte_ranges(a: bytes, b: bytes) -> ByteRanges:
    """Localize differing spans, symmetrically in the two inputs.

    Equal-length inputs get their differing positions clustered (gaps below
    the resync window merge); unequal lengths reduce to one range after
    common prefix and suffix trimming.
    """
    if a == b:
        return ByteRanges(())
    if len(a) == len(b):
        clusters: list[list[int]] = []
        for i, (x, y) in enumerate(zip(a, b)):
            if x == y:
                continue
            if clusters and i - clusters[-1][1] < _RESYNC_WINDOW:
                clusters[-1][1] = i + 1
            else:
                clusters.append([i, i + 1])
        if len(clusters) > _MAX_RANGES:
            clusters = [[clusters[0][0], clusters[-1][1]]]
        return ByteRanges(
            tuple(_make_range(a, b, s, e - s, e - s) for s, e in clusters)
        )
    limit = min(len(a), len(b))
    prefix = 0
    while prefix < limit and a[prefix] == b[prefix]:
        prefix += 1
    suffix = 0
    while suffix < limit - prefix and a[-1 - suffix] == b[-1 - suffix]:
        suffix += 1
    return ByteRanges(
        (_make_range(a, b, prefix, len(a) - prefix - suffix, len(b) - prefix - suffix),)
    )


# -- tree construction ------------------------------------------------------


def _text_lines(data: bytes) -> list[str]:
    return data.decode("utf-8").splitlines()


def _unified_hunks(a: bytes, b: bytes) -> tuple[str, ...]:
    lines = difflib.unified_diff(
        _text_lines(a), _text_lines(b), fromfile="first", tofile="second", lineterm=""
    )
    return tuple(line for line in lines if not line.startswith(("--- ", "+++ ")))


def _meta_entries(ma: Member, mb: Member) -> tuple[tuple[str, str, str], ...]:
    da, db = ma.meta(), mb.meta()
    out = []
    for name in _META_FIELDS:
        va, vb = da.get(name), db.get(name)
        if va is None and vb is None:
            continue
        if va != vb:
            out.append((name, va if va is not None else "", vb if vb is not None else ""))
    return tuple(out)


def _index_members(members: list[Member]) -> dict[str, Member] | None:
    index: dict[str, Member] = {}
    for m in members:
        if m.name in index:
            return None
        index[m.name] = m
    return index


def _compare_members(
    a: bytes,
    b: bytes,
    fmt: Format,
    path: str,
    depth: int,
    max_depth: int,
) -> DiffNode | None:
    """Container comparison; None means fall back to a byte comparison."""
    try:
        members_a = unpack(a, fmt)
        members_b = unpack(b, fmt)
    except FormatError:
        return None
    if fmt is Format.GZIP:
        # Single member per side; pair positionally even when names differ.
        shared = members_a[0].name if members_a[0].name == members_b[0].name else "data"
        members_a = [Member(name=shared, content=members_a[0].content, mtime=members_a[0].mtime)]
        members_b = [Member(name=shared, content=members_b[0].content, mtime=members_b[0].mtime)]
    index_a = _index_members(members_a)
    index_b = _index_members(members_b)
    if index_a is None or index_b is None:
        return None

    children: list[DiffNode] = []
    for name in sorted(set(index_a) | set(index_b), key=lambda n: n.encode()):
        child_path = f"{path}!{name}"
        in_a, in_b = name in index_a, name in index_b
        if in_a and not in_b:
            m = index_a[name]
            children.append(
                DiffNode(child_path, detect_format(m.content), Status.ONLY_IN_FIRST, None)
            )
            continue
        if in_b and not in_a:
            m = index_b[name]
            children.append(
                DiffNode(child_path, detect_format(m.content), Status.ONLY_IN_SECOND, None)
            )
            continue
        ma, mb = index_a[name], index_b[name]
        content_node = compare_bytes(
            ma.content, mb.content, child_path, depth + 1, max_depth
        )
        meta = _meta_entries(ma, mb)
        if meta:
            children.append(
                DiffNode(
                    path=child_path,
                    format=content_node.format,
                    status=Status.DIFFERS,
                    detail=MetaDiff(meta),
                    children=(content_node,),
                )
            )
        else:
            children.append(content_node)

    detail: Detail | None = None
    names_a = [m.name for m in members_a]
    names_b = [m.name for m in members_b]
    if names_a != names_b and set(names_a) == set(names_b):
        detail = MetaDiff((("order", ",".join(names_a), ",".join(names_b)),))
    elif all(c.status is Status.SAME for c in children):
        # Same logical content, different container bytes (encoder settings,
        # stripped fields, padding): report the raw spans.
        detail = byte_ranges(a, b)
    return DiffNode(
        path=path,
        format=fmt,
        status=Status.DIFFERS,
        detail=detail,
        children=tuple(children),
    )


def compare_bytes(
    a: bytes,
    b: bytes,
    path: str = "artifact",
    depth: int = 0,
    max_depth: int = DEFAULT_MAX_DEPTH,
) -> DiffNode:
    """Compare two byte strings recursively; the result tree is pure data.

    Identical inputs give a Same node with no children. Containers of the
    same format are unpacked and matched member-by-member; two texts produce
    unified hunks; everything else produces byte ranges. Past ``max_depth``
    container levels the node is closed out with whole-payload ranges and a
    depth_limited marker.
    """
    fmt_a, fmt_b = detect_format(a), detect_format(b)
    fmt = fmt_a if fmt_a is fmt_b else Format.BINARY
    if a == b:
        return DiffNode(path=path, format=fmt, status=Status.SAME, detail=None)
    if depth >= max_depth:
        return DiffNode(
            path=path,
            format=fmt,
            status=Status.DIFFERS,
            detail=byte_ranges(a, b),
            depth_limited=True,
        )
    if fmt_a is fmt_b and fmt_a in (Format.GZIP, Format.TAR, Format.ZIP):
        node = _compare_members(a, b, fmt_a, path, depth, max_depth)
        if node is not None:
            return node
    if fmt_a is Format.TEXT and fmt_b is Format.TEXT:
        hunks = _unified_hunks(a, b)
        if hunks:
            return DiffNode(
                path=path, format=Format.TEXT, status=Status.DIFFERS, detail=TextDiff(hunks)
            )
        # Same line content, different bytes (line endings, final newline).
        fmt = Format.TEXT
    return DiffNode(
        path=path, format=fmt, status=Status.DIFFERS, detail=byte_ranges(a, b)
    )


def compare_files(path_a, path_b, root_path: str | None = None,
                  max_depth: int = DEFAULT_MAX_DEPTH) -> DiffNode:
    from pathlib import Path

    a, b = Path(path_a), Path(path_b)
    return compare_bytes(
        a.read_bytes(), b.read_bytes(), root_path if root_path is not None else a.name,
        max_depth=max_depth,
    )


# -- rendering --------------------------------------------------------------


class ReportStyle(enum.Enum):
    TEXT = "text"
    JSON = "json"
    HTML = "html"


_STATUS_WORDS = {
    Status.SAME: "identical",
    Status.DIFFERS: "differs",
    Status.ONLY_IN_FIRST: "only in first",
    Status.ONLY_IN_SECOND: "only in second",
}


def _describe_range(r: ByteRange) -> str:
    parts = [f"offset {r.offset}: {r.len_first} vs {r.len_second} bytes"]
    if r.first_hex or r.second_hex:
        parts.append(f"first {r.first_hex or '(empty)'}, second {r.second_hex or '(empty)'}")
    if r.first_zero:
        parts.append("first side all zeros")
    if r.second_zero:
        parts.append("second side all zeros")
    return "; ".join(parts)


def _render_text_node(node: DiffNode, indent: int, out: list[str]) -> None:
    pad = "  " * indent
    flag = " (depth limit reached)" if node.depth_limited else ""
    out.append(f"{pad}{node.path} [{node.format.value}] {_STATUS_WORDS[node.status]}{flag}")
    body = "  " * (indent + 1)
    if isinstance(node.detail, TextDiff):
        for line in node.detail.hunks:
            out.append(f"{body}{line}")
    elif isinstance(node.detail, ByteRanges):
        for r in node.detail.ranges:
            out.append(f"{body}{_describe_range(r)}")
    elif isinstance(node.detail, MetaDiff):
        for name, first, second in node.detail.entries:
            out.append(f"{body}{name}: {first} != {second}")
    for child in node.children:
        if child.status is Status.SAME:
            continue
        _render_text_node(child, indent + 1, out)


def _detail_to_json(detail: Detail | None):
    if detail is None:
        return None
    if isinstance(detail, TextDiff):
        return {"kind": "text", "hunks": list(detail.hunks)}
    if isinstance(detail, ByteRanges):
        return {
            "kind": "bytes",
            "ranges": [
                {
                    "offset": r.offset,
                    "len_first": r.len_first,
                    "len_second": r.len_second,
                    "first_hex": r.first_hex,
                    "second_hex": r.second_hex,
                    "first_zero": r.first_zero,
                    "second_zero": r.second_zero,
                }
                for r in detail.ranges
            ],
        }
    return {"kind": "meta", "entries": [list(e) for e in detail.entries]}


def node_to_json(node: DiffNode) -> dict:
    out = {
        "path": node.path,
        "format": node.format.value,
        "status": node.status.value,
        "detail": _detail_to_json(node.detail),
        "children": [node_to_json(c) for c in node.children],
    }
    if node.depth_limited:
        out["depth_limited"] = True
    return out


def _hunk_rows(hunks: tuple[str, ...]) -> list[str]:
    rows = []
    for line in hunks:
        esc = html.escape(line)
        if line.startswith("@@"):
            rows.append(f'<tr class="hunk"><td colspan="2">{esc}</td></tr>')
        elif line.startswith("-"):
            rows.append(f'<tr><td class="del">{esc}</td><td></td></tr>')
        elif line.startswith("+"):
            rows.append(f'<tr><td></td><td class="add">{esc}</td></tr>')
        else:
            rows.append(f'<tr><td class="ctx">{esc}</td><td class="ctx">{esc}</td></tr>')
    return rows


def _render_html_node(node: DiffNode, out: list[str]) -> None:
    status_class = node.status.value.replace("_", "-")
    out.append('<li class="node">')
    out.append(
        f'<span class="path">{html.escape(node.path)}</span> '
        f'<span class="fmt">[{node.format.value}]</span> '
        f'<span class="status {status_class}">{_STATUS_WORDS[node.status]}</span>'
    )
    if node.depth_limited:
        out.append('<span class="flag">depth limit reached</span>')
    if isinstance(node.detail, TextDiff):
        out.append('<table class="diff"><tr><th>first</th><th>second</th></tr>')
        out.extend(_hunk_rows(node.detail.hunks))
        out.append("</table>")
    elif isinstance(node.detail, ByteRanges):
        out.append("<ul>")
        for r in node.detail.ranges:
            out.append(f"<li><code>{html.escape(_describe_range(r))}</code></li>")
        out.append("</ul>")
    elif isinstance(node.detail, MetaDiff):
        out.append('<table class="diff"><tr><th>field</th><th>first</th><th>second</th></tr>')
        for name, first, second in node.detail.entries:
            out.append(
                "<tr><td>{}</td><td>{}</td><td>{}</td></tr>".format(
                    html.escape(name), html.escape(first), html.escape(second)
                )
            )
        out.append("</table>")
    differing = [c for c in node.children if c.status is not Status.SAME]
    if differing:
        out.append("<ul>")
        for child in differing:
            _render_html_node(child, out)
        out.append("</ul>")
    out.append("</li>")


_HTML_STYLE = (
    "body{font-family:monospace;margin:1em}"
    "ul{list-style:none;padding-left:1.2em}"
    ".path{font-weight:bold}"
    ".fmt{color:#555}"
    ".status.differs{color:#a00}"
    ".status.same{color:#070}"
    ".status.only-in-first,.status.only-in-second{color:#850}"
    ".flag{color:#a0a;margin-left:.5em}"
    "table.diff{border-collapse:collapse;margin:.3em 0}"
    "table.diff td,table.diff th{border:1px solid #bbb;padding:0 .4em;"
    "vertical-align:top;white-space:pre-wrap}"
    "td.del{background:#fdd}td.add{background:#dfd}td.ctx{color:#444}"
    "tr.hunk td{background:#eef;color:#225}"
)


def render_html_fragment(root: DiffNode) -> str:
    """One difference tree as an embeddable HTML list."""
    if root.status is Status.SAME:
        return "<p>artifacts are identical</p>"
    body: list[str] = []
    _render_html_node(root, body)
    return "<ul>" + "".join(body) + "</ul>"


def render_html_page(fragments: Iterable[str], heading: str = "artifact comparison") -> bytes:
    """A self-contained HTML page around pre-rendered fragments."""
    parts = [
        "<!DOCTYPE html>",
        '<html><head><meta charset="utf-8">',
        f"<title>{html.escape(heading)}</title>",
        f"<style>{_HTML_STYLE}</style>",
        "</head><body>",
        f"<h1>{html.escape(heading)}</h1>",
        *fragments,
        "</body></html>",
    ]
    return ("\n".join(parts) + "\n").encode("utf-8")


def render_report(root: DiffNode, style: ReportStyle) -> bytes:
    """Render a difference tree; equal trees always yield equal bytes."""
    if style is ReportStyle.TEXT:
        if root.status is Status.SAME:
            return b"artifacts are identical\n"
        lines: list[str] = []
        _render_text_node(root, 0, lines)
        return ("\n".join(lines) + "\n").encode("utf-8")
    if style is ReportStyle.JSON:
        text = json.dumps(node_to_json(root), indent=2, ensure_ascii=False)
        return (text + "\n").encode("utf-8")
    return render_html_page([render_html_fragment(root)])
