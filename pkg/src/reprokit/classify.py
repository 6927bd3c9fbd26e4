"""Root-cause classification of difference trees.

Each differing node with evidence gets run through an ordered rule list;
the first rule that fires names the cause. The rules mechanize the familiar
diagnosis patterns: archive metadata drift, embedded build dates, absolute
build paths, directory-order dependence, locale and timezone leakage,
uncontrolled randomness, and unzeroed padding. When nothing fires the node
is reported as Unknown rather than guessed at; a classifier of this kind
cannot wholly replace an engineer reading the diff.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass

from .compare import ByteRanges, DiffNode, MetaDiff, Status, TextDiff
from .varenv import BASE_EPOCH, CLOCK_SKEW_SECONDS


class RootCause(enum.Enum):
    TIMESTAMP = "timestamp"
    BUILD_PATH = "build_path"
    FS_ORDERING = "fs_ordering"
    ARCHIVE_METADATA = "archive_metadata"
    RANDOMNESS = "randomness"
    UNINITIALIZED_MEMORY = "uninitialized_memory"
    LOCALE_OR_TIMEZONE = "locale_or_timezone"
    UNKNOWN = "unknown"


class Confidence(enum.Enum):
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"

    def rank(self) -> int:
        return {"high": 0, "medium": 1, "low": 2}[self.value]


@dataclass(frozen=True)
class RootCauseFinding:
    cause: RootCause
    node_path: str
    confidence: Confidence
    evidence: tuple[str, str]


#: Half-width of the window in which a bare 9-10 digit integer is taken to
#: be a Unix timestamp: five years around either build's clock.
_EPOCH_WINDOW = 157_788_000

_DEFAULT_EPOCHS = (BASE_EPOCH, BASE_EPOCH + CLOCK_SKEW_SECONDS)

_META_FIELD_NAMES = {"mtime", "uid", "gid", "uname", "gname", "mode"}

_MONTHS = "Jan|Feb|Mar|Apr|May|Jun|Jul|Aug|Sep|Oct|Nov|Dec"
_WEEKDAYS = "Mon|Tue|Wed|Thu|Fri|Sat|Sun"

_DATE_PATTERNS = (
    # ISO-8601 date, optionally with time and zone designator.
    re.compile(
        r"\b\d{4}-\d{2}-\d{2}(?:[T ]\d{2}:\d{2}:\d{2}(?:Z|[+-]\d{2}:?\d{2})?)?\b"
    ),
    # RFC-2822: Tue, 09 Mar 2021 12:30:45 +0000
    re.compile(
        rf"\b(?:{_WEEKDAYS}), \d{{1,2}} (?:{_MONTHS}) \d{{4}}"
        r" \d{2}:\d{2}:\d{2}(?: [+-]\d{4})?"
    ),
    # ctime: Tue Mar  9 12:30:45 2021
    re.compile(
        rf"\b(?:{_WEEKDAYS}) (?:{_MONTHS}) [ \d]?\d \d{{2}}:\d{{2}}:\d{{2}} \d{{4}}\b"
    ),
    # The C preprocessor's date shape: Mar  9 2021 (day space-padded).
    re.compile(rf"\b(?:{_MONTHS}) [ \d]?\d \d{{4}}\b"),
)

_EPOCH_INT = re.compile(r"\b\d{9,10}\b")

_ABS_PATH = re.compile(r"(?<![\w/])/[\w.+-]+(?:/[\w.+-]+)+")

_RANDOM_TOKEN = re.compile(r"\b[A-Za-z0-9+/]{12,}={0,2}\b")

_TZ_OFFSET = re.compile(r"(?<![\d:])[+-]\d{2}:?\d{2}\b")

_MONTH_DAY_WORDS = {
    # English
    "january", "february", "march", "april", "may", "june", "july", "august",
    "september", "october", "november", "december",
    "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
    # French
    "janvier", "février", "mars", "avril", "mai", "juin", "juillet", "août",
    "septembre", "octobre", "novembre", "décembre",
    "lundi", "mardi", "mercredi", "jeudi", "vendredi", "samedi", "dimanche",
    # German
    "januar", "februar", "märz", "april", "juni", "juli", "august",
    "september", "oktober", "november", "dezember",
    "montag", "dienstag", "mittwoch", "donnerstag", "freitag", "samstag", "sonntag",
}

_TZ_ABBREVS = {
    "utc", "gmt", "cet", "cest", "eet", "eest", "est", "edt", "cst", "cdt",
    "mst", "mdt", "pst", "pdt", "bst", "jst", "nzst", "nzdt", "lint",
}

_WORD = re.compile(r"[^\W\d_]+", re.UNICODE)


def _minus_plus_text(hunks: tuple[str, ...]) -> tuple[str, str]:
    minus = [line[1:] for line in hunks if line.startswith("-")]
    plus = [line[1:] for line in hunks if line.startswith("+")]
    return "\n".join(minus), "\n".join(plus)


def _side_difference(first: set[str], second: set[str]) -> tuple[list[str], list[str]]:
    return sorted(first - second), sorted(second - first)


def shannon_entropy(token: str) -> float:
    """Bits per character over the token's own character distribution."""
    if not token:
        return 0.0
    counts: dict[str, int] = {}
    for ch in token:
        counts[ch] = counts.get(ch, 0) + 1
    total = len(token)
    return -sum((n / total) * math.log2(n / total) for n in counts.values())


def _date_strings(text: str, epochs: tuple[int, int]) -> set[str]:
    found: set[str] = set()
    for pattern in _DATE_PATTERNS:
        found.update(m.group(0) for m in pattern.finditer(text))
    for m in _EPOCH_INT.finditer(text):
        value = int(m.group(0))
        if any(abs(value - epoch) <= _EPOCH_WINDOW for epoch in epochs):
            found.add(m.group(0))
    return found


def _is_datelike(token: str, epochs: tuple[int, int]) -> bool:
    return bool(_date_strings(token, epochs))


# -- per-rule matchers; each returns a finding or None ----------------------


def _rule_archive_metadata(node: DiffNode) -> RootCauseFinding | None:
    if not isinstance(node.detail, MetaDiff):
        return None
    fields = {name for name, _, _ in node.detail.entries}
    if not fields or not fields <= _META_FIELD_NAMES:
        return None
    first = " ".join(f"{n}={a}" for n, a, _ in node.detail.entries)
    second = " ".join(f"{n}={b}" for n, _, b in node.detail.entries)
    content_same = all(c.status is Status.SAME for c in node.children)
    return RootCauseFinding(
        cause=RootCause.ARCHIVE_METADATA,
        node_path=node.path,
        confidence=Confidence.HIGH if content_same else Confidence.MEDIUM,
        evidence=(first, second),
    )


def _rule_timestamp(node: DiffNode, epochs: tuple[int, int]) -> RootCauseFinding | None:
    if not isinstance(node.detail, TextDiff):
        return None
    minus, plus = _minus_plus_text(node.detail.hunks)
    only_minus, only_plus = _side_difference(
        _date_strings(minus, epochs), _date_strings(plus, epochs)
    )
    if not only_minus and not only_plus:
        return None
    return RootCauseFinding(
        cause=RootCause.TIMESTAMP,
        node_path=node.path,
        confidence=Confidence.HIGH,
        evidence=(
            only_minus[0] if only_minus else "",
            only_plus[0] if only_plus else "",
        ),
    )


def _rule_build_path(node: DiffNode) -> RootCauseFinding | None:
    if not isinstance(node.detail, TextDiff):
        return None
    minus, plus = _minus_plus_text(node.detail.hunks)
    only_minus, only_plus = _side_difference(
        {m.group(0) for m in _ABS_PATH.finditer(minus)},
        {m.group(0) for m in _ABS_PATH.finditer(plus)},
    )
    for path_a in only_minus:
        for path_b in only_plus:
            if path_a.rsplit("/", 1)[-1] == path_b.rsplit("/", 1)[-1]:
                return RootCauseFinding(
                    cause=RootCause.BUILD_PATH,
                    node_path=node.path,
                    confidence=Confidence.HIGH,
                    evidence=(path_a, path_b),
                )
    return None


def _rule_fs_ordering(node: DiffNode) -> RootCauseFinding | None:
    if isinstance(node.detail, MetaDiff):
        for name, first, second in node.detail.entries:
            if name == "order":
                return RootCauseFinding(
                    cause=RootCause.FS_ORDERING,
                    node_path=node.path,
                    confidence=Confidence.HIGH,
                    evidence=(first, second),
                )
        return None
    if not isinstance(node.detail, TextDiff):
        return None
    minus_lines = [line[1:] for line in node.detail.hunks if line.startswith("-")]
    plus_lines = [line[1:] for line in node.detail.hunks if line.startswith("+")]
    if minus_lines and sorted(minus_lines) == sorted(plus_lines):
        return RootCauseFinding(
            cause=RootCause.FS_ORDERING,
            node_path=node.path,
            confidence=Confidence.HIGH,
            evidence=(minus_lines[0], plus_lines[0]),
        )
    return None


def _locale_tokens(text: str) -> set[str]:
    tokens = {w.group(0).lower() for w in _WORD.finditer(text)}
    found = {t for t in tokens if t in _MONTH_DAY_WORDS or t in _TZ_ABBREVS}
    found.update(m.group(0) for m in _TZ_OFFSET.finditer(text))
    return found


def _rule_locale_timezone(node: DiffNode) -> RootCauseFinding | None:
    if not isinstance(node.detail, TextDiff):
        return None
    minus, plus = _minus_plus_text(node.detail.hunks)
    only_minus, only_plus = _side_difference(_locale_tokens(minus), _locale_tokens(plus))
    if not only_minus or not only_plus:
        return None
    return RootCauseFinding(
        cause=RootCause.LOCALE_OR_TIMEZONE,
        node_path=node.path,
        confidence=Confidence.HIGH,
        evidence=(only_minus[0], only_plus[0]),
    )


def _random_candidates(text: str, epochs: tuple[int, int]) -> set[str]:
    out = set()
    for m in _RANDOM_TOKEN.finditer(text):
        token = m.group(0)
        if _is_datelike(token, epochs):
            continue
        body = token.rstrip("=")
        is_digits = body.isdigit()
        is_hex = bool(re.fullmatch(r"[0-9a-f]+|[0-9A-F]+", body))
        has_digits = sum(ch.isdigit() for ch in body) >= 2
        if not (is_digits or is_hex or has_digits):
            continue
        if shannon_entropy(token) > 3.0:
            out.add(token)
    return out


def _rule_randomness(node: DiffNode, epochs: tuple[int, int]) -> RootCauseFinding | None:
    if not isinstance(node.detail, TextDiff):
        return None
    minus, plus = _minus_plus_text(node.detail.hunks)
    only_minus, only_plus = _side_difference(
        _random_candidates(minus, epochs), _random_candidates(plus, epochs)
    )
    for token_a in only_minus:
        for token_b in only_plus:
            if len(token_a) == len(token_b):
                return RootCauseFinding(
                    cause=RootCause.RANDOMNESS,
                    node_path=node.path,
                    confidence=Confidence.HIGH,
                    evidence=(token_a, token_b),
                )
    return None


def _rule_uninitialized_memory(node: DiffNode) -> RootCauseFinding | None:
    if not isinstance(node.detail, ByteRanges):
        return None
    for r in node.detail.ranges:
        if r.first_zero != r.second_zero:
            return RootCauseFinding(
                cause=RootCause.UNINITIALIZED_MEMORY,
                node_path=node.path,
                confidence=Confidence.MEDIUM,
                evidence=(r.first_hex or "(empty)", r.second_hex or "(empty)"),
            )
    return None


def _classify_node(node: DiffNode, epochs: tuple[int, int]) -> RootCauseFinding:
    finding = (
        _rule_archive_metadata(node)
        or _rule_timestamp(node, epochs)
        or _rule_build_path(node)
        or _rule_fs_ordering(node)
        or _rule_locale_timezone(node)
        or _rule_randomness(node, epochs)
        or _rule_uninitialized_memory(node)
    )
    if finding is not None:
        return finding
    if isinstance(node.detail, TextDiff):
        minus, plus = _minus_plus_text(node.detail.hunks)
        evidence = (minus[:120], plus[:120])
    elif isinstance(node.detail, ByteRanges) and node.detail.ranges:
        evidence = (
            node.detail.ranges[0].first_hex or "(empty)",
            node.detail.ranges[0].second_hex or "(empty)",
        )
    else:
        evidence = ("", "")
    return RootCauseFinding(
        cause=RootCause.UNKNOWN,
        node_path=node.path,
        confidence=Confidence.LOW,
        evidence=evidence,
    )


def classify(root: DiffNode, epochs: tuple[int, int] | None = None) -> list[RootCauseFinding]:
    """Produce one finding per differing node that carries evidence.

    ``epochs`` supplies the two builds' clock values for recognizing bare
    Unix-timestamp integers; it defaults to the stock profile pair's clocks.
    Findings come back sorted by node path (tree order breaks ties), and
    classification is total: nodes no rule explains are reported Unknown.
    """
    chosen = epochs if epochs is not None else _DEFAULT_EPOCHS
    findings: list[RootCauseFinding] = []

    def walk(node: DiffNode) -> None:
        if node.status is Status.DIFFERS and node.detail is not None:
            findings.append(_classify_node(node, chosen))
        for child in node.children:
            walk(child)

    walk(root)
    findings.sort(key=lambda f: f.node_path)
    return findings


def primary_finding(findings: list[RootCauseFinding]) -> RootCauseFinding | None:
    """The headline diagnosis: most confident first, then earliest path."""
    if not findings:
        return None
    return min(findings, key=lambda f: (f.confidence.rank(), f.node_path))


def findings_to_json(findings: list[RootCauseFinding]) -> list[dict]:
    return [
        {
            "cause": f.cause.value,
            "node_path": f.node_path,
            "confidence": f.confidence.value,
            "evidence": [f.evidence[0], f.evidence[1]],
        }
        for f in findings
    ]
