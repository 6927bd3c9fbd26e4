"""Divergent build-environment profiles for adversarial rebuilding.

A :class:`VariationProfile` bundles every controlled source of variation:
clock hint, locale, timezone, filesystem ordering, build path, hostname,
username, and umask. The default pair disagrees on every single knob, so a
build that is bit-for-bit identical under both has demonstrated insensitivity
to all of them at once.

Variation is delivered through an environment contract rather than by faking
the kernel: cooperating builds read ``REPRO_EPOCH`` for the clock,
``REPRO_FS_ORDER`` for directory-walk order, and the usual ``TZ`` and
``LC_ALL`` for rendering. The staged source tree is additionally *copied* in
the profile's ordering, emulating an ordering-hostile filesystem.
"""

from __future__ import annotations

import os
import shutil
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError, StructuralError, ValidationError

#: Fixed reference instant all relative clock offsets are applied to.
BASE_EPOCH = 1_600_000_000

#: 547.875 days, the "second build runs a year and a half later" offset.
CLOCK_SKEW_SECONDS = 47_336_400

_U64 = 0xFFFFFFFFFFFFFFFF


# -- filesystem ordering ----------------------------------------------------


class FsOrdering:
    """Base for the three directory-walk orders. Use the subclasses."""

    def token(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Forward(FsOrdering):
    def token(self) -> str:
        return "forward"


@dataclass(frozen=True)
class Reverse(FsOrdering):
    def token(self) -> str:
        return "reverse"


@dataclass(frozen=True)
class Shuffled(FsOrdering):
    seed: int

    def __post_init__(self) -> None:
        if not 0 <= self.seed <= _U64:
            raise ValidationError("shuffle seed must fit in 64 bits")

    def token(self) -> str:
        return f"shuffled:{self.seed}"


def ordering_from_token(token: str) -> FsOrdering:
    if token == "forward":
        return Forward()
    if token == "reverse":
        return Reverse()
    if token.startswith("shuffled:"):
        seed_s = token[len("shuffled:"):]
        if not seed_s.isdigit():
            raise ParseError(f"bad shuffle seed in {token!r}")
        return Shuffled(int(seed_s))
    raise ParseError(f"unknown ordering token {token!r}")


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _U64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return state, z ^ (z >> 31)


def deterministic_shuffle(items, seed: int) -> list:
    """Seeded Fisher-Yates permutation, stable across platforms and runs."""
    out = list(items)
    state = seed & _U64
    for i in range(len(out) - 1, 0, -1):
        state, word = _splitmix64(state)
        j = word % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def ordered_entries(directory: Path | str, ordering: FsOrdering) -> list[str]:
    """Names in ``directory`` in the profile's order, never the system order.

    Forward is bytewise ascending, Reverse descending, Shuffled a seeded
    permutation of the ascending list.
    """
    names = sorted(os.listdir(directory), key=lambda n: n.encode())
    if isinstance(ordering, Forward):
        return names
    if isinstance(ordering, Reverse):
        return list(reversed(names))
    if isinstance(ordering, Shuffled):
        return deterministic_shuffle(names, ordering.seed)
    raise ValidationError(f"unknown ordering {ordering!r}")


# -- profiles ---------------------------------------------------------------


@dataclass(frozen=True)
class VariationProfile:
    name: str
    env: dict[str, str]
    clock_skew_seconds: int = 0
    build_path_component: str = "build"
    fs_ordering: FsOrdering = Forward()
    umask: int = 0o022
    locale: str = "C"
    timezone: str = "UTC"
    hostname: str = "host"
    username: str = "builder"


@dataclass(frozen=True)
class BuildRequest:
    source_dir: Path
    build_entry: str
    output_subdir: str
    timeout_seconds: int = 300


@dataclass(frozen=True)
class PreparedBuild:
    workdir: Path
    env: dict[str, str]
    profile: VariationProfile


def materialize_env(
    clock_skew_seconds: int,
    fs_ordering: FsOrdering,
    umask: int,
    locale: str,
    timezone: str,
    hostname: str,
    username: str,
    source_date_epoch: int | None,
) -> dict[str, str]:
    """The exact environment a build under this profile receives."""
    env = {
        "TZ": timezone,
        "LC_ALL": locale,
        "LANG": locale,
        "HOSTNAME": hostname,
        "USER": username,
        "UMASK": format(umask, "03o"),
        "REPRO_EPOCH": str(BASE_EPOCH + clock_skew_seconds),
        "REPRO_FS_ORDER": fs_ordering.token(),
    }
    if source_date_epoch is not None:
        env["SOURCE_DATE_EPOCH"] = str(source_date_epoch)
    return env


def make_profile(
    name: str,
    clock_skew_seconds: int,
    build_path_component: str,
    fs_ordering: FsOrdering,
    umask: int,
    locale: str,
    timezone: str,
    hostname: str,
    username: str,
    source_date_epoch: int | None = None,
) -> VariationProfile:
    if (
        not build_path_component
        or "/" in build_path_component
        or "\\" in build_path_component
        or build_path_component in (".", "..")
    ):
        raise ValidationError("build_path_component must be a single path segment")
    env = materialize_env(
        clock_skew_seconds, fs_ordering, umask, locale, timezone,
        hostname, username, source_date_epoch,
    )
    return VariationProfile(
        name=name,
        env=env,
        clock_skew_seconds=clock_skew_seconds,
        build_path_component=build_path_component,
        fs_ordering=fs_ordering,
        umask=umask,
        locale=locale,
        timezone=timezone,
        hostname=hostname,
        username=username,
    )


def default_profiles() -> tuple[VariationProfile, VariationProfile]:
    """The stock adversarial pair: a calm baseline and a hostile twin.

    The second profile differs from the first in every knob: clock pushed
    eighteen months ahead, French locale, a UTC+14 timezone, reversed
    filesystem order, a much longer build path, different hostname, user,
    and umask. Only the first exports SOURCE_DATE_EPOCH, so builds that
    depend on its presence get exercised both ways.
    """
    first = make_profile(
        name="baseline",
        clock_skew_seconds=0,
        build_path_component="build-1st",
        fs_ordering=Forward(),
        umask=0o022,
        locale="C",
        timezone="UTC",
        hostname="alpha",
        username="builder-a",
        source_date_epoch=0,
    )
    second = make_profile(
        name="divergent",
        clock_skew_seconds=CLOCK_SKEW_SECONDS,
        build_path_component="build-2nd-with-a-much-longer-name",
        fs_ordering=Reverse(),
        umask=0o077,
        locale="fr_FR.UTF-8",
        timezone="Pacific/Kiritimati",
        hostname="beta",
        username="builder-b",
        source_date_epoch=None,
    )
    return first, second


_PROFILE_KNOBS = {
    "name", "clock_skew_seconds", "build_path_component", "fs_ordering",
    "umask", "locale", "timezone", "hostname", "username", "source_date_epoch",
}


def load_profile(path: Path | str) -> VariationProfile:
    """Read a profile from a ``knob = value`` config file.

    Lines starting with ``#`` and blank lines are skipped. All knobs except
    ``source_date_epoch`` are required; ``umask`` is octal, ``fs_ordering``
    uses the forward / reverse / shuffled:<seed> tokens.
    """
    values: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError("expected 'knob = value'", line_no)
        key, value = key.strip(), value.strip()
        if key not in _PROFILE_KNOBS:
            raise ParseError(f"unknown knob {key!r}", line_no)
        if key in values:
            raise ParseError(f"duplicate knob {key!r}", line_no)
        values[key] = value
    missing = sorted(_PROFILE_KNOBS - {"source_date_epoch"} - values.keys())
    if missing:
        raise ParseError(f"missing knobs: {', '.join(missing)}")
    try:
        skew = int(values["clock_skew_seconds"])
        umask = int(values["umask"], 8)
        sde = int(values["source_date_epoch"]) if "source_date_epoch" in values else None
    except ValueError as err:
        raise ParseError(f"bad numeric knob: {err}") from None
    return make_profile(
        name=values["name"],
        clock_skew_seconds=skew,
        build_path_component=values["build_path_component"],
        fs_ordering=ordering_from_token(values["fs_ordering"]),
        umask=umask,
        locale=values["locale"],
        timezone=values["timezone"],
        hostname=values["hostname"],
        username=values["username"],
        source_date_epoch=sde,
    )


# -- staging ----------------------------------------------------------------


def validate_request(req: BuildRequest) -> None:
    entry = Path(req.source_dir) / req.build_entry
    if not entry.is_file():
        raise ValidationError(f"build entry not found: {entry}")
    if not os.access(entry, os.X_OK):
        raise ValidationError(f"build entry not executable: {entry}")
    if Path(req.output_subdir).is_absolute():
        raise ValidationError("output_subdir must be relative")
    if req.timeout_seconds <= 0:
        raise ValidationError("timeout_seconds must be positive")


def _copy_tree_ordered(src: Path, dst: Path, ordering: FsOrdering) -> None:
    for name in ordered_entries(src, ordering):
        child = src / name
        target = dst / name
        if child.is_symlink():
            raise StructuralError(f"symlink not supported in source tree: {child}")
        if child.is_dir():
            target.mkdir()
            _copy_tree_ordered(child, target, ordering)
        elif child.is_file():
            shutil.copy(child, target)
        else:
            raise StructuralError(f"unsupported file type: {child}")


def apply_profile(
    profile: VariationProfile, req: BuildRequest, staging_root: Path | str
) -> PreparedBuild:
    """Stage the source under the profile's path, in the profile's order.

    The returned environment map is the entire environment the build child
    should receive; nothing is inherited from this process. A pre-existing
    workdir is an error, never reused.
    """
    validate_request(req)
    workdir = Path(staging_root).resolve() / profile.build_path_component
    if workdir.exists():
        raise StructuralError(f"workdir already exists: {workdir}")
    workdir.mkdir(parents=True)
    _copy_tree_ordered(Path(req.source_dir), workdir, profile.fs_ordering)
    return PreparedBuild(workdir=workdir, env=dict(profile.env), profile=profile)
