"""Variation profiles, orderings, environment materialization, staging."""

from __future__ import annotations

import os

import pytest

from reprokit.errors import ParseError, StructuralError, ValidationError
from reprokit.varenv import (
    BASE_EPOCH,
    CLOCK_SKEW_SECONDS,
    BuildRequest,
    Forward,
    Reverse,
    Shuffled,
    apply_profile,
    default_profiles,
    deterministic_shuffle,
    load_profile,
    make_profile,
    materialize_env,
    ordered_entries,
    ordering_from_token,
    validate_request,
)


def test_ordering_tokens_round_trip():
    for ordering in (Forward(), Reverse(), Shuffled(5), Shuffled(2**64 - 1)):
        assert ordering_from_token(ordering.token()) == ordering
    assert Forward().token() == "forward"
    assert Reverse().token() == "reverse"
    assert Shuffled(7).token() == "shuffled:7"


@pytest.mark.parametrize("token", ["", "random", "shuffled", "shuffled:", "shuffled:x", "shuffled:-1"])
def test_ordering_from_token_rejects_garbage(token):
    with pytest.raises(ParseError):
        ordering_from_token(token)


def test_ordering_from_token_rejects_overflowing_seed():
    with pytest.raises(ValidationError):
        ordering_from_token(f"shuffled:{2**64}")


@pytest.mark.parametrize("seed", [-1, 2**64])
def test_shuffled_seed_range(seed):
    with pytest.raises(ValidationError):
        Shuffled(seed)


def test_deterministic_shuffle_is_stable_permutation():
    items = [f"item-{i:02d}" for i in range(12)]
    once = deterministic_shuffle(items, 42)
    again = deterministic_shuffle(items, 42)
    assert once == again
    assert sorted(once) == items
    assert deterministic_shuffle(items, 43) != once


def test_ordered_entries(tmp_path):
    for name in ("cherry", "apple", "banana", "damson"):
        (tmp_path / name).write_text(name)
    assert ordered_entries(tmp_path, Forward()) == ["apple", "banana", "cherry", "damson"]
    assert ordered_entries(tmp_path, Reverse()) == ["damson", "cherry", "banana", "apple"]
    shuffled = ordered_entries(tmp_path, Shuffled(9))
    assert shuffled == deterministic_shuffle(["apple", "banana", "cherry", "damson"], 9)
    assert sorted(shuffled) == ["apple", "banana", "cherry", "damson"]


def test_default_profiles_divergence():
    first, second = default_profiles()
    assert first.name != second.name
    assert first.clock_skew_seconds == 0
    assert second.clock_skew_seconds == CLOCK_SKEW_SECONDS
    assert CLOCK_SKEW_SECONDS == 47_336_400
    assert first.build_path_component != second.build_path_component
    assert len(first.build_path_component) != len(second.build_path_component)
    assert first.fs_ordering != second.fs_ordering
    assert first.umask != second.umask
    assert first.locale != second.locale
    assert first.timezone != second.timezone
    assert first.hostname != second.hostname
    assert first.username != second.username


def test_default_profile_environments():
    first, second = default_profiles()
    assert first.env["REPRO_EPOCH"] == str(BASE_EPOCH)
    assert second.env["REPRO_EPOCH"] == str(BASE_EPOCH + CLOCK_SKEW_SECONDS)
    assert first.env["SOURCE_DATE_EPOCH"] == "0"
    assert "SOURCE_DATE_EPOCH" not in second.env
    assert first.env["UMASK"] == "022"
    assert second.env["UMASK"] == "077"
    assert first.env["REPRO_FS_ORDER"] == "forward"
    assert second.env["REPRO_FS_ORDER"] == "reverse"
    for profile in (first, second):
        assert profile.env["TZ"] == profile.timezone
        assert profile.env["LC_ALL"] == profile.locale
        assert profile.env["LANG"] == profile.locale
        assert profile.env["HOSTNAME"] == profile.hostname
        assert profile.env["USER"] == profile.username


def test_materialize_env_exact():
    env = materialize_env(
        clock_skew_seconds=10,
        fs_ordering=Shuffled(3),
        umask=0o002,
        locale="C.UTF-8",
        timezone="Europe/Berlin",
        hostname="box",
        username="worker",
        source_date_epoch=None,
    )
    assert env == {
        "TZ": "Europe/Berlin",
        "LC_ALL": "C.UTF-8",
        "LANG": "C.UTF-8",
        "HOSTNAME": "box",
        "USER": "worker",
        "UMASK": "002",
        "REPRO_EPOCH": str(BASE_EPOCH + 10),
        "REPRO_FS_ORDER": "shuffled:3",
    }


def test_make_profile_rejects_bad_path_component():
    for bad in ("", "a/b", "..", "."):
        with pytest.raises(ValidationError):
            make_profile(
                name="p",
                clock_skew_seconds=0,
                build_path_component=bad,
                fs_ordering=Forward(),
                umask=0o022,
                locale="C",
                timezone="UTC",
                hostname="h",
                username="u",
            )


def test_load_profile(tmp_path):
    config = tmp_path / "profile.conf"
    config.write_text(
        "# build environment\n"
        "name = custom\n"
        "clock_skew_seconds = 60\n"
        "build_path_component = work\n"
        "fs_ordering = shuffled:11\n"
        "umask = 027\n"
        "locale = de_DE.UTF-8\n"
        "timezone = Europe/Berlin\n"
        "hostname = box\n"
        "username = worker\n"
        "\n"
        "source_date_epoch = 5\n"
    )
    profile = load_profile(config)
    assert profile.name == "custom"
    assert profile.clock_skew_seconds == 60
    assert profile.fs_ordering == Shuffled(11)
    assert profile.umask == 0o027
    assert profile.env["UMASK"] == "027"
    assert profile.env["SOURCE_DATE_EPOCH"] == "5"
    assert profile.env["REPRO_EPOCH"] == str(BASE_EPOCH + 60)


def test_load_profile_source_date_epoch_optional(tmp_path):
    config = tmp_path / "p.conf"
    config.write_text(
        "name = q\nclock_skew_seconds = 0\nbuild_path_component = b\n"
        "fs_ordering = forward\numask = 022\nlocale = C\ntimezone = UTC\n"
        "hostname = h\nusername = u\n"
    )
    profile = load_profile(config)
    assert "SOURCE_DATE_EPOCH" not in profile.env


@pytest.mark.parametrize(
    "mutation",
    [
        ("name = q", ""),                       # missing knob
        ("umask = 022", "umask = 09"),          # not octal
        ("fs_ordering = forward", "fs_ordering = sideways"),
        ("hostname = h", "hostname = h\nextra_knob = 1"),
        ("clock_skew_seconds = 0", "clock_skew_seconds = soon"),
    ],
)
def test_load_profile_rejects_bad_configs(tmp_path, mutation):
    base = (
        "name = q\nclock_skew_seconds = 0\nbuild_path_component = b\n"
        "fs_ordering = forward\numask = 022\nlocale = C\ntimezone = UTC\n"
        "hostname = h\nusername = u\n"
    )
    old, new = mutation
    config = tmp_path / "p.conf"
    config.write_text(base.replace(old, new))
    with pytest.raises((ParseError, ValidationError)):
        load_profile(config)


def make_source(tmp_path, entry_mode=0o755):
    source = tmp_path / "source"
    source.mkdir()
    (source / "build").write_text("#!/bin/sh\nexit 0\n")
    (source / "build").chmod(entry_mode)
    (source / "data.txt").write_text("payload\n")
    return source


def test_validate_request(tmp_path):
    source = make_source(tmp_path)
    validate_request(BuildRequest(source_dir=source, build_entry="build", output_subdir="out"))
    with pytest.raises(ValidationError):
        validate_request(BuildRequest(source_dir=source, build_entry="nope", output_subdir="out"))
    with pytest.raises(ValidationError):
        validate_request(BuildRequest(source_dir=source, build_entry="build", output_subdir="/abs"))
    with pytest.raises(ValidationError):
        validate_request(
            BuildRequest(source_dir=source, build_entry="build", output_subdir="out", timeout_seconds=0)
        )


def test_validate_request_requires_executable_entry(tmp_path):
    source = make_source(tmp_path, entry_mode=0o644)
    with pytest.raises(ValidationError):
        validate_request(BuildRequest(source_dir=source, build_entry="build", output_subdir="out"))


def test_apply_profile_stages_a_copy(tmp_path):
    source = make_source(tmp_path)
    (source / "sub").mkdir()
    (source / "sub" / "inner.txt").write_text("inner\n")
    profile, _ = default_profiles()
    staging = tmp_path / "staging"
    staging.mkdir()
    pb = apply_profile(profile, BuildRequest(source_dir=source, build_entry="build", output_subdir="out"), staging)
    assert pb.workdir == staging.resolve() / profile.build_path_component
    assert (pb.workdir / "data.txt").read_text() == "payload\n"
    assert (pb.workdir / "sub" / "inner.txt").read_text() == "inner\n"
    assert os.access(pb.workdir / "build", os.X_OK)
    assert pb.env == profile.env
    with pytest.raises(StructuralError):
        apply_profile(profile, BuildRequest(source_dir=source, build_entry="build", output_subdir="out"), staging)


def test_apply_profile_rejects_symlinks(tmp_path):
    source = make_source(tmp_path)
    (source / "link").symlink_to(source / "data.txt")
    profile, _ = default_profiles()
    staging = tmp_path / "staging"
    staging.mkdir()
    with pytest.raises(StructuralError):
        apply_profile(profile, BuildRequest(source_dir=source, build_entry="build", output_subdir="out"), staging)
