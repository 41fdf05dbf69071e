"""Helpers for dotted Java names."""

from __future__ import annotations

from collections.abc import Iterable


def package_of(fqn: str) -> str:
    """``a.b.C`` -> ``a.b``; a bare type name lives in the default package."""
    head, _, _ = fqn.rpartition(".")
    return head


def simple_name(fqn: str) -> str:
    return fqn.rpartition(".")[2]


def in_package(fqn: str, prefix: str) -> bool:
    """True if ``fqn`` lies under ``prefix`` at a dot boundary (empty prefix matches all)."""
    if not prefix:
        return True
    return fqn.startswith(prefix + ".")


def common_root_package(fqns: Iterable[str]) -> str:
    """Longest dot-separated package prefix shared by every name's package part.

    >>> common_root_package(["a.b.c.d.ClassA", "a.b.e.f.ClassB"])
    'a.b'
    """
    fqns = list(fqns)
    if not fqns:
        raise ValueError("common_root_package needs at least one name")
    common: list[str] | None = None
    for fqn in fqns:
        if not fqn or not fqn.split(".")[-1]:
            raise ValueError(f"not a type name: {fqn!r}")
        parts = fqn.split(".")[:-1]
        if common is None:
            common = parts
            continue
        n = 0
        for a, b in zip(common, parts):
            if a != b:
                break
            n += 1
        common = common[:n]
    return ".".join(common or [])
