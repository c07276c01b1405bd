"""Shared fixtures: the synthetic mini dataset, its canonical on-disk copy,
and one TransformOutcome per (kind, image) computed once per session."""

from __future__ import annotations

from contextlib import contextmanager

import pytest

import tigaug as tg


@pytest.fixture(scope="session")
def params() -> tg.TransformParams:
    return tg.TransformParams()


@pytest.fixture(scope="session")
def mini() -> tg.Dataset:
    return tg.mini_dataset()


@pytest.fixture(scope="session")
def mini_root(tmp_path_factory, mini):
    root = tmp_path_factory.mktemp("mini-canonical")
    tg.write_canonical(mini, root)
    return root


@pytest.fixture(scope="session")
def outcomes(mini, params):
    """kind -> image id -> TransformOutcome, all at global seed 11."""
    table: dict[tg.TransformKind, dict[str, tg.TransformOutcome]] = {}
    for kind in tg.TransformKind:
        table[kind] = {
            im.id: tg.apply(kind, im, params, tg.image_seed(11, im.id))
            for im in mini.images
        }
    return table


@pytest.fixture
def announce(capfd):
    """Context manager that prints one [PASS]/[FAIL] line per criterion,
    bypassing pytest's capture so the verdicts always reach the console."""

    @contextmanager
    def _announce(num: int, text: str):
        try:
            yield
        except BaseException:
            with capfd.disabled():
                print(f"[FAIL] criterion {num}: {text}", flush=True)
            raise
        else:
            with capfd.disabled():
                print(f"[PASS] criterion {num}: {text}", flush=True)

    return _announce
