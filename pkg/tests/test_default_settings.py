import threading

import pytest

from crystal_certificates.default_settings import (
    DEFAULTS,
    configure,
    get_setting,
    overridden,
    runtime_overrides,
)


def test_project_settings_beat_defaults():
    assert get_setting("SAMPLE_SIZE") == 200
    assert get_setting("SAMPLE_SEED") == DEFAULTS["SAMPLE_SEED"]


def test_overridden_nests_and_restores():
    with overridden(SAMPLE_SEED=3):
        with overridden(SAMPLE_SIZE=5):
            assert runtime_overrides() == {"SAMPLE_SEED": 3, "SAMPLE_SIZE": 5}
        assert get_setting("SAMPLE_SIZE") == 200
        assert get_setting("SAMPLE_SEED") == 3
    assert runtime_overrides() == {}


def test_overridden_restores_after_an_error():
    with pytest.raises(RuntimeError):
        with overridden(SAMPLE_SEED=3):
            raise RuntimeError("boom")
    assert get_setting("SAMPLE_SEED") == DEFAULTS["SAMPLE_SEED"]


def test_unknown_settings_are_rejected():
    with pytest.raises(KeyError):
        configure(SAMPLE_SEEDS=1)
    with pytest.raises(KeyError):
        with overridden(SEED=1):
            pass


def test_overrides_do_not_cross_threads():
    seen = {}
    inside = threading.Event()
    release = threading.Event()

    def seeded():
        with overridden(SAMPLE_SEED=99):
            inside.set()
            release.wait(5)
            seen["seeded"] = get_setting("SAMPLE_SEED")

    def unseeded():
        inside.wait(5)
        seen["unseeded"] = get_setting("SAMPLE_SEED")
        release.set()

    threads = [threading.Thread(target=seeded), threading.Thread(target=unseeded)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert seen == {"seeded": 99, "unseeded": DEFAULTS["SAMPLE_SEED"]}
