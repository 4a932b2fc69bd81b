from concurrent.futures import ThreadPoolExecutor

import pytest

from convexfm import settings
from convexfm.linsolve import CgConfig, resolve_cg
from convexfm.settings import Settings, current_settings


def test_builtin_defaults():
    assert current_settings() == Settings()
    assert resolve_cg(None) == CgConfig()


def test_nested_stack():
    outer = Settings(cg=CgConfig(tol=1e-4))
    inner = Settings(eigen_max_iters=12)
    with outer:
        assert current_settings() is outer
        with inner:
            assert current_settings() is inner
            assert resolve_cg(None) == CgConfig()
        assert resolve_cg(None).tol == 1e-4
    assert current_settings() == Settings()


def test_explicit_config_wins():
    explicit = CgConfig(tol=1e-3)
    with Settings(cg=CgConfig(tol=1e-5)):
        assert resolve_cg(explicit) is explicit


def test_make_default(monkeypatch):
    monkeypatch.setattr(settings, "default_settings", None)
    default = Settings(eigen_max_iters=50)
    default.make_default()
    assert current_settings() is default
    with Settings(eigen_max_iters=7) as active:
        assert current_settings() is active
    assert current_settings() is default


def test_threads_have_their_own_stack():
    with Settings(eigen_max_iters=3):
        with ThreadPoolExecutor(1) as pool:
            seen = pool.submit(lambda: current_settings()).result()
    assert seen == Settings()


def test_stack_mismatch():
    first = Settings(eigen_max_iters=1)
    second = Settings(eigen_max_iters=2)
    first.__enter__()
    second.__enter__()
    with pytest.raises(RuntimeError):
        first.__exit__(None, None, None)
    # the stack still holds ``first``
    settings.pop_settings()
    assert current_settings() == Settings()
