import logging

import pytest

from dragfl import settings


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


class TestLoadSetting:
    def test_blank_counts_as_unset(self, monkeypatch):
        monkeypatch.setenv("DRAGFL_OUTPUT_DIR", "   ")
        assert settings.load_setting("DRAGFL_OUTPUT_DIR", "fallback") == "fallback"
        assert settings.default_output_dir() is None

    def test_strips_value(self, monkeypatch):
        monkeypatch.setenv("DRAGFL_LOG_LEVEL", " debug ")
        assert settings.load_setting("DRAGFL_LOG_LEVEL") == "debug"

    def test_workers(self, monkeypatch):
        monkeypatch.delenv("DRAGFL_WORKERS", raising=False)
        assert settings.default_workers() == 1
        monkeypatch.setenv("DRAGFL_WORKERS", "6")
        assert settings.default_workers() == 6
        monkeypatch.setenv("DRAGFL_WORKERS", "many")
        assert settings.default_workers() == 1


class TestConfigureLogging:
    def test_single_handler_on_repeat(self):
        settings.configure_logging("DEBUG")
        settings.configure_logging("WARNING")
        ours = [h for h in logging.getLogger().handlers if getattr(h, "_dragfl", False)]
        assert len(ours) == 1
        assert logging.getLogger().level == logging.WARNING

    def test_level_from_environment(self, monkeypatch):
        monkeypatch.setenv("DRAGFL_LOG_LEVEL", "error")
        settings.configure_logging()
        assert logging.getLogger().level == logging.ERROR

    def test_unknown_level_falls_back_to_info(self):
        settings.configure_logging("chatty")
        assert logging.getLogger().level == logging.INFO
