import pytest
from pydantic import ValidationError

from windcal.config import get_settings, reset_settings


def test_defaults():
    settings = get_settings()
    assert settings.log_format == "text"
    assert settings.threads == 1
    assert get_settings() is settings


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("WINDCAL_THREADS", "4")
    monkeypatch.setenv("WINDCAL_LOG_FORMAT", "json")
    reset_settings()
    assert get_settings().threads == 4
    assert get_settings().log_format == "json"


def test_invalid_log_format(monkeypatch):
    monkeypatch.setenv("WINDCAL_LOG_FORMAT", "xml")
    reset_settings()
    with pytest.raises(ValidationError):
        get_settings()
