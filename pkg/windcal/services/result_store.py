"""Atomic JSON and CSV output files."""

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Union

import pandas as pd

logger = logging.getLogger(__name__)


def _atomic_write_text(path: Union[str, Path], text: str) -> Path:
    """Write text through a temporary file in the destination directory.

    Raises:
        OSError: If the write or the rename fails
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with tempfile.NamedTemporaryFile(
            mode="w", dir=path.parent, delete=False, suffix=".tmp", encoding="utf-8", newline=""
        ) as tmp:
            tmp.write(text)
            tmp_path = tmp.name
        os.replace(tmp_path, path)
    except OSError as e:
        logger.error(f"Atomic write failed for {path}: {e}")
        raise
    return path


def atomic_write_json(path: Union[str, Path], data: Union[dict, list]) -> Path:
    """Write JSON atomically with sorted keys so reruns are byte-identical."""
    return _atomic_write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def atomic_write_csv(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    """Write a DataFrame as CSV atomically (no index, LF line endings)."""
    return _atomic_write_text(path, frame.to_csv(index=False, lineterminator="\n", float_format="%.10g"))


def read_json(path: Union[str, Path]) -> Union[dict, list]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)
