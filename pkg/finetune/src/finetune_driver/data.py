"""Flat training-text loading and validation.

The input format is one record per line: ``[INST] instruction [/INST]
response``.  That is the exchange format emitted by the corpus pipeline's
fold exports, but any file of such lines works.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Union

from .errors import MissingMarkers

log = logging.getLogger(__name__)

INST_OPEN = "[INST]"
INST_CLOSE = "[/INST]"


def load_flat_records(path: Union[str, Path]) -> list[str]:
    """Read flat records, validating the marker pair on every line.

    Blank lines are skipped.  Raises :class:`MissingMarkers` naming the
    first offending record index (0-based over non-blank records).
    """
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            index = len(records)
            open_at = line.find(INST_OPEN)
            close_at = line.find(INST_CLOSE)
            if open_at < 0 or close_at < 0:
                missing = INST_CLOSE if open_at >= 0 else INST_OPEN
                raise MissingMarkers(f"record {index}: no {missing} marker")
            if close_at < open_at:
                raise MissingMarkers(f"record {index}: {INST_CLOSE} precedes {INST_OPEN}")
            records.append(line)
    return records
