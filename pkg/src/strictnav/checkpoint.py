"""Checkpoint save/load.

A checkpoint is one self-describing pickle file holding both value tables,
the grid counters, schedule counters, replay buffers, the RNG state, and
enough run metadata to verify compatibility at load time. Replay buffers are
included so that a resumed run continues bit-exactly.
"""

from __future__ import annotations

import pickle
from pathlib import Path

FORMAT = "strictnav-checkpoint"
VERSION = 1


def save_checkpoint(path: Path | str, trainer_state: dict, config_rows: list[tuple[str, str]]) -> None:
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "config": config_rows,
        "state": trainer_state,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        pickle.dump(payload, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_checkpoint(path: Path | str) -> dict:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    if not isinstance(payload, dict) or payload.get("format") != FORMAT:
        raise ValueError(f"{path} is not a recognized checkpoint file")
    if payload.get("version") != VERSION:
        raise ValueError(f"checkpoint version {payload.get('version')} unsupported (want {VERSION})")
    return payload
