"""Replay buffers: a flat ring for low-level steps and a split-half buffer
for high-level records.

The high-level buffer keeps reward-bearing success records in one half and
zero-reward records (failures and empty-handed successes) in the other.
Batches draw 50/50 from the two halves whenever both are nonempty, which
keeps the sparse reward signal present in every batch; with one half empty,
the whole batch comes from the other.
"""

from __future__ import annotations

import numpy as np


class LowReplay:
    """Preallocated ring buffer of low-level transitions."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.state_cells = np.zeros((capacity, 2), dtype=np.int16)
        self.waypoints = np.zeros((capacity, 2), dtype=np.float32)
        self.actions = np.zeros(capacity, dtype=np.int8)
        self.rewards = np.zeros(capacity, dtype=np.float32)
        self.next_cells = np.zeros((capacity, 2), dtype=np.int16)
        self.dones = np.zeros(capacity, dtype=bool)
        self.size = 0
        self.ptr = 0

    def push(self, state_cell, waypoint, action, reward, next_cell, done) -> None:
        i = self.ptr
        self.state_cells[i] = state_cell
        self.waypoints[i] = waypoint
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_cells[i] = next_cell
        self.dones[i] = done
        self.ptr = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __len__(self) -> int:
        return self.size

    def sample(self, batch_size: int, rng: np.random.Generator) -> dict:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self.size, batch_size)
        return {
            "state_cells": self.state_cells[idx].astype(np.int64),
            "waypoints": self.waypoints[idx].astype(np.float64),
            "actions": self.actions[idx].astype(np.int64),
            "rewards": self.rewards[idx].astype(np.float64),
            "next_cells": self.next_cells[idx].astype(np.int64),
            "dones": self.dones[idx],
        }

    def state_dict(self) -> dict:
        return {
            "state_cells": self.state_cells.copy(),
            "waypoints": self.waypoints.copy(),
            "actions": self.actions.copy(),
            "rewards": self.rewards.copy(),
            "next_cells": self.next_cells.copy(),
            "dones": self.dones.copy(),
            "size": self.size,
            "ptr": self.ptr,
        }

    def load_state_dict(self, state: dict) -> None:
        self.state_cells[:] = state["state_cells"]
        self.waypoints[:] = state["waypoints"]
        self.actions[:] = state["actions"]
        self.rewards[:] = state["rewards"]
        self.next_cells[:] = state["next_cells"]
        self.dones[:] = state["dones"]
        self.size = int(state["size"])
        self.ptr = int(state["ptr"])


class _Ring:
    """Fixed-capacity ring of encoded rows with O(1) random access."""

    def __init__(self, capacity: int, width: int):
        self.capacity = int(capacity)
        self.rows = np.zeros((0, width), dtype=np.float64)
        self.size = 0
        self.ptr = 0
        self.width = width

    def push(self, row) -> None:
        if self.size < self.capacity:
            if self.size == len(self.rows):
                grow = min(self.capacity, max(1024, 2 * max(1, len(self.rows))))
                new = np.zeros((grow, self.width), dtype=np.float64)
                new[: self.size] = self.rows[: self.size]
                self.rows = new
            self.rows[self.size] = row
            self.size += 1
        else:
            self.rows[self.ptr] = row
            self.ptr = (self.ptr + 1) % self.capacity


class HighBuffer:
    """Split-half buffer over encoded high-level records.

    Rows are fixed-width float vectors produced by the high-level policy's
    encoder; the last column is the success flag. Total capacity is split
    evenly between the two halves.
    """

    def __init__(self, capacity: int, row_width: int):
        self.capacity = int(capacity)
        half = max(1, capacity // 2)
        self.success_half = _Ring(half, row_width)
        self.zero_half = _Ring(half, row_width)

    def insert(self, row, success: bool, reward: float) -> None:
        if success and reward > 0.0:
            self.success_half.push(row)
        else:
            self.zero_half.push(row)

    def __len__(self) -> int:
        return self.success_half.size + self.zero_half.size

    def sample(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        ns, nz = self.success_half.size, self.zero_half.size
        if ns == 0 and nz == 0:
            raise ValueError("cannot sample from an empty buffer")
        if ns == 0:
            idx = rng.integers(0, nz, batch_size)
            return self.zero_half.rows[idx]
        if nz == 0:
            idx = rng.integers(0, ns, batch_size)
            return self.success_half.rows[idx]
        k = batch_size // 2
        si = rng.integers(0, ns, k)
        zi = rng.integers(0, nz, batch_size - k)
        return np.concatenate([self.success_half.rows[si], self.zero_half.rows[zi]], axis=0)

    def state_dict(self) -> dict:
        return {
            "success_rows": self.success_half.rows[: self.success_half.size].copy(),
            "zero_rows": self.zero_half.rows[: self.zero_half.size].copy(),
            "success_ptr": self.success_half.ptr,
            "zero_ptr": self.zero_half.ptr,
        }

    def load_state_dict(self, state: dict) -> None:
        for ring, rows, ptr in (
            (self.success_half, state["success_rows"], state["success_ptr"]),
            (self.zero_half, state["zero_rows"], state["zero_ptr"]),
        ):
            ring.rows = rows.copy()
            ring.size = len(rows)
            ring.ptr = int(ptr)
