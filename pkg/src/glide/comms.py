"""UAV-to-UGV link model: range-gated connectivity with hysteresis,
per-message latency and drop probability, and onboard store-and-forward.

Messages sent while disconnected are queued FIFO and drained on
reconnection; every message is accounted for exactly once
(sent = delivered + dropped + still pending).
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class LinkStatus(Enum):
    CONNECTED = "connected"
    DISCONNECTED = "disconnected"


@dataclass(frozen=True)
class LinkModel:
    connect_range: float = 200.0
    disconnect_range: float = 250.0
    latency: float = 0.05
    drop_probability: float = 0.0

    def __post_init__(self):
        if self.disconnect_range < self.connect_range:
            raise ValueError("disconnect_range must be >= connect_range")
        if self.latency < 0:
            raise ValueError("latency must be >= 0")
        if not 0.0 <= self.drop_probability <= 1.0:
            raise ValueError("drop_probability must be in [0, 1]")


def link_state(model: LinkModel, uav_position, ugv_position,
               previous_state: LinkStatus) -> LinkStatus:
    """Hysteretic range gate: connect at <= connect_range, disconnect at
    > disconnect_range, otherwise keep the previous state."""
    delta = np.asarray(uav_position, dtype=float) - np.asarray(ugv_position, dtype=float)
    distance = float(np.linalg.norm(delta))
    if distance <= model.connect_range:
        return LinkStatus.CONNECTED
    if distance > model.disconnect_range:
        return LinkStatus.DISCONNECTED
    return previous_state


@dataclass
class LinkStats:
    sent: int = 0
    delivered: int = 0
    dropped: int = 0            # random channel drops
    overflow_dropped: int = 0   # queue overflow (oldest evicted)
    queued_peak: int = 0

    def pending(self, link: "Link") -> int:
        return len(link.queue.pending) + len(link._schedule)

    def to_dict(self) -> dict:
        return {
            "sent": self.sent,
            "delivered": self.delivered,
            "dropped": self.dropped,
            "overflow_dropped": self.overflow_dropped,
            "queued_peak": self.queued_peak,
        }


@dataclass
class OutboundQueue:
    """FIFO of (message, enqueue_time) held onboard while disconnected."""

    capacity: int = 4096
    pending: deque = field(default_factory=deque)

    def push(self, message, now: float) -> bool:
        """Enqueue; returns False when the oldest message was evicted."""
        overflow = len(self.pending) >= self.capacity
        if overflow:
            self.pending.popleft()
        self.pending.append((message, now))
        return not overflow


class Link:
    """One UAV-to-UGV link instance owned by a trial's simulation loop."""

    def __init__(self, model: LinkModel = LinkModel(), seed: int = 0,
                 capacity: int = 4096):
        self.model = model
        self.state = LinkStatus.DISCONNECTED
        self.queue = OutboundQueue(capacity=capacity)
        self.stats = LinkStats()
        self._rng = np.random.default_rng(seed)
        self._schedule: list = []   # heap of (delivery_time, seq, message)
        self._seq = 0

    def _transmit(self, message, now: float) -> bool:
        """Schedule one over-the-air transmission; False when dropped."""
        if self.model.drop_probability > 0.0 and \
                self._rng.random() < self.model.drop_probability:
            self.stats.dropped += 1
            return False
        heapq.heappush(self._schedule, (now + self.model.latency, self._seq, message))
        self._seq += 1
        return True

    def send(self, message, now: float) -> str:
        """Send a message: transmit when connected, queue when not.

        Returns "scheduled", "queued", or "dropped".
        """
        self.stats.sent += 1
        if self.state is LinkStatus.CONNECTED:
            return "scheduled" if self._transmit(message, now) else "dropped"
        if not self.queue.push(message, now):
            self.stats.overflow_dropped += 1
            self.stats.dropped += 1
        self.stats.queued_peak = max(self.stats.queued_peak, len(self.queue.pending))
        return "queued"

    def advance(self, now: float, uav_position, ugv_position) -> list:
        """Update connectivity, drain the queue on reconnection, and return
        messages whose delivery time has arrived (FIFO order preserved)."""
        new_state = link_state(self.model, uav_position, ugv_position, self.state)
        if new_state is LinkStatus.CONNECTED and self.state is LinkStatus.DISCONNECTED:
            while self.queue.pending:
                message, _enqueued = self.queue.pending.popleft()
                self._transmit(message, now)
        self.state = new_state
        delivered = []
        while self._schedule and self._schedule[0][0] <= now:
            _, _, message = heapq.heappop(self._schedule)
            delivered.append(message)
            self.stats.delivered += 1
        return delivered

    @property
    def pending_count(self) -> int:
        """Messages accepted but neither delivered nor dropped yet."""
        return len(self.queue.pending) + len(self._schedule)
