"""In-memory message bus with bit-exact size accounting.

The wire model is normative for all reported traffic and storage:
scalars (field values, prices, aggregates, reveal components) are 32
bits, a commitment is bits_q bits, the key broadcast is 3*bits_q +
bits_p bits, and notifications are free. KB means 1024 bytes.
"""

from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass

SCALAR_BITS = 32
NOTIFY_BITS = 0

PHASES = ("negotiation", "keygen", "commitment", "commitment_check", "online")

# Message kinds.
PRICE_SIGNAL = "PriceSignal"
SHARE_TRANSFER = "ShareTransfer"
AGGREGATE_SUBMIT = "AggregateSubmit"
COMMITMENT_SUBMIT = "CommitmentSubmit"
KEY_BROADCAST = "KeyBroadcast"
ACCEPT_NOTIFY = "AcceptNotify"
REJECT_NOTIFY = "RejectNotify"
REVEAL_REQUEST = "RevealRequest"
REVEAL = "Reveal"
FLAG_NOTIFY = "FlagNotify"


@dataclass(frozen=True)
class Message:
    phase: str
    kind: str
    sender: str
    receiver: str
    bits: int


class Transcript:
    """Per-entity, per-phase traffic and storage counters, plus the
    optional full message log.

    Counters are always exact; retaining individual Message records is
    optional because large runs produce millions of them.
    """

    def __init__(self, record_messages=False):
        self.record_messages = record_messages
        self.messages = []
        self.traffic_bits = defaultdict(int)     # (entity, phase) -> bits sent
        self.storage_bits = defaultdict(int)     # (entity, phase) -> bits stored
        self._lock = threading.Lock()            # concurrent per-TA sends

    def send(self, phase, kind, sender, receiver, bits):
        with self._lock:
            self.traffic_bits[(sender, phase)] += bits
            if self.record_messages:
                self.messages.append(Message(phase, kind, sender, receiver,
                                             bits))

    def send_many(self, phase, kind, sender, receivers, bits_each):
        """Bulk point-to-point sends with one counter update."""
        with self._lock:
            self.traffic_bits[(sender, phase)] += bits_each * len(receivers)
            if self.record_messages:
                for r in receivers:
                    self.messages.append(Message(phase, kind, sender, r,
                                                 bits_each))

    def broadcast(self, phase, kind, sender, bits):
        """A broadcast counts once against the sender, per the wire model."""
        self.send(phase, kind, sender, "ALL", bits)

    def store(self, entity, phase, bits):
        self.storage_bits[(entity, phase)] += bits

    def traffic_kb(self, entity, phase):
        return self.traffic_bits[(entity, phase)] / 8 / 1024

    def storage_kb(self, entity, phase):
        return self.storage_bits[(entity, phase)] / 8 / 1024

    def entities(self):
        seen = set()
        for entity, _ in list(self.traffic_bits) + list(self.storage_bits):
            seen.add(entity)
        return sorted(seen)


def ta_id(n):
    return f"TA{n}"


TO_ID = "TO"
