"""Radio link: 228-byte records chunked into 32-byte packets, a seeded lossy
channel, and order-independent reassembly with loss reporting.

Wire format: payload[30] ++ chunk_index:u8 ++ record_seq8:u8, 32 bytes on
the wire, 8 packets per record (the last payload carries 18 data bytes and
12 zero tail bytes).
"""

from __future__ import annotations

import random
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .core_model import RECORD_SIZE, deserialize_record
from .errors import BadLength, CorruptRecord

CHUNK_PAYLOAD = 30
PACKET_SIZE = 32
CHUNKS_PER_RECORD = 8                      # ceil(228 / 30)
TAIL_DATA_BYTES = RECORD_SIZE - CHUNK_PAYLOAD * (CHUNKS_PER_RECORD - 1)  # 18
DEFAULT_WINDOW = 4
_CLOSED_MEMORY = 16                        # recently closed seq8s to remember


@dataclass(frozen=True)
class Packet:
    payload: bytes
    chunk_index: int
    record_seq8: int

    def to_bytes(self) -> bytes:
        return self.payload + bytes((self.chunk_index, self.record_seq8))

    @classmethod
    def from_bytes(cls, buf: bytes) -> "Packet":
        if len(buf) != PACKET_SIZE:
            raise BadLength("packet must be %d bytes, got %d"
                            % (PACKET_SIZE, len(buf)))
        return cls(buf[:CHUNK_PAYLOAD], buf[CHUNK_PAYLOAD], buf[CHUNK_PAYLOAD + 1])


def chunk_record(buf: bytes, seq: int) -> List[Packet]:
    """Split one serialized record into its 8 wire packets."""
    if len(buf) != RECORD_SIZE:
        raise BadLength("record must be %d bytes, got %d" % (RECORD_SIZE, len(buf)))
    seq8 = seq & 0xFF
    packets = []
    for i in range(CHUNKS_PER_RECORD):
        chunk = buf[i * CHUNK_PAYLOAD:(i + 1) * CHUNK_PAYLOAD]
        if len(chunk) < CHUNK_PAYLOAD:
            chunk = chunk + bytes(CHUNK_PAYLOAD - len(chunk))
        packets.append(Packet(chunk, i, seq8))
    return packets


@dataclass(frozen=True)
class DeliveredRecord:
    seq8: int
    data: bytes  # 228 verified bytes


@dataclass(frozen=True)
class RecordLost:
    seq8: int


ReassemblyEvent = Union[DeliveredRecord, RecordLost]


@dataclass
class ReassemblyStats:
    records_sent: int = 0
    records_delivered: int = 0
    records_lost: int = 0
    records_corrupt: int = 0
    packets_dropped: int = 0
    packets_corrupt_rejected: int = 0
    duplicates_ignored: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _forward_dist(a: int, b: int) -> int:
    """Modulo-256 distance from a forward to b."""
    return (b - a) & 0xFF


class Reassembler:
    """Rebuilds records from packets arriving in any order.

    Keeps at most ``window`` open records keyed by seq8. A record is closed
    as lost when it falls more than the window behind the newest seq8 seen,
    when slot pressure evicts it, or on flush. Completed records must pass
    the CRC check before delivery.
    """

    def __init__(self, window: int = DEFAULT_WINDOW):
        self.window = window
        self.stats = ReassemblyStats()
        self._open: "OrderedDict[int, dict]" = OrderedDict()
        self._closed: "OrderedDict[int, None]" = OrderedDict()
        self._newest: Optional[int] = None

    def push(self, packet: Packet) -> List[ReassemblyEvent]:
        events: List[ReassemblyEvent] = []
        if packet.chunk_index >= CHUNKS_PER_RECORD:
            self.stats.packets_corrupt_rejected += 1
            return events
        seq8 = packet.record_seq8
        if seq8 in self._closed:
            self.stats.duplicates_ignored += 1
            return events
        if self._newest is None or 1 <= _forward_dist(self._newest, seq8) <= 128:
            self._newest = seq8
        chunks = self._open.get(seq8)
        if chunks is None:
            if len(self._open) >= self.window:
                oldest, _ = self._open.popitem(last=False)
                events.append(self._close_lost(oldest))
            chunks = {}
            self._open[seq8] = chunks
        if packet.chunk_index in chunks:
            self.stats.duplicates_ignored += 1
        else:
            chunks[packet.chunk_index] = packet.payload
        if len(chunks) == CHUNKS_PER_RECORD:
            del self._open[seq8]
            done = self._finish(seq8, chunks)
            if done is not None:
                events.append(done)
        events.extend(self._evict_stale())
        return events

    def flush(self) -> List[ReassemblyEvent]:
        events = [self._close_lost(seq8) for seq8 in list(self._open)]
        self._open.clear()
        return events

    def _evict_stale(self) -> List[ReassemblyEvent]:
        if self._newest is None:
            return []
        stale = [s for s in self._open
                 if _forward_dist(s, self._newest) >= self.window]
        events = []
        for s in stale:
            del self._open[s]
            events.append(self._close_lost(s))
        return events

    def _close_lost(self, seq8: int) -> RecordLost:
        self._remember_closed(seq8)
        self.stats.records_lost += 1
        return RecordLost(seq8)

    def _finish(self, seq8: int, chunks: dict) -> Optional[DeliveredRecord]:
        data = b"".join(chunks[i] for i in range(CHUNKS_PER_RECORD - 1))
        data += chunks[CHUNKS_PER_RECORD - 1][:TAIL_DATA_BYTES]
        self._remember_closed(seq8)
        try:
            deserialize_record(data)
        except CorruptRecord:
            self.stats.records_corrupt += 1
            return None
        self.stats.records_delivered += 1
        return DeliveredRecord(seq8, data)

    def _remember_closed(self, seq8: int) -> None:
        self._closed[seq8] = None
        self._closed.move_to_end(seq8)
        while len(self._closed) > _CLOSED_MEMORY:
            self._closed.popitem(last=False)


@dataclass(frozen=True)
class ChannelConfig:
    drop_prob: float = 0.0
    duplicate_prob: float = 0.0
    reorder_window: int = 0
    corrupt_prob: float = 0.0
    data_rate_bps: int = 2_000_000      # 250k | 1M | 2M
    seed: int = 0

    def __post_init__(self):
        for name in ("drop_prob", "duplicate_prob", "corrupt_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError("%s must be in [0, 1], got %r" % (name, p))
        if self.data_rate_bps not in (250_000, 1_000_000, 2_000_000):
            raise ValueError("data_rate_bps must be 250k, 1M or 2M")

    @property
    def packet_time_s(self) -> float:
        return PACKET_SIZE * 8 / self.data_rate_bps


def transmit(packets: Iterable[Packet], ch: ChannelConfig,
             stats: Optional[ReassemblyStats] = None) -> List[Packet]:
    """Push packets through the seeded lossy channel model.

    Per-packet independent drop / duplicate / byte corruption; reordering
    displaces each packet by up to ``reorder_window`` positions.
    """
    rng = random.Random(ch.seed)
    out: List[Tuple[float, Packet]] = []
    pos = 0
    for p in packets:
        if ch.drop_prob and rng.random() < ch.drop_prob:
            if stats is not None:
                stats.packets_dropped += 1
            continue
        copies = 2 if (ch.duplicate_prob and rng.random() < ch.duplicate_prob) else 1
        for _ in range(copies):
            wire = bytearray(p.to_bytes())
            if ch.corrupt_prob and rng.random() < ch.corrupt_prob:
                i = rng.randrange(PACKET_SIZE)
                wire[i] ^= rng.randrange(1, 256)
            key = pos + (rng.uniform(0.0, ch.reorder_window)
                         if ch.reorder_window else 0.0)
            out.append((key, Packet.from_bytes(bytes(wire))))
            pos += 1
    out.sort(key=lambda kp: kp[0])
    return [p for _, p in out]


def send_records(records: Sequence[Tuple[int, bytes]], ch: ChannelConfig,
                 window: int = DEFAULT_WINDOW,
                 ) -> Tuple[List[DeliveredRecord], ReassemblyStats]:
    """End-to-end pipeline: chunk every (seq, 228-byte) record, run the
    channel, reassemble, flush. records_lost is reconciled against the sent
    count so wholly-dropped records are accounted for."""
    reasm = Reassembler(window)
    stats = reasm.stats
    stats.records_sent = len(records)
    packets: List[Packet] = []
    for seq, buf in records:
        packets.extend(chunk_record(buf, seq))
    delivered: List[DeliveredRecord] = []
    for p in transmit(packets, ch, stats):
        for ev in reasm.push(p):
            if isinstance(ev, DeliveredRecord):
                delivered.append(ev)
    for ev in reasm.flush():
        if isinstance(ev, DeliveredRecord):
            delivered.append(ev)
    stats.records_lost = stats.records_sent - stats.records_delivered
    return delivered, stats
