"""Time-tag streams and their on-disk formats.

A stream is two parallel arrays, ``channels`` (uint8 ids) and ``times``
(int64 picoseconds), sorted by time with ties ordered by channel id, plus a
name -> id channel map.

Binary ``TTAG`` layout (little-endian)::

    b"TTAG"  u16 version=1  u16 n_channels
    n_channels x (u8 id, 15-byte zero-padded ASCII name)
    records: (u8 channel, u64 time_ps) ...

A tab-separated ``channel<TAB>time_ps`` text form is accepted on input;
the channel column may hold names or numeric ids.
"""
import hashlib
import struct

import numpy as np

from .errors import ConfigError, PreconditionError

MAGIC = b"TTAG"
VERSION = 1
DEFAULT_CHANNELS = {"CLOCK": 0, "A1": 1, "A2": 2, "B1": 3, "B2": 4, "SIG": 5, "IDL": 6}

_RECORD = np.dtype([("ch", "u1"), ("t", "<u8")])
_HEADER = struct.Struct("<4sHH")
_ENTRY = struct.Struct("<B15s")


def sort_tags(channels, times):
    """Order tags by (time, channel). Returns the permutation."""
    times = np.asarray(times, dtype=np.int64)
    channels = np.asarray(channels, dtype=np.uint8)
    if len(times) and times.max() < (1 << 54) and times.min() >= 0:
        key = (times << 8) | channels.astype(np.int64)
        return np.argsort(key, kind="stable")
    return np.lexsort((channels, times))


class TagStream:
    """Sorted sequence of (channel, time_ps) detection records."""

    def __init__(self, channels, times, channel_map=None, meta=None, presorted=False):
        channels = np.ascontiguousarray(channels, dtype=np.uint8)
        times = np.ascontiguousarray(times, dtype=np.int64)
        if channels.shape != times.shape or channels.ndim != 1:
            raise ValueError("channels and times must be 1-D arrays of equal length")
        if not presorted:
            order = sort_tags(channels, times)
            channels, times = channels[order], times[order]
        self.channels = channels
        self.times = times
        self.channel_map = dict(DEFAULT_CHANNELS if channel_map is None else channel_map)
        self.meta = dict(meta or {})
        self._cache = {}

    @classmethod
    def from_records(cls, records, channel_map=None):
        records = list(records)
        ch = np.array([c for c, _ in records], dtype=np.uint8)
        t = np.array([t for _, t in records], dtype=np.int64)
        return cls(ch, t, channel_map)

    def __len__(self):
        return len(self.times)

    def __eq__(self, other):
        if not isinstance(other, TagStream):
            return NotImplemented
        return (self.channel_map == other.channel_map
                and np.array_equal(self.channels, other.channels)
                and np.array_equal(self.times, other.times))

    def __repr__(self):
        return f"TagStream({len(self)} tags, channels={sorted(self.channel_map)})"

    def channel_id(self, name):
        if isinstance(name, (int, np.integer)):
            return int(name)
        try:
            return self.channel_map[name]
        except KeyError:
            raise ConfigError(f"unknown channel {name!r}; stream has {sorted(self.channel_map)}") from None

    def channel(self, name):
        """Sorted int64 times of one channel (cached)."""
        cid = self.channel_id(name)
        if cid not in self._cache:
            self._cache[cid] = np.ascontiguousarray(self.times[self.channels == cid])
        return self._cache[cid]

    def counts(self):
        inv = {v: k for k, v in self.channel_map.items()}
        ids, n = np.unique(self.channels, return_counts=True)
        return {inv.get(int(i), str(int(i))): int(c) for i, c in zip(ids, n)}

    @property
    def span_ps(self):
        return int(self.times[-1] - self.times[0]) if len(self) else 0

    def is_sorted(self):
        if len(self) < 2:
            return True
        dt = np.diff(self.times)
        if np.any(dt < 0):
            return False
        ties = dt == 0
        return not np.any(np.diff(self.channels.astype(np.int16))[ties] < 0)

    def validate(self):
        if not self.is_sorted():
            raise PreconditionError("tag stream is not sorted by (time, channel)")
        known = set(self.channel_map.values())
        used = set(np.unique(self.channels).tolist())
        if not used <= known:
            raise PreconditionError(f"undeclared channel ids {sorted(used - known)}")
        if len(self) and self.times[0] < 0:
            raise PreconditionError("negative timestamps")

    def select(self, t_start, t_stop):
        """Tags with t_start <= t < t_stop (picoseconds)."""
        i0, i1 = np.searchsorted(self.times, [t_start, t_stop], side="left")
        return TagStream(self.channels[i0:i1], self.times[i0:i1], self.channel_map, presorted=True)

    # I/O -----------------------------------------------------------------

    def to_bytes(self):
        parts = [_HEADER.pack(MAGIC, VERSION, len(self.channel_map))]
        for name, cid in sorted(self.channel_map.items(), key=lambda kv: kv[1]):
            raw = name.encode("ascii")
            if len(raw) > 15:
                raise ConfigError(f"channel name {name!r} longer than 15 bytes")
            parts.append(_ENTRY.pack(cid, raw))
        rec = np.empty(len(self), dtype=_RECORD)
        rec["ch"] = self.channels
        rec["t"] = self.times
        parts.append(rec.tobytes())
        return b"".join(parts)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    def digest(self):
        return hashlib.sha256(self.to_bytes()).hexdigest()

    @classmethod
    def from_bytes(cls, data):
        if len(data) < _HEADER.size:
            raise PreconditionError("truncated TTAG header")
        magic, version, nch = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise PreconditionError("not a TTAG file (bad magic)")
        if version != VERSION:
            raise PreconditionError(f"unsupported TTAG version {version}")
        off = _HEADER.size
        cmap = {}
        for _ in range(nch):
            cid, raw = _ENTRY.unpack_from(data, off)
            off += _ENTRY.size
            cmap[raw.rstrip(b"\0").decode("ascii")] = cid
        body = memoryview(data)[off:]
        if len(body) % _RECORD.itemsize:
            raise PreconditionError("TTAG record section has a partial record")
        rec = np.frombuffer(body, dtype=_RECORD)
        stream = cls(rec["ch"].copy(), rec["t"].astype(np.int64), cmap, presorted=True)
        stream.validate()
        return stream

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            head = fh.read(4)
        if head == MAGIC:
            with open(path, "rb") as fh:
                return cls.from_bytes(fh.read())
        return cls.load_tsv(path)

    @classmethod
    def load_tsv(cls, path, channel_map=None):
        cmap = dict(DEFAULT_CHANNELS if channel_map is None else channel_map)
        ch, t = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 2:
                    raise PreconditionError(f"{path}:{lineno}: expected 'channel<TAB>time_ps'")
                name, value = fields
                if name == "channel":
                    continue  # header
                cid = int(name) if name.isdigit() else cmap.get(name)
                if cid is None:
                    raise PreconditionError(f"{path}:{lineno}: unknown channel {name!r}")
                ch.append(cid)
                t.append(int(value))
        return cls(np.array(ch, dtype=np.uint8), np.array(t, dtype=np.int64), cmap)

    def save_tsv(self, path):
        inv = {v: k for k, v in self.channel_map.items()}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("channel\ttime_ps\n")
            for c, t in zip(self.channels.tolist(), self.times.tolist()):
                fh.write(f"{inv.get(c, c)}\t{t}\n")
