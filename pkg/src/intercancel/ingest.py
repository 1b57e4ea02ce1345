"""Order-flow log parsing.

The input is a CSV with the columns ``day,seq,side,action,price,size`` (any
column order, one header row). Records are kept columnar in numpy arrays;
``EventStream`` still behaves like an ordered sequence of ``OrderEvent``.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import io
import math
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

import numpy as np

COLUMNS = ("day", "seq", "side", "action", "price", "size")


class Side(enum.IntEnum):
    BUY = 0
    SELL = 1

    @property
    def token(self) -> str:
        return "B" if self is Side.BUY else "S"

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def parse(cls, value: "str | Side") -> "Side":
        if isinstance(value, Side):
            return value
        key = str(value).strip().lower()
        if key in ("b", "buy"):
            return cls.BUY
        if key in ("s", "sell"):
            return cls.SELL
        raise ValueError(f"unknown side {value!r}")


class Action(enum.IntEnum):
    SUBMIT = 0
    CANCEL = 1


_SIDE_TOKENS = {"B": Side.BUY, "S": Side.SELL}
_ACTION_TOKENS = {"SUBMIT": Action.SUBMIT, "CANCEL": Action.CANCEL}


class ParseError(ValueError):
    """Malformed order-flow input. ``line`` is 1-based and counts the header."""

    def __init__(self, message: str, line: int | None = None, day: dt.date | None = None):
        self.line = line
        self.day = day
        super().__init__(message)


@dataclass(frozen=True)
class OrderEvent:
    day: dt.date
    seq: int
    side: Side
    action: Action
    price: float | None = None
    size: int | None = None


@dataclass(frozen=True)
class DayCount:
    day: dt.date
    total: int
    buy_submit: int
    buy_cancel: int
    sell_submit: int
    sell_cancel: int


@dataclass(frozen=True, eq=False)
class EventStream:
    """Immutable, day-grouped order-flow events in file order.

    ``day_index[i]`` indexes into ``days``; prices are NaN and sizes are 0 when
    absent from the log.
    """

    days: tuple[dt.date, ...]
    day_index: np.ndarray
    seq: np.ndarray
    side: np.ndarray
    action: np.ndarray
    price: np.ndarray
    size: np.ndarray
    per_day_counts: tuple[DayCount, ...] = field(init=False)

    def __post_init__(self):
        for name in ("day_index", "seq", "side", "action", "price", "size"):
            getattr(self, name).setflags(write=False)
        object.__setattr__(self, "per_day_counts", _count_days(self))

    @classmethod
    def from_events(cls, events: Iterable[OrderEvent]) -> "EventStream":
        events = list(events)
        days: list[dt.date] = []
        day_index = np.empty(len(events), dtype=np.int64)
        for i, ev in enumerate(events):
            if not days or days[-1] != ev.day:
                days.append(ev.day)
            day_index[i] = len(days) - 1
        stream = cls(
            days=tuple(days),
            day_index=day_index,
            seq=np.array([e.seq for e in events], dtype=np.int64),
            side=np.array([int(e.side) for e in events], dtype=np.int8),
            action=np.array([int(e.action) for e in events], dtype=np.int8),
            price=np.array([math.nan if e.price is None else e.price for e in events], dtype=float),
            size=np.array([0 if e.size is None else e.size for e in events], dtype=np.int64),
        )
        stream.validate()
        return stream

    @property
    def day_count(self) -> int:
        return len(self.days)

    @property
    def events(self) -> list[OrderEvent]:
        return list(self)

    def __len__(self) -> int:
        return len(self.seq)

    def __getitem__(self, i: int) -> OrderEvent:
        price = float(self.price[i])
        size = int(self.size[i])
        return OrderEvent(
            day=self.days[self.day_index[i]],
            seq=int(self.seq[i]),
            side=Side(int(self.side[i])),
            action=Action(int(self.action[i])),
            price=None if math.isnan(price) else price,
            size=size or None,
        )

    def __iter__(self) -> Iterator[OrderEvent]:
        for i in range(len(self)):
            yield self[i]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return (
            self.days == other.days
            and np.array_equal(self.day_index, other.day_index)
            and np.array_equal(self.seq, other.seq)
            and np.array_equal(self.side, other.side)
            and np.array_equal(self.action, other.action)
            and np.array_equal(self.price, other.price, equal_nan=True)
            and np.array_equal(self.size, other.size)
        )

    def validate(self) -> None:
        """Check the structural invariants; raises ``ValueError``."""
        n = len(self.seq)
        for name in ("day_index", "side", "action", "price", "size"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has wrong length")
        if any(b <= a for a, b in zip(self.days, self.days[1:])):
            raise ValueError("days are not in strictly increasing order")
        if n and np.any(np.diff(self.day_index) < 0):
            raise ValueError("events are not grouped by day")
        if np.any(self.seq <= 0):
            raise ValueError("seq must be positive")
        same_day = np.diff(self.day_index) == 0
        if np.any(np.diff(self.seq)[same_day] <= 0):
            raise ValueError("seq not strictly increasing within a day")
        if not np.isin(self.side, (0, 1)).all() or not np.isin(self.action, (0, 1)).all():
            raise ValueError("side/action out of range")


def _count_days(stream: EventStream) -> tuple[DayCount, ...]:
    n_days = len(stream.days)
    cat = stream.side.astype(np.int64) * 2 + stream.action.astype(np.int64)
    table = np.zeros((n_days, 4), dtype=np.int64)
    np.add.at(table, (stream.day_index, cat), 1)
    return tuple(
        DayCount(day, int(row.sum()), int(row[0]), int(row[1]), int(row[2]), int(row[3]))
        for day, row in zip(stream.days, table)
    )


def parse_order_flow(source: "str | os.PathLike | bytes | IO") -> EventStream:
    """Parse an order-flow CSV from a path, raw bytes or an open file."""
    if isinstance(source, (bytes, bytearray)):
        text = io.StringIO(source.decode("utf-8"), newline="")
        return _parse(text)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return _parse(fh)
    if isinstance(source, io.TextIOBase):
        return _parse(source)
    data = source.read()
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    return _parse(io.StringIO(data, newline=""))


def _parse(fh) -> EventStream:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty input: missing header", line=1) from None
    header = [h.strip() for h in header]
    if header and header[0].startswith("﻿"):
        header[0] = header[0][1:]
    if sorted(header) != sorted(COLUMNS):
        raise ParseError(f"bad header {header!r}; expected columns {','.join(COLUMNS)}", line=1)
    col = {name: header.index(name) for name in COLUMNS}
    i_day, i_seq, i_side, i_action, i_price, i_size = (col[c] for c in COLUMNS)

    days: list[dt.date] = []
    day_text: dict[str, dt.date] = {}
    day_index: list[int] = []
    seqs: list[int] = []
    sides: list[int] = []
    actions: list[int] = []
    prices: list[float] = []
    sizes: list[int] = []
    last_seq = 0

    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != len(COLUMNS):
            raise ParseError(f"line {line}: expected {len(COLUMNS)} columns, got {len(row)}", line=line)
        raw_day = row[i_day]
        day = day_text.get(raw_day)
        if day is None:
            try:
                day = dt.date.fromisoformat(raw_day.strip())
            except ValueError:
                raise ParseError(f"line {line}: bad day {raw_day!r}", line=line) from None
            day_text[raw_day] = day
        if not days or day != days[-1]:
            if days and day <= days[-1]:
                raise ParseError(f"line {line}: day {day} out of calendar order", line=line, day=day)
            days.append(day)
            last_seq = 0
        try:
            seq = int(row[i_seq])
        except ValueError:
            raise ParseError(f"line {line}: bad seq {row[i_seq]!r}", line=line) from None
        if seq <= 0:
            raise ParseError(f"line {line}: seq must be positive", line=line)
        if seq <= last_seq:
            raise ParseError(f"sequence regression at line {line} (day {day})", line=line, day=day)
        last_seq = seq
        side = _SIDE_TOKENS.get(row[i_side].strip())
        if side is None:
            raise ParseError(f"line {line}: unknown side {row[i_side]!r}", line=line)
        action = _ACTION_TOKENS.get(row[i_action].strip())
        if action is None:
            raise ParseError(f"line {line}: unknown action {row[i_action]!r}", line=line)
        raw_price = row[i_price].strip()
        if raw_price:
            try:
                price = float(raw_price)
            except ValueError:
                raise ParseError(f"line {line}: bad price {raw_price!r}", line=line) from None
            if not price >= 0 or math.isinf(price):
                raise ParseError(f"line {line}: price must be a non-negative number", line=line)
        else:
            price = math.nan
        raw_size = row[i_size].strip()
        if raw_size:
            try:
                size = int(raw_size)
            except ValueError:
                raise ParseError(f"line {line}: bad size {raw_size!r}", line=line) from None
            if size <= 0:
                raise ParseError(f"line {line}: size must be positive", line=line)
        else:
            size = 0

        day_index.append(len(days) - 1)
        seqs.append(seq)
        sides.append(side)
        actions.append(action)
        prices.append(price)
        sizes.append(size)

    return EventStream(
        days=tuple(days),
        day_index=np.array(day_index, dtype=np.int64),
        seq=np.array(seqs, dtype=np.int64),
        side=np.array(sides, dtype=np.int8),
        action=np.array(actions, dtype=np.int8),
        price=np.array(prices, dtype=float),
        size=np.array(sizes, dtype=np.int64),
    )


def write_order_flow(stream: EventStream, fh: IO[str]) -> None:
    """Serialize ``stream`` in the ingest CSV format (LF line endings)."""
    fh.write(",".join(COLUMNS) + "\n")
    day_str = [d.isoformat() for d in stream.days]
    side_tok = ("B", "S")
    action_tok = ("SUBMIT", "CANCEL")
    lines = []
    for di, seq, side, action, price, size in zip(
        stream.day_index.tolist(),
        stream.seq.tolist(),
        stream.side.tolist(),
        stream.action.tolist(),
        stream.price.tolist(),
        stream.size.tolist(),
    ):
        p = "" if math.isnan(price) else repr(price)
        s = str(size) if size else ""
        lines.append(f"{day_str[di]},{seq},{side_tok[side]},{action_tok[action]},{p},{s}\n")
        if len(lines) >= 65536:
            fh.write("".join(lines))
            lines.clear()
    fh.write("".join(lines))


def serialize_order_flow(stream: EventStream) -> bytes:
    buf = io.StringIO()
    write_order_flow(stream, buf)
    return buf.getvalue().encode("utf-8")


@dataclass(frozen=True)
class SideCounts:
    n_all: int
    n_cancel: int


@dataclass(frozen=True)
class CountSummary:
    """Whole-sample and per-day N_A / N_C counts for both sides."""

    buy: SideCounts
    sell: SideCounts
    per_day: tuple[DayCount, ...]

    def side(self, side: Side) -> SideCounts:
        return self.buy if Side.parse(side) is Side.BUY else self.sell

    def daily(self, side: Side) -> tuple[np.ndarray, np.ndarray]:
        """Per-day (N_A, N_C) arrays for one side."""
        if Side.parse(side) is Side.BUY:
            n_all = [d.buy_submit + d.buy_cancel for d in self.per_day]
            n_cancel = [d.buy_cancel for d in self.per_day]
        else:
            n_all = [d.sell_submit + d.sell_cancel for d in self.per_day]
            n_cancel = [d.sell_cancel for d in self.per_day]
        return np.array(n_all, dtype=np.int64), np.array(n_cancel, dtype=np.int64)


def summarize(stream: EventStream) -> CountSummary:
    if len(stream) == 0:
        raise ValueError("empty event stream")
    days = stream.per_day_counts
    bs = sum(d.buy_submit for d in days)
    bc = sum(d.buy_cancel for d in days)
    ss = sum(d.sell_submit for d in days)
    sc = sum(d.sell_cancel for d in days)
    return CountSummary(SideCounts(bs + bc, bc), SideCounts(ss + sc, sc), days)

