import datetime as dt

import pytest

from intercancel.ingest import Action, EventStream, OrderEvent, Side

DAY = dt.date(2003, 1, 2)

CODES = {
    "BS": (Side.BUY, Action.SUBMIT),
    "BC": (Side.BUY, Action.CANCEL),
    "SS": (Side.SELL, Action.SUBMIT),
    "SC": (Side.SELL, Action.CANCEL),
}


def make_stream(*days_of_codes, start=DAY):
    """Build a stream from lists of codes such as ["BS", "BC"], one list per day."""
    events = []
    for k, codes in enumerate(days_of_codes):
        day = start + dt.timedelta(days=k)
        for i, c in enumerate(codes, start=1):
            side, action = CODES[c]
            events.append(OrderEvent(day, i, side, action))
    return EventStream.from_events(events)


@pytest.fixture
def stream_factory():
    return make_stream
