"""The 40 data patterns used for activation-failure testing.

A pattern maps a cell position ``(row, bitline)`` to the bit stored there,
where ``bitline = column * word_size + bit`` indexes cells across a row.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

_BASE_KINDS = ("SOLID1", "CHECKERED", "ROW_STRIPE", "COL_STRIPE")
_INVERSE = {
    "SOLID1": "SOLID0",
    "SOLID0": "SOLID1",
    "CHECKERED": "CHECKERED_INV",
    "CHECKERED_INV": "CHECKERED",
    "ROW_STRIPE": "ROW_STRIPE_INV",
    "ROW_STRIPE_INV": "ROW_STRIPE",
    "COL_STRIPE": "COL_STRIPE_INV",
    "COL_STRIPE_INV": "COL_STRIPE",
    "WALK1": "WALK0",
    "WALK0": "WALK1",
}
WALK_PERIOD = 16


@dataclass(frozen=True, order=True)
class DataPattern:
    kind: str
    k: int = 0

    def __post_init__(self):
        if self.kind not in _INVERSE:
            raise ConfigError("pattern", f"unknown pattern kind {self.kind!r}")
        if self.is_walk:
            if not 0 <= self.k < WALK_PERIOD:
                raise ConfigError("pattern", f"walk index {self.k} not in [0, {WALK_PERIOD})")
        elif self.k != 0:
            raise ConfigError("pattern", f"{self.kind} takes no index")

    @property
    def is_walk(self):
        return self.kind in ("WALK1", "WALK0")

    @property
    def name(self):
        return f"{self.kind}_{self.k:02d}" if self.is_walk else self.kind

    def __str__(self):
        return self.name

    def inverse(self):
        return DataPattern(_INVERSE[self.kind], self.k)

    def bits(self, rows, bitlines):
        """Stored bit at each ``(row, bitline)``; broadcasts like numpy."""
        rows = np.asarray(rows, dtype=np.int64)
        bitlines = np.asarray(bitlines, dtype=np.int64)
        kind = self.kind
        inverted = kind in ("SOLID0", "CHECKERED_INV", "ROW_STRIPE_INV", "COL_STRIPE_INV", "WALK0")
        base = {
            "SOLID1": "SOLID1", "SOLID0": "SOLID1",
            "CHECKERED": "CHECKERED", "CHECKERED_INV": "CHECKERED",
            "ROW_STRIPE": "ROW_STRIPE", "ROW_STRIPE_INV": "ROW_STRIPE",
            "COL_STRIPE": "COL_STRIPE", "COL_STRIPE_INV": "COL_STRIPE",
            "WALK1": "WALK1", "WALK0": "WALK1",
        }[kind]
        if base == "SOLID1":
            out = np.ones(np.broadcast(rows, bitlines).shape, dtype=np.uint8)
        elif base == "CHECKERED":
            out = ((rows + bitlines) & 1).astype(np.uint8)
        elif base == "ROW_STRIPE":
            out = np.broadcast_to(rows & 1, np.broadcast(rows, bitlines).shape).astype(np.uint8)
        elif base == "COL_STRIPE":
            out = np.broadcast_to(bitlines & 1, np.broadcast(rows, bitlines).shape).astype(np.uint8)
        else:
            out = np.broadcast_to(bitlines % WALK_PERIOD == self.k,
                                  np.broadcast(rows, bitlines).shape).astype(np.uint8)
        return out ^ np.uint8(1) if inverted else out

    def neighborhood(self, rows, bitlines):
        """3-bit class ``left<<2 | own<<1 | right`` of the row-wise neighbourhood.

        The activation-failure model keys its data-pattern dependence on this
        class: a cell fails more readily when the bits stored on it and its two
        adjacent bitlines match the cell's preferred configuration.
        """
        bitlines = np.asarray(bitlines, dtype=np.int64)
        left = self.bits(rows, bitlines - 1)
        own = self.bits(rows, bitlines)
        right = self.bits(rows, bitlines + 1)
        return (left << 2) | (own << 1) | right

    @classmethod
    def parse(cls, text):
        text = str(text).strip().upper()
        for walk in ("WALK1", "WALK0"):
            if text.startswith(walk):
                rest = text[len(walk):].lstrip("_(").rstrip(")")
                if not rest.isdigit():
                    raise ConfigError("pattern", f"cannot parse {text!r}")
                return cls(walk, int(rest))
        return cls(text)


def all_patterns():
    """The 40 patterns: 4 base kinds, 16 walking 1s, and their inverses."""
    out = []
    for kind in _BASE_KINDS:
        p = DataPattern(kind)
        out += [p, p.inverse()]
    out += [DataPattern("WALK1", k) for k in range(WALK_PERIOD)]
    out += [DataPattern("WALK0", k) for k in range(WALK_PERIOD)]
    return out


SOLID0 = DataPattern("SOLID0")
SOLID1 = DataPattern("SOLID1")
