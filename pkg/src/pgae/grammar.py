"""Word list, meaning classes and the 28-symbol vocabulary.

Each verb, colour and speed meaning has two surface words, so a
``verb colour speed`` description has 8 synonymous spellings and the
3 x 6 x 2 meanings give 288 distinct strings.
"""

from __future__ import annotations

import itertools
from enum import Enum
from pathlib import Path


class Signal(str, Enum):
    DESCRIBE = "describe"
    EXECUTE = "execute"
    REPEAT_ACTION = "repeat-action"
    REPEAT_LANGUAGE = "repeat-language"
    REPEAT_BOTH = "repeat-both"

    @property
    def token(self) -> str:
        return f"<{self.value}>"


INFERENCE_SIGNALS = (Signal.DESCRIBE, Signal.EXECUTE, Signal.REPEAT_ACTION, Signal.REPEAT_LANGUAGE)

VERBS = {"push": ("push", "shove"), "pull": ("pull", "drag"), "slide": ("slide", "glide")}
COLOURS = {
    "red": ("red", "crimson"),
    "green": ("green", "lime"),
    "blue": ("blue", "navy"),
    "yellow": ("yellow", "golden"),
    "cyan": ("cyan", "turquoise"),
    "violet": ("violet", "purple"),
}
SPEEDS = {"slow": ("slowly", "unhurriedly"), "fast": ("fast", "quickly")}

EOS = "<EOS>"

# surface word -> (slot, meaning)
MEANING_OF: dict[str, tuple[str, str]] = {}
for _slot, _table in (("verb", VERBS), ("colour", COLOURS), ("speed", SPEEDS)):
    for _meaning, _words in _table.items():
        for _w in _words:
            MEANING_OF[_w] = (_slot, _meaning)


def surface_strings(verb: str, colour: str, speed: str) -> list[str]:
    """The 8 synonymous spellings of one meaning triple, in fixed order."""
    return [
        " ".join(ws)
        for ws in itertools.product(VERBS[verb], COLOURS[colour], SPEEDS[speed])
    ]


def meaning_of(words) -> tuple[str, ...]:
    """Map surface words to their meaning classes; unknown words map to themselves."""
    return tuple(MEANING_OF.get(w, ("?", w))[1] for w in words)


class Vocab:
    """Dense index map over words, EOS and the five signal tokens."""

    def __init__(self, symbols: list[str] | None = None):
        if symbols is None:
            symbols = []
            for table in (VERBS, COLOURS, SPEEDS):
                for words in table.values():
                    symbols.extend(words)
            symbols.append(EOS)
            symbols.extend(s.token for s in Signal)
        if len(set(symbols)) != len(symbols):
            raise ValueError("duplicate vocabulary symbols")
        self.symbols = list(symbols)
        self.index = {s: i for i, s in enumerate(self.symbols)}

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, symbol: str) -> int:
        return self.index[symbol]

    def __contains__(self, symbol: str) -> bool:
        return symbol in self.index

    @property
    def eos(self) -> int:
        return self.index[EOS]

    def signal_id(self, signal: Signal) -> int:
        return self.index[Signal(signal).token]

    def is_signal(self, idx: int) -> bool:
        return self.symbols[idx].startswith("<") and self.symbols[idx] != EOS

    def save(self, path) -> None:
        Path(path).write_text("".join(s + "\n" for s in self.symbols))

    @classmethod
    def load(cls, path) -> "Vocab":
        return cls(Path(path).read_text().splitlines())

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.symbols == other.symbols


VOCAB = Vocab()
