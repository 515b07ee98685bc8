"""Closed-vocabulary word tokenizer for the toy decoder.

Lowercased words plus sentence punctuation; "<N>" time tokens and marker
strings pass through to an attached TemporalVocab. Unknown words map to
<unk>, answers end with <eos>.
"""

from __future__ import annotations

import re

from .codec import TemporalVocab
from .errors import InvalidInputError

_TOKEN_RE = re.compile(r"</?[a-z0-9]+>|<\d+>|[a-z0-9']+|[.,?!]")

UNK = "<unk>"
EOS = "<eos>"


class TextTokenizer:
    def __init__(self, words: list[str]):
        vocab = [UNK, EOS]
        seen = set(vocab)
        for w in sorted({w.lower() for w in words}):
            if w not in seen:
                vocab.append(w)
                seen.add(w)
        self.tokens = vocab
        self.ids = {t: i for i, t in enumerate(vocab)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def unk_id(self) -> int:
        return self.ids[UNK]

    @property
    def eos_id(self) -> int:
        return self.ids[EOS]

    def encode(self, text: str, vocab: TemporalVocab | None = None) -> list[int]:
        """Token ids for text; angle-bracket tokens resolve through `vocab`."""
        out = []
        for tok in _TOKEN_RE.findall(text.lower()):
            if tok.startswith("<"):
                if vocab is None:
                    raise InvalidInputError(
                        f"token {tok!r} needs an extended vocab but none is attached")
                tid = vocab.string_to_id(tok)
                if tid is None:
                    raise InvalidInputError(f"unknown special token {tok!r}")
                out.append(tid)
            else:
                out.append(self.ids.get(tok, self.unk_id))
        return out

    def decode(self, ids: list[int], vocab: TemporalVocab | None = None) -> str:
        """Best-effort surface string: words joined by spaces, punctuation attached."""
        parts = []
        for i in ids:
            if i < self.size:
                parts.append(self.tokens[i])
            elif vocab is not None:
                parts.append(vocab.token_string(i))
            else:
                raise InvalidInputError(f"id {i} outside base vocab and no extended vocab given")
        text = " ".join(parts)
        return re.sub(r"\s+([.,?!])", r"\1", text)
