"""Fixed vocabulary for an arithmetic / linear-algebra DSL.

Layout: six control tokens, the 94 printable ASCII characters, then whole
lowercase words common in worked solutions.  Whitespace runs collapse to a
single space or newline token.  Anything else is written as ``<byte> h l``
per UTF-8 byte using the hex digit tokens, so every string tokenizes.
"""

import re

PAD, BOS, EOS, SP, NL, BYTE = "<pad>", "<bos>", "<eos>", " ", "\n", "<byte>"
SPECIALS = (PAD, BOS, EOS, SP, NL, BYTE)
PRINTABLE = tuple(chr(c) for c in range(0x21, 0x7F))

WORDS = """
the of is a and to by so we it then with for in on at as be this that what
which are not no all each from into gives get use check again note recall
first second third last next step answer problem compute find solve matrix
vector vectors row rows column columns entry entries pivot pivots det
determinant rank trace inv inverse transpose product sum zero identity
triangular lower upper diagonal equal equals same value times plus minus
eliminate elimination subtract multiply swap combination linear span
nullspace space basis free particular solution independent dependent
orthonormal restate given let since therefore hence thus only both two
three four term terms cyclic property order cost scalar result final
evaluate expression form reduce reduced echelon back substitute holds true
nonzero count number size general parameter over multiple independently
twice copy verify again direct simplify expand write out carefully once
more whole here there can must one new
""".split()

_SCAN = re.compile(r"\s+|[A-Za-z]+|.", re.S)
_HEX = "0123456789abcdef"


class Vocabulary:
    """String <-> id bijection; id 0 is padding."""

    def __init__(self, words=WORDS):
        entries = list(SPECIALS) + list(PRINTABLE)
        for w in words:
            if w not in entries and len(w) > 1:
                entries.append(w)
        if len(entries) > 256:
            raise ValueError(f"vocabulary too large: {len(entries)}")
        self.entries = tuple(entries)
        self.ids = {e: i for i, e in enumerate(self.entries)}

    def __len__(self):
        return len(self.entries)

    def id(self, entry):
        return self.ids[entry]

    def token(self, token_id):
        return self.entries[token_id]

    @property
    def pad(self):
        return 0

    @property
    def bos(self):
        return self.ids[BOS]

    @property
    def eos(self):
        return self.ids[EOS]

    @property
    def space(self):
        return self.ids[SP]

    @property
    def newline(self):
        return self.ids[NL]

    @property
    def byte(self):
        return self.ids[BYTE]

    def is_boundary(self, token_id):
        return token_id in (self.newline, self.ids[";"], self.eos)

    def tokenize(self, text):
        ids = self.ids
        out = []
        for m in _SCAN.finditer(text.strip()):
            piece = m.group()
            if piece.isspace():
                out.append(ids[NL] if "\n" in piece else ids[SP])
            elif piece in ids:
                out.append(ids[piece])
            elif piece.isascii() and piece.isalpha():
                out.extend(ids[ch] for ch in piece)
            else:
                for b in piece.encode("utf-8"):
                    out.extend((ids[BYTE], ids[f"{b >> 4:x}"], ids[f"{b & 15:x}"]))
        return out

    def detokenize(self, token_ids):
        parts = []
        pending = bytearray()
        toks = list(token_ids)
        i = 0
        while i < len(toks):
            tid = toks[i]
            if tid == self.byte and i + 2 < len(toks):
                hi, lo = self.entries[toks[i + 1]], self.entries[toks[i + 2]]
                if len(hi) == 1 and len(lo) == 1 and hi in _HEX and lo in _HEX:
                    pending.append(int(hi + lo, 16))
                    i += 3
                    continue
            if pending:
                parts.append(pending.decode("utf-8", errors="replace"))
                pending = bytearray()
            if tid not in (self.pad, self.bos, self.eos, self.byte):
                parts.append(self.entries[tid])
            i += 1
        if pending:
            parts.append(pending.decode("utf-8", errors="replace"))
        return "".join(parts)


def normalize_whitespace(text):
    """Collapse whitespace the way tokenization does and strip the ends."""
    out = []
    for m in _SCAN.finditer(text):
        piece = m.group()
        if piece.isspace():
            out.append("\n" if "\n" in piece else " ")
        else:
            out.append(piece)
    return "".join(out).strip()


VOCAB = Vocabulary()


def tokenize(text):
    return VOCAB.tokenize(text)


def detokenize(token_ids):
    return VOCAB.detokenize(token_ids)


def content_tokens(text):
    """Tokens with whitespace removed, used for overlap and F1 scores."""
    return [t for t in VOCAB.tokenize(text) if t not in (VOCAB.space, VOCAB.newline)]
