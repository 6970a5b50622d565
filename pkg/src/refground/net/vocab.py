"""Word vocabulary; index 0 is reserved for out-of-vocabulary tokens."""

from __future__ import annotations

UNK = "<unk>"


class Vocabulary:
    def __init__(self, words):
        listed = list(words)
        if listed[:1] != [UNK]:
            listed = [UNK] + [w for w in listed if w != UNK]
        self.words = listed
        self._index = {w: i for i, w in enumerate(self.words)}

    @classmethod
    def build(cls, token_sequences):
        """Sorted unique tokens from an iterable of token sequences."""
        seen = set()
        for seq in token_sequences:
            seen.update(seq)
        return cls(sorted(seen))

    def encode(self, word):
        return self._index.get(word, 0)

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self._index

    def to_list(self):
        return list(self.words)
