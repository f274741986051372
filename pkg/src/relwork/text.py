"""Text normalization: tokenization, stemming, and sentence preprocessing.

Every piece of text in the system (candidate sentences, gold sections,
titles used as queries) passes through the same pipeline: lowercase,
split into alphanumeric tokens, stem each purely alphabetic token with
the classic Porter algorithm.  Sentences outside the 7..80 token range
are rejected as too short to carry content or too long to be a real
sentence.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

MIN_SENTENCE_TOKENS = 7
MAX_SENTENCE_TOKENS = 80

# Tokens are runs of lowercase letters/digits; intra-word hyphens are kept
# so "state-of-the-art" survives as one token.
_TOKEN_RE = re.compile(r"[a-z0-9]+(?:-[a-z0-9]+)*")

_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    ch = word[i]
    if ch in _VOWELS:
        return False
    if ch == "y":
        # y acts as a vowel when preceded by a consonant ("syzygy").
        return i == 0 or not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-consonant sequences [C](VC)^m[V] in the stem."""
    m = 0
    prev_vowel = False
    for i in range(len(stem)):
        if _is_consonant(stem, i):
            if prev_vowel:
                m += 1
            prev_vowel = False
        else:
            prev_vowel = True
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(word: str) -> bool:
    return (
        len(word) >= 2
        and word[-1] == word[-2]
        and _is_consonant(word, len(word) - 1)
    )


def _ends_cvc(word: str) -> bool:
    # consonant-vowel-consonant where the final consonant is not w, x or y
    if len(word) < 3:
        return False
    return (
        _is_consonant(word, len(word) - 3)
        and not _is_consonant(word, len(word) - 2)
        and _is_consonant(word, len(word) - 1)
        and word[-1] not in "wxy"
    )


# Suffix tables for steps 2-4.  Each entry: suffix -> replacement, applied
# when the remaining stem has measure above the step's threshold.
_STEP2 = (
    ("ational", "ate"), ("tional", "tion"), ("enci", "ence"), ("anci", "ance"),
    ("izer", "ize"), ("abli", "able"), ("alli", "al"), ("entli", "ent"),
    ("eli", "e"), ("ousli", "ous"), ("ization", "ize"), ("ation", "ate"),
    ("ator", "ate"), ("alism", "al"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("aliti", "al"), ("iviti", "ive"), ("biliti", "ble"),
)

_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

_STEP4 = (
    "al", "ance", "ence", "er", "ic", "able", "ible", "ant", "ement",
    "ment", "ent", "ion", "ou", "ism", "ate", "iti", "ous", "ive", "ize",
)


def porter_stem(word: str) -> str:
    """Stem a lowercase alphabetic word with the Porter algorithm."""
    if len(word) <= 2:
        return word

    # Step 1a: plurals.
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif not word.endswith("ss") and word.endswith("s"):
        word = word[:-1]

    # Step 1b: -eed, -ed, -ing.
    fix_up = False
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    elif word.endswith("ed") and _has_vowel(word[:-2]):
        word = word[:-2]
        fix_up = True
    elif word.endswith("ing") and _has_vowel(word[:-3]):
        word = word[:-3]
        fix_up = True
    if fix_up:
        if word.endswith(("at", "bl", "iz")):
            word += "e"
        elif _ends_double_consonant(word) and word[-1] not in "lsz":
            word = word[:-1]
        elif _measure(word) == 1 and _ends_cvc(word):
            word += "e"

    # Step 1c: terminal y -> i after a vowel.
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    # Step 2: double suffixes, measure > 0.
    for suffix, repl in _STEP2:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _measure(stem) > 0:
                word = stem + repl
            break

    # Step 3: -ic-, -full, -ness etc., measure > 0.
    for suffix, repl in _STEP3:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _measure(stem) > 0:
                word = stem + repl
            break

    # Step 4: residual suffixes, measure > 1.
    for suffix in _STEP4:
        if word.endswith(suffix):
            stem = word[: -len(suffix)]
            if _measure(stem) > 1:
                # -ion only drops after s or t.
                if suffix != "ion" or (stem and stem[-1] in "st"):
                    word = stem
            break

    # Step 5a: terminal e.
    if word.endswith("e"):
        stem = word[:-1]
        m = _measure(stem)
        if m > 1 or (m == 1 and not _ends_cvc(stem)):
            word = stem

    # Step 5b: -ll with measure > 1.
    if _measure(word) > 1 and _ends_double_consonant(word) and word.endswith("l"):
        word = word[:-1]

    return word


def tokenize(raw: str) -> list[str]:
    """Lowercase and split into tokens, dropping punctuation."""
    return _TOKEN_RE.findall(raw.lower())


def normalize(raw: str) -> list[str]:
    """Tokenize and stem.  Tokens with digits or hyphens pass unstemmed."""
    return [porter_stem(t) if t.isalpha() else t for t in tokenize(raw)]


@dataclass(frozen=True)
class Sentence:
    """A preprocessed sentence tied to the document it came from.

    position is the sentence's index in the source document's original
    order (abstract first, then body), counted before any rejection.
    """

    tokens: tuple[str, ...]
    doc_id: str
    position: int
    raw: str = field(default="", compare=False)

    def __len__(self) -> int:
        return len(self.tokens)


def preprocess_sentence(raw: str, doc_id: str, position: int) -> Sentence | None:
    """Normalize one sentence; None when its length falls outside 7..80 tokens."""
    tokens = normalize(raw)
    if not MIN_SENTENCE_TOKENS <= len(tokens) <= MAX_SENTENCE_TOKENS:
        return None
    return Sentence(tokens=tuple(tokens), doc_id=doc_id, position=position, raw=raw)
