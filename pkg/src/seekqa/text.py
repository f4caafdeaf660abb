"""Tokenization and surface-form normalization shared by grounding and the stub encoder.

The tokenizer is intentionally plain: lowercase, alphanumeric runs only.
Both concept grounding and the stub contextual encoder use it, so token
spans recorded during grounding line up with encoder token positions.
"""

from __future__ import annotations

import re

_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Fixed function-word list, versioned. Single-token matches against these are
# never grounded as concepts; they may still occur inside multi-word concepts.
STOPWORDS_VERSION = "1"
STOPWORDS = frozenset(
    """
    a an the and or but if then than when while where why how what which who
    of at by for with about into through during before after above below to
    from up down in out on off over under again once here there all any both
    each few more most some such no nor not only same so too very i you he
    she it we they me him her us them my your its our their this that these
    those is are was were be been being have has had do does did can will
    """.split()
)


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric tokens, punctuation discarded."""
    return _TOKEN_RE.findall(text.lower())


def normalize_concept(surface: str) -> str:
    """Concept surface normalization: lowercase, spaces become underscores."""
    return "_".join(surface.lower().split())


def singular_variants(token: str) -> list[str]:
    """Crude singular candidates for vocabulary fallback, in lookup order.

    Not a lemmatizer: only strips a trailing "s"/"es" so that e.g. "dogs"
    can ground to the concept "dog" and "boxes" to "box".
    """
    variants = []
    if token.endswith("s") and len(token) > 3:
        variants.append(token[:-1])
    if token.endswith("es") and len(token) > 4:
        variants.append(token[:-2])
    return variants
