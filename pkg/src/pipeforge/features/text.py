"""Tokenizer, rule/lexicon POS tagger and question/answer typing.

Everything here is deterministic and total over non-empty text. The
tagger is intentionally small: a closed-class lexicon plus a handful of
suffix rules over a 15-tag tagset; statistical tagging is out of scope.
"""

from __future__ import annotations

from typing import Optional, Sequence

PUNCTUATION_TOKENS = frozenset({"?", ".", "!", ",", "'", '"'})

TAGSET = (
    "NN", "NNS", "NNP", "NNPS",
    "VB", "VBZ", "VBD", "VBN", "VBG",
    "IN", "DT", "WP", "WRB", "JJ",
    "OTHER",
)

QUESTION_TYPES = (
    "what", "which", "who", "when", "where", "how", "give_list", "boolean_aux",
)

ANSWER_TYPES = ("boolean", "number", "date", "string", "resource")

_WH_LABELS = {
    "what": "what",
    "which": "which",
    "who": "who",
    "whom": "who",
    "when": "when",
    "where": "where",
    "how": "how",
}

_GIVE_LIST = frozenset({"give", "list", "show"})
_BOOLEAN_AUX = frozenset({"is", "are", "was", "were", "do", "does", "did", "can"})

# Closed-class lexicon. Tags outside the tagset (MD, PRP, CC, ...) have no
# slot here, so those words fall through to the suffix rules or OTHER.
_LEXICON = {
    "the": "DT", "a": "DT", "an": "DT", "this": "DT", "that": "DT",
    "these": "DT", "those": "DT", "some": "DT", "any": "DT", "no": "DT",
    "every": "DT", "each": "DT", "all": "DT", "both": "DT",
    "of": "IN", "in": "IN", "on": "IN", "at": "IN", "by": "IN", "for": "IN",
    "with": "IN", "from": "IN", "to": "IN", "through": "IN", "about": "IN",
    "into": "IN", "over": "IN", "under": "IN", "between": "IN", "after": "IN",
    "before": "IN", "during": "IN", "against": "IN", "per": "IN",
    "within": "IN", "as": "IN",
    "what": "WP", "who": "WP", "whom": "WP", "which": "WP",
    "where": "WRB", "when": "WRB", "why": "WRB", "how": "WRB",
    "is": "VBZ", "are": "VBZ", "was": "VBD", "were": "VBD", "am": "VBZ",
    "do": "VB", "does": "VBZ", "did": "VBD", "has": "VBZ", "have": "VB",
    "had": "VBD", "be": "VB", "been": "VBN", "being": "VBG",
}


def tokenize(text: str) -> list[str]:
    """Split on whitespace, then detach leading/trailing punctuation
    (?, ., !, ,, ', \") as separate tokens."""
    if not text.strip():
        raise ValueError("cannot tokenize empty text")
    tokens: list[str] = []
    for chunk in text.split():
        leading: list[str] = []
        trailing: list[str] = []
        while len(chunk) > 1 and chunk[0] in PUNCTUATION_TOKENS:
            leading.append(chunk[0])
            chunk = chunk[1:]
        while len(chunk) > 1 and chunk[-1] in PUNCTUATION_TOKENS:
            trailing.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(leading)
        tokens.append(chunk)
        tokens.extend(reversed(trailing))
    return tokens


def _rule_tag(token: str, position: int) -> str:
    if token in PUNCTUATION_TOKENS:
        return "OTHER"
    lower = token.lower()
    if lower in _LEXICON:
        return _LEXICON[lower]
    if position > 0 and token[0].isupper():
        return "NNP"
    if lower.endswith("ing") and len(lower) > 4:
        return "VBG"
    if lower.endswith("ed") and len(lower) > 3:
        return "VBD"
    if lower.endswith("s") and len(lower) > 2:
        return "NNS"
    return "NN"


def pos_tag(
    tokens: Sequence[str],
    precomputed: Optional[Sequence[str]] = None,
) -> list[tuple[str, str]]:
    """Tag tokens over the 15-tag tagset.

    When ``precomputed`` tags are supplied they win, with tags outside the
    tagset mapped to OTHER; otherwise the lexicon+suffix rules apply.
    """
    if not tokens:
        raise ValueError("cannot tag an empty token list")
    if precomputed is not None:
        if len(precomputed) != len(tokens):
            raise ValueError(
                f"precomputed tag count {len(precomputed)} != token count {len(tokens)}"
            )
        return [
            (tok, tag if tag in TAGSET else "OTHER")
            for tok, tag in zip(tokens, precomputed)
        ]
    return [(tok, _rule_tag(tok, i)) for i, tok in enumerate(tokens)]


def question_type(tokens: Sequence[str]) -> str:
    """First matching rule wins: wh-word, give/list/show, auxiliary,
    default give_list."""
    if not tokens:
        raise ValueError("cannot type an empty token list")
    head = tokens[0].lower()
    if head in _WH_LABELS:
        return _WH_LABELS[head]
    if head in _GIVE_LIST:
        return "give_list"
    if head in _BOOLEAN_AUX:
        return "boolean_aux"
    return "give_list"


def answer_type(tokens: Sequence[str]) -> str:
    """Expected answer kind, derived from the leading tokens."""
    if not tokens:
        raise ValueError("cannot type an empty token list")
    qt = question_type(tokens)
    if qt == "boolean_aux":
        return "boolean"
    head = tokens[0].lower()
    second = tokens[1].lower() if len(tokens) > 1 else ""
    if head == "count" or (head == "how" and second in ("many", "much")):
        return "number"
    if head == "when":
        return "date"
    if head in ("what", "how"):
        return "string"
    return "resource"
