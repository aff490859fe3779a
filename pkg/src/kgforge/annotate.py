"""Lightweight rule annotator: sentences, tokens, lemmas, coarse POS and NER.

Stands in for a full NLP toolchain when only raw incident text is available.
Tag fidelity is best-effort; the tags only need to be good enough for the
mention rules and the relation features.
"""
from __future__ import annotations

import re
from dataclasses import replace

from .corpus import Document, Token
from .gazetteers import GazetteerSet

COORD_RE = re.compile(r"\d{1,3}:\d{2}(?:\.\d+)?[NSEW]")
_TOKEN_RE = re.compile(
    r"""
    \d{1,3}:\d{2}(?:\.\d+)?[NSEW]           # coordinate, e.g. 05:28N or 22:15.0N
    | \d{4}-\d{2}-\d{2}                     # ISO date
    | \d+(?:[.,]\d+)*                       # numbers
    | [A-Za-z0-9]+(?:[-'’][A-Za-z0-9]+)*  # words, hyphenated compounds
    | \S                                    # any other single character
    """,
    re.VERBOSE,
)
_TERMINAL = {".", "!", "?"}

MONTHS = {
    "january": 1, "february": 2, "march": 3, "april": 4, "may": 5, "june": 6,
    "july": 7, "august": 8, "september": 9, "october": 10, "november": 11, "december": 12,
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "jun": 6, "jul": 7, "aug": 8,
    "sep": 9, "sept": 9, "oct": 10, "nov": 11, "dec": 12,
}
NUMBER_WORDS = {
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "twenty", "thirty", "dozen",
    "several",
}

_CLOSED = {
    **dict.fromkeys(["the", "a", "an", "this", "these", "those", "all", "some", "no",
                     "another", "each", "every", "both", "any"], "DT"),
    **dict.fromkeys(["on", "in", "at", "near", "from", "of", "off", "by", "with", "into",
                     "onto", "upon", "about", "around", "before", "after", "during", "while",
                     "as", "for", "through", "towards", "toward", "against", "alongside",
                     "aboard", "via", "within", "without", "under", "over", "until", "than",
                     "south", "north", "east", "west", "southeast", "southwest", "northeast",
                     "northwest", "if", "because", "whilst"], "IN"),
    "to": "TO",
    **dict.fromkeys(["and", "or", "but", "nor"], "CC"),
    **dict.fromkeys(["he", "she", "it", "they", "we", "them", "him", "i", "you", "us"], "PRP"),
    **dict.fromkeys(["their", "its", "his", "her", "our", "my", "your"], "PRP$"),
    **dict.fromkeys(["who", "what", "whom"], "WP"),
    **dict.fromkeys(["which", "that", "whose"], "WDT"),
    **dict.fromkeys(["when", "where", "how", "why"], "WRB"),
    **dict.fromkeys(["can", "could", "may", "might", "must", "shall", "should", "will", "would"], "MD"),
    **dict.fromkeys(["not", "also", "then", "later", "safely", "subsequently", "previously",
                     "immediately", "reportedly", "away", "again", "there", "here", "still",
                     "aboard", "underway", "successfully"], "RB"),
    "was": "VBD", "were": "VBD", "is": "VBZ", "are": "VBP", "am": "VBP", "be": "VB",
    "been": "VBN", "being": "VBG", "has": "VBZ", "have": "VBP", "had": "VBD",
    "did": "VBD", "does": "VBZ", "do": "VBP",
    "nm": "NN", "nautical": "JJ",
}
_PUNCT_TAGS = {
    ",": ",", ".": ".", "!": ".", "?": ".", ":": ":", ";": ":", "-": ":", "–": ":", "—": ":",
    "(": "-LRB-", ")": "-RRB-", '"': "''", "“": "``", "”": "''", "'": "''", "‘": "``", "’": "''",
}
_NOT_ADVERBS = {"supply", "apply", "reply", "family", "assembly", "italy", "rally", "ally"}
_BE_HAVE = {"was", "were", "is", "are", "am", "be", "been", "being", "has", "have", "had"}

# Participles that behave as prenominal adjectives in incident reports.
PARTICIPIAL_ADJ = {
    "armed", "anchored", "berthed", "moored", "unknown", "unidentified", "suspected",
    "suspicious", "underway", "drifting", "sailing", "steaming", "masked", "flagged",
    "general", "local", "offshore", "unarmed", "several", "unauthorised", "unauthorized",
    "small", "large", "wooden", "high-speed", "fast", "safe", "alert", "previous", "other",
    "chemical", "crude", "oil", "product", "fishing",
}

IRREGULAR = {
    "was": "be", "were": "be", "is": "be", "are": "be", "am": "be", "been": "be", "being": "be",
    "has": "have", "had": "have", "having": "have", "did": "do", "does": "do", "done": "do",
    "stole": "steal", "stolen": "steal", "took": "take", "taken": "take", "fled": "flee",
    "shot": "shoot", "held": "hold", "threw": "throw", "thrown": "throw", "got": "get",
    "went": "go", "gone": "go", "came": "come", "saw": "see", "seen": "see", "left": "leave",
    "broke": "break", "broken": "break", "sought": "seek", "spotted": "spot", "caught": "catch",
    "men": "man", "crewmen": "crewman", "seamen": "seaman", "gunmen": "gunman",
    "fishermen": "fisherman", "watchmen": "watchman", "thieves": "thief", "knives": "knife",
    "people": "person",
}
_IRREGULAR_PLURALS = {"people", "thieves", "knives", "men"}

# Base forms used to disambiguate suffix stripping (kidnapp -> kidnap, fir -> fire).
KNOWN_BASES = {
    "board", "attack", "hijack", "kidnap", "rob", "steal", "fire", "escape", "approach",
    "raise", "notice", "release", "inform", "attempt", "abort", "arrest", "rescue", "sail",
    "anchor", "berth", "moor", "report", "take", "hold", "threaten", "flee", "open", "close",
    "detect", "abduct", "injure", "tie", "lock", "search", "muster", "alert", "respond",
    "arrive", "depart", "seize", "use", "carry", "damage", "hit", "shoot", "transit",
    "proceed", "continue", "sight", "spot", "cut", "climb", "enter", "demand", "pay",
    "free", "sound", "activate", "increase", "evade", "manoeuvre", "maneuver", "retreat",
    "assault", "rob", "fire", "seafarer", "robber", "pirate", "vessel", "ship", "crew",
    "passenger", "intruder", "terrorist", "assailant", "tanker", "carrier", "ferry",
    "item", "store", "engine", "part", "property", "belonging", "hostage", "weapon", "gun",
    "skiff", "boat", "ladder", "hook", "rope", "position", "state", "country", "coast",
    "suspect", "perpetrator", "attacker", "militant", "trawler", "tug", "yacht", "barge",
    "incident", "authority", "alarm", "watchkeeper", "guard", "member", "officer", "master",
    "note", "hull", "plan", "kill", "wound", "board", "navigate", "refuse", "stop",
    "follow", "chase", "warn", "return", "patrol", "investigate", "recover", "save",
    "tow", "drift", "head", "lower", "cargo", "dhow", "reefer", "tugboat", "handle",
    "approach", "notice", "secure", "threaten", "scan", "dock", "load", "discharge",
}


def tokenize(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0), m.start(), m.end()) for m in _TOKEN_RE.finditer(text)]


def split_sentences(tokens: list[tuple[str, int, int]]) -> list[list[tuple[str, int, int]]]:
    sents, cur = [], []
    for tok in tokens:
        cur.append(tok)
        if tok[0] in _TERMINAL:
            sents.append(cur)
            cur = []
    if cur:
        sents.append(cur)
    return sents


def _is_punct(word: str) -> bool:
    return not any(c.isalnum() for c in word)


def _is_vowel(c: str) -> bool:
    return c in "aeiou"


def _strip_suffix(word: str, suffix: str) -> str | None:
    """Candidate bases for ``word`` with ``suffix`` removed; prefers known bases."""
    stem = word[: -len(suffix)]
    if len(stem) < 2:
        return None
    options = [stem, stem + "e"]
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "aeiouls":
        options.insert(0, stem[:-1])
    if suffix in ("ed", "es") and stem.endswith("i"):
        options.insert(0, stem[:-1] + "y")
    for opt in options:
        if opt in KNOWN_BASES:
            return opt
    # heuristics when the base is not in the lexicon
    if stem.endswith("i"):
        return stem[:-1] + "y"
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in "aeiouls":
        return stem[:-1]
    if stem[-1] in "vzcu" or (stem[-1] == "s" and _is_vowel(stem[-2])):
        return stem + "e"
    if len(stem) == 3 and not _is_vowel(stem[0]) and _is_vowel(stem[1]) and not _is_vowel(stem[2]):
        return stem + "e"
    return stem


def lemmatize(word: str, pos: str) -> str:
    if pos in ("NNP", "NNPS"):
        return word
    w = word.lower()
    if w in IRREGULAR:
        return IRREGULAR[w]
    if _is_punct(w) or w[0].isdigit():
        return word
    if not w.isalpha():
        return w
    if pos.startswith("VB") or pos == "JJ":
        if w.endswith("ied") and len(w) > 4:
            return w[:-3] + "y"
        if w.endswith("ed") and pos != "JJ":
            return _strip_suffix(w, "ed") or w
        if w.endswith("ing") and len(w) > 5:
            return _strip_suffix(w, "ing") or w
        if pos == "VBZ" and w.endswith("s"):
            return w[:-2] if w.endswith(("ches", "shes", "sses", "xes")) else w[:-1]
        return w
    if pos == "NNS":
        if w.endswith("ies") and len(w) > 4:
            return w[:-3] + "y"
        if w.endswith(("ches", "shes", "sses", "xes")):
            return w[:-2]
        if w.endswith("men") and len(w) > 4:
            return w[:-3] + "man"
        if w.endswith("s") and not w.endswith(("ss", "us", "is")):
            return w[:-1]
    return w


def _tag_pos(words: list[str]) -> list[str]:
    tags = []
    for i, word in enumerate(words):
        low = word.lower()
        prev = words[i - 1].lower() if i > 0 else ""
        prev2 = words[i - 2].lower() if i > 1 else ""
        if _is_punct(word):
            tag = _PUNCT_TAGS.get(word, "SYM")
        elif COORD_RE.fullmatch(word) or word[0].isdigit() or low in NUMBER_WORDS:
            tag = "CD"
        elif low in _CLOSED:
            tag = _CLOSED[low]
        elif "-" in word and (low.endswith("ed") or low.split("-")[-1] in PARTICIPIAL_ADJ):
            tag = "JJ"
        elif low in MONTHS and word[0].isupper():
            tag = "NNP"
        elif word[0].isupper() and (i > 0 and words[i - 1] not in _TERMINAL and words[i - 1] != ":"
                                    or word.isupper() and len(word) > 1):
            tag = "NNP"
        elif low in PARTICIPIAL_ADJ:
            tag = "JJ"
        elif low.endswith("ed"):
            tag = "VBN" if (prev in _BE_HAVE or prev2 in _BE_HAVE and prev in ("not", "also", "reportedly")) else "VBD"
        elif low.endswith("ing") and len(low) > 4:
            tag = "VBG"
        elif low.endswith("ly") and len(low) > 4 and low not in _NOT_ADVERBS:
            tag = "RB"
        elif prev == "to" or prev in ("could", "would", "did", "to", "must", "can", "will"):
            tag = "VB"
        elif low.endswith(("ous", "ful", "ive", "able", "ible", "ic")):
            tag = "JJ"
        elif low.endswith("men") and len(low) > 4 or low in _IRREGULAR_PLURALS:
            tag = "NNS"
        elif low in IRREGULAR and IRREGULAR[low] != low:
            tag = "VBN" if prev in _BE_HAVE else "VBD"
        elif low.endswith("s") and not low.endswith(("ss", "us", "is")) and len(low) > 3:
            tag = "NNS"
        else:
            tag = "NN"
        tags.append(tag)
    return tags


def _tag_dates(words: list[str], ner: list[str]) -> None:
    """Longest-match-first DATE spans over one sentence."""
    low = [w.lower().rstrip(".") for w in words]

    def is_day(i):
        return i < len(words) and words[i].isdigit() and 1 <= int(words[i]) <= 31

    def is_year(i):
        return i < len(words) and words[i].isdigit() and len(words[i]) == 4 and 1900 <= int(words[i]) <= 2099

    def is_month(i):
        return i < len(words) and low[i] in MONTHS and words[i][0].isupper()

    i = 0
    while i < len(words):
        n = 0
        if is_day(i) and is_month(i + 1):
            n = 3 if is_year(i + 2) else 2
        elif is_month(i) and is_day(i + 1):
            n = 2
            if i + 3 < len(words) and words[i + 2] == "," and is_year(i + 3):
                n = 4
            elif is_year(i + 2):
                n = 3
        elif is_month(i) and is_year(i + 1):
            n = 2
        elif re.fullmatch(r"\d{4}-\d{2}-\d{2}", words[i]) or is_year(i):
            n = 1
        if n:
            for j in range(i, i + n):
                ner[j] = "DATE"
            i += n
        else:
            i += 1


def _tag_coordinates(words: list[str], ner: list[str]) -> None:
    i = 0
    while i < len(words):
        if COORD_RE.fullmatch(words[i]) and ner[i] == "O":
            j = i + 1
            # "05:28N – 002:21E": optional dash(es) then the second coordinate
            k = j
            while k < len(words) and words[k] in ("-", "–", "—", "/", ","):
                k += 1
            if k < len(words) and k - j <= 2 and COORD_RE.fullmatch(words[k]):
                j = k + 1
            for t in range(i, j):
                ner[t] = "LOCATION"
            i = j
        else:
            i += 1


def _tag_phrases(keys: list[str], ner: list[str], table, tag: str) -> None:
    for start, end, _ in table.find_all(keys):
        if all(ner[t] == "O" for t in range(start, end)):
            for t in range(start, end):
                ner[t] = tag


def annotate_sentence(words: list[str], gazetteers: GazetteerSet) -> tuple[list[str], list[str], list[str]]:
    pos = _tag_pos(words)
    lemmas = [lemmatize(w, p) for w, p in zip(words, pos)]
    ner = ["O"] * len(words)
    _tag_dates(words, ner)
    _tag_coordinates(words, ner)
    _tag_phrases(words, ner, gazetteers.places, "LOCATION")
    lower_lemmas = [l.lower() for l in lemmas]
    _tag_phrases(lower_lemmas, ner, gazetteers.actors, "ACTOR")
    _tag_phrases(lower_lemmas, ner, gazetteers.incidents, "INCIDENT")
    for i, p in enumerate(pos):
        if p == "CD" and ner[i] == "O":
            ner[i] = "NUMBER"
    return pos, lemmas, ner


def annotate(doc: Document, gazetteers: GazetteerSet) -> Document:
    """Return ``doc`` with sentences re-derived from its text by the rule annotator."""
    sentences = []
    for sent in split_sentences(tokenize(doc.text)):
        words = [w for w, _, _ in sent]
        pos, lemmas, ner = annotate_sentence(words, gazetteers)
        sentences.append(tuple(
            Token(surface=w, lemma=l, pos=p, ner=n, char_start=s, char_end=e)
            for (w, s, e), p, l, n in zip(sent, pos, lemmas, ner)
        ))
    # coreference chains are kept only if they still address valid spans
    chains = tuple(
        c for c in doc.coref_chains
        if all(si < len(sentences) and 0 <= a < b <= len(sentences[si]) for si, a, b in c)
    )
    return replace(doc, sentences=tuple(sentences), coref_chains=chains)
