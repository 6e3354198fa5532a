#!/usr/bin/env python3
"""Regenerate crates/core/data/lexicon.json.

Inflected forms come from lemminflect; every form the ordered suffix rules
below would lemmatize incorrectly becomes an explicit exception, and every
lemma the rules would alter gets an identity exception. The rule engine here
mirrors `LemmaLexicon::lemmatize` in crates/core/src/textnorm.rs.

    pip install lemminflect
    python3 tools/gen_lexicon.py
"""

import json
import pathlib

import lemminflect

from wordlists import BOTH, FUNCTION_EXCEPTIONS, NOUNS, PROPER, VERBS

SUFFIX_RULES = [
    ("sses", "ss", 1), ("ies", "y", 2), ("ches", "ch", 1), ("shes", "sh", 1),
    ("xes", "x", 1), ("zzes", "zz", 1), ("ss", "ss", 1), ("us", "us", 1),
    ("is", "is", 1), ("s", "", 2),
    ("ied", "y", 2),
    ("bbed", "b", 1), ("dded", "d", 1), ("gged", "g", 1), ("mmed", "m", 1),
    ("nned", "n", 1), ("pped", "p", 1), ("rred", "r", 1), ("tted", "t", 1),
    ("eed", "eed", 1), ("ssed", "ss", 1), ("ated", "ate", 1), ("ized", "ize", 1),
    ("ved", "ve", 1), ("ced", "ce", 1), ("ged", "ge", 2), ("ured", "ure", 1),
    ("ired", "ire", 1), ("ided", "ide", 1), ("ed", "", 2),
    ("bbing", "b", 1), ("dding", "d", 1), ("gging", "g", 1), ("mming", "m", 1),
    ("nning", "n", 1), ("pping", "p", 1), ("rring", "r", 1), ("tting", "t", 1),
    ("ssing", "ss", 1), ("ating", "ate", 1), ("izing", "ize", 1), ("ving", "ve", 1),
    ("cing", "ce", 1), ("ging", "ge", 2), ("uring", "ure", 1), ("iring", "ire", 1),
    ("iding", "ide", 1), ("ing", "", 3),
]


def apply_rules(word):
    for suffix, repl, min_stem in SUFFIX_RULES:
        if word.endswith(suffix) and len(word) - len(suffix) >= min_stem:
            return word[: len(word) - len(suffix)] + repl
    return word


def lemmatize(word, exceptions):
    if word in exceptions:
        return exceptions[word]
    return apply_rules(word)


def close_over_suffixes(lemmas, exceptions):
    """Lemma plus a regular suffix must land on a fixed point in one step."""
    changed = True
    while changed:
        changed = False
        words = set(lemmas) | set(exceptions) | set(exceptions.values())
        words |= {l + s for l in lemmas for s in ("s", "es", "ed", "ing")}
        for w in sorted(words):
            once = lemmatize(w, exceptions)
            twice = lemmatize(once, exceptions)
            if twice != once:
                target = twice
                while lemmatize(target, exceptions) != target:
                    target = lemmatize(target, exceptions)
                exceptions[w] = target
                changed = True


def main():
    nouns = set(NOUNS)
    verbs = set(VERBS)
    pos = {}
    for w in nouns:
        pos.setdefault(w, set()).add("NOUN")
    for w in verbs:
        pos.setdefault(w, set()).add("VERB")
    for w in BOTH:
        pos.setdefault(w, set()).update({"NOUN", "VERB"})
    for w in PROPER:
        pos.setdefault(w, set()).add("PROPN")

    exceptions = dict(FUNCTION_EXCEPTIONS)
    lemmas = set(pos)

    # Lemmas must be fixed points.
    for lemma in sorted(lemmas):
        if lemma not in exceptions and apply_rules(lemma) != lemma:
            exceptions[lemma] = lemma

    for lemma in sorted(lemmas):
        tags = pos[lemma]
        upos = []
        if "NOUN" in tags:
            upos.append("NOUN")
        if "VERB" in tags:
            upos.append("VERB")
        for u in upos:
            for tag, forms in lemminflect.getAllInflections(lemma, upos=u).items():
                for form in forms:
                    form = form.lower()
                    if not form.isalpha() or form in lemmas or form in exceptions:
                        continue
                    if apply_rules(form) != lemma:
                        exceptions[form] = lemma

    # Exception values must themselves be fixed points.
    for value in sorted(set(exceptions.values())):
        if value not in exceptions and apply_rules(value) != value:
            exceptions[value] = value

    close_over_suffixes(lemmas, exceptions)

    lexicon = {
        "exceptions": dict(sorted(exceptions.items())),
        "suffix_rules": [list(r) for r in SUFFIX_RULES],
        "pos_lexicon": {w: sorted(t) for w, t in sorted(pos.items())},
    }
    out = pathlib.Path(__file__).resolve().parent.parent / "crates/core/data/lexicon.json"
    out.write_text(json.dumps(lexicon, indent=1, sort_keys=False) + "\n")
    print(f"{len(pos)} lemmas, {len(exceptions)} exceptions -> {out}")


if __name__ == "__main__":
    main()
