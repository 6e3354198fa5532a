#!/usr/bin/env python3
"""Regenerate the bundled fixture under data/fixture/.

Produces a 1,000-sentence external corpus, small CommonGen-style
train/dev/test splits, a concept vocabulary and a pipeline config. Output is
a pure function of SEED.

    python3 tools/gen_fixture.py
"""

import json
import pathlib
import random

SEED = 20211

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "fixture"
LEXICON = ROOT / "crates" / "core" / "data" / "lexicon.json"

# (subject phrase, head noun, plural?)
SUBJECTS = [
    ("a man", "man", False), ("a woman", "woman", False), ("the boy", "boy", False),
    ("a girl", "girl", False), ("a child", "child", False), ("a dog", "dog", False),
    ("the cat", "cat", False), ("a chef", "chef", False), ("the player", "player", False),
    ("an old man", "man", False), ("two girls", "girl", True), ("the boys", "boy", True),
    ("two dogs", "dog", True), ("a young woman", "woman", False), ("the team", "team", False),
    ("a bird", "bird", False), ("a horse", "horse", False), ("the children", "child", True),
]

# (lemma, third person singular)
VERBS = [
    ("sit", "sits"), ("throw", "throws"), ("catch", "catches"), ("ride", "rides"),
    ("paddle", "paddles"), ("cook", "cooks"), ("walk", "walks"), ("read", "reads"),
    ("hold", "holds"), ("play", "plays"), ("wash", "washes"), ("cut", "cuts"),
    ("eat", "eats"), ("drink", "drinks"), ("climb", "climbs"), ("carry", "carries"),
    ("push", "pushes"), ("pull", "pulls"), ("watch", "watches"), ("kick", "kicks"),
    ("paint", "paints"), ("draw", "draws"), ("take", "takes"), ("fly", "flies"),
]

# (object phrase, head noun)
OBJECTS = [
    ("a frisbee", "frisbee"), ("the ball", "ball"), ("a canoe", "canoe"), ("a bike", "bike"),
    ("the kite", "kite"), ("a book", "book"), ("a cup of coffee", "cup"), ("the dishes", "dish"),
    ("a sandwich", "sandwich"), ("a red shirt", "shirt"), ("a small boat", "boat"),
    ("the guitar", "guitar"), ("a pizza", "pizza"), ("some bread", "bread"), ("a knife", "knife"),
    ("a plate", "plate"), ("a picture", "picture"), ("a camera", "camera"), ("an umbrella", "umbrella"),
    ("a bottle of water", "bottle"), ("a basket", "basket"), ("a wooden chair", "chair"),
    ("a helmet", "helmet"), ("a skateboard", "skateboard"), ("the net", "net"),
]

# (location phrase, head nouns)
PLACES = [
    ("in the park", ["park"]), ("on the shore of the lake", ["shore", "lake"]),
    ("by the side of the road", ["side", "road"]), ("in the kitchen", ["kitchen"]),
    ("on the beach", ["beach"]), ("near the river", ["river"]), ("at the table", ["table"]),
    ("in the snow", ["snow"]), ("on the mountain", ["mountain"]), ("under a tree", ["tree"]),
    ("on the field", ["field"]), ("in the street", ["street"]), ("behind the trailer", ["trailer"]),
    ("in the garden", ["garden"]), ("at the station", ["station"]), ("on the bridge", ["bridge"]),
    ("in the office", ["office"]), ("next to the window", ["window"]), ("in the grass", ["grass"]),
]

# Sentences that must be in the corpus verbatim.
ANCHORS = [
    # concept sets with known answers
    "A dog leaps to catch a thrown frisbee.",
    "The dog catches the frisbee when the boy throws it.",
    "A man throws away his dog's favorite frisbee expecting him to catch it in the air.",
    "Canoe on a shore of lake.",
    "Canoe on shore with rainbow across the lake.",
    "Several canoes parked in the grass on the shore of a lake.",
    "Two men in red shirts are sitting on chairs, by the side of the road, behind that open trailer.",
    "Two men, one wearing a straw hat, blue shirt, both with baskets in front of them, sitting on the side of a dirt road.",
    "An older man with a tan shirt and hat sitting on the side of a road with bricks all around him.",
    "A man in a white shirt and black pants standing at the side of the road.",
    "A man in a tan shirt sits on the side of a road.",
    # pseudo concept set equals a held-out set exactly: must be dropped
    "Shirts sit by the side of the road on a trailer.",
    "A canoe sits on the shore of the lake.",
    # pseudo concept set strictly contains a held-out set: dropped in subset mode only
    "A man sits by the side of the road in a shirt on a trailer.",
]


def sentence(rng):
    subj, _, plural = rng.choice(SUBJECTS)
    lemma, third = rng.choice(VERBS)
    verb = lemma if plural else third
    obj, _ = rng.choice(OBJECTS)
    place, _ = rng.choice(PLACES)
    shape = rng.random()
    if shape < 0.6:
        text = f"{subj} {verb} {obj} {place}."
    elif shape < 0.85:
        text = f"{subj} {verb} {place} with {obj}."
    else:
        subj2, _, plural2 = rng.choice(SUBJECTS)
        lemma2, third2 = rng.choice(VERBS)
        text = f"While {subj2} {lemma2 if plural2 else third2}, {subj} {verb} {obj} {place}."
    return text[0].upper() + text[1:]


def concept_example(rng):
    """A concept set and up to three targets that mention every concept."""
    subj, subj_head, plural = rng.choice(SUBJECTS)
    lemma, third = rng.choice(VERBS)
    obj, obj_head = rng.choice(OBJECTS)
    place, place_heads = rng.choice(PLACES)
    concepts = [subj_head, lemma, obj_head] + place_heads[:1]
    targets = []
    for _ in range(rng.randint(1, 3)):
        s2, s2_head, p2 = rng.choice([s for s in SUBJECTS if s[1] == subj_head])
        verb = lemma if p2 else third
        shape = rng.random()
        if shape < 0.5:
            t = f"{s2} {verb} {obj} {place}."
        else:
            t = f"{place.capitalize()}, {s2} {verb} {obj}."
        t = t[0].upper() + t[1:]
        if t not in targets:
            targets.append(t)
    return sorted(set(concepts), key=concepts.index), targets


def main():
    rng = random.Random(SEED)
    lexicon = json.loads(LEXICON.read_text())["pos_lexicon"]
    used = {s[1] for s in SUBJECTS} | {v[0] for v in VERBS} | {o[1] for o in OBJECTS}
    used |= {h for p in PLACES for h in p[1]}
    missing = sorted(w for w in used if w not in lexicon)
    assert not missing, f"lemmas missing from lexicon: {missing}"

    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "commongen").mkdir(exist_ok=True)

    known_answers = [
        (["dog", "frisbee", "catch", "throw"], [
            "A dog leaps to catch a thrown frisbee.",
            "The dog catches the frisbee when the boy throws it.",
        ]),
        (["lake", "shore", "canoe"], [
            "Canoe on a shore of lake.",
            "Canoe on shore with rainbow across the lake.",
        ]),
    ]
    test_anchor = [
        (["trailer", "shirt", "side", "sit", "road"], [
            "A man in a white shirt sits on the side of a trailer on the road.",
        ]),
        (["canoe", "sit", "shore", "lake"], [
            "A canoe sits on the shore of a calm lake.",
        ]),
    ]

    seen_keys = {" ".join(sorted(c)) for c, _ in known_answers + test_anchor}
    generated = []
    while len(generated) < 110:
        concepts, targets = concept_example(rng)
        key = " ".join(sorted(concepts))
        if key in seen_keys:
            continue
        seen_keys.add(key)
        generated.append((concepts, targets))

    splits = {
        "train": known_answers + generated[:80],
        "dev": generated[80:95],
        "test": test_anchor + generated[95:],
    }
    for name, entries in splits.items():
        with open(OUT / "commongen" / f"{name}.jsonl", "w") as f:
            for concepts, targets in entries:
                f.write(json.dumps({"concepts": concepts, "targets": targets}) + "\n")

    # Corpus: anchors, a few CommonGen targets verbatim (exclusion has work
    # to do), then generated sentences up to 1,000.
    corpus = list(ANCHORS)
    for _, targets in generated[:20] + generated[80:85]:
        corpus.append(targets[0])
    seen = set(corpus)
    while len(corpus) < 1000:
        s = sentence(rng)
        if s not in seen:
            seen.add(s)
            corpus.append(s)
    body = corpus[len(ANCHORS):]
    rng.shuffle(body)
    corpus = corpus[: len(ANCHORS)] + body
    (OUT / "corpus.txt").write_text("\n".join(corpus) + "\n")

    vocab = sorted(w for w, tags in lexicon.items() if "NOUN" in tags or "VERB" in tags)
    vocab += ["ice_cream", "fire truck"]
    (OUT / "vocab.txt").write_text("\n".join(vocab) + "\n")

    print(f"{len(corpus)} sentences, {len(vocab)} vocabulary entries, "
          + ", ".join(f"{k}={len(v)}" for k, v in splits.items()))


if __name__ == "__main__":
    main()
