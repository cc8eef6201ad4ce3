"""Regenerates the bundled substitute corpus and POS lexicon.

The output is committed; this script only documents how it was produced.
Run from the repository root: python3 data/generate_corpus.py
"""
import json
import random

SEED = 20220617

TOPICS = {
    "characterization": {
        "nouns": ["density", "sensitivity", "impact", "friction", "spectroscopy",
                  "diffraction", "crystal", "morphology", "calorimetry", "stability",
                  "measurement", "property", "detonation", "velocity", "hardness",
                  "spectrum", "microscopy", "particle", "size", "surface"],
        "verbs": ["measured", "characterized", "observed", "determined", "analyzed",
                  "examined", "tested", "recorded"],
        "phrases": [("thermal", "decomposition"), ("scanning", "electron"),
                    ("impact", "sensitivity"), ("crystal", "structure")],
    },
    "modeling": {
        "nouns": ["simulation", "model", "potential", "theory", "calculation",
                  "bond", "energy", "barrier", "mechanism", "prediction",
                  "force", "field", "approximation", "algorithm", "molecule",
                  "pathway", "reaction", "state", "transition", "network"],
        "verbs": ["simulated", "predicted", "calculated", "computed", "modeled",
                  "estimated", "derived", "optimized"],
        "phrases": [("molecular", "dynamics"), ("density", "functional"),
                    ("ring", "opening"), ("quantum", "chemistry")],
    },
    "processing": {
        "nouns": ["formulation", "mixing", "extrusion", "casting", "coating",
                  "binder", "granule", "pressing", "process", "scale",
                  "equipment", "batch", "drying", "milling", "composite",
                  "loading", "recrystallization", "solvent", "temperature", "pressure"],
        "verbs": ["processed", "mixed", "extruded", "cast", "coated",
                  "pressed", "dried", "milled"],
        "phrases": [("twin", "screw"), ("spray", "drying"),
                    ("plastic", "bonded"), ("resonant", "acoustic")],
    },
    "synthesis": {
        "nouns": ["synthesis", "nitration", "yield", "precursor", "route",
                  "salt", "reagent", "compound", "intermediate", "cyclization",
                  "acid", "derivative", "purity", "product", "condensation",
                  "oxidation", "amination", "heterocycle", "catalyst", "step"],
        "verbs": ["synthesized", "prepared", "obtained", "produced", "nitrated",
                  "isolated", "purified", "converted"],
        "phrases": [("nitric", "acid"), ("one", "pot"),
                    ("nitrogen", "rich"), ("high", "yield")],
    },
}

SHARED_NOUNS = ["material", "explosive", "study", "sample", "result", "method",
                "performance", "system", "data", "work", "research", "analysis",
                "effect", "behavior", "propellant", "formulations", "series",
                "composition", "condition", "approach", "application", "range",
                "value", "paper", "experiment", "content", "ratio", "time"]
SHARED_VERBS = ["investigated", "reported", "shown", "presented", "used",
                "compared", "found", "described", "evaluated", "discussed",
                "studied", "developed"]
CHEMICALS = ["rdx", "hmx", "cl20", "tnt", "tatb", "fox7", "petn", "ttx",
             "nto", "dnan", "adn", "hns"]
ADJECTIVES = ["new", "novel", "energetic", "thermal", "high", "low", "several",
              "different", "various", "important", "significant", "good",
              "excellent", "large", "small", "detailed", "current", "further",
              "insensitive", "stable", "promising", "potential_adj"]
ADVERBS = ["also", "further_adv", "significantly", "respectively", "however",
           "well", "highly", "greatly", "then", "finally"]
DETERMINERS = ["the", "a", "an", "this", "these", "its", "their", "each", "all", "both"]
PREPOSITIONS = ["of", "in", "on", "for", "with", "by", "from", "to", "at", "under",
                "between", "into", "via"]
CONJUNCTIONS = ["and", "or", "but", "while", "which", "that"]
AUXILIARIES = ["is", "are", "was", "were", "be", "been", "has", "have"]
PRONOUNS = ["we", "it", "they"]

LABELS = list(TOPICS)


def pick_content(rng, topic, secondary):
    r = rng.random()
    if r < 0.42:
        src = TOPICS[topic]
    elif r < 0.55:
        src = TOPICS[secondary]
    else:
        src = None
    return src


def noun(rng, topic, secondary):
    src = pick_content(rng, topic, secondary)
    if src is None:
        if rng.random() < 0.15:
            return rng.choice(CHEMICALS)
        return rng.choice(SHARED_NOUNS)
    if rng.random() < 0.2:
        return " ".join(rng.choice(src["phrases"]))
    return rng.choice(src["nouns"])


def verb(rng, topic, secondary):
    src = pick_content(rng, topic, secondary)
    if src is None:
        return rng.choice(SHARED_VERBS)
    return rng.choice(src["verbs"])


def adj(rng):
    a = rng.choice(ADJECTIVES)
    return "potential" if a == "potential_adj" else a


def sentence(rng, topic, secondary):
    n = lambda: noun(rng, topic, secondary)
    v = lambda: verb(rng, topic, secondary)
    templates = [
        lambda: f"The {adj(rng)} {n()} of {n()} {rng.choice(['was', 'were'])} {v()} by {n()}.",
        lambda: f"In this {n()}, we {v()} the {n()} and {n()} of {rng.choice(CHEMICALS).upper()}.",
        lambda: f"{n().capitalize()} {rng.choice(['is', 'was'])} {v()} with {adj(rng)} {n()} under {n()} {n()}.",
        lambda: f"These {n()}s {v()} a {adj(rng)} {n()} for {n()}, which {rng.choice(['has', 'have'])} {v()} {n()}.",
        lambda: f"{rng.choice(['Finally', 'However', 'Also'])}, the {n()} {v()} {rng.choice(['significantly', 'highly', 'greatly'])} between {n()} and {n()}.",
        lambda: f"Both {n()} and {adj(rng)} {n()} were {v()} via {n()} ({rng.choice(CHEMICALS).upper()}).",
    ]
    return rng.choice(templates)()


def title(rng, topic):
    src = TOPICS[topic]
    first = rng.choice(src["nouns"]).capitalize()
    phrase = " ".join(rng.choice(src["phrases"]))
    chem = rng.choice(CHEMICALS).upper()
    forms = [
        f"{first} of {chem}: {adj(rng)} {phrase} {rng.choice(SHARED_NOUNS)}",
        f"{adj(rng).capitalize()} {phrase} {rng.choice(src['nouns'])} in {chem}-based {rng.choice(SHARED_NOUNS)}s",
        f"On the {rng.choice(src['nouns'])} and {phrase} of {chem}",
    ]
    return rng.choice(forms)


def main():
    rng = random.Random(SEED)
    counts = {"characterization": 64, "modeling": 64, "processing": 65, "synthesis": 65}
    agreed = [lab for lab, c in counts.items() for _ in range(c)]
    disagreements = 42
    records = []
    plan = [(lab, lab) for lab in agreed]
    for _ in range(disagreements):
        a = rng.choice(LABELS)
        b = rng.choice([l for l in LABELS if l != a])
        plan.append((a, b))
    rng.shuffle(plan)
    for i, (la, lb) in enumerate(plan):
        topic = la if rng.random() < 0.5 else lb
        secondary = rng.choice([l for l in LABELS if l != topic])
        body = " ".join(sentence(rng, topic, secondary) for _ in range(rng.randint(6, 10)))
        records.append({
            "id": f"em{i + 1:04d}",
            "title": title(rng, topic),
            "abstract": body,
            "label_a": la,
            "label_b": lb,
        })
    with open("data/energetics_abstracts.jsonl", "w") as f:
        for r in records:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")

    lex = {}
    for t in TOPICS.values():
        for w in t["nouns"]:
            lex[w] = "NOUN"
        for w in t["verbs"]:
            lex[w] = "VERB"
    for w in SHARED_NOUNS:
        lex[w] = "NOUN"
    for w in SHARED_VERBS:
        lex[w] = "VERB"
    for w in ADJECTIVES:
        lex[w.replace("_adj", "")] = "ADJ"
    lex["potential"] = "NOUN"
    for w in ADVERBS:
        lex[w.replace("_adv", "")] = "ADV"
    for w in DETERMINERS:
        lex[w] = "DET"
    for w in PREPOSITIONS:
        lex[w] = "ADP"
    for w in CONJUNCTIONS:
        lex[w] = "CONJ"
    for w in AUXILIARIES:
        lex[w] = "AUX"
    for w in PRONOUNS:
        lex[w] = "PRON"
    with open("data/pos_lexicon.tsv", "w") as f:
        f.write("# token<TAB>tag; tags NOUN and VERB are kept by the lexicon filter\n")
        for w in sorted(lex):
            f.write(f"{w}\t{lex[w]}\n")


if __name__ == "__main__":
    main()
