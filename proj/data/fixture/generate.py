#!/usr/bin/env python3
"""Regenerates the synthetic fixture files in this directory.

Usage: python3 generate.py [outdir]
Output is deterministic (fixed seeds, stdlib only).
"""

import json
import os
import random
import struct
import sys

OUT = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))

NOUNS = ["model", "data", "method", "result", "system", "network", "task", "approach", "analysis", "study"]
ORGS = ["Google", "Microsoft", "Stanford", "OpenAI", "Meta"]
YEARS = ["2016", "2017", "2018", "2019", "2020", "2021", "2022", "2023"]

# period -> (weights over items)
VERBS = {
    "T1": {"explore": 6, "show": 6, "use": 6, "study": 3, "delve": 1, "showcase": 1, "leverage": 1},
    "T2": {"explore": 2, "show": 2, "use": 3, "study": 2, "delve": 7, "showcase": 6, "leverage": 5},
}
ADJS = {
    "T1": {"complex": 6, "important": 6, "simple": 4, "large": 4, "intricate": 1, "crucial": 1, "pivotal": 1},
    "T2": {"complex": 2, "important": 2, "simple": 3, "large": 3, "intricate": 6, "crucial": 6, "pivotal": 5},
}
ADVS = {
    "T1": {"also": 6, "here": 5, "then": 5, "notably": 1, "additionally": 1},
    "T2": {"also": 3, "here": 2, "then": 2, "notably": 6, "additionally": 6},
}
TEMPLATES = {"T1": [4, 3, 3, 2], "T2": [3, 2, 4, 4]}


def pick(rng, table):
    items = list(table)
    return rng.choices(items, weights=[table[k] for k in items])[0]


def third(verb):
    return verb + "s"


def tok(form, lemma, upos, head, deprel, ner="O"):
    return (form, lemma, upos, head, deprel, ner)


def sentence(rng, period):
    t = rng.choices(range(4), weights=TEMPLATES[period])[0]
    n = [rng.choice(NOUNS) for _ in range(3)]
    v = pick(rng, VERBS[period])
    a = pick(rng, ADJS[period])
    if t == 0:
        return [
            tok("We", "we", "PRON", 1, "nsubj"),
            tok(v, v, "VERB", -1, "root"),
            tok("the", "the", "DET", 4, "det"),
            tok(a, a, "ADJ", 4, "amod"),
            tok(n[0], n[0], "NOUN", 1, "obj"),
            tok("of", "of", "ADP", 7, "case"),
            tok("the", "the", "DET", 7, "det"),
            tok(n[1], n[1], "NOUN", 4, "nmod"),
            tok(".", ".", "PUNCT", 1, "punct"),
        ]
    if t == 1:
        return [
            tok("The", "the", "DET", 1, "det"),
            tok(n[0], n[0], "NOUN", 4, "nsubj"),
            tok("does", "do", "AUX", 4, "aux"),
            tok("not", "not", "PART", 4, "advmod"),
            tok(v, v, "VERB", -1, "root"),
            tok(n[1], n[1], "NOUN", 4, "obj"),
            tok("when", "when", "SCONJ", 10, "mark"),
            tok("the", "the", "DET", 8, "det"),
            tok(n[2], n[2], "NOUN", 10, "nsubj"),
            tok("is", "be", "AUX", 10, "cop"),
            tok(a, a, "ADJ", 4, "advcl"),
            tok(".", ".", "PUNCT", 4, "punct"),
        ]
    if t == 2:
        a2 = pick(rng, ADJS[period])
        year, org = rng.choice(YEARS), rng.choice(ORGS)
        return [
            tok("In", "in", "ADP", 1, "case"),
            tok(year, year, "NUM", 4, "obl", "DATE"),
            tok(",", ",", "PUNCT", 4, "punct"),
            tok(org, org, "PROPN", 4, "nsubj", "ORG"),
            tok("released", "release", "VERB", -1, "root"),
            tok("a", "a", "DET", 7, "det"),
            tok(n[0], n[0], "NOUN", 7, "compound"),
            tok(n[1], n[1], "NOUN", 4, "obj"),
            tok("(", "(", "PUNCT", 9, "punct"),
            tok(a2, a2, "ADJ", 7, "amod"),
            tok(")", ")", "PUNCT", 9, "punct"),
            tok("and", "and", "CCONJ", 13, "cc"),
            tok("a", "a", "DET", 13, "det"),
            tok(n[2], n[2], "NOUN", 7, "conj"),
            tok(".", ".", "PUNCT", 4, "punct"),
        ]
    adv = pick(rng, ADVS[period])
    return [
        tok(adv.capitalize(), adv, "ADV", 4, "advmod"),
        tok(",", ",", "PUNCT", 4, "punct"),
        tok("the", "the", "DET", 3, "det"),
        tok(n[0], n[0], "NOUN", 4, "nsubj"),
        tok(third(v), v, "VERB", -1, "root"),
        tok(n[1], n[1], "NOUN", 4, "obj"),
        tok("—", "—", "PUNCT", 9, "punct"),
        tok("a", "a", "DET", 9, "det"),
        tok(a, a, "ADJ", 9, "amod"),
        tok(n[2], n[2], "NOUN", 5, "appos"),
        tok(".", ".", "PUNCT", 4, "punct"),
    ]


def make_corpus(rng, docs_per_period, sents_per_doc, prefix):
    docs = []
    for period in ("T1", "T2"):
        for d in range(docs_per_period):
            doc_id = f"{prefix}{period.lower()}_{d:03d}"
            docs.append((doc_id, period, [sentence(rng, period) for _ in range(sents_per_doc)]))
    return docs


def write_corpus(path, docs, comment):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"# {comment}\n")
        for doc_id, period, sents in docs:
            for si, s in enumerate(sents):
                for ti, (form, lemma, upos, head, deprel, ner) in enumerate(s):
                    f.write(f"{doc_id}\t{period}\t{si}\t{ti}\t{form}\t{lemma}\t{upos}\t{head}\t{deprel}\t{ner}\n")
                f.write("\n")


def put_record_file(path, header, records):
    with open(path, "wb") as f:
        f.write((json.dumps(header, separators=(",", ":")) + "\n").encode())
        for meta, vec in records:
            f.write((json.dumps(meta, separators=(",", ":"), ensure_ascii=False) + "\n").encode())
            f.write(struct.pack("<%df" % len(vec), *vec))


def tkem(docs, target_lemma, dim, rng):
    centers = [[1.0 if i == j else 0.0 for i in range(dim)] for j in (0, 1)]
    recs = []
    for period in ("T1", "T2"):
        for doc_id, p, sents in docs:
            if p != period:
                continue
            for si, s in enumerate(sents):
                text = " ".join(t[0] for t in s)
                for ti, t in enumerate(s):
                    if t[2] != "NOUN" or t[1] != target_lemma:
                        continue
                    sense = 0 if rng.random() < (0.8 if period == "T1" else 0.2) else 1
                    vec = [c * 3.0 + rng.gauss(0, 0.3) for c in centers[sense]]
                    meta = {"period": period, "doc_id": doc_id, "sent_index": si, "token_index": ti,
                            "sentence_text": text}
                    recs.append((meta, vec))
    header = {"magic": "TKEM", "version": 1, "target": target_lemma + "_NOUN", "dim": dim, "count": len(recs)}
    return header, recs


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = random.Random(20240501)
    docs = make_corpus(rng, 30, 12, "d")
    write_corpus(os.path.join(OUT, "corpus.tsv"), docs, "synthetic two-period corpus")

    contrast = make_corpus(random.Random(7), 15, 12, "c")
    write_corpus(os.path.join(OUT, "contrast.tsv"), contrast, "human (T1) vs machine-written (T2) contrast corpus")

    small = [
        ("a1", "T1", [[tok("Cats", "cat", "NOUN", 1, "nsubj"), tok("sleep", "sleep", "VERB", -1, "root"),
                       tok(".", ".", "PUNCT", 1, "punct")]] * 3),
        ("b1", "T2", [[tok("Dogs", "dog", "NOUN", 1, "nsubj"), tok("sleep", "sleep", "VERB", -1, "root"),
                       tok(".", ".", "PUNCT", 1, "punct")]] * 2
         + [[tok("Cats", "cat", "NOUN", 1, "nsubj"), tok("run", "run", "VERB", -1, "root"),
             tok(".", ".", "PUNCT", 1, "punct")]]),
    ]
    write_corpus(os.path.join(OUT, "two_doc.tsv"), small, "two documents")

    hdr, recs = tkem(docs, "model", 8, random.Random(11))
    os.makedirs(os.path.join(OUT, "tkem"), exist_ok=True)
    put_record_file(os.path.join(OUT, "tkem", "model_NOUN.tkem"), hdr, recs)

    # Lexicons.
    words = sorted({t[1].lower() for _, _, ss in docs for s in ss for t in s if t[2] not in ("PUNCT", "NUM")})
    lr = random.Random(3)
    late = {"delve", "showcase", "leverage", "intricate", "crucial", "pivotal", "notably", "additionally"}
    with open(os.path.join(OUT, "aoa.csv"), "w") as f:
        f.write("word,aoa\n")
        for w in words:
            f.write(f"{w},{(8.0 if w in late else 6.0) + lr.uniform(-2, 2):.2f}\n")
    with open(os.path.join(OUT, "prevalence.csv"), "w") as f:
        f.write("word,prevalence\n")
        for w in words:
            f.write(f"{w},{(2.0 if w in late else 2.3) + lr.uniform(-0.3, 0.3):.3f}\n")
    with open(os.path.join(OUT, "sensorimotor.csv"), "w") as f:
        f.write("word,strength\n")
        for w in words:
            f.write(f"{w},{lr.uniform(1, 4):.3f}\n")
    with open(os.path.join(OUT, "stopwords.csv"), "w") as f:
        f.write("word\n")
        for w in ["the", "a", "of", "in", "and", "we", "is", "does", "not", "when", "also", "then", "here"]:
            f.write(w + "\n")
    with open(os.path.join(OUT, "emotion.csv"), "w") as f:
        f.write("word,tag\n")
        for w, t in [("complex", "anger"), ("not", "anger"), ("crucial", "trust"), ("important", "trust"),
                     ("pivotal", "trust"), ("study", "trust"), ("large", "anger")]:
            f.write(f"{w},{t}\n")

    # Annotation inputs.
    ar = random.Random(5)
    pairs = [f"p{i:02d}" for i in range(40)]
    with open(os.path.join(OUT, "pair_features.tsv"), "w") as f:
        f.write("paragraph_id\tgroup_id\toutcome\tavg_word_length\tcommas\tnegations\n")
        for p in pairs:
            base = [ar.gauss(4.5, 0.4), ar.gauss(20, 5), ar.gauss(8, 3)]
            for out, shift in ((0, [0, 0, 0]), (1, [0.6, 6, -3])):
                vals = [b + s + ar.gauss(0, 0.5) * (ar.random() * 2) for b, s in zip(base, shift)]
                f.write(f"{p}\t{p}\t{out}\t" + "\t".join(f"{v:.4f}" for v in vals) + "\n")
    sent = []
    for p in pairs:
        base = [ar.gauss(0, 1) for _ in range(8)]
        sent.append(({"pair_id": p, "version": "human"}, base))
        sent.append(({"pair_id": p, "version": "llm"}, [b + ar.gauss(0, ar.uniform(0.1, 1.0)) for b in base]))
    put_record_file(os.path.join(OUT, "pair_embeddings.sent"),
                    {"magic": "SENT", "version": 1, "dim": 8, "count": len(sent)}, sent)

    shown = {p: ar.choice(["human", "llm"]) for p in pairs}
    # human-preference probability per dimension
    pref = {"clarity": 0.35, "authenticity": 0.7, "trustworthiness": 0.65, "excitement": 0.3}
    raters = ["r1", "r2", "r3"]
    with open(os.path.join(OUT, "ratings.csv"), "w") as f:
        f.write("pair_id,rater_id,dimension,item,raw_choice,shown_A\n")
        for i, p in enumerate(pairs):
            for r in (raters[i % 3], raters[(i + 1) % 3]):
                for dim, ph in pref.items():
                    human = ar.random() < ph
                    strong = ar.random() < 0.4
                    a_side = human == (shown[p] == "human")
                    choice = ("strongly_" if strong else "slightly_") + ("A" if a_side else "B")
                    col = shown[p] if i % 2 == 0 else ""
                    f.write(f"{p},{r},{dim},1,{choice},{col}\n")
    with open(os.path.join(OUT, "assignments.csv"), "w") as f:
        f.write("pair_id,shown_A\n")
        for p in pairs:
            f.write(f"{p},{shown[p]}\n")


if __name__ == "__main__":
    main()
