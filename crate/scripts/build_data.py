#!/usr/bin/env python3
"""Build the lexicon, synonym, and sentence snapshots under data/.

Inputs (fetched from the package mirrors, no other network needed):
  * the `nrclex` wheel from PyPI, which bundles the NRC Emotion Lexicon
    word associations as nrc_en.json
  * the `wordnet-db` tarball from npm, which bundles the WordNet 3.1 dict files

Usage:
  pip download --no-deps nrclex -d /tmp/dl
  (cd /tmp/dl && npm pack wordnet-db && tar xzf wordnet-db-*.tgz)
  python3 scripts/build_data.py --nrclex /tmp/dl/nrclex-*.whl --wordnet /tmp/dl/package/dict
"""
import argparse
import json
import re
import zipfile
from pathlib import Path

EMOTIONS = ["anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust"]
LABELS = EMOTIONS + ["negative", "positive"]
WORD_RE = re.compile(r"^[a-z][a-z'-]*$")


def load_nrc(wheel):
    with zipfile.ZipFile(wheel) as z:
        name = next(n for n in z.namelist() if n.endswith("nrc_en.json"))
        return json.loads(z.read(name))


def write_emolex(nrc, out):
    with open(out, "w") as f:
        for word in sorted(nrc):
            labels = set(nrc[word])
            for label in LABELS:
                f.write(f"{word}\t{label}\t{1 if label in labels else 0}\n")


def read_synsets(dict_dir):
    synsets = {}
    glosses = []
    for pos in ["noun", "verb", "adj", "adv"]:
        with open(Path(dict_dir) / f"data.{pos}", encoding="latin-1") as f:
            for line in f:
                if line.startswith("  "):
                    continue
                head, _, gloss = line.partition("|")
                parts = head.split()
                offset, w_cnt = parts[0], int(parts[3], 16)
                lemmas = [re.sub(r"\(.*\)$", "", parts[4 + 2 * i]).lower() for i in range(w_cnt)]
                synsets[(pos, offset)] = lemmas
                glosses.append(gloss.strip())
    return synsets, glosses


def write_synonyms(nrc, synsets, out):
    pairs = set()
    index = {}
    for lemmas in synsets.values():
        for lemma in lemmas:
            index.setdefault(lemma, []).append(lemmas)
    for word in nrc:
        emotions = [l for l in nrc[word] if l in EMOTIONS]
        if not emotions:
            continue
        for lemmas in index.get(word, []):
            for syn in lemmas:
                if syn != word and WORD_RE.match(syn):
                    pairs.add((word, syn))
    with open(out, "w") as f:
        for word, syn in sorted(pairs):
            f.write(f"{word}\t{syn}\n")
    return len(pairs)


def write_sentences(glosses, out, limit):
    examples = []
    seen = set()
    for gloss in glosses:
        for ex in re.findall(r'"([^"]+)"', gloss):
            ex = ex.strip()
            if len(ex.split()) >= 3 and ex not in seen:
                seen.add(ex)
                examples.append(ex)
    step = max(1, len(examples) // limit)
    picked = examples[::step][:limit]
    with open(out, "w") as f:
        for ex in picked:
            f.write(ex + "\n")
    return len(examples), len(picked)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nrclex", required=True)
    ap.add_argument("--wordnet", required=True)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--sentences", type=int, default=15000)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(exist_ok=True)
    nrc = load_nrc(args.nrclex)
    write_emolex(nrc, out / "emolex.tsv")
    synsets, glosses = read_synsets(args.wordnet)
    n_pairs = write_synonyms(nrc, synsets, out / "synonyms.tsv")
    total, picked = write_sentences(glosses, out / "sentences.txt", args.sentences)
    print(f"emolex words: {len(nrc)}; synonym pairs: {n_pairs}; example sentences: {picked} of {total}")


if __name__ == "__main__":
    main()
