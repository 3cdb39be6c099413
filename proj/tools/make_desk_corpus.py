#!/usr/bin/env python3
# Copyright 2026 The CFIR Authors.
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     https://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Generates the bundled desk corpus.

Passages are drawn from a small topic model over pronounceable pseudo-words:
each passage mixes a main topic, an optional secondary topic and a Zipfian
background vocabulary, with English stopwords and punctuation sprinkled in so
the tokenizer has something to strip. Queries pick a few mid-frequency words
of one topic. Word vectors are topic centroids plus noise.

Output is fully determined by --seed.
"""

import argparse
import json
import math
import os
import random

ONSETS = ["b", "br", "c", "ch", "d", "dr", "f", "fl", "g", "gr", "h", "j", "k",
          "l", "m", "n", "p", "pl", "qu", "r", "s", "sh", "st", "t", "tr", "v",
          "w", "z"]
NUCLEI = ["a", "e", "i", "o", "u", "ai", "ea", "io", "ou"]
CODAS = ["", "", "", "n", "r", "l", "s", "x", "m", "nd", "st", "th"]

FILLER = ["the", "of", "and", "a", "in", "to", "is", "was", "for", "on", "with",
          "as", "by", "at", "from", "that", "this", "which", "are", "be"]


def make_words(rng, count, taken):
    words = []
    while len(words) < count:
        syllables = rng.choice([2, 2, 3, 3, 4])
        w = "".join(rng.choice(ONSETS) + rng.choice(NUCLEI) + rng.choice(CODAS)
                    for _ in range(syllables))
        if 4 <= len(w) <= 12 and w not in taken:
            taken.add(w)
            words.append(w)
    return words


def zipf_weights(n, s):
    return [1.0 / math.pow(r + 1, s) for r in range(n)]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="data/desk")
    ap.add_argument("--seed", type=int, default=20231021)
    ap.add_argument("--docs", type=int, default=3000)
    ap.add_argument("--topics", type=int, default=30)
    ap.add_argument("--topic-words", type=int, default=40)
    ap.add_argument("--background", type=int, default=1500)
    ap.add_argument("--queries", type=int, default=50)
    ap.add_argument("--dim", type=int, default=32)
    ap.add_argument("--query-ranks", type=int, nargs=2, default=[0, 4],
                    help="topic-word rank window queries draw from")
    ap.add_argument("--length", type=int, nargs=2, default=[20, 50],
                    help="range of content words per passage")
    ap.add_argument("--topic-zipf", type=float, default=0.8,
                    help="Zipf exponent of topic-word frequencies")
    ap.add_argument("--query-words", type=int, nargs="+", default=[1, 2, 2, 3],
                    help="topic words per query, drawn uniformly from this list")
    ap.add_argument("--query-background", type=float, default=0.2,
                    help="chance a query also gets one background word")
    ap.add_argument("--topical", type=float, nargs=2, default=[0.4, 0.7],
                    help="range of the main-topic share of a passage")
    args = ap.parse_args()

    rng = random.Random(args.seed)
    taken = set(FILLER)
    topics = [make_words(rng, args.topic_words, taken) for _ in range(args.topics)]
    background = make_words(rng, args.background, taken)
    topic_w = zipf_weights(args.topic_words, args.topic_zipf)
    back_w = zipf_weights(args.background, 1.05)

    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "corpus.jsonl"), "w", encoding="utf-8", newline="\n") as f:
        for i in range(args.docs):
            main_topic = i % args.topics
            second = rng.randrange(args.topics) if rng.random() < 0.35 else None
            length = rng.randint(*args.length)
            topical = rng.uniform(*args.topical)
            words = []
            for _ in range(length):
                r = rng.random()
                if r < topical:
                    words.append(rng.choices(topics[main_topic], topic_w)[0])
                elif second is not None and r < topical + 0.12:
                    words.append(rng.choices(topics[second], topic_w)[0])
                else:
                    words.append(rng.choices(background, back_w)[0])
                if rng.random() < 0.3:
                    words.append(rng.choice(FILLER))
            text = []
            for j, w in enumerate(words):
                if j == 0 or text[-1].endswith("."):
                    w = w.capitalize()
                if rng.random() < 0.06:
                    w += rng.choice([",", ".", ";"])
                text.append(w)
            doc = {"id": f"d{i:05d}", "text": " ".join(text).rstrip(",;") + "."}
            f.write(json.dumps(doc) + "\n")

    with open(os.path.join(args.out, "queries.tsv"), "w", encoding="utf-8", newline="\n") as f:
        order = list(range(args.topics))
        rng.shuffle(order)
        for qi in range(args.queries):
            topic = topics[order[qi % args.topics]]
            n = rng.choice(args.query_words)
            picked = rng.sample(topic[args.query_ranks[0]:args.query_ranks[1]], n)
            if rng.random() < args.query_background:
                picked.append(rng.choice(background[20:200]))
            lead = rng.choice(["what is", "role of", "how does", "the", "which"])
            f.write(f"q{qi + 1}\t{lead} {' '.join(picked)}\n")

    with open(os.path.join(args.out, "embeddings.txt"), "w", encoding="utf-8", newline="\n") as f:
        vocab = sum(len(t) for t in topics) + len(background)
        f.write(f"{vocab} {args.dim}\n")

        def emit(word, base, noise):
            v = [b + rng.gauss(0.0, noise) for b in base]
            norm = math.sqrt(sum(x * x for x in v)) or 1.0
            f.write(word + " " + " ".join(f"{x / norm:.6f}" for x in v) + "\n")

        for t in topics:
            centroid = [rng.gauss(0.0, 1.0) for _ in range(args.dim)]
            for w in t:
                emit(w, centroid, 0.7)
        for w in background:
            emit(w, [0.0] * args.dim, 1.0)


if __name__ == "__main__":
    main()
