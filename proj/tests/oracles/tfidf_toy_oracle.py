#!/usr/bin/env python3
# Brute-force TF-IDF cosine for the toy corpus, written without the library's
# code paths. TF = count/len, IDF = max(0, ln(N/(1+DF))), cosine of raw vectors.
import math
from collections import Counter

DOCS = ["red fox", "red dog", "blue cat", "green bird"]


def main():
    toks = [d.split() for d in DOCS]
    n = len(toks)
    df = Counter()
    for t in toks:
        df.update(set(t))
    idf = {w: max(0.0, math.log(n / (1 + c))) for w, c in df.items()}

    def vec(t):
        c = Counter(t)
        return {w: (k / len(t)) * idf[w] for w, k in c.items()}

    vs = [vec(t) for t in toks]
    for i in range(n):
        for j in range(i + 1, n):
            a, b = vs[i], vs[j]
            dot = sum(a[w] * b.get(w, 0.0) for w in a)
            na = math.sqrt(sum(x * x for x in a.values()))
            nb = math.sqrt(sum(x * x for x in b.values()))
            cos = dot / (na * nb) if na and nb else 0.0
            print(f"{i}\t{j}\t{cos!r}")


if __name__ == "__main__":
    main()
