"""Regenerates lemma_fixture.tsv from lemma_fixture_words.txt.

Run once with `pip install lemminflect`; the output is committed and the
C++ lemmatizer test compares against it. Words ending in -ing/-ed are
lemmatized as verbs, everything else as nouns.
"""
import pathlib

from lemminflect import getLemma

here = pathlib.Path(__file__).parent
words = [w.strip() for w in (here / "lemma_fixture_words.txt").read_text().splitlines() if w.strip()]
lines = []
for w in words:
    upos = "VERB" if w.endswith(("ing", "ed")) else "NOUN"
    lemma = getLemma(w, upos)[0]
    lines.append(f"{w}\t{lemma}")
(here / "lemma_fixture.tsv").write_text("\n".join(lines) + "\n")
