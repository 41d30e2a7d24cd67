#!/usr/bin/env python3
# Apache License, Version 2.0, refer to LICENSE.txt
"""Convert the NYT sample bundled with the `guidedlda` PyPI sdist into UCI
bag-of-words format, truncated to the first N documents.

    pip download --no-deps --no-binary :all: guidedlda==2.0.0.dev22 -d /tmp/g
    tar xzf /tmp/g/guidedlda-*.tar.gz -C /tmp/g
    python3 tools/make_nyt_standin.py /tmp/g/guidedlda-2.0.0.dev22/guidedlda/tests data/nyt3430 3430
"""
import argparse
import pathlib


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("src", type=pathlib.Path)
    ap.add_argument("dst", type=pathlib.Path)
    ap.add_argument("docs", type=int)
    args = ap.parse_args()

    vocab = (args.src / "nyt.tokens").read_text().split()
    docs = []
    with open(args.src / "nyt.ldac") as f:
        for line in f:
            fields = line.split()
            if not fields:
                continue
            pairs = sorted((int(w), int(c)) for w, c in (t.split(":") for t in fields[1:]))
            docs.append(pairs)
            if len(docs) == args.docs:
                break

    num_words = max(len(vocab), 1 + max(w for d in docs for w, _ in d))
    nnz = sum(len(d) for d in docs)
    args.dst.mkdir(parents=True, exist_ok=True)
    with open(args.dst / "docword.txt", "w") as out:
        out.write(f"{len(docs)}\n{num_words}\n{nnz}\n")
        for j, d in enumerate(docs, start=1):
            for w, c in d:
                out.write(f"{j} {w + 1} {c}\n")
    with open(args.dst / "vocab.txt", "w") as out:
        for i in range(num_words):
            out.write((vocab[i] if i < len(vocab) else f"<unk{i}>") + "\n")


if __name__ == "__main__":
    main()
