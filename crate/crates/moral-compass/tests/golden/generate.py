#!/usr/bin/env python3
"""Regenerates the golden fixtures in this directory.

Straight-line reference implementation of the deterministic embedding
backend (FNV-1a seed + SplitMix64 stream + L2 normalization), the
question scoring rule, the emotion argmax, and the feedback-solicitation
RNG. Written independently of the Rust crate so the fixtures act as a
cross-implementation check.

Run from this directory: python3 generate.py
"""

import json
import math

MASK = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

ASCII_WS = {0x09, 0x0A, 0x0B, 0x0C, 0x0D, 0x20}


def normalize(text):
    out = bytearray()
    in_ws = False
    for b in text.encode("utf-8"):
        if b in ASCII_WS:
            in_ws = True
            continue
        if in_ws and out:
            out.append(0x20)
        in_ws = False
        if 0x41 <= b <= 0x5A:
            b += 0x20
        out.append(b)
    return bytes(out)


def fnv1a64(data):
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & MASK
    return h


def splitmix64(state):
    state = (state + GOLDEN_GAMMA) & MASK
    z = state
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & MASK
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & MASK
    z ^= z >> 31
    return state, z


def embed(text, dim):
    data = normalize(text)
    assert data, "text must be non-empty after normalization"
    state = fnv1a64(data)
    values = []
    for _ in range(dim):
        state, z = splitmix64(state)
        u = z / 2**64
        values.append(2.0 * u - 1.0)
    norm = math.sqrt(sum(v * v for v in values))
    return [v / norm for v in values]


def cosine(a, b):
    dot = 0.0
    for x, y in zip(a, b):
        dot += x * y
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    c = dot / (na * nb)
    return max(-1.0, min(1.0, c))


def f64_hex(x):
    import struct

    return format(struct.unpack("<Q", struct.pack("<d", x))[0], "016x")


DIM = 64

EMBED_STRINGS = [
    "should i kill time?",
    "should i smile?",
    "is it okay to smile?",
    "yes, you should kill time.",
    "no, you should not kill time.",
    "this is delightful.",
    "this makes me angry.",
    "healthcheck",
    "Should I help   my neighbor?",
    "is it okay to eat meat?",
]

PROTOTYPES = [
    ("Anger", "this makes me angry."),
    ("Confusion", "this is confusing."),
    ("Disgust", "this is disgusting."),
    ("Fear", "this is frightening."),
    ("Joy", "this is delightful."),
    ("Sadness", "this is sad."),
    ("Satisfaction", "this is satisfying."),
    ("Surprise", "this is surprising."),
]


def main():
    vectors = [embed(s, DIM) for s in EMBED_STRINGS]
    with open("embed_vectors.json", "w") as f:
        json.dump(
            {
                "dim": DIM,
                "strings": EMBED_STRINGS,
                "vectors_hex": [[f64_hex(v) for v in vec] for vec in vectors],
            },
            f,
            indent=1,
        )
        f.write("\n")

    q = embed("should i kill time?", DIM)
    yes = embed("yes, you should kill time.", DIM)
    no = embed("no, you should not kill time.", DIM)
    raw = cosine(q, yes) - cosine(q, no)
    normalized = raw / 2.0

    sims = [(label, cosine(q, embed(proto, DIM))) for label, proto in PROTOTYPES]
    best_label, best_sim = sims[0]
    for label, sim in sims[1:]:
        if sim > best_sim:
            best_label, best_sim = label, sim

    with open("moral_score.json", "w") as f:
        json.dump(
            {
                "question": "Should I kill time?",
                "dim": DIM,
                "raw_hex": f64_hex(raw),
                "normalized_hex": f64_hex(normalized),
                "raw": raw,
                "normalized": normalized,
                "emotion_label": best_label,
                "emotion_similarity_hex": f64_hex(best_sim),
                "emotion_similarity": best_sim,
            },
            f,
            indent=1,
        )
        f.write("\n")

    state = 42
    first_ten = []
    hits = 0
    n = 10_000
    for i in range(n):
        state, z = splitmix64(state)
        u = z / 2**64
        hit = u < 0.3
        if i < 10:
            first_ten.append(hit)
        hits += hit
    rate = hits / n
    with open("solicit.json", "w") as f:
        json.dump(
            {
                "seed": 42,
                "probability": 0.3,
                "first_ten": first_ten,
                "turns": n,
                "hits": hits,
                "rate": rate,
            },
            f,
            indent=1,
        )
        f.write("\n")

    print("raw =", raw, "normalized =", normalized)
    print("emotion =", best_label, best_sim)
    print("solicit rate over", n, "turns =", rate)


if __name__ == "__main__":
    main()
