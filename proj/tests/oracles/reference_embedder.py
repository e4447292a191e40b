"""Independent re-implementation of the reference embedder; regenerates tests/data/golden_embeddings.json.

Run with --check to compare against the committed file instead of printing.
"""
import json
import math
import sys
from pathlib import Path

M64 = (1 << 64) - 1
DIM = 64
DESCRIPTORS = ["icon:search", "icon:mic", "bar:search", "btn:go", "field:query"]
PAIRS = [("icon:search", "icon:mic"), ("icon:search", "bar:search"), ("btn:go", "field:query")]


def fnv1a64(s):
    h = 0xCBF29CE484222325
    for b in s.encode():
        h ^= b
        h = (h * 0x100000001B3) & M64
    return h


def splitmix(seed):
    state = seed
    while True:
        state = (state + 0x9E3779B97F4A7C15) & M64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M64
        yield (z ^ (z >> 31)) >> 11


def embed(descriptor):
    gen = splitmix(fnv1a64(descriptor))
    vals = []
    while len(vals) < DIM:
        u1 = 1.0 - next(gen) / 2.0**53
        u2 = next(gen) / 2.0**53
        r = math.sqrt(-2.0 * math.log(u1))
        vals.append(r * math.cos(2.0 * math.pi * u2))
        if len(vals) < DIM:
            vals.append(r * math.sin(2.0 * math.pi * u2))
    n = math.sqrt(sum(v * v for v in vals))
    return [v / n for v in vals]


def golden():
    vecs = {d: embed(d) for d in DESCRIPTORS}
    return {
        "dimension": DIM,
        "vectors": [{"descriptor": d, "first8": vecs[d][:8]} for d in DESCRIPTORS],
        "pairs": [{"a": a, "b": b, "cosine": sum(x * y for x, y in zip(vecs[a], vecs[b]))} for a, b in PAIRS],
    }


if __name__ == "__main__":
    g = golden()
    if "--check" in sys.argv:
        path = Path(__file__).resolve().parents[1] / "data" / "golden_embeddings.json"
        want = json.loads(path.read_text())
        worst = 0.0
        for a, b in zip(g["vectors"], want["vectors"]):
            assert a["descriptor"] == b["descriptor"]
            worst = max(worst, *(abs(x - y) for x, y in zip(a["first8"], b["first8"])))
        for a, b in zip(g["pairs"], want["pairs"]):
            assert (a["a"], a["b"]) == (b["a"], b["b"])
            worst = max(worst, abs(a["cosine"] - b["cosine"]))
        print("max deviation", worst)
        sys.exit(0 if worst <= 1e-12 else 1)
    print(json.dumps(g, indent=2))
