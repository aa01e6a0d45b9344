"""Reference execution of the case simulation procedure.

Written independently of the C++ sources: its own MT19937-64, its own
scoring, softmax and next-finding rule. Prints traces that the C++ tests
freeze as golden values.

    python3 tests/oracles/simulate_oracle.py data/toy.kb
"""
import json
import math
import sys

MASK = (1 << 64) - 1


class MT64:
    def __init__(self, seed):
        self.mt = [0] * 312
        self.mt[0] = seed & MASK
        for i in range(1, 312):
            self.mt[i] = (6364136223846793005 * (self.mt[i - 1] ^ (self.mt[i - 1] >> 62)) + i) & MASK
        self.idx = 312

    def next(self):
        if self.idx >= 312:
            for i in range(312):
                x = (self.mt[i] & 0xFFFFFFFF80000000) | (self.mt[(i + 1) % 312] & 0x7FFFFFFF)
                xa = x >> 1
                if x & 1:
                    xa ^= 0xB5026F5AA96619E9
                self.mt[i] = self.mt[(i + 156) % 312] ^ xa
            self.idx = 0
        y = self.mt[self.idx]
        self.idx += 1
        y ^= (y >> 29) & 0x5555555555555555
        y ^= (y << 17) & 0x71D67FFFEDA60000
        y ^= (y << 37) & 0xFFF7EEE000000000
        y ^= y >> 43
        return y & MASK

    def index(self, n):
        limit = (MASK // n) * n
        r = self.next()
        while r >= limit:
            r = self.next()
        return r % n

    def uniform01(self):
        return (self.next() >> 11) * 2.0 ** -53


def load(path):
    diseases, findings, es, tf = [], [], {}, {}
    for line in open(path):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        r = json.loads(line)
        if r["kind"] == "disease":
            diseases.append(r["id"])
        elif r["kind"] == "finding":
            findings.append(r)
        else:
            es[(r["finding_id"], r["disease_id"])] = r["es"]
            tf[(r["finding_id"], r["disease_id"])] = r["tf"]
    return diseases, findings, es, tf


def simulate(path, seed, threshold=20.0, lo=5, hi=20, p_absent=0.6, tau=5.0):
    diseases, findings, es, tf = load(path)
    ages = ["child (2 to 11 yrs)", "adolescent (12 to 17 yrs)", "young adult (18 to 40 yrs)",
            "middle aged (41 to 64 yrs)", "senior (65 yrs and over)"]
    genders = ["male", "female"]
    rng = MT64(seed)
    age = ages[rng.index(len(ages))]
    gender = genders[rng.index(len(genders))]
    complaints = [f for f in findings if not f.get("is_demographic")]
    rfe = complaints[rng.index(len(complaints))]["id"]
    length = lo + rng.index(hi - lo + 1)
    asserted = [(rfe, "+")]
    steps = []
    groups = {f["id"]: f.get("exclusion_group") for f in findings}
    while True:
        raw = {d: sum(es.get((f, d), 0) if p == "+" else -tf.get((f, d), 0) for f, p in asserted)
               for d in diseases}
        ranked = sorted(diseases, key=lambda d: (-raw[d], d))
        m = math.inf if len(ranked) == 1 else raw[ranked[0]] - raw[ranked[1]]
        if len(asserted) - 1 >= length:
            stop = "length"
            break
        if m >= threshold:
            stop = "margin"
            break
        top = max(raw.values())
        w = {d: math.exp((raw[d] - top) / tau) for d in diseases}
        z = sum(w.values())
        p = {d: w[d] / z for d in diseases}
        done = {f for f, _ in asserted}
        present_groups = {groups[f] for f, s in asserted if s == "+" and groups[f]}
        best, best_v = None, None
        for f in sorted(x["id"] for x in complaints):
            if f in done or (groups[f] in present_groups):
                continue
            v = sum(p[d] * es.get((f, d), 0) for d in diseases)
            if best is None or v > best_v:
                best, best_v = f, v
        if best is None:
            stop = "exhausted"
            break
        pol = "-" if rng.uniform01() < p_absent else "+"
        steps.append((best, pol, m))
        asserted.append((best, pol))
    return {"age": age, "gender": gender, "rfe": rfe, "L": length, "steps": steps,
            "stop": stop, "margin": m, "accepted": m >= threshold}


if __name__ == "__main__":
    kb = sys.argv[1] if len(sys.argv) > 1 else "data/toy.kb"
    first = MT64(42)
    print("mt19937_64(42) first outputs:", [first.next() for _ in range(3)])
    ref = MT64(5489)
    for _ in range(9999):
        ref.next()
    print("mt19937_64 default seed, 10000th output:", ref.next())
    for threshold in (20.0, 5.0, 3.0):
        print("seed=42 threshold=%g:" % threshold, json.dumps(simulate(kb, 42, threshold)))
    print("seed=7 threshold=3:", json.dumps(simulate(kb, 7, 3.0)))
