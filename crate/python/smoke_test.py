"""Smoke test for the `seek` extension module.

Build and run with:

    cargo build --release -p seek-py
    cp target/release/libseek.so python/seek.so
    python3 python/smoke_test.py

or install with `pip install ./crates/python` (maturin) and run the script.
"""

import math
import os
import random
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import seek  # noqa: E402


def vec(rng, d):
    return [rng.uniform(-1.0, 1.0) for _ in range(d)]


def check_scoring():
    rng = random.Random(0)
    for _ in range(100):
        h, r, t = vec(rng, 8), vec(rng, 8), vec(rng, 8)
        assert seek.score(h, r, t, 1) == seek.score(h, r, t, 1, fn="f1")
        assert seek.score(h, r, t, 4, fn="f2") == seek.score(t, r, h, 4, fn="f2")
        dh, dr, dt = seek.gradient(h, r, t, 4)
        eps = 1e-6
        bumped = list(h)
        bumped[3] += eps
        numeric = (seek.score(bumped, r, t, 4) - seek.score(h, r, t, 4)) / eps
        assert abs(numeric - dh[3]) < 1e-4, (numeric, dh[3])
        assert len(dr) == len(dt) == 8
    assert seek.sign_coeff(1, 1, 2) == -1.0 and seek.sign_coeff(0, 1, 2) == 1.0
    assert seek.tail_index(1, 1, 2) == 0 and seek.tail_index(0, 1, 2) == 1
    assert seek.probability(0.0) == 0.5
    for bad in (lambda: seek.score([1.0] * 8, [1.0] * 8, [1.0] * 8, 3),
                lambda: seek.score([1.0] * 8, [1.0] * 4, [1.0] * 8, 2),
                lambda: seek.score([1.0] * 8, [1.0] * 8, [1.0] * 8, 2, fn="f9")):
        try:
            bad()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")


def check_training():
    data = seek.Dataset.toy()
    assert data.num_entities == 60 and data.num_relations == 2
    cfg = seek.TrainConfig(k=4, dim=32, neg=20, epochs=200, filter_negatives=True)
    model = seek.Model.train(data, cfg)
    assert len(model.losses) == 200 and model.losses[-1] < model.losses[0]

    report = model.evaluate(data)
    assert report["mrr"] >= 0.9, report
    assert report["count"] == 2 * len(data.test)
    raw = model.evaluate(data, raw=True)
    assert raw["mrr"] <= report["mrr"]

    parent = data.relation_id("parent_of")
    held_out = [data.decode(t) for t in data.test if t[1] == parent]
    rows = model.case_study(held_out)
    for label, fn, p_fwd, p_rev in rows:
        if fn == "f4":
            assert p_rev < 0.5 < p_fwd, (label, p_fwd, p_rev)
        else:
            assert p_fwd == p_rev, (label, fn)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "toy.ckpt")
        model.save(path)
        again = seek.Model.load(path)
        h, r, t = held_out[0]
        assert again.score(h, r, t) == model.score(h, r, t)
        assert again.entity_embedding(h) == model.entity_embedding(h)
    try:
        model.score("nobody", "parent_of", h)
    except KeyError:
        pass
    else:
        raise AssertionError("expected KeyError")
    return report


def main():
    check_scoring()
    report = check_training()
    print(f"seek {seek.__version__}: smoke test passed (toy filtered MRR {report['mrr']:.4f})")
    assert math.isfinite(report["mrr"])


if __name__ == "__main__":
    main()
