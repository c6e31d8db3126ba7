import csv
import pathlib
import random

import pytest

import fhedge

DATA = pathlib.Path(__file__).resolve().parents[2] / "data" / "digits8x8.csv"


def load_digits(limit=800):
    features, labels = [], []
    with open(DATA) as f:
        for row in csv.reader(f):
            features.append([int(v) / 16.0 for v in row[:-1]])
            labels.append(int(row[-1]))
            if len(features) >= limit:
                break
    return features, labels


def test_scheme_roundtrip_and_homomorphism():
    s = fhedge.Scheme(level=128, depth_hint=1, plain_bits=20, seed=3)
    t = s.plain_modulus
    rng = random.Random(1)
    a = [rng.randrange(t) for _ in range(s.slot_count)]
    b = [rng.randrange(t) for _ in range(s.slot_count)]
    ca, cb = s.encrypt(a, seed=11), s.encrypt(b, seed=12)
    assert s.decrypt(ca) == a
    assert s.noise_budget(ca) > 0

    total = s.decrypt(s.add(ca, cb))
    prod = s.decrypt(s.multiply(ca, cb))
    for x, y, got_sum, got_prod in zip(a, b, total, prod):
        assert got_sum == (x + y) % t
        assert got_prod == (x * y) % t


def test_budget_decreases_and_plain_multiply_is_quieter():
    s = fhedge.Scheme(level=128, depth_hint=2, plain_bits=20, seed=4)
    t = s.plain_modulus
    rng = random.Random(2)
    a = [rng.randrange(t) for _ in range(s.slot_count)]
    b = [rng.randrange(t) for _ in range(s.slot_count)]
    ca = s.encrypt(a)
    fresh = s.noise_budget(ca)
    after_plain = s.noise_budget(s.multiply_plain(ca, b))
    after_cipher = s.noise_budget(s.multiply(ca, s.encrypt(b, seed=9)))
    assert fresh > after_plain > 0
    assert after_plain > after_cipher


def test_square_plus_two_minimum():
    assert fhedge.square_plus_two(-1.0) == -1.0
    assert fhedge.square_plus_two(1.0) == 3.0


def test_protected_pipeline_matches_oracle(tmp_path):
    features, labels = load_digits()
    result = fhedge.train(features, labels, [64, 8, 10], activation="relu",
                          epochs=20, lr=0.1, seed=5)
    model = result["model"]
    assert result["val_accuracy"][-1] > 0.5

    path = tmp_path / "model.json"
    model.save(str(path))
    reloaded = fhedge.load_model(str(path))
    assert reloaded.input_dim == 64

    pipe = fhedge.ProtectedPipeline(reloaded, scope="last", level=128,
                                    delta=1024, seed=6)
    assert pipe.expansion_ratio > 1.0
    batch = features[:16]
    enc = pipe.infer(batch, mode="plain", seed=7)
    want = pipe.oracle(batch)
    assert enc["final_budget_bits"] > 0
    assert not enc["budget_exhausted"]
    assert enc["logits"] == want["logits"]  # identical decoded integers
    assert enc["predictions"] == want["predictions"]
    assert "min_budget_bits" in enc["trace_csv"]


def test_overflow_is_loud():
    s = fhedge.Scheme(level=128, depth_hint=1, plain_bits=20, seed=8)
    with pytest.raises(fhedge.RangeError):
        s.encrypt([s.plain_modulus])  # slot value >= t
    with pytest.raises(fhedge.ParameterError):
        fhedge.Scheme(level=512)
