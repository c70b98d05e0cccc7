import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnqubo.qubo import BitLabel, Qubo


def random_qubo(rng, num_bits=8, labeled=False):
    labels = None
    if labeled:
        labels = [BitLabel("p", n, 1) for n in range(num_bits - 1)] + [
            BitLabel("r", 0, 1)
        ]
    q = Qubo(num_bits, labels=labels, constant=rng.uniform(-5, 5))
    for i in range(num_bits):
        if rng.random() < 0.8:
            q.add_linear(i, rng.uniform(-10, 10))
    for i in range(num_bits):
        for j in range(i + 1, num_bits):
            if rng.random() < 0.4:
                q.add_quadratic(i, j, rng.uniform(-10, 10))
    return q


class TestEvaluation:
    def test_hand_values(self):
        q = Qubo(2, constant=3.0)
        q.add_linear(0, 2.0)
        assert q.energy([0, 0]) == 3.0
        assert q.energy([1, 0]) == 5.0
        q.add_quadratic(0, 1, -4.0)
        assert q.energy([1, 1]) == 1.0

    def test_aggregation_sums_coefficients(self):
        q = Qubo(3)
        q.add_quadratic(2, 0, 1.5)
        q.add_quadratic(0, 2, 2.5)
        assert q.quadratic == {(0, 2): 4.0}
        q.add_linear(1, 1.0)
        q.add_linear(1, -1.0)
        assert q.linear[1] == 0.0

    def test_energy_matches_flip_delta(self):
        rng = random.Random(0)
        for _ in range(10):
            q = random_qubo(rng, num_bits=10)
            v = [rng.randint(0, 1) for _ in range(10)]
            base = q.energy(v)
            for i in range(10):
                field = q.linear[i]
                for (a, b), w in q.quadratic.items():
                    if a == i:
                        field += w * v[b]
                    elif b == i:
                        field += w * v[a]
                delta = (1 - 2 * v[i]) * field
                flipped = list(v)
                flipped[i] ^= 1
                assert q.energy(flipped) - base == pytest.approx(delta, rel=1e-9, abs=1e-9)

    def test_validation(self):
        q = Qubo(2)
        with pytest.raises(ValueError):
            q.add_quadratic(1, 1, 1.0)
        with pytest.raises(ValueError):
            q.energy([0])
        with pytest.raises(ValueError):
            Qubo(2, labels=[BitLabel("p", 0, 1)])
        with pytest.raises(ValueError):
            BitLabel("z", 0, 1)
        with pytest.raises(ValueError):
            BitLabel("r", 3, 2)


class TestSerialization:
    def test_json_roundtrip_exact(self, tmp_path):
        rng = random.Random(1)
        for labeled in (False, True):
            q = random_qubo(rng, labeled=labeled)
            path = tmp_path / f"q{labeled}.json"
            q.save_json(path)
            back = Qubo.load_json(path)
            assert back == q
            # byte-stable re-serialization
            again = tmp_path / "q2.json"
            back.save_json(again)
            assert again.read_bytes() == path.read_bytes()

    def test_coordinate_roundtrip_exact(self, tmp_path):
        rng = random.Random(2)
        for labeled in (False, True):
            q = random_qubo(rng, labeled=labeled)
            path = tmp_path / f"q{labeled}.txt"
            q.save_coordinate(path)
            back = Qubo.load_coordinate(path)
            assert back == q
            again = tmp_path / "q2.txt"
            back.save_coordinate(again)
            assert again.read_bytes() == path.read_bytes()

    def test_formats_agree(self, tmp_path):
        rng = random.Random(3)
        q = random_qubo(rng, labeled=True)
        from_json = Qubo.from_json_dict(q.to_json_dict())
        from_text = Qubo.from_coordinate_text(q.to_coordinate_text())
        assert from_json == from_text

    def test_num_terms_counts_nonzero(self):
        q = Qubo(3)
        q.add_linear(0, 1.0)
        q.add_linear(1, 0.0)
        q.add_quadratic(0, 1, 2.0)
        q.add_quadratic(0, 2, 1.0)
        q.add_quadratic(0, 2, -1.0)  # cancels to zero, stays as an entry
        assert q.num_terms() == (1, 1)
        assert (0, 2) in q.quadratic

    coefficients = st.floats(
        allow_nan=False, allow_infinity=False, width=64
    ).filter(lambda x: x == 0.0 or abs(x) > 1e-300)

    @settings(max_examples=150, deadline=None)
    @given(
        constant=coefficients,
        linear=st.lists(coefficients, min_size=1, max_size=6),
        quads=st.lists(coefficients, min_size=0, max_size=8),
    )
    def test_roundtrips_bit_exact_for_any_float(self, constant, linear, quads):
        # adversarial coefficients, including negative zero and denormal-adjacent
        n = len(linear)
        q = Qubo(n, constant=constant)
        for i, w in enumerate(linear):
            q.linear[i] = w
        pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
        for (i, j), w in zip(pairs, quads):
            q.quadratic[(i, j)] = w
        assert Qubo.from_json_dict(q.to_json_dict()) == q
        assert Qubo.from_coordinate_text(q.to_coordinate_text()) == q
