"""data_bench: benchmark generation, splits, binary formats, bundles."""
import numpy as np
import pytest

from shiftlab.cli import default_benchmark_spec
from shiftlab.data import (
    BenchmarkSpec,
    ToyDataset,
    generate_benchmark,
    load_bundle,
    load_features,
    save_bundle,
    save_features,
    split_dataset,
    train_eval_split,
)
from shiftlab.errors import (
    BadMagicError,
    FormatError,
    TruncatedPayloadError,
    VersionMismatchError,
)
from shiftlab.kernels import FeatureMatrix


@pytest.fixture(scope="module")
def spec():
    return default_benchmark_spec(alpha=1.0, seed=3, n_train=200, n_eval=60, image_dim=8, classes=4)


@pytest.fixture(scope="module")
def pair(spec):
    return generate_benchmark(spec)


class TestGenerator:
    def test_shapes_and_labels(self, spec, pair):
        source, target = pair
        assert source.n == target.n == spec.n_train + spec.n_eval
        assert source.dim == target.dim == spec.image_dim
        assert source.labeled and target.labeled
        assert source.features.dtype == np.float32

    def test_deterministic_bitwise(self, spec, pair):
        source, target = pair
        s2, t2 = generate_benchmark(spec)
        assert np.array_equal(source.features, s2.features)
        assert np.array_equal(target.features, t2.features)
        assert source.questions == s2.questions and target.answers == t2.answers

    def test_image_only_shift_keeps_question_distribution(self, spec, pair):
        _, target = pair
        unshifted = generate_benchmark(BenchmarkSpec(
            n_train=spec.n_train, n_eval=spec.n_eval, image_dim=spec.image_dim,
            classes=spec.classes, shift=None, seed=spec.seed,
        ))[1]
        assert target.questions == unshifted.questions  # same template draws under split seed
        assert target.answers == unshifted.answers
        assert not np.array_equal(target.features, unshifted.features)

    def test_answers_follow_rule(self, spec, pair):
        source, _ = pair
        # existence template answers "yes" regardless of the image
        for toks, ans in zip(source.questions, source.answers):
            if toks[0] == "is":
                assert ans == "yes"
            else:
                assert ans != "yes"

    def test_bad_spec(self):
        with pytest.raises(ValueError):
            BenchmarkSpec(n_train=0)
        with pytest.raises(ValueError):
            BenchmarkSpec(classes=200)


class TestSplits:
    def test_single_full_split(self, pair):
        source, _ = pair
        (part,) = split_dataset(source, [1.0], seed=0)
        assert part.n == source.n
        assert sorted(map(tuple, part.features.tolist())) == sorted(map(tuple, source.features.tolist()))

    def test_floor_sizes_and_disjoint(self, pair):
        source, _ = pair
        parts = split_dataset(source, [0.1, 0.25], seed=1)
        assert [p.n for p in parts] == [int(0.1 * source.n), int(0.25 * source.n)]
        seen = set()
        for p in parts:
            rows = {tuple(r) for r in p.features.tolist()}
            assert not (rows & seen)
            seen |= rows

    def test_seed_reproducible(self, pair):
        source, _ = pair
        a = split_dataset(source, [0.3], seed=9)[0]
        b = split_dataset(source, [0.3], seed=9)[0]
        assert np.array_equal(a.features, b.features)

    def test_bad_fractions(self, pair):
        source, _ = pair
        with pytest.raises(ValueError):
            split_dataset(source, [0.6, 0.6], seed=0)
        with pytest.raises(ValueError):
            split_dataset(source, [-0.1], seed=0)

    def test_train_eval_split(self, spec, pair):
        source, _ = pair
        tr, ev = train_eval_split(source, spec.n_train)
        assert tr.n == spec.n_train and ev.n == spec.n_eval
        np.testing.assert_array_equal(np.concatenate([tr.features, ev.features]), source.features)


class TestFeatureFiles:
    def test_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(2)
        fm = FeatureMatrix(rng.normal(size=(7, 5)).astype(np.float32), modality="image_low")
        path = tmp_path / "x.fmat"
        save_features(path, fm)
        loaded = load_features(path)
        assert np.array_equal(loaded.values, fm.values)
        assert loaded.modality == "image_low"
        save_features(tmp_path / "y.fmat", loaded)
        assert (tmp_path / "x.fmat").read_bytes() == (tmp_path / "y.fmat").read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.fmat"
        p.write_bytes(b"XMAT" + b"\x00" * 30)
        with pytest.raises(BadMagicError):
            load_features(p)

    def test_version_mismatch(self, tmp_path):
        rng = np.random.default_rng(3)
        p = tmp_path / "v.fmat"
        save_features(p, FeatureMatrix(rng.normal(size=(2, 2)).astype(np.float32)))
        blob = bytearray(p.read_bytes())
        blob[4] = 9
        p.write_bytes(bytes(blob))
        with pytest.raises(VersionMismatchError):
            load_features(p)

    def test_truncated_payload(self, tmp_path):
        rng = np.random.default_rng(4)
        p = tmp_path / "t.fmat"
        save_features(p, FeatureMatrix(rng.normal(size=(3, 3)).astype(np.float32)))
        blob = p.read_bytes()
        p.write_bytes(blob[:-5])
        with pytest.raises(TruncatedPayloadError):
            load_features(p)


class TestBundles:
    def test_round_trip(self, tmp_path, pair):
        source, _ = pair
        save_bundle(tmp_path / "b", source)
        loaded = load_bundle(tmp_path / "b")
        assert loaded.name == source.name and loaded.domain_tag == source.domain_tag
        assert np.array_equal(loaded.features, source.features)
        assert loaded.questions == source.questions
        assert loaded.answers == source.answers
        assert loaded.token_vocab == source.token_vocab

    def test_unlabeled_round_trip(self, tmp_path, pair):
        source, _ = pair
        save_bundle(tmp_path / "u", source.unlabeled())
        loaded = load_bundle(tmp_path / "u")
        assert loaded.answers is None and not loaded.labeled

    def test_missing_component(self, tmp_path, pair):
        source, _ = pair
        save_bundle(tmp_path / "m", source)
        (tmp_path / "m" / "meta.json").unlink()
        with pytest.raises(FormatError, match="missing component"):
            load_bundle(tmp_path / "m")

    def test_row_count_mismatch(self, tmp_path, pair):
        source, _ = pair
        save_bundle(tmp_path / "r", source)
        qpath = tmp_path / "r" / "questions.jsonl"
        lines = qpath.read_text().splitlines()
        qpath.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(FormatError, match="row-count mismatch"):
            load_bundle(tmp_path / "r")


class TestToyDataset:
    def test_unlabeled_view(self, pair):
        source, _ = pair
        view = source.unlabeled()
        assert view.answers is None
        assert source.answers is not None  # original untouched
        np.testing.assert_array_equal(view.features, source.features)

    def test_vocab_enforced(self):
        with pytest.raises(ValueError):
            ToyDataset("x", "d", np.zeros((1, 2), dtype=np.float32), (("mystery",),), None, ("known",))

    def test_answer_count_enforced(self):
        with pytest.raises(ValueError):
            ToyDataset("x", "d", np.zeros((2, 2), dtype=np.float32), (("a",), ("a",)), ("yes",), ("a",))
