import itertools
import subprocess
import sys

import numpy as np
import pytest

from gmsdi.errors import ConfigurationError, VocabularyError
from gmsdi.score_model import (
    CONDITIONAL,
    NEGATIVE,
    TOY_VOCABULARY,
    UNCONDITIONAL,
    Embedding,
    LabelEncoder,
    SourceSpec,
    canonical_labels,
    combine,
    encode_labels,
    load_vocabulary,
    save_vocabulary,
)


def test_canonical_form():
    assert canonical_labels(["Drums", " bass "]) == "bass,drums"


def test_repeat_encoding_is_identical():
    a, b = encode_labels(["Bass"]), encode_labels(["Bass"])
    np.testing.assert_array_equal(a.vector, b.vector)
    assert a == b


def test_order_does_not_matter():
    np.testing.assert_array_equal(encode_labels(["Drums", "Bass"]).vector, encode_labels(["Bass", "Drums"]).vector)


def test_no_collisions_over_toy_vocabulary():
    subsets = [c for r in range(1, 5) for c in itertools.combinations(TOY_VOCABULARY, r)]
    vecs = [encode_labels(list(s)).vector for s in subsets]
    vecs.append(LabelEncoder().unconditional().vector)
    for u, v in itertools.combinations(vecs, 2):
        assert np.linalg.norm(u - v) > 0


def test_stable_across_processes():
    code = "from gmsdi.score_model import encode_labels; print(encode_labels(['piano','bass']).vector.tobytes().hex())"
    runs = {subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
            for _ in range(2)}
    assert runs == {encode_labels(["bass", "piano"]).vector.tobytes().hex() + "\n"}


def test_seed_changes_vectors():
    a = LabelEncoder(seed=0).encode(["bass"]).vector
    b = LabelEncoder(seed=1).encode(["bass"]).vector
    assert not np.array_equal(a, b)


def test_unknown_label_lists_vocabulary():
    with pytest.raises(VocabularyError) as info:
        encode_labels(["kazoo"])
    msg = str(info.value)
    assert "kazoo" in msg
    for label in TOY_VOCABULARY:
        assert label in msg
    assert info.value.category == "vocabulary"


def test_kinds():
    enc = LabelEncoder()
    assert enc.encode(["bass"]).kind == CONDITIONAL
    assert enc.unconditional().kind == UNCONDITIONAL
    neg = enc.negative(["drums", "guitar"])
    assert neg.kind == NEGATIVE
    np.testing.assert_array_equal(neg.vector, enc.encode(["guitar", "drums"]).vector)
    with pytest.raises(ConfigurationError):
        Embedding(np.zeros(3), kind="other")


def test_combined_description_is_concatenation():
    enc = LabelEncoder()
    specs = [SourceSpec.from_labels("bass", enc), SourceSpec.from_labels("piano,drums", enc)]
    assert combine(specs, enc) == enc.encode(["bass", "piano", "drums"])


def test_source_spec_invariants():
    enc = LabelEncoder()
    with pytest.raises(ConfigurationError):
        SourceSpec((), enc.encode(["bass"]))
    with pytest.raises(ConfigurationError):
        SourceSpec(("bass",), enc.unconditional())
    with pytest.raises(ConfigurationError):
        enc.check([])


@pytest.mark.parametrize("vocab", [[], ["a", "A"], ["a,b"], [""]])
def test_bad_vocabulary(vocab):
    with pytest.raises(ConfigurationError):
        LabelEncoder(vocab)


def test_vocabulary_file_roundtrip(tmp_path):
    path = tmp_path / "vocab.txt"
    save_vocabulary(path, ["bass", "kick"])
    path.write_text("# comment\n" + path.read_text() + "\n")
    assert load_vocabulary(path) == ["bass", "kick"]


def test_encoder_config_roundtrip():
    enc = LabelEncoder(["x", "y"], dim=8, seed=5)
    again = LabelEncoder.from_config(enc.config())
    np.testing.assert_array_equal(enc.encode(["x"]).vector, again.encode(["x"]).vector)
