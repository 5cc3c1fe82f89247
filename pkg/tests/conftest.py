import numpy as np
import pytest

from gmsdi.data_io import synth_dataset
from gmsdi.score_model import GaussianPriorField, LabelEncoder, SourceSpec

# criterion number -> (passed, name, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, name: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE[number] = (bool(passed), name, detail)
        print(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {name} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, name, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2} {'PASS' if passed else 'FAIL'}: {name} {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def ab_encoder():
    return LabelEncoder(["a", "b"])


@pytest.fixture(scope="session")
def ab_specs(ab_encoder):
    return SourceSpec.from_labels(["a"], ab_encoder), SourceSpec.from_labels(["b"], ab_encoder)


@pytest.fixture(scope="session")
def coupled_field():
    """x_a ~ N(1, 1/4), x_b ~ N(-1, 1/4), their mixture ~ N(0, 1/2)."""
    return GaussianPriorField({"a": (1.0, 0.25), "b": (-1.0, 0.25), "a,b": (0.0, 0.5)})


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    train = synth_dataset(["bass", "piano", "guitar", "drums"], 40, 4096, seed=3, out_dir=root / "train")
    test = synth_dataset(["bass", "piano", "guitar", "drums"], 4, 4096, seed=4, out_dir=root / "test", n_sources=2)
    return train, test
