import json

import pytest

from tagscope import pipeline, synth
from tagscope.audio_io import decode
from tagscope.tabular import read_labels, read_store


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    synth.generate(root, 42)
    return root


@pytest.fixture(scope="session")
def truth(corpus):
    return json.loads((corpus / "truth.json").read_text())


@pytest.fixture(scope="session")
def fixture_clip(corpus):
    def load(name):
        return decode(corpus / "dsp" / f"{name}.wav")
    return load


@pytest.fixture(scope="session")
def planted(corpus):
    store = read_store(corpus / "planted" / "features.csv")
    return store, read_labels(corpus / "planted" / "labels.csv"), read_labels(corpus / "planted" / "labels_shuffled.csv")


@pytest.fixture(scope="session")
def planted_model(planted):
    store, labels, _ = planted
    return pipeline.fit(store, labels)
