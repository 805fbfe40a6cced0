import pytest

from ecgpcg.config import (config_hash, dataclass_from_kv, dataclass_to_kv,
                           parse_enum, parse_kv)
from ecgpcg.errors import InvalidConfig
from ecgpcg.models import TrainConfig
from ecgpcg.models.training import ParameterScale
from ecgpcg.preprocess import PreprocessConfig
from ecgpcg.synthetic import Coupling, SynthConfig


def test_parse_kv_keeps_order_and_repeats():
    text = "# comment\na = 1\n\nrecord = x.csv  # trailing\nrecord = y.csv\n"
    assert parse_kv(text) == [("a", "1"), ("record", "x.csv"), ("record", "y.csv")]


def test_parse_kv_rejects_bare_line():
    with pytest.raises(InvalidConfig):
        parse_kv("just words\n")


@pytest.mark.parametrize("obj", [PreprocessConfig(ecg_band=(0.5, 40.0), target_fs=500),
                                 SynthConfig(coupling=Coupling.NONLINEAR_AMPLITUDE,
                                             noise_std=0.1),
                                 TrainConfig(parameter_scale="CrossSubject",
                                             lstm_hidden=(20, 10), frame_len=10)])
def test_kv_round_trip(obj):
    text = dataclass_to_kv(obj)
    assert dataclass_from_kv(type(obj), dict(parse_kv(text))) == obj


def test_unknown_key_rejected():
    with pytest.raises(InvalidConfig):
        dataclass_from_kv(SynthConfig, {"bogus": "1"})


def test_bad_int_rejected():
    with pytest.raises(InvalidConfig):
        dataclass_from_kv(SynthConfig, {"fs": "1000.5"})


def test_enum_lookup_is_lenient():
    assert parse_enum(ParameterScale, "cross_subject") is ParameterScale.CROSS_SUBJECT
    assert parse_enum(Coupling, "linearfilter") is Coupling.LINEAR_FILTER
    with pytest.raises(InvalidConfig):
        parse_enum(Coupling, "cubic")


def test_config_hash_is_stable_and_sensitive():
    assert config_hash("a", "b") == config_hash("a", "b")
    assert config_hash("a", "b") != config_hash("ab")
    assert len(config_hash("x")) == 16
