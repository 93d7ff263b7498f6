import json
import string

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nslkdd_ae.dataset import (
    N_NUMERIC, EncodedDataset, FeatureSchema, LabelMapper, RawRecord, TrafficClass,
    build_schema, encode, encode_many, load_attack_table, map_attack_label, parse_nslkdd,
)
from nslkdd_ae.errors import DataError

ROW = ("0,tcp,ftp_data,SF,491,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,2,2,0.00,0.00,0.00,0.00,"
       "1.00,0.00,0.00,150,25,0.17,0.03,0.17,0.00,0.00,0.00,0.05,0.00,normal,20")


def make_record(protocol="tcp", service="http", flag="SF", attack="normal", value=0.0):
    return RawRecord(tuple([value] * N_NUMERIC), protocol, service, flag, attack, 0)


def test_parse_row_layout(tmp_path):
    p = tmp_path / "one.txt"
    p.write_text(ROW + "\n")
    (rec,) = parse_nslkdd(p)
    assert (rec.protocol_type, rec.service, rec.flag) == ("tcp", "ftp_data", "SF")
    assert rec.attack_name == "normal" and rec.difficulty == 20
    assert len(rec.numeric) == 38
    assert rec.numeric[:2] == (0.0, 491.0)
    assert rec.numeric[-1] == 0.0 and rec.numeric[-2] == 0.05


def test_parse_counts_rows_in_order(synthetic_files):
    train, _ = synthetic_files
    records = parse_nslkdd(train)
    lines = [ln for ln in train.read_text().splitlines() if ln]
    assert len(records) == len(lines)
    assert records[5].attack_name == lines[5].split(",")[41]


def test_parse_wrong_field_count_names_line(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text(ROW + "\n" + ROW.rsplit(",", 1)[0] + "\n")
    with pytest.raises(DataError, match="line 2: expected 43 fields"):
        parse_nslkdd(p)


def test_parse_non_numeric_names_line(tmp_path):
    fields = ROW.split(",")
    fields[4] = "lots"
    p = tmp_path / "bad.txt"
    p.write_text(ROW + "\n" + ROW + "\n" + ",".join(fields) + "\n")
    with pytest.raises(DataError, match="line 3"):
        parse_nslkdd(p)


@pytest.mark.parametrize("bad", ["nan", "inf"])
def test_parse_rejects_non_finite(tmp_path, bad):
    fields = ROW.split(",")
    fields[0] = bad
    p = tmp_path / "bad.txt"
    p.write_text(",".join(fields) + "\n")
    with pytest.raises(DataError, match="line 1"):
        parse_nslkdd(p)


def test_parse_empty_file(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("\n\n")
    with pytest.raises(DataError):
        parse_nslkdd(p)


@pytest.mark.parametrize("name, cls", [
    ("normal", TrafficClass.NORMAL),
    ("neptune", TrafficClass.DOS),
    ("buffer_overflow", TrafficClass.U2R),
    ("satan", TrafficClass.PROBE),
    ("guess_passwd", TrafficClass.R2L),
    ("mscan", TrafficClass.PROBE),
    ("Neptune.", TrafficClass.DOS),
])
def test_map_attack_label(name, cls):
    assert map_attack_label(name) is cls


def test_attack_table_is_complete():
    table = load_attack_table()
    # 22 training attack names + 17 test-only names + normal
    assert len(table) == 40
    counts = {c: sum(v is c for v in table.values()) for c in TrafficClass}
    assert counts == {TrafficClass.NORMAL: 1, TrafficClass.DOS: 10, TrafficClass.PROBE: 6,
                      TrafficClass.R2L: 15, TrafficClass.U2R: 8}


def test_unknown_attack_fallback_is_counted():
    mapper = LabelMapper()
    with pytest.warns(UserWarning, match="not in the class table"):
        assert mapper("zeroday") is TrafficClass.DOS
    assert mapper("zeroday").is_attack
    assert mapper.unknown["zeroday"] == 2


def test_unknown_attack_strict_policy():
    with pytest.raises(DataError):
        LabelMapper(fallback=None)("zeroday")


def test_schema_single_record_degenerate():
    schema = build_schema([make_record()])
    assert schema.encoded_dim == 41
    assert all(len(v) == 1 for v in schema.vocabularies)


def test_schema_empty():
    with pytest.raises(DataError):
        build_schema([])


def test_schema_vocab_sorted_and_extrema():
    recs = [make_record("udp", "smtp", "S0", value=3.0), make_record("tcp", "http", "SF", value=-1.0),
            make_record("icmp", "http", "REJ", value=2.0)]
    schema = build_schema(recs)
    assert schema.protocol_vocab == ("icmp", "tcp", "udp")
    assert schema.service_vocab == ("http", "smtp")
    assert schema.flag_vocab == ("REJ", "S0", "SF")
    assert schema.numeric_min == (-1.0,) * 38 and schema.numeric_max == (3.0,) * 38
    assert schema.encoded_dim == 38 + 3 + 2 + 3


def test_schema_rejects_unsorted():
    with pytest.raises(DataError):
        FeatureSchema(("udp", "tcp"), ("a",), ("b",), (0.0,) * 38, (1.0,) * 38)


def test_schema_build_twice_identical_and_json_roundtrip(synthetic_files, tmp_path):
    train, _ = synthetic_files
    a = build_schema(parse_nslkdd(train))
    b = build_schema(parse_nslkdd(train))
    assert a == b and a.to_json() == b.to_json()
    a.save(tmp_path / "schema.json")
    loaded = FeatureSchema.load(tmp_path / "schema.json")
    assert loaded == a and loaded.checksum() == a.checksum()
    doc = json.loads((tmp_path / "schema.json").read_text())
    assert doc["version"] == 1 and doc["encoded_dim"] == a.encoded_dim


def test_encode_boundaries_and_constant_columns():
    lo, hi = make_record(value=0.0), make_record(value=10.0)
    schema = build_schema([lo, hi])
    assert np.all(encode(hi, schema).features[:N_NUMERIC] == 1.0)
    assert np.all(encode(lo, schema).features[:N_NUMERIC] == 0.0)
    const = build_schema([make_record(value=5.0)])
    assert np.all(encode(make_record(value=5.0), const).features[:N_NUMERIC] == 0.0)
    # out-of-range test values clamp
    far = encode(make_record(value=25.0), schema).features
    below = encode(make_record(value=-3.0), schema).features
    assert np.all(far[:N_NUMERIC] == 1.0) and np.all(below[:N_NUMERIC] == 0.0)


def test_encode_unseen_service_has_zero_block():
    schema = build_schema([make_record(service=s) for s in ("http", "smtp", "ftp")])
    sample = encode(make_record(service="gopher"), schema)
    block = sample.features[schema.block_slices()["service"]]
    assert block.size == 3 and np.all(block == 0.0)
    other = encode(make_record(service="smtp"), schema).features[schema.block_slices()["service"]]
    assert other.tolist() == [0.0, 0.0, 1.0]  # sorted: ftp, http, smtp


def test_encode_many_matches_encode(synthetic_files):
    _, test = synthetic_files
    train_recs = parse_nslkdd(synthetic_files[0])
    schema = build_schema(train_recs)
    recs = parse_nslkdd(test)[:200]
    batch = encode_many(recs, schema)
    for k in (0, 17, 199):
        single = encode(recs[k], schema)
        assert np.array_equal(batch.features[k], single.features)
        assert batch.classes[k] == single.cls
    assert batch.features.shape == (200, schema.encoded_dim)


def test_training_split_components_in_unit_range(synthetic_files):
    recs = parse_nslkdd(synthetic_files[0])
    schema = build_schema(recs)
    data = encode_many(recs, schema)
    assert data.features.min() >= 0.0 and data.features.max() <= 1.0
    for name, sl in schema.block_slices().items():
        if name != "numeric":
            # every training token is in vocabulary: exactly one hot
            assert np.all(data.features[:, sl].sum(axis=1) == 1.0)


def test_encoding_is_deterministic(synthetic_files):
    recs = parse_nslkdd(synthetic_files[0])
    schema = build_schema(recs)
    a, b = encode_many(recs, schema), encode_many(recs, schema)
    assert a.features.tobytes() == b.features.tobytes()


token = st.text(alphabet=string.ascii_lowercase + "_", min_size=1, max_size=8)
FIELD = {"protocol_type": "protocol", "service": "service", "flag": "flag"}


def with_token(column, t):
    return make_record(**{FIELD[column]: t})


@settings(max_examples=60, deadline=None)
@given(vocab=st.lists(token, min_size=1, max_size=6, unique=True), probe=token,
       column=st.sampled_from(sorted(FIELD)))
def test_one_hot_roundtrip_and_unseen_tokens(vocab, probe, column):
    schema = build_schema([with_token(column, t) for t in vocab])
    sl = schema.block_slices()[column]
    for t in vocab:
        block = encode(with_token(column, t), schema).features[sl]
        assert block.sum() == 1.0 and sorted(vocab)[int(np.argmax(block))] == t
    block = encode(with_token(column, probe), schema).features[sl]
    assert block.sum() == (1.0 if probe in vocab else 0.0)
    assert block.max() <= 1.0


@pytest.mark.parametrize("suffix", [".csv", ".npz"])
def test_encoded_dataset_roundtrip(tmp_path, suffix):
    rng = np.random.default_rng(0)
    data = EncodedDataset(rng.random((7, 5)), rng.integers(0, 5, 7))
    data.save(tmp_path / f"enc{suffix}")
    back = EncodedDataset.load(tmp_path / f"enc{suffix}")
    assert np.array_equal(back.features, data.features)
    assert np.array_equal(back.classes, data.classes)
    if suffix == ".csv":
        first = (tmp_path / "enc.csv").read_text().splitlines()[0]
        assert len(first.split(",")) == 5 + 1
