import numpy as np
import pytest

from faircf.errors import (
    EmptyPopulationError,
    ParseError,
    SchemaError,
    ValidationError,
)
from faircf.model import TableClassifier
from faircf.tabular import (
    FeatureSchema,
    FeatureSpec,
    affected_subset,
    load_csv,
    train_test_split,
)

from helpers import synthetic_dataset


SCHEMA_CFG = {
    "features": [
        {"name": "income", "kind": "continuous", "actionable": True},
        {"name": "credit", "kind": "continuous", "actionable": True},
        {"name": "race", "kind": "nominal", "actionable": False},
    ],
    "protected": "race",
    "target": "y",
}


def write_csv(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_three_rows(tmp_path):
    path = write_csv(tmp_path, "income,credit,race,y\n10,5,0,0\n30,6,1,1\n50,7,0,1\n")
    ds = load_csv(path, SCHEMA_CFG)
    assert ds.n_rows == 3
    assert set(ds.X[:, ds.schema.protected_index]) <= {0.0, 1.0}


def test_load_csv_fits_ranges(tmp_path):
    path = write_csv(tmp_path, "income,credit,race,y\n10,5,0,0\n30,6,1,1\n50,7,0,1\n")
    ds = load_csv(path, SCHEMA_CFG)
    income = ds.schema.features[ds.schema.index("income")]
    assert income.observed_min == 10.0
    assert income.observed_max == 50.0


def test_load_csv_nonbinary_protected(tmp_path):
    path = write_csv(tmp_path, "income,credit,race,y\n10,5,0,0\n30,6,2,1\n")
    with pytest.raises(ValidationError, match="race"):
        load_csv(path, SCHEMA_CFG)


def test_load_csv_missing_column(tmp_path):
    path = write_csv(tmp_path, "income,race,y\n10,0,0\n")
    with pytest.raises(SchemaError, match="credit"):
        load_csv(path, SCHEMA_CFG)


def test_load_csv_bad_cell_names_row_and_column(tmp_path):
    path = write_csv(tmp_path, "income,credit,race,y\n10,5,0,0\noops,6,1,1\n")
    with pytest.raises(ParseError, match=r"row 2.*'income'"):
        load_csv(path, SCHEMA_CFG)


def test_load_csv_missing_value_rejected(tmp_path):
    path = write_csv(tmp_path, "income,credit,race,y\n10,,0,0\n")
    with pytest.raises(ParseError, match="credit"):
        load_csv(path, SCHEMA_CFG)


def test_load_csv_nonbinary_label(tmp_path):
    path = write_csv(tmp_path, "income,credit,race,y\n10,5,0,2\n")
    with pytest.raises(ValidationError, match="y"):
        load_csv(path, SCHEMA_CFG)


def test_schema_rejects_constant_actionable():
    with pytest.raises(SchemaError, match="constant"):
        FeatureSpec("flat", "continuous", 3.0, 3.0, True)


def test_schema_rejects_actionable_protected():
    with pytest.raises(SchemaError, match="protected"):
        FeatureSchema(
            (FeatureSpec("race", "nominal", 0, 1, True),
             FeatureSpec("income", "continuous", 0, 1, True)),
            "race", "y",
        )


def test_schema_requires_actionable_feature():
    with pytest.raises(SchemaError, match="actionable"):
        FeatureSchema(
            (FeatureSpec("race", "nominal", 0, 1, False),
             FeatureSpec("income", "continuous", 0, 1, False)),
            "race", "y",
        )


def test_normalize_affine():
    ds = _tiny_dataset(income=(10.0, 30.0, 50.0))
    assert ds.schema.normalize_scalar(30.0, "income") == pytest.approx(0.5)
    assert ds.schema.normalize_scalar(10.0, "income") == 0.0


def test_normalize_round_trip():
    ds = _tiny_dataset(income=(10.0, 30.0, 50.0))
    v = 37.2
    n = ds.schema.normalize_scalar(v, "income")
    assert abs(ds.schema.denormalize_scalar(n, "income") - v) <= 1e-9


def test_normalize_round_trip_random():
    rng = np.random.default_rng(3)
    ds = synthetic_dataset(seed=1)
    for _ in range(200):
        j = rng.integers(ds.schema.n_features)
        f = ds.schema.features[j]
        v = rng.uniform(f.observed_min, f.observed_max)
        n = ds.schema.normalize_scalar(v, f.name)
        assert abs(ds.schema.denormalize_scalar(n, f.name) - v) <= 1e-9


def test_normalize_unknown_feature():
    ds = _tiny_dataset(income=(10.0, 30.0, 50.0))
    with pytest.raises(SchemaError, match="nope"):
        ds.schema.normalize_scalar(1.0, "nope")


def test_constant_feature_normalizes_to_zero():
    schema = FeatureSchema(
        (FeatureSpec("flat", "continuous", 5.0, 5.0, False),
         FeatureSpec("inc", "continuous", 0.0, 1.0, True),
         FeatureSpec("grp", "nominal", 0.0, 1.0, False)),
        "grp", "y",
    )
    norm = schema.normalize(np.array([[5.0, 0.2, 1.0]]))
    assert norm[0, 0] == 0.0
    assert schema.denormalize(norm)[0, 0] == 5.0


def _tiny_dataset(income):
    cfg_rows = "\n".join(f"{v},{i + 1},{i % 2},0" for i, v in enumerate(income))
    # build via the same loader for realistic fitting
    import tempfile, os

    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as fh:
        fh.write("income,credit,race,y\n" + cfg_rows + "\n")
        name = fh.name
    try:
        return load_csv(name, SCHEMA_CFG)
    finally:
        os.unlink(name)


def test_affected_subset_enumerates_predictions():
    ds = synthetic_dataset(seed=0, n_per=2)  # 8 rows
    scores = {i: 0.9 for i in range(ds.n_rows)}
    for i in (0, 2, 3):
        scores[i] = 0.1
    aff = affected_subset(ds, TableClassifier(scores))
    assert aff.indices.tolist() == [0, 2, 3]


def test_affected_subset_partition():
    ds = synthetic_dataset(seed=0, n_per=3)
    scores = {i: 0.9 for i in range(ds.n_rows)}
    prot = ds.X[:, ds.schema.protected_index]
    zeros = np.flatnonzero(prot == 0)[:1]
    ones = np.flatnonzero(prot == 1)[:2]
    for i in np.concatenate([zeros, ones]):
        scores[int(i)] = 0.1
    aff = affected_subset(ds, TableClassifier(scores))
    assert aff.group0.tolist() == zeros.tolist()
    assert sorted(aff.group1.tolist()) == sorted(ones.tolist())
    assert len(aff.group0) + len(aff.group1) == len(aff.indices)


def test_affected_subset_empty_population():
    ds = synthetic_dataset(seed=0, n_per=2)
    scores = {i: 0.9 for i in range(ds.n_rows)}
    with pytest.raises(EmptyPopulationError):
        affected_subset(ds, TableClassifier(scores))


def test_affected_subset_soundness():
    ds = synthetic_dataset(seed=5, n_per=30)
    from faircf.model import train_classifier
    clf = train_classifier(*train_test_split(ds, 0.2, seed=0)[:1])
    aff = affected_subset(ds, clf)
    assert len(aff.group0) + len(aff.group1) == len(aff.indices)
    repredict = clf.predict(ds.X_norm[aff.indices])
    assert (repredict == 0).all()


def test_train_test_split_deterministic_and_disjoint():
    ds = synthetic_dataset(seed=2, n_per=25)
    tr1, te1 = train_test_split(ds, 0.2, seed=7)
    tr2, te2 = train_test_split(ds, 0.2, seed=7)
    assert np.array_equal(tr1.row_ids, tr2.row_ids)
    assert np.array_equal(te1.row_ids, te2.row_ids)
    assert not set(tr1.row_ids) & set(te1.row_ids)
    assert len(tr1.row_ids) + len(te1.row_ids) == ds.n_rows
    assert tr1.schema is ds.schema


def test_load_csv_ragged_row(tmp_path):
    path = write_csv(tmp_path, "income,credit,race,y\n10,5,0,0\n30,6\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(path, SCHEMA_CFG)
