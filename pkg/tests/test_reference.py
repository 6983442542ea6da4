from adaptaug.augment import AugmentationKind
from adaptaug.reference import load_reference_levels


def test_reference_fixture_loads_and_validates():
    rows = load_reference_levels()
    assert len(rows) == 14
    by_kind = {r.kind: r for r in rows}
    assert AugmentationKind.G_LIGHTER in by_kind
    # structural invariants only: the values themselves are model-dependent
    for row in rows:
        assert len(row.baseline) == 4 and len(row.adaptive) == 4
        assert all(a < b for a, b in zip(row.adaptive, row.adaptive[1:]))
        assert all(a < b for a, b in zip(row.baseline, row.baseline[1:]))
        assert row.adaptive[-1] < row.max_level
    assert by_kind[AugmentationKind.BLUR].unit == "kernel_size"
    assert by_kind[AugmentationKind.BLUR].max_level == 49
    assert by_kind[AugmentationKind.NOISE].unit == "sigma"
    assert by_kind[AugmentationKind.NOISE].max_level == 50
    assert by_kind[AugmentationKind.R_LIGHTER].unit == "alpha"
