import pytest

from monoped_codesign.linkmass import LinkMassModel, link_mass

M = LinkMassModel()


def test_formula_by_hand():
    # two 2 mm aluminium plates and an 8 mm plastic core, 30 mm wide, 0.3 m long
    plates = 2 * 0.3 * 0.030 * 0.002 * 2700
    core = 0.3 * 0.030 * 0.008 * 1250
    assert link_mass(M, 0.3) == pytest.approx(plates + core + 0.02, rel=1e-12)
    assert link_mass(M, 0.3) == pytest.approx(0.2072, abs=1e-12)


def test_limit_at_zero_length():
    assert link_mass(M, 1e-12) == pytest.approx(M.fixed_overhead, abs=1e-9)


def test_affine():
    assert link_mass(M, 0.30) - link_mass(M, 0.15) == pytest.approx(
        2 * (link_mass(M, 0.225) - link_mass(M, 0.15)), rel=1e-12)


def test_strictly_increasing():
    masses = [link_mass(M, l) for l in (0.1, 0.15, 0.2, 0.35)]
    assert all(a < b for a, b in zip(masses, masses[1:]))


@pytest.mark.parametrize("length", [0.0, -0.1])
def test_nonpositive_length(length):
    with pytest.raises(ValueError):
        link_mass(M, length)


def test_invalid_model_and_unknown_keys():
    with pytest.raises(ValueError):
        LinkMassModel(plate_width=0.0)
    with pytest.raises(ValueError):
        LinkMassModel(fixed_overhead=-0.01)
    assert LinkMassModel(fixed_overhead=0.0).fixed_overhead == 0.0
    with pytest.raises(ValueError, match="unknown"):
        LinkMassModel.from_dict({"plate_thicknes": 0.002})
