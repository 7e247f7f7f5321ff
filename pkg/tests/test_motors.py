import json

import pytest

from monoped_codesign.gearbox import GearboxDesign
from monoped_codesign.motors import (ActuatorSpec, CatalogError, InfeasibleActuatorError, MotorSpec,
                                     load_catalog, make_actuator)


def _write(tmp_path, records):
    path = tmp_path / "motors.json"
    path.write_text(json.dumps(records))
    return path


def _rec(i, **kw):
    rec = {"id": i, "name": f"m{i}", "mass_kg": 0.3, "peak_torque_nm": 2.0,
           "stator_diameter_mm": 80.0, "max_speed_rad_s": 200.0}
    rec.update(kw)
    return rec


def test_packaged_catalog_has_six_motors_in_id_order(catalog):
    assert [m.id for m in catalog] == [1, 2, 3, 4, 5, 6]
    names = " ".join(m.name for m in catalog)
    for short in ("U8", "U10", "MN8014", "VT8020", "M6C12"):
        assert short in names


def test_catalog_sorted_by_id(tmp_path):
    motors = load_catalog(_write(tmp_path, [_rec(3), _rec(1), _rec(2)]))
    assert [m.id for m in motors] == [1, 2, 3]


def test_duplicate_id_rejected(tmp_path):
    with pytest.raises(CatalogError, match="duplicate"):
        load_catalog(_write(tmp_path, [_rec(1), _rec(3), _rec(3)]))


def test_negative_mass_rejected(tmp_path):
    with pytest.raises(CatalogError):
        load_catalog(_write(tmp_path, [_rec(1, mass_kg=-0.1)]))


def test_missing_key_and_missing_file(tmp_path):
    rec = _rec(1)
    del rec["peak_torque_nm"]
    with pytest.raises(CatalogError):
        load_catalog(_write(tmp_path, [rec]))
    with pytest.raises((CatalogError, FileNotFoundError)):
        load_catalog(tmp_path / "absent.json")


def test_id_out_of_range():
    with pytest.raises(ValueError):
        MotorSpec(7, "x", 0.3, 2.0, 80.0, 200.0)


def _motor(peak=2.0):
    return MotorSpec(2, "test", 0.4, peak, 87.0, 250.0)


def test_peak_output_torque_product():
    gbx = GearboxDesign.sspg(22, 44, 110, 3, 0.6)
    act = make_actuator(_motor(), gbx, 0.952)
    assert act.gear_ratio == 6.0
    assert act.peak_output_torque == pytest.approx(2.0 * 6.0 * 0.952, rel=1e-12)
    assert act.peak_output_torque == pytest.approx(11.424, abs=1e-12)
    assert act.total_mass > act.motor.mass


def test_identity_ratio_gives_motor_peak():
    act = ActuatorSpec(_motor(), GearboxDesign.sspg(22, 44, 110, 3, 0.6), 1.0, 1.0, 0.1)
    assert act.peak_output_torque == act.motor.peak_torque


def test_zero_efficiency_rejected():
    with pytest.raises(InfeasibleActuatorError):
        make_actuator(_motor(), GearboxDesign.sspg(22, 44, 110, 3, 0.6), 0.0)


def test_infeasible_pairing_rejected():
    small = MotorSpec(1, "small", 0.2, 1.0, 50.0, 200.0)  # 66 mm ring does not fit
    with pytest.raises(InfeasibleActuatorError, match="housing"):
        make_actuator(small, GearboxDesign.sspg(22, 44, 110, 3, 0.6), 0.95)


def test_peak_torque_increasing_in_ratio():
    gbx = GearboxDesign.sspg(22, 44, 110, 3, 0.6)
    peaks = [ActuatorSpec(_motor(), gbx, r, 0.95, 0.2).peak_output_torque for r in (4.0, 6.0, 9.5, 20.0)]
    assert all(a < b for a, b in zip(peaks, peaks[1:]))
