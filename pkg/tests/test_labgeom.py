import json

import numpy as np
import pytest

from tetraslit import labgeom as lg


@pytest.fixture(scope="module")
def reference_geometry(reference, balanced_delta):
    return lg.to_physical(reference, balanced_delta, 650e-9, 100e-6)


def test_table2_row1(reference_geometry):
    lam_nm, a_um, two_d, z_cm, x3, x4 = reference_geometry.table_row()
    assert round(two_d) == 553
    assert z_cm == pytest.approx(33.53, abs=0.05)
    assert round(x3) == 63 and round(x4) == 242


def test_table2_row4_transverse(reference, balanced_delta):
    # the axial column of this row is checked in the acceptance suite
    g = lg.to_physical(reference, balanced_delta, 810e-9, 40e-6)
    _, _, two_d, _, x3, x4 = g.table_row()
    assert round(two_d) == 221 and round(x3) == 25 and round(x4) == 97


def test_invariants(reference, balanced_delta, reference_geometry):
    g = reference_geometry
    assert g.two_d == pytest.approx(2 * balanced_delta * g.a)
    assert g.z_det == pytest.approx(reference.zeta * 2 * np.pi * g.a**2 / g.wavelength)
    assert g.z0 == pytest.approx(2 * np.pi * g.a**2 / g.wavelength)
    assert g.x[0] == pytest.approx(-g.x[3]) and g.x[1] == pytest.approx(-g.x[2])


def test_scaling(reference, balanced_delta, reference_geometry):
    big = lg.to_physical(reference, balanced_delta, 650e-9, 200e-6)
    assert big.z_det == pytest.approx(4 * reference_geometry.z_det)
    assert big.two_d == pytest.approx(2 * reference_geometry.two_d)
    np.testing.assert_allclose(big.x, 2 * np.array(reference_geometry.x))


def test_round_trip(reference, balanced_delta, reference_geometry):
    delta, zeta, xi = lg.from_physical(reference_geometry)
    assert delta == pytest.approx(balanced_delta, rel=1e-12)
    assert zeta == pytest.approx(reference.zeta, rel=1e-12)
    np.testing.assert_allclose(xi, np.array(reference.w) * (1 + zeta**2) / (2 * delta), rtol=1e-12)
    again = lg.to_physical(reference, delta, reference_geometry.wavelength, reference_geometry.a)
    np.testing.assert_allclose(again.x, reference_geometry.x, rtol=1e-12)
    assert again.z_det == pytest.approx(reference_geometry.z_det, rel=1e-12)


def test_row2_zeta_from_printed_distance():
    g = lg.PhysicalGeometry(780e-9, 62.5e-6, 346e-6, 10.9e-2, (-151e-6, -39e-6, 39e-6, 151e-6))
    _, zeta, _ = lg.from_physical(g)
    assert zeta == pytest.approx(3.46, abs=0.02)


def test_zero_position():
    g = lg.PhysicalGeometry(780e-9, 62.5e-6, 346e-6, 0.1, (-1e-4, 0.0, 1e-5, 1e-4))
    assert lg.from_physical(g)[2][1] == 0


def test_json_round_trip(reference_geometry):
    d = json.loads(json.dumps(reference_geometry.to_dict()))
    assert d["z0"] == pytest.approx(reference_geometry.z0)
    assert lg.PhysicalGeometry.from_dict(d) == reference_geometry


def test_validation(reference, balanced_delta):
    with pytest.raises(ValueError):
        lg.to_physical(reference, balanced_delta, -1.0, 1e-4)
    with pytest.raises(ValueError):
        lg.PhysicalGeometry(1e-6, 1e-4, 0.0, 0.1, (0, 0, 0, 0))


@pytest.mark.parametrize(
    "metres, text",
    [(0.33521, "33.52 cm"), (5.53e-4, "553 um"), (6.5e-7, "650 nm"), (2.5, "2.5 m"), (3.2e-3, "3.2 mm")],
)
def test_format_length(metres, text):
    assert lg.format_length(metres) == text
