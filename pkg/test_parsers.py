"""
Test script for the parsers.
This script tests the RPC text format, the CSV tables and the sensor and sweep configuration files.
"""

import json
import logging

import numpy as np
import pytest

from parsers.csv_parser import (
    CORRESPONDENCE_COLUMNS,
    POINT_COLUMNS,
    read_correspondences_csv,
    read_table,
    table_to_text,
    write_correspondences_csv,
)
from parsers.rpc_file_parser import parse_rpc_text, read_rpc_file, rpc_to_text, write_rpc_file
from parsers.sensor_config_parser import (
    load_sensor,
    load_sweep_config,
    sensor_from_config,
    sensor_to_config,
    write_sensor_config,
)
from tools.grid import build_correspondences, generate_cnp_grid
from tools.sensors import CorrectedRpcSensor, PinholeSensor, PushbroomSensor, rotation_from_axis_angle
from utils.errors import ConfigurationError, MissingKey, ParseError, TooFewPoints

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)


def max_pixel_difference(a, b, points):
    row_a, col_a = a.project(points[:, 0], points[:, 1], points[:, 2])
    row_b, col_b = b.project(points[:, 0], points[:, 1], points[:, 2])
    return max(np.max(np.abs(row_a - row_b)), np.max(np.abs(col_a - col_b)))


@pytest.fixture
def points(small_spec):
    return generate_cnp_grid(small_spec)


def test_rpc_file_round_trip(rpc, points, tmp_path):
    """Test that a written RPC file reads back to the same projections."""
    logger.info("Testing RPC file round trip...")
    path = tmp_path / "model.rpc"
    write_rpc_file(rpc, str(path))
    back = read_rpc_file(str(path))
    assert max_pixel_difference(rpc, back, points) <= 1e-10
    assert path.read_text() == rpc_to_text(back)


def test_rpc_text_has_units_and_keys(rpc):
    text = rpc_to_text(rpc)
    assert "LINE_OFF: 5000 pixels" in text
    assert "HEIGHT_SCALE: 250 meters" in text
    assert "SAMP_DEN_COEFF_20:" in text
    assert len(text.splitlines()) == 10 + 80


def test_rpc_text_missing_key(rpc):
    text = "\n".join(line for line in rpc_to_text(rpc).splitlines() if not line.startswith("LAT_SCALE"))
    with pytest.raises(MissingKey) as info:
        parse_rpc_text(text)
    assert info.value.name == "LAT_SCALE"


def test_rpc_text_parse_error_line(rpc):
    lines = rpc_to_text(rpc).splitlines()
    lines[2] = "LAT_OFF: not-a-number degrees"
    with pytest.raises(ParseError) as info:
        parse_rpc_text("\n".join(lines))
    assert info.value.line == 3


def test_rpc_text_duplicate_key(rpc):
    text = rpc_to_text(rpc) + "LINE_OFF: 1 pixels\n"
    with pytest.raises(ParseError):
        parse_rpc_text(text)


def test_rpc_text_rescales_denominator(rpc, points):
    lines = []
    for line in rpc_to_text(rpc).splitlines():
        key, value = line.split(":")
        if key.startswith("LINE_NUM_COEFF") or key.startswith("LINE_DEN_COEFF"):
            value = f" {float(value) * 2.0!r}"
        lines.append(f"{key}:{value}")
    back = parse_rpc_text("\n".join(lines))
    assert back.den_row[0] == 1.0
    assert max_pixel_difference(rpc, back, points) <= 1e-9


def test_read_table_flags_malformed_rows():
    text = "lon,lat,alt\n1,2,3\n4,oops,6\n7,8\n9,10,11,12\n13,14,15\n"
    frame, malformed = read_table(text, POINT_COLUMNS)
    assert len(frame) == 5
    assert malformed.tolist() == [False, True, True, True, False]
    assert frame["lon"].tolist()[-1] == 13.0


def test_read_table_missing_column():
    with pytest.raises(ParseError) as info:
        read_table("lon,lat\n1,2\n", POINT_COLUMNS)
    assert info.value.line == 1


def test_read_table_header_only_and_empty():
    frame, malformed = read_table("lon,lat,alt\n", POINT_COLUMNS)
    assert len(frame) == 0 and len(malformed) == 0
    frame, malformed = read_table("", POINT_COLUMNS)
    assert list(frame.columns) == POINT_COLUMNS and len(frame) == 0


def test_table_to_text_precision():
    text = table_to_text({"lon": np.array([0.1]), "lat": np.array([np.nan]), "alt": np.array([1.0 / 3.0])})
    assert text.splitlines()[0] == "lon,lat,alt"
    lon, lat, alt = text.splitlines()[1].split(",")
    assert float(lon) == 0.1 and lat == "nan" and float(alt) == 1.0 / 3.0


def test_read_table_keeps_every_digit(rng):
    values = {name: rng.uniform(-180.0, 180.0, 200) for name in POINT_COLUMNS}
    frame, malformed = read_table(table_to_text(values), POINT_COLUMNS)
    assert not malformed.any()
    for name in POINT_COLUMNS:
        np.testing.assert_array_equal(frame[name].to_numpy(), values[name])


def test_correspondences_round_trip(pinhole, points, tmp_path):
    data = build_correspondences(pinhole, points)
    path = tmp_path / "data.csv"
    write_correspondences_csv(data, str(path))
    back = read_correspondences_csv(str(path))
    for column in CORRESPONDENCE_COLUMNS:
        np.testing.assert_array_equal(getattr(back, column), getattr(data, column))


def test_correspondences_reject_malformed_and_short(tmp_path):
    path = tmp_path / "bad.csv"
    rows = [f"{i},{i},{i % 3},{i},{i}" for i in range(50)]
    rows[4] = "4,4,x,4,4"
    path.write_text("lon,lat,alt,row,col\n" + "\n".join(rows) + "\n")
    with pytest.raises(ParseError) as info:
        read_correspondences_csv(str(path))
    assert info.value.line == 6

    path.write_text("lon,lat,alt,row,col\n" + "\n".join(rows[5:20]) + "\n")
    with pytest.raises(TooFewPoints):
        read_correspondences_csv(str(path))


def test_pinhole_config_round_trip(pinhole, points, tmp_path):
    path = tmp_path / "pinhole.json"
    write_sensor_config(pinhole, str(path))
    back = load_sensor(str(path))
    assert isinstance(back, PinholeSensor)
    assert max_pixel_difference(pinhole, back, points) == 0.0


def test_pinhole_config_from_center_and_focal(frame, pinhole, points):
    config = {
        "type": "pinhole",
        "frame": {"lon0": frame.lon0, "lat0": frame.lat0, "alt0": frame.alt0},
        "center": [0.0, 0.0, 500e3],
        "focal": 1e5,
        "principal_point": [5000.0, 5000.0],
    }
    assert max_pixel_difference(pinhole, sensor_from_config(config), points) <= 1e-9


def test_pushbroom_config_round_trip(pushbroom, points):
    back = sensor_from_config(json.loads(json.dumps(sensor_to_config(pushbroom))))
    assert isinstance(back, PushbroomSensor)
    assert max_pixel_difference(pushbroom, back, points) == 0.0


def test_rpc_config_inline_and_path(rpc, points, tmp_path):
    inline = sensor_from_config(json.loads(json.dumps(sensor_to_config(rpc))))
    assert max_pixel_difference(rpc, inline, points) == 0.0

    write_rpc_file(rpc, str(tmp_path / "model.rpc"))
    (tmp_path / "sensor.json").write_text(json.dumps({"type": "rpc", "path": "model.rpc"}))
    from_path = load_sensor(str(tmp_path / "sensor.json"))
    assert max_pixel_difference(rpc, from_path, points) <= 1e-10


def test_corrected_config_round_trip(rpc, points):
    R = rotation_from_axis_angle((1.0, 0.0, 0.0), 1e-3)
    sensor = CorrectedRpcSensor(base=rpc, R=R, T=(5.0, 0.0, 0.0), C=(0.0, 0.0, 500e3))
    back = sensor_from_config(json.loads(json.dumps(sensor_to_config(sensor))))
    assert isinstance(back, CorrectedRpcSensor)
    assert max_pixel_difference(sensor, back, points) <= 1e-10


def test_corrected_config_rotation_vector(rpc, points):
    config = {
        "type": "corrected_rpc",
        "base": sensor_to_config(rpc),
        "rotation": [1e-3, 0.0, 0.0],
        "translation": [5.0, 0.0, 0.0],
        "center": [0.0, 0.0, 500e3],
    }
    expected = CorrectedRpcSensor(base=rpc, R=rotation_from_axis_angle((1.0, 0.0, 0.0), 1e-3), T=(5.0, 0.0, 0.0), C=(0.0, 0.0, 500e3))
    assert max_pixel_difference(expected, sensor_from_config(config), points) <= 1e-9


def test_invalid_sensor_configs(frame):
    with pytest.raises(ConfigurationError):
        sensor_from_config({"type": "laser"})
    with pytest.raises(ConfigurationError):
        sensor_from_config({"type": "pushbroom", "frame": {"lon0": 0.0, "lat0": 0.0}})
    with pytest.raises(ConfigurationError):
        sensor_from_config({
            "type": "pinhole",
            "frame": {"lon0": frame.lon0, "lat0": frame.lat0},
            "P": [[0.0] * 4] * 3,
        })


def test_unreadable_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"type": "rpc",\n  "path": }')
    with pytest.raises(ParseError) as info:
        load_sensor(str(path))
    assert info.value.line == 2


def test_sweep_config(tmp_path):
    (tmp_path / "good.json").write_text(json.dumps({"kind": "grid_length", "sensor": "sensor.json", "bounds": {}, "lengths": [5, 10]}))
    config = load_sweep_config(str(tmp_path / "good.json"))
    assert config["sensor"] == str(tmp_path / "sensor.json")

    (tmp_path / "bad.json").write_text(json.dumps({"kind": "grid_length", "sensor": "sensor.json", "bounds": {}}))
    with pytest.raises(ConfigurationError):
        load_sweep_config(str(tmp_path / "bad.json"))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
