import numpy as np
import pytest

from manifold_restore.imageio import ImageFormatError, read_image, to_luminance, write_pgm, write_ppm


def test_pgm_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (7, 9)).astype(float)
    write_pgm(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(read_image(tmp_path / "a.pgm"), img)


def test_ppm_to_luminance(tmp_path):
    rgb = np.zeros((2, 2, 3))
    rgb[..., 0] = 255
    write_ppm(tmp_path / "c.ppm", rgb)
    np.testing.assert_array_equal(read_image(tmp_path / "c.ppm"), np.full((2, 2), 76.0))
    assert to_luminance(np.array([10.0, 20.0, 30.0])) == 18.0


def test_header_comments(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# hi\n2 1\n255\n\x01\x02")
    np.testing.assert_array_equal(read_image(tmp_path / "c.pgm"), [[1.0, 2.0]])


@pytest.mark.parametrize("data", [b"P2\n1 1\n255\n1", b"P5\n2 2\n255\n\x00", b"P5\n1 1\n65535\n\x00\x00"])
def test_rejects_bad_files(tmp_path, data):
    (tmp_path / "b.pgm").write_bytes(data)
    with pytest.raises(ImageFormatError):
        read_image(tmp_path / "b.pgm")
