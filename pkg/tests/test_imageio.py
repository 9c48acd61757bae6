import numpy as np
import pytest

from specdeblur import Psf
from specdeblur.imageio import (
    read_image,
    read_image_csv,
    read_pgm,
    read_psf_csv,
    write_image,
    write_image_csv,
    write_pgm,
    write_psf_csv,
)


@pytest.mark.parametrize("binary", [True, False], ids=["P5", "P2"])
@pytest.mark.parametrize("maxval", [255, 65535])
def test_pgm_round_trip(tmp_path, binary, maxval):
    rng = np.random.default_rng(0)
    img = rng.random((7, 9))
    path = tmp_path / "img.pgm"
    write_pgm(path, img, binary=binary, maxval=maxval)
    back, meta = read_pgm(path)
    assert meta["format"] == ("P5" if binary else "P2")
    assert meta["maxval"] == maxval
    assert np.max(np.abs(back - img)) <= 0.5 / maxval + 1e-12


def test_pgm_write_read_write_is_bit_identical(tmp_path):
    rng = np.random.default_rng(1)
    img = rng.random((11, 6))
    first = tmp_path / "a.pgm"
    second = tmp_path / "b.pgm"
    write_pgm(first, img)
    back, meta = read_pgm(first)
    write_image(second, back, meta)
    assert first.read_bytes() == second.read_bytes()


def test_pgm_comment_handling(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P2\n# a comment\n3 2\n255\n0 128 255\n64 32 16\n")
    img, meta = read_pgm(path)
    assert img.shape == (2, 3)
    assert img[0, 1] == pytest.approx(128 / 255)


def test_pgm_16bit_precision(tmp_path):
    img = np.array([[0.0, 0.5], [0.25, 1.0]])
    path = tmp_path / "d.pgm"
    write_pgm(path, img, maxval=65535)
    back, _ = read_pgm(path)
    assert np.max(np.abs(back - img)) < 1e-4


def test_pgm_clamps_on_write(tmp_path):
    img = np.array([[-0.5, 1.5]] * 3)
    path = tmp_path / "e.pgm"
    write_pgm(path, img)
    back, _ = read_pgm(path)
    assert back.min() == 0.0
    assert back.max() == 1.0


def test_pgm_rejects_bad_magic(tmp_path):
    path = tmp_path / "f.pgm"
    path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
    with pytest.raises(ValueError, match="magic"):
        read_pgm(path)


def test_image_csv_round_trip_exact(tmp_path):
    rng = np.random.default_rng(2)
    img = rng.standard_normal((5, 8))  # raw values, outside [0,1] on purpose
    path = tmp_path / "img.csv"
    write_image_csv(path, img)
    back = read_image_csv(path)
    assert np.array_equal(back, img)
    header = path.read_text().splitlines()[0]
    assert header == "5,8"


def test_image_csv_header_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("2,3\n1.0,2.0,3.0\n")
    with pytest.raises(ValueError):
        read_image_csv(path)


def test_psf_csv_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    psf = Psf(rng.random((5, 5)))
    path = tmp_path / "psf.csv"
    write_psf_csv(path, psf)
    back = read_psf_csv(path)
    assert np.max(np.abs(back.array - psf.array)) == 0.0


def test_read_image_dispatch(tmp_path):
    img = np.random.default_rng(4).random((4, 4))
    pgm = tmp_path / "x.pgm"
    csv = tmp_path / "x.csv"
    write_image(pgm, img)
    write_image(csv, img)
    a, _ = read_image(pgm)
    b, _ = read_image(csv)
    assert np.array_equal(b, img)
    assert a.shape == img.shape
    with pytest.raises(ValueError):
        read_image(tmp_path / "x.png")
