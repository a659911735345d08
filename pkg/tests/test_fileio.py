import numpy as np
import pytest

from diffwalker import SeedSet, ValidationError, edge_count
from diffwalker.fileio import (
    read_image,
    read_label_image,
    read_pgm,
    read_seeds_csv,
    read_weights,
    write_label_image,
    write_pgm,
    write_seeds_csv,
    write_weights,
)


class TestPgm:
    def test_binary_round_trip_8bit(self, tmp_path):
        values = np.arange(12, dtype=np.int64).reshape(3, 4) * 20
        path = tmp_path / "img.pgm"
        write_pgm(path, values, maxval=255)
        back, maxval = read_pgm(path)
        assert maxval == 255
        assert np.array_equal(back, values)

    def test_binary_round_trip_16bit(self, tmp_path):
        values = np.array([[0, 40_000], [65_535, 7]])
        path = tmp_path / "img.pgm"
        write_pgm(path, values, maxval=65_535)
        back, maxval = read_pgm(path)
        assert maxval == 65_535
        assert np.array_equal(back, values)

    def test_ascii_p2_with_comments(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_text("P2\n# a comment\n3 2\n# another\n9\n0 1 2\n3 4 5\n")
        values, maxval = read_pgm(path)
        assert maxval == 9
        assert np.array_equal(values, [[0, 1, 2], [3, 4, 5]])

    def test_image_normalized_to_unit_interval(self, tmp_path):
        path = tmp_path / "img.pgm"
        write_pgm(path, np.array([[0, 128, 255]]), maxval=255)
        image = read_image(path)
        assert image[0, 0] == 0.0 and image[0, 2] == 1.0
        assert image[0, 1] == pytest.approx(128 / 255)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P6\n1 1\n255\n\x00")
        with pytest.raises(ValidationError):
            read_pgm(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "img.pgm"
        path.write_bytes(b"P5\n2 2\n255\n\x00\x01")
        with pytest.raises(ValidationError):
            read_pgm(path)


class TestLabelImages:
    def test_pgm_round_trip_is_raw_ids(self, tmp_path):
        labels = np.array([[0, 3], [700, 2]])
        path = tmp_path / "labels.pgm"
        write_label_image(path, labels)
        assert np.array_equal(read_label_image(path), labels)

    def test_csv_grid(self, tmp_path):
        path = tmp_path / "labels.csv"
        path.write_text("0,0,1\n2,2,1\n")
        assert np.array_equal(read_label_image(path), [[0, 0, 1], [2, 2, 1]])

    def test_oversized_ids_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            write_label_image(tmp_path / "x.pgm", np.array([[70_000]]))


class TestWeights:
    def test_round_trip_is_bit_identical(self, tmp_path):
        rng = np.random.default_rng(0)
        weights = rng.uniform(1e-9, 1.0, size=edge_count(5, 7))
        path = tmp_path / "w.bin"
        write_weights(path, weights, 5, 7)
        back, h, w = read_weights(path)
        assert (h, w) == (5, 7)
        assert back.tobytes() == weights.tobytes()
        first = path.read_bytes()
        write_weights(path, back, h, w)
        assert path.read_bytes() == first

    def test_header_magic_checked(self, tmp_path):
        path = tmp_path / "w.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(ValidationError):
            read_weights(path)

    def test_length_mismatch_rejected(self, tmp_path):
        path = tmp_path / "w.bin"
        with pytest.raises(ValidationError):
            write_weights(path, np.ones(3), 2, 2)


class TestSeedsCsv:
    def test_round_trip(self, tmp_path):
        seeds = SeedSet.from_pairs([(0, 0), (11, 1), (7, 0)])
        path = tmp_path / "seeds.csv"
        write_seeds_csv(path, seeds, width=4)
        back = read_seeds_csv(path, height=3, width=4)
        assert np.array_equal(back.vertices, seeds.vertices)
        assert np.array_equal(back.labels, seeds.labels)
        assert path.read_text().splitlines()[0] == "row,col,label"

    def test_out_of_range_seed_rejected(self, tmp_path):
        path = tmp_path / "seeds.csv"
        path.write_text("row,col,label\n5,0,0\n")
        with pytest.raises(ValidationError):
            read_seeds_csv(path, height=3, width=4)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "seeds.csv"
        path.write_text("0,0,0\n")
        with pytest.raises(ValidationError):
            read_seeds_csv(path, height=3, width=4)
