"""Formats, corruption, masks, and the caption codec."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcam import data
from pcam.data import ImageTensor, Vocabulary
from pcam.errors import FormatError, InvalidInputError, VocabularyError


class TestImageTensor:
    def test_flatten_unflatten_identity(self):
        rng = np.random.default_rng(0)
        t = ImageTensor.from_array(rng.uniform(0, 1, (3, 5, 7)))
        back = ImageTensor.from_flat(t.flatten(), t.shape)
        assert np.array_equal(back.pixels, t.pixels)

    def test_from_flat_size_check(self):
        with pytest.raises(InvalidInputError):
            ImageTensor.from_flat(np.zeros(10), (3, 2, 2))


class TestNetpbm:
    def test_all_black_p6(self, tmp_path):
        path = tmp_path / "black.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(12))
        t = data.read_tensor(path)
        assert t.shape == (3, 2, 2)
        assert np.all(t.pixels == 0.0)

    def test_round_trip_bytes_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        blob = b"P6\n4 3\n255\n" + bytes(rng.integers(0, 256, 36, dtype=np.uint8))
        src = tmp_path / "src.ppm"
        src.write_bytes(blob)
        t = data.read_tensor(src)
        dst = tmp_path / "dst.ppm"
        data.write_tensor(t, dst, format="ppm")
        assert dst.read_bytes() == blob

    def test_pgm_round_trip_values(self, tmp_path):
        rng = np.random.default_rng(2)
        t = ImageTensor.from_array(rng.uniform(0, 1, (1, 6, 5)))
        path = tmp_path / "gray.pgm"
        data.write_tensor(t, path, format="pgm")
        back = data.read_tensor(path)
        assert back.shape == t.shape
        assert np.max(np.abs(back.pixels - t.pixels)) <= 1.0 / 510 + 1e-12

    def test_comment_and_whitespace_tolerant(self, tmp_path):
        path = tmp_path / "c.pgm"
        path.write_bytes(b"P5\n# a comment\n 2\t2 \n255\n" + bytes([0, 64, 128, 255]))
        t = data.read_tensor(path)
        assert t.pixels[0, 1, 1] == pytest.approx(1.0)

    def test_unsupported_maxval(self, tmp_path):
        path = tmp_path / "wide.ppm"
        path.write_bytes(b"P6\n2 2\n65535\n" + bytes(24))
        with pytest.raises(FormatError, match="max value"):
            data.read_tensor(path)

    def test_truncated_payload_reports_offset(self, tmp_path):
        path = tmp_path / "short.ppm"
        path.write_bytes(b"P6\n2 2\n255\n" + bytes(5))
        with pytest.raises(FormatError) as err:
            data.read_tensor(path)
        assert err.value.offset == len(b"P6\n2 2\n255\n") + 5

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.ppm"
        path.write_bytes(b"Q9\n2 2\n255\n" + bytes(12))
        with pytest.raises(FormatError):
            data.read_tensor(path)

    def test_channel_mismatch_on_write(self, tmp_path):
        t = ImageTensor.from_array(np.zeros((1, 2, 2)))
        with pytest.raises(InvalidInputError):
            data.write_tensor(t, tmp_path / "x.ppm", format="ppm")


class TestRawContainer:
    def test_bit_exact_round_trip(self, tmp_path):
        rng = np.random.default_rng(3)
        t = ImageTensor.from_array(
            rng.uniform(0, 1, (3, 4, 5)).astype(np.float32).astype(np.float64)
        )
        p1 = tmp_path / "a.pctn"
        p2 = tmp_path / "b.pctn"
        data.write_tensor(t, p1, format="pctn")
        back = data.read_tensor(p1)
        data.write_tensor(back, p2, format="pctn")
        assert p1.read_bytes() == p2.read_bytes()
        assert np.array_equal(back.pixels, t.pixels)

    def test_truncation_detected(self, tmp_path):
        t = ImageTensor.from_array(np.zeros((1, 2, 2)))
        path = tmp_path / "t.pctn"
        data.write_tensor(t, path, format="pctn")
        path.write_bytes(path.read_bytes()[:-3])
        with pytest.raises(FormatError, match="truncated"):
            data.read_tensor(path)


class TestGaussianNoise:
    def test_zero_level_identity(self):
        x = np.linspace(0, 1, 50)
        assert np.array_equal(data.corrupt_gaussian(x, 0.0, seed=1), x)

    def test_seed_determinism(self):
        x = np.linspace(0, 1, 50)
        a = data.corrupt_gaussian(x, 0.2, seed=7)
        b = data.corrupt_gaussian(x, 0.2, seed=7)
        assert np.array_equal(a, b)

    def test_variance_reading(self):
        x = np.zeros(100_000)
        noisy = data.corrupt_gaussian(x, 0.2, seed=11)
        var = float(np.var(noisy - x))
        assert abs(var - 0.2) / 0.2 < 0.05
        assert abs(noisy.mean()) < 3 * np.sqrt(0.2) / np.sqrt(x.size)

    def test_std_reading(self):
        x = np.zeros(100_000)
        noisy = data.corrupt_gaussian(x, 0.2, seed=11, level_is="std")
        assert abs(np.var(noisy) - 0.04) / 0.04 < 0.05


class TestMasks:
    def test_full_fraction_all_true(self):
        assert data.make_mask(100, "random_pixels", 1.0, seed=0).all()

    def test_random_pixel_count_exact(self):
        mask = data.make_mask(1000, "random_pixels", 0.25, seed=3)
        assert int(mask.sum()) == 250

    def test_center_patch_geometry(self):
        mask = data.make_mask(3 * 32 * 32, "center_patch", 0.75, (3, 32, 32), seed=0)
        unknown = (~mask).reshape(3, 32, 32)
        assert int(unknown[0].sum()) == 256
        rows = np.where(unknown[0].any(axis=1))[0]
        cols = np.where(unknown[0].any(axis=0))[0]
        assert len(rows) == 16 and len(cols) == 16
        assert rows[0] == (32 - 16) // 2 and cols[0] == (32 - 16) // 2
        assert np.array_equal(unknown[0], unknown[1])

    def test_half_rows(self):
        mask = data.make_mask(2 * 4 * 6, "half_rows", 0.5, (2, 4, 6), seed=0)
        plane = mask.reshape(2, 4, 6)[0]
        assert plane[:2].all() and not plane[2:].any()

    def test_seed_reproducible(self):
        a = data.make_mask(500, "random_pixels", 0.5, seed=9)
        b = data.make_mask(500, "random_pixels", 0.5, seed=9)
        assert np.array_equal(a, b)

    def test_fraction_out_of_range(self):
        with pytest.raises(InvalidInputError):
            data.make_mask(10, "random_pixels", 0.0)
        with pytest.raises(InvalidInputError):
            data.make_mask(10, "random_pixels", 1.5)


class TestCaptionCodec:
    def vocab(self):
        return Vocabulary.from_corpus(["a small dog runs", "the dog sleeps"])

    def test_empty_caption_is_padding(self):
        v = self.vocab()
        code = data.encode_caption("", v, pad_to=25)
        assert code.shape == (25,)
        assert np.all(code == 0.0)
        assert data.decode_caption(code, v) == ""

    def test_decode_encode_identity_corpus(self):
        captions = data.make_captions(40, seed=5)
        v = Vocabulary.from_corpus(captions)
        for cap in captions:
            code = data.encode_caption(cap, v, pad_to=25)
            assert data.decode_caption(code, v) == cap

    def test_rounding_tolerance(self):
        v = self.vocab()
        code = data.encode_caption("small dog", v, pad_to=4)
        rng = np.random.default_rng(0)
        wobble = rng.uniform(-1, 1, 4) * (1.0 / (2 * v.size) - 1e-9)
        assert data.decode_caption(code + wobble, v) == "small dog"

    def test_oov_word_named(self):
        with pytest.raises(VocabularyError, match="zebra"):
            data.encode_caption("zebra", self.vocab(), pad_to=4)

    def test_too_long(self):
        with pytest.raises(InvalidInputError):
            data.encode_caption("dog " * 30, self.vocab(), pad_to=25)

    def test_vocab_file_round_trip(self, tmp_path):
        v = self.vocab()
        path = v.save(tmp_path / "vocab.txt")
        assert Vocabulary.load(path).tokens == v.tokens

    def test_vocab_size_cap(self):
        with pytest.raises(InvalidInputError):
            Vocabulary(tokens=(data.PAD_TOKEN, *[f"w{i}" for i in range(1000)]))


class TestCorpora:
    def test_images_in_range_and_deterministic(self):
        a = data.make_images(5, shape=(3, 16, 16), seed=2)
        b = data.make_images(5, shape=(3, 16, 16), seed=2)
        assert a.items.min() >= 0.0 and a.items.max() <= 1.0
        assert np.array_equal(a.items, b.items)
        assert a.dim == 3 * 16 * 16

    def test_captioned_layout(self):
        ds, captions, vocab = data.make_captioned_images(
            4, shape=(3, 8, 8), pad_to=25, seed=3
        )
        assert ds.dim == 3 * 8 * 8 + 25
        assert ds.layout.image_span == (0, 192)
        assert ds.layout.caption_span == (192, 217)
        lo, hi = ds.layout.caption_span
        for row, cap in zip(ds.items, captions):
            assert data.decode_caption(row[lo:hi], vocab) == cap

    def test_caption_file_round_trip(self, tmp_path):
        captions = data.make_captions(10, seed=1)
        path = tmp_path / "caps.txt"
        path.write_text("\n".join(captions) + "\n", encoding="utf-8")
        assert data.load_captions(path) == captions


@given(st.integers(min_value=1, max_value=400), st.integers(min_value=0, max_value=999))
@settings(max_examples=30, deadline=None)
def test_random_mask_count_property(d, seed):
    frac = ((seed % 97) + 1) / 100.0
    mask = data.make_mask(d, "random_pixels", frac, seed=seed)
    assert int(mask.sum()) == int(round(frac * d))
