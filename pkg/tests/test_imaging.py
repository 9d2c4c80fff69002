import logging

import numpy as np
import pytest

from kronpol.imaging import (PALETTE, SENTINEL, MultipassStack, StackFormatError, classify_map,
                             decode_map, decompose_map, load_stack, region_percentages,
                             render_map, render_zones, save_png, save_stack, window_samples)
from kronpol.decomposition import h_alpha, zone_index
from kronpol.linalg import kron, pauli_coherence
from kronpol.mos import BIC, classify
from kronpol.simulate import draw_samples, exponential_temporal, nominal_polarimetric

from conftest import random_complex


def two_region_stack(M, rows, half, seed, classes=("reflection", "azimuth"), rho=0.9):
    rng = np.random.default_rng(seed)
    Ct = exponential_temporal(M, rho)
    data = np.zeros((M, 3, rows, 2 * half), complex)
    for j, h in enumerate(classes):
        X = draw_samples(kron(Ct, nominal_polarimetric(h)), rows * half, rng)
        data[..., j * half:(j + 1) * half] = X.reshape(M, 3, rows, half)
    return MultipassStack(data)


@pytest.fixture
def small_stack(rng):
    return MultipassStack(random_complex(rng, (2, 3, 9, 11)))


def test_roundtrip_bit_exact(tmp_path, rng):
    st = MultipassStack(random_complex(rng, (2, 3, 4, 4)))
    save_stack(st, tmp_path / "a.hdr", tmp_path / "a.bin")
    back = load_stack(tmp_path / "a.hdr", tmp_path / "a.bin")
    assert np.array_equal(back.data, st.data)
    assert (tmp_path / "a.bin").stat().st_size == 2 * 3 * 16 * 16


def test_truncated_payload(tmp_path, rng):
    st = MultipassStack(random_complex(rng, (2, 3, 4, 4)))
    save_stack(st, tmp_path / "a.hdr", tmp_path / "a.bin")
    raw = (tmp_path / "a.bin").read_bytes()
    (tmp_path / "a.bin").write_bytes(raw[:-16])
    with pytest.raises(StackFormatError, match="expected 1536 bytes, found 1520"):
        load_stack(tmp_path / "a.hdr", tmp_path / "a.bin")


def test_complex64_promotion(tmp_path, rng):
    st = MultipassStack(random_complex(rng, (1, 3, 5, 6)))
    save_stack(st, tmp_path / "a.hdr", tmp_path / "a.bin", dtype="complex64")
    back = load_stack(tmp_path / "a.hdr", tmp_path / "a.bin")
    assert back.data.dtype == np.complex128
    assert np.allclose(back.data, st.data, rtol=1e-6, atol=0)


@pytest.mark.parametrize("edit,match", [
    (("dtype: complex128", "dtype: float32"), "unknown dtype"),
    (("N: 3", "N: 4"), "N must be 3"),
    (("M: 2\n", ""), "missing keys: M"),
    (("layout: pass,channel,row,col", "layout: row,col,pass,channel"), "layout"),
])
def test_bad_headers(tmp_path, rng, edit, match):
    save_stack(MultipassStack(random_complex(rng, (2, 3, 2, 2))), tmp_path / "a.hdr",
               tmp_path / "a.bin")
    text = (tmp_path / "a.hdr").read_text().replace(*edit)
    (tmp_path / "a.hdr").write_text(text)
    with pytest.raises(StackFormatError, match=match):
        load_stack(tmp_path / "a.hdr", tmp_path / "a.bin")


def test_header_is_plain_key_value(tmp_path, rng):
    save_stack(MultipassStack(random_complex(rng, (2, 3, 3, 5))), tmp_path / "a.hdr",
               tmp_path / "a.bin")
    lines = dict(l.split(": ") for l in (tmp_path / "a.hdr").read_text().splitlines())
    assert lines == {"L": "3", "C": "5", "N": "3", "M": "2", "dtype": "complex128",
                     "layout": "pass,channel,row,col"}


def test_window_shape_and_oracle(small_stack):
    X = window_samples(small_stack, 4, 5, 5, 5)
    assert X.shape == (6, 25)
    d = small_stack.data
    k = 0
    for r in range(2, 7):
        for c in range(3, 8):
            col = np.concatenate([d[m, :, r, c] for m in range(2)])
            assert np.array_equal(X[:, k], col)
            k += 1


def test_window_constant_stack():
    st = MultipassStack(np.ones((2, 3, 6, 6)) * (1 + 2j))
    X = window_samples(st, 0, 0, 3, 3)
    assert np.all(X == X[:, :1])


def test_window_border_clamp(small_stack):
    assert np.array_equal(window_samples(small_stack, 0, 0, 5, 5),
                          window_samples(small_stack, 2, 2, 5, 5))
    assert np.array_equal(window_samples(small_stack, 8, 10, 3, 3),
                          window_samples(small_stack, 7, 9, 3, 3))


def test_window_errors(small_stack):
    with pytest.raises(ValueError):
        window_samples(small_stack, 0, 0, 0, 3)
    with pytest.raises(ValueError):
        window_samples(small_stack, 0, 0, 10, 3)


def test_map_matches_per_pixel_classify(small_stack):
    labels = classify_map(small_stack, BIC, (3, 3)).labels
    for r in range(9):
        for c in range(11):
            X = window_samples(small_stack, r, c, 3, 3)
            assert labels[r, c] == int(classify(X, 2, BIC))


def test_map_schedule_independent(small_stack):
    a = classify_map(small_stack, BIC, (3, 3), chunk=4096, workers=1).labels
    b = classify_map(small_stack, BIC, (3, 3), chunk=7, workers=3).labels
    assert np.array_equal(a, b)


def test_translation_consistency(rng):
    data = random_complex(rng, (2, 3, 12, 12))
    a = classify_map(MultipassStack(data), BIC, (3, 3)).labels
    b = classify_map(MultipassStack(np.roll(data, (2, 3), axis=(2, 3))), BIC, (3, 3)).labels
    # interior pixels whose windows did not wrap
    assert np.array_equal(a[1:9, 1:8], b[3:11, 4:11])


def test_two_region_map():
    st = two_region_stack(2, 32, 32, seed=5)
    labels = classify_map(st, BIC, "5x5").labels
    assert np.mean(labels[2:-2, 2:30] == 1) >= 0.9
    assert np.mean(labels[2:-2, 34:-2] == 3) >= 0.85


def test_single_pass_equals_single_image_mode(rng):
    st = MultipassStack(random_complex(rng, (1, 3, 10, 10)))
    a = classify_map(st, BIC, (3, 3)).labels
    b = classify_map(st, BIC, (3, 3), single_image=True).labels
    assert np.array_equal(a, b)


def test_degenerate_one_pixel(rng, caplog):
    st = MultipassStack(random_complex(rng, (1, 3, 1, 1)))
    with caplog.at_level(logging.WARNING):
        out = classify_map(st, BIC, (1, 1))
    assert out.labels.shape == (1, 1)
    assert out.labels[0, 0] in (SENTINEL, 0, 1, 2, 3)
    assert "ill-conditioned" in caplog.text


def test_zero_window_is_sentinel():
    st = MultipassStack(np.zeros((2, 3, 5, 5)))
    out = classify_map(st, BIC, (3, 3))
    assert np.all(out.labels == SENTINEL) and out.failures == 25
    dec = decompose_map(st, BIC, (3, 3))
    assert np.all(dec.zones == 0) and np.all(np.isnan(dec.entropy))


def test_decompose_rasters(small_stack):
    dec = decompose_map(small_stack, BIC, (3, 3))
    assert dec.zones.shape == dec.entropy.shape == dec.alpha.shape == (9, 11)
    assert np.all((dec.entropy >= 0) & (dec.entropy <= 1))
    assert np.all((dec.alpha >= 0) & (dec.alpha <= 90))
    assert np.all((dec.zones >= 1) & (dec.zones <= 9))
    sample = decompose_map(small_stack, BIC, (3, 3), estimate="sample")
    assert not np.array_equal(sample.entropy, dec.entropy)


def test_decompose_distribution_shift():
    az = two_region_stack(2, 24, 24, seed=1, classes=("azimuth", "azimuth"))
    no = two_region_stack(2, 24, 24, seed=1, classes=("none", "none"))
    za = decompose_map(az, BIC, (5, 5)).zones
    zn = decompose_map(no, BIC, (5, 5)).zones
    surface = [6, 9]  # medium and low entropy surface zones
    assert np.isin(za, surface).mean() > np.isin(zn, surface).mean()
    ha = np.bincount(za.ravel(), minlength=10) / za.size
    hn = np.bincount(zn.ravel(), minlength=10) / zn.size
    assert 0.5 * np.abs(ha - hn).sum() > 0.2
    # both nominal coherences sit in the medium entropy surface zone
    nominal = zone_index(*h_alpha(pauli_coherence(nominal_polarimetric("azimuth"))))
    assert np.argmax(ha) == nominal == 6


def test_render_palette_and_roundtrip(tmp_path):
    labels = np.array([[0, 1, 2], [3, SENTINEL, 1]], dtype=np.int8)
    rgb = render_map(labels)
    assert tuple(rgb[0, 0]) == (0, 0, 0)
    assert tuple(rgb[0, 1]) == (0, 0, 255)
    assert tuple(rgb[0, 2]) == (255, 0, 0)
    assert tuple(rgb[1, 0]) == (255, 255, 0)
    assert tuple(rgb[1, 1]) == (128, 128, 128)
    assert np.array_equal(decode_map(rgb), labels)
    assert len(set(PALETTE.values())) == len(PALETTE)
    save_png(rgb, tmp_path / "m.png")
    from PIL import Image
    assert np.array_equal(np.asarray(Image.open(tmp_path / "m.png")), rgb)


def test_all_reflection_is_blue():
    rgb = render_map(np.ones((4, 4), dtype=np.int8))
    assert np.all(rgb == np.array([0, 0, 255], dtype=np.uint8))


def test_decode_rejects_unknown_colour():
    with pytest.raises(ValueError):
        decode_map(np.full((1, 1, 3), 7, dtype=np.uint8))


def test_zone_render_shape():
    assert render_zones(np.arange(10).reshape(2, 5)).shape == (2, 5, 3)


def test_region_percentages():
    labels = np.array([[1, 1, 3, SENTINEL]])
    out = region_percentages(labels, {"r": (0, 1, 0, 4)}, [0, 1, 2, 3])
    pct, n = out["r"]
    assert n == 3
    assert np.allclose(pct, [0, 200 / 3, 0, 100 / 3])
