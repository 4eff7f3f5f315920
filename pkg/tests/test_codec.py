import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seamcut.codec import (BOS, EOS, N_BINS, PAD, CodecError, MalformedStreamError, SeamSegment,
                           SeamSequence, canonical_sort, decode, dequantize, encode, load_tokens,
                           quantize, save_tokens, seam_from_edges, snap_to_bins, validate_stream,
                           yzx_key)


def random_seam(rng, n):
    bins = rng.integers(0, N_BINS, size=(n, 2, 3))
    bins[:, 1, 0] = np.where(np.all(bins[:, 0] == bins[:, 1], axis=1), (bins[:, 0, 0] + 1) % N_BINS,
                             bins[:, 1, 0])
    return canonical_sort(dequantize(bins))


def test_every_bin_center_round_trips():
    b = np.arange(N_BINS)
    assert np.array_equal(quantize(dequantize(b)), b)


def test_bin_edges_fall_in_upper_bin():
    edges = -1.0 + np.arange(N_BINS) * (2.0 / N_BINS)
    assert np.array_equal(quantize(edges), np.arange(N_BINS))
    assert quantize(1.0) == N_BINS - 1
    assert quantize(-1.0) == 0


def test_quantization_error_bound():
    c = np.random.default_rng(0).uniform(-1, 1, size=10**6)
    err = np.abs(dequantize(quantize(c)) - c)
    assert err.max() <= 1.0 / N_BINS


def test_clamp_slack_and_out_of_range():
    assert quantize(1.0 + 5e-10) == N_BINS - 1
    with pytest.raises(CodecError):
        quantize(1.01)
    with pytest.raises(CodecError):
        quantize(np.nan)
    with pytest.raises(CodecError):
        dequantize(N_BINS)


def test_yzx_order_matches_brute_force_permutations():
    rng = np.random.default_rng(1)
    pts = dequantize(rng.integers(0, 4, size=(5, 2, 3)))
    segs = [SeamSegment(tuple(h), tuple(t)) for h, t in pts if not np.array_equal(h, t)]
    got = canonical_sort(segs).segments
    canon = {s.canonical() for s in segs}
    # the sorted order is the unique permutation with nondecreasing yzx keys
    for perm in itertools.permutations(canon):
        keys = [yzx_key(s.head) + yzx_key(s.tail) for s in perm]
        if keys == sorted(keys):
            assert tuple(perm) == got
            break


def test_canonical_segment_puts_lower_yzx_first():
    s = SeamSegment((0.0, 0.5, 0.0), (1.0, 0.0, 0.0)).canonical()
    assert s.head == (1.0, 0.0, 0.0)


def test_duplicates_and_reversed_copies_collapse():
    a = ((0.1, 0.2, 0.3), (0.4, 0.5, 0.6))
    seq = canonical_sort([SeamSegment(*a), SeamSegment(a[1], a[0]), SeamSegment(*a)])
    assert seq.n_segments == 1


@pytest.mark.parametrize("n", [1, 5, 100])
def test_token_count(n):
    seq = random_seam(np.random.default_rng(n), n)
    n = seq.n_segments
    toks = encode(seq)
    assert len(toks) == 6 * n + 2
    assert toks[0] == BOS and toks[-1] == EOS


def test_round_trip_random_seams():
    rng = np.random.default_rng(2)
    for _ in range(200):
        seq = random_seam(rng, int(rng.integers(1, 20)))
        assert decode(encode(seq)) == seq


def test_encode_rejects_empty_and_overlong():
    with pytest.raises(CodecError):
        encode(SeamSequence(()))
    with pytest.raises(CodecError):
        encode(random_seam(np.random.default_rng(3), 10), max_segments=5)


def test_degenerate_segments_dropped_on_decode():
    toks = [BOS, 1, 2, 3, 1, 2, 3, 4, 5, 6, 7, 8, 9, EOS]
    assert decode(toks).n_segments == 1


@pytest.mark.parametrize("toks, pos", [
    ([1, 2, 3], 0),
    ([BOS, 1, 2, 3, 4, 5, 6], 7),
    ([BOS, 1, 2, 3, 4, 5, EOS], 1),
    ([BOS, 1, 2, BOS, 4, 5, 6, EOS], 3),
    ([BOS, 1, 2, 3, 4, 5, 6, EOS, 9], 8),
])
def test_malformed_streams_report_position(toks, pos):
    with pytest.raises(MalformedStreamError) as err:
        validate_stream(toks)
    assert err.value.position == pos


def test_trailing_pad_is_accepted():
    seq = random_seam(np.random.default_rng(4), 3)
    assert decode(encode(seq) + [PAD, PAD]) == seq


def test_seam_from_edges_snaps_vertices():
    v = np.array([[0.0, 0.0, 0.0], [0.3, 0.1, 0.0], [0.3, 0.9, 0.2]])
    seq = seam_from_edges(v, [(0, 1), (1, 2)])
    assert seq.n_segments == 2
    assert np.allclose(seq.as_array(), snap_to_bins(seq.as_array()))


def test_json_and_token_files(tmp_path):
    seq = random_seam(np.random.default_rng(5), 7)
    seq.save(tmp_path / "s.json")
    assert SeamSequence.load(tmp_path / "s.json") == seq
    toks = encode(seq)
    save_tokens(toks, tmp_path / "t.json")
    save_tokens(toks, tmp_path / "t.bin", binary=True)
    assert load_tokens(tmp_path / "t.json") == toks
    assert load_tokens(tmp_path / "t.bin", binary=True) == toks
    assert json.loads((tmp_path / "s.json").read_text())["normalized"] is True


bins = st.integers(0, N_BINS - 1)
segment = st.tuples(st.tuples(bins, bins, bins), st.tuples(bins, bins, bins)).filter(lambda s: s[0] != s[1])


@settings(max_examples=200, deadline=None)
@given(st.lists(segment, min_size=1, max_size=30))
def test_property_round_trip_and_sortedness(segs):
    seq = canonical_sort(dequantize(np.array(segs)))
    assert decode(encode(seq)) == seq
    keys = [s.sort_key() for s in seq]
    assert keys == sorted(keys) and len(set(keys)) == len(keys)
    assert all(yzx_key(s.head) < yzx_key(s.tail) for s in seq)


@settings(max_examples=200, deadline=None)
@given(st.lists(segment, min_size=1, max_size=10), st.randoms())
def test_property_order_independent(segs, rnd):
    arr = dequantize(np.array(segs))
    perm = list(range(len(arr)))
    rnd.shuffle(perm)
    flipped = arr[perm][:, ::-1]
    assert canonical_sort(arr) == canonical_sort(np.ascontiguousarray(flipped))


@settings(max_examples=300, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_property_quantization_error(c):
    assert abs(dequantize(quantize(c)) - c) <= 1.0 / N_BINS
