"""Codec: enumeration, byte mapping, margin sensing, soft correction."""

from itertools import product

import numpy as np
import pytest

from norsim.channel import LevelGrid, NoiseModel, RngStream, five_level_grid, sample_read
from norsim.codec import (
    CodeBook,
    encode,
    enumerate_codewords,
    margin_sense,
    oracle_nearest,
    parity_ok,
    read_byte,
    soft_correct,
)
from norsim.codec import _oracle_nearest_with_distance, _soft_correct_with_distance


@pytest.fixture(scope="module")
def book():
    return CodeBook.build(5)


@pytest.fixture(scope="module")
def grid():
    return five_level_grid(delta0=1.0, width=0.2)


def brute_nearest(volts, grid, allowed_sums=None):
    """Independent exhaustive L1 search with lexicographic tie-break."""
    best, best_d = None, None
    for w in product(range(5), repeat=4):
        if sum(w) % 2 != 0:
            continue
        if allowed_sums is not None and sum(w) not in allowed_sums:
            continue
        d = sum(abs(volts[j] - (grid.l0 + grid.pitch * w[j])) for j in range(4))
        if best_d is None or d < best_d - 1e-12:
            best, best_d = w, d
    return best, best_d


class TestEnumeration:
    def test_five_levels_gives_313(self):
        assert len(enumerate_codewords(5)) == 313

    def test_first_word_all_zero(self):
        assert tuple(enumerate_codewords(5)[0]) == (0, 0, 0, 0)

    def test_two_levels_against_brute_force(self):
        words = enumerate_codewords(2)
        brute = [w for w in product(range(2), repeat=4) if sum(w) % 2 == 0]
        assert len(words) == 8
        assert [tuple(w) for w in words] == brute

    @pytest.mark.parametrize("n", [3, 5, 7])
    def test_odd_level_closed_form(self, n):
        assert len(enumerate_codewords(n)) == (n**4 + 1) // 2

    @pytest.mark.parametrize("n", [2, 4])
    def test_even_level_closed_form(self, n):
        assert len(enumerate_codewords(n)) == n**4 // 2

    def test_lexicographic_order(self):
        words = [tuple(w) for w in enumerate_codewords(5)]
        assert words == sorted(words)

    def test_all_even_parity(self):
        assert all(parity_ok(w) for w in enumerate_codewords(5))


class TestParity:
    def test_cases(self):
        assert parity_ok((0, 0, 0, 0))
        assert not parity_ok((1, 0, 0, 0))
        assert parity_ok((4, 3, 2, 1))

    def test_wrong_length_rejected(self):
        with pytest.raises(ValueError):
            parity_ok((1, 2, 3))


class TestEncode:
    def test_byte_zero(self, book):
        assert encode(0, book) == (0, 0, 0, 0)

    def test_injective_and_even(self, book):
        words = {encode(b, book) for b in range(256)}
        assert len(words) == 256
        assert all(parity_ok(w) for w in words)

    def test_roundtrip_through_byte_map(self, book):
        for b in (0, 1, 17, 128, 255):
            assert book.byte_for_word(encode(b, book)) == b

    def test_small_book_rejected(self):
        with pytest.raises(ValueError):
            encode(5, CodeBook.build(3))

    def test_byte_range_checked(self, book):
        with pytest.raises(ValueError):
            encode(256, book)


class TestMarginSense:
    def test_exact_levels(self, grid):
        for x in range(5):
            v = np.full(4, grid.levels[x])
            assert list(margin_sense(v, grid)) == [x] * 4

    def test_clamps_below(self, grid):
        v = np.full(4, grid.l0 - 10 * grid.pitch)
        assert list(margin_sense(v, grid)) == [0, 0, 0, 0]

    def test_clamps_above(self, grid):
        v = np.full(4, grid.l0 + 99 * grid.pitch)
        assert list(margin_sense(v, grid)) == [4, 4, 4, 4]

    def test_just_under_half_pitch(self, grid):
        v = grid.levels[np.array([0, 1, 2, 3])] + 0.49 * grid.pitch
        assert list(margin_sense(v, grid)) == [0, 1, 2, 3]

    def test_half_pitch_tie_rounds_down(self):
        # pitch exactly 1.0 so the half-pitch points are exact in binary
        g = LevelGrid(n_levels=5, margin=0.75, width=0.25)
        v = g.levels[np.array([0, 1, 2, 3])] + 0.5
        assert list(margin_sense(v, g)) == [0, 1, 2, 3]


class TestSoftCorrect:
    def test_small_overshoot_recovers_written(self, grid, book):
        volts = grid.levels[[0, 0, 0, 0]].astype(float)
        volts[0] = grid.l0 + 0.6 * grid.pitch
        sensed = margin_sense(volts, grid)
        assert not parity_ok(sensed)
        assert soft_correct(volts, sensed, grid, book) == (0, 0, 0, 0)

    def test_two_level_overshoot_converges_two_away(self, grid, book):
        # read sits exactly on L2; with a parity-failing sensed word the
        # correction converges two levels away from the written symbol
        volts = grid.levels[[0, 0, 0, 0]].astype(float)
        volts[0] = grid.levels[2]
        word, dist = _soft_correct_with_distance(volts, (1, 0, 0, 0), grid, book)
        assert word == (2, 0, 0, 0)
        assert dist == pytest.approx(0.0, abs=1e-12)

    def test_parity_passing_input_rejected(self, grid, book):
        volts = grid.levels[[1, 1, 0, 0]].astype(float)
        with pytest.raises(ValueError):
            soft_correct(volts, (1, 1, 0, 0), grid, book)

    def test_tie_breaks_to_lexicographic_low(self, grid, book):
        # exact levels of the non-codeword (1,0,0,0): five words tie at
        # one pitch; the lexicographically lowest one wins
        volts = grid.levels[[1, 0, 0, 0]].astype(float)
        sensed = margin_sense(volts, grid)
        assert soft_correct(volts, sensed, grid, book) == (0, 0, 0, 0)

    def test_agrees_with_brute_force(self, grid, book):
        noise = NoiseModel(a=0.8, tail=1.0, width=0.2)
        rng = RngStream(77)
        checked = 0
        for _ in range(400):
            written = book.words[rng.gen.integers(0, len(book.words))]
            volts = sample_read(written, grid, noise, rng)
            sensed = margin_sense(volts, grid)
            if parity_ok(sensed):
                continue
            checked += 1
            s = int(sensed.sum())
            expect, _ = brute_nearest(volts, grid, allowed_sums={s - 1, s + 1})
            assert soft_correct(volts, sensed, grid, book) == expect
        assert checked > 100

    def test_output_always_even_parity(self, grid, book):
        rng = RngStream(78)
        for _ in range(200):
            volts = rng.gen.uniform(-2.0, grid.levels[-1] + 2.0, 4)
            sensed = margin_sense(volts, grid)
            if parity_ok(sensed):
                continue
            assert parity_ok(soft_correct(volts, sensed, grid, book))


class TestOracleNearest:
    def test_exact_codeword_recovered(self, grid, book):
        volts = grid.levels[[2, 1, 1, 0]].astype(float)
        word, dist = _oracle_nearest_with_distance(volts, grid, book)
        assert word == (2, 1, 1, 0)
        assert dist == pytest.approx(0.0, abs=1e-12)

    def test_agrees_with_brute_force(self, grid, book):
        rng = RngStream(79)
        for _ in range(300):
            volts = rng.gen.uniform(-1.0, grid.levels[-1] + 1.0, 4)
            expect, _ = brute_nearest(volts, grid)
            assert oracle_nearest(volts, grid, book) == expect

    def test_small_deviations_recover_codeword(self, grid, book):
        rng = RngStream(80)
        for _ in range(300):
            w = book.words[rng.gen.integers(0, len(book.words))]
            volts = grid.l0 + grid.pitch * w + rng.gen.uniform(
                -0.49 * grid.pitch, 0.49 * grid.pitch, 4
            )
            assert oracle_nearest(volts, grid, book) == tuple(int(x) for x in w)

    def test_dominates_soft_correct(self, grid, book):
        noise = NoiseModel(a=0.8, tail=1.0, width=0.2)
        rng = RngStream(81)
        strict = 0
        for _ in range(500):
            written = book.words[rng.gen.integers(0, len(book.words))]
            volts = sample_read(written, grid, noise, rng)
            sensed = margin_sense(volts, grid)
            if parity_ok(sensed):
                continue
            _, d_soft = _soft_correct_with_distance(volts, sensed, grid, book)
            ow, d_oracle = _oracle_nearest_with_distance(volts, grid, book)
            assert d_oracle <= d_soft + 1e-12
            if d_oracle < d_soft - 1e-12:
                strict += 1
                gap = abs(sum(ow) - int(sensed.sum()))
                assert gap % 2 == 1 and gap != 1
        # strict wins are possible but rare at this noise level
        assert strict < 50


class TestReadByte:
    def test_zero_noise_roundtrip_all_bytes(self, grid, book):
        for b in range(256):
            volts = grid.l0 + grid.pitch * np.array(encode(b, book), dtype=float)
            out = read_byte(volts, grid, book)
            assert out.parity_passed and out.byte == b and out.corrected is None

    def test_type_ii_pattern_reported(self, grid, book):
        # overshoot past a full pitch: senses one level up, corrects two up
        volts = grid.levels[[0, 0, 0, 0]].astype(float)
        volts[0] = grid.l0 + 1.2 * grid.pitch
        out = read_byte(volts, grid, book)
        assert not out.parity_passed
        assert out.corrected == (2, 0, 0, 0)
        assert out.byte == book.byte_for_word((2, 0, 0, 0))
        assert out.decoder_distance == pytest.approx(0.8 * grid.pitch, abs=1e-12)

    def test_opposite_shift_pair_goes_undetected(self, grid, book):
        # write (1,1,0,0); read lands exactly on the levels of (0,2,0,0):
        # parity passes on the wrong word
        volts = grid.levels[[0, 2, 0, 0]].astype(float)
        out = read_byte(volts, grid, book)
        assert out.parity_passed
        assert out.word == (0, 2, 0, 0)
        assert out.byte != book.byte_for_word((1, 1, 0, 0))

    def test_translation_invariance(self, book):
        g0 = five_level_grid(delta0=1.0, width=0.2, l0=0.0)
        g1 = five_level_grid(delta0=1.0, width=0.2, l0=7.25)
        rng = RngStream(82)
        for _ in range(100):
            volts = rng.gen.uniform(-1.0, g0.levels[-1] + 1.0, 4)
            o0 = read_byte(volts, g0, book)
            o1 = read_byte(volts + 7.25, g1, book)
            assert o0.sensed == o1.sensed
            assert o0.parity_passed == o1.parity_passed
            assert o0.word == o1.word
            assert o0.byte == o1.byte

    def test_unmapped_decode_is_data_not_failure(self, grid, book):
        # the last codeword (4,4,4,4) is outside the 256-byte map
        volts = grid.levels[[4, 4, 4, 4]].astype(float)
        out = read_byte(volts, grid, book)
        assert out.parity_passed and out.word == (4, 4, 4, 4) and out.byte is None

    def test_rejects_bad_read_vector(self, grid, book):
        with pytest.raises(ValueError):
            read_byte([0.0, 1.0, np.nan, 2.0], grid, book)
        with pytest.raises(ValueError):
            read_byte([0.0, 1.0], grid, book)
