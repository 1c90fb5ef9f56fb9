import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.spatial.distance import cdist

from fracconf.fractal import (
    InfeasibleSpecError,
    SampleSet,
    Similarity,
    SimilarityIFS,
    box_counting_dimension,
    chaos_game_sample,
    deterministic_cells,
    make_cantor_like,
    read_samples,
    similarity_dimension,
    write_samples,
)
from fracconf.geometry import OrthogonalMatrix, read_configurations
from fracconf.haar import RngSeed

CANTOR_DIM = math.log(2) / math.log(3)


def ifs_from_ratios(ratios, d=1):
    ident = OrthogonalMatrix.identity(d)
    return SimilarityIFS(tuple(Similarity(r, ident, np.full(d, float(i))) for i, r in enumerate(ratios)))


def cantor():
    return make_cantor_like(1, CANTOR_DIM, 2)


def test_cantor_dimension():
    assert_allclose(similarity_dimension(ifs_from_ratios([1 / 3, 1 / 3])), 0.630930, atol=1e-6)


def test_four_quarters_exact():
    assert similarity_dimension(ifs_from_ratios([0.25] * 4)) == 1.0


def test_unequal_ratios_golden():
    # t = (1/2)^s solves t^2 + t = 1, so s = log2(2 / (sqrt(5) - 1))
    expected = math.log2(2 / (math.sqrt(5) - 1))
    assert_allclose(similarity_dimension(ifs_from_ratios([0.5, 0.25])), expected, atol=1e-11)
    assert_allclose(expected, 0.694242, atol=1e-6)


def test_single_map_rejected():
    with pytest.raises(ValueError):
        ifs_from_ratios([0.5])
    with pytest.raises(ValueError):
        Similarity(1.0, OrthogonalMatrix.identity(1), [0.0])
    with pytest.raises(ValueError):
        SimilarityIFS(ifs_from_ratios([0.5, 0.5]).maps, weights=[0.7, 0.2])


def test_make_cantor_like_middle_thirds():
    ifs = make_cantor_like(1, 0.630930, 2)
    assert_allclose(ifs.ratios, 1 / 3, atol=1e-6)
    assert_allclose(sorted(m.translation[0] for m in ifs.maps), [0, 1 - ifs.ratios[0]])


def test_make_cantor_like_full_square():
    ifs = make_cantor_like(2, 2.0, 2)
    assert_allclose(ifs.ratios, 0.5)
    lo, hi = ifs.bounding_box
    assert_allclose(lo, 0, atol=1e-12)
    assert_allclose(hi, 1, atol=1e-12)


def test_make_cantor_like_dim_19():
    ifs = make_cantor_like(2, 1.9, 3)
    # oracle: 9 * r^1.9 == 1
    assert_allclose(ifs.ratios, 0.3146060719, atol=1e-9)
    assert_allclose(9 * ifs.ratios[0] ** 1.9, 1.0, rtol=1e-12)
    assert abs(similarity_dimension(ifs) - 1.9) < 1e-9
    assert len(ifs.maps) == 9


def test_make_cantor_like_infeasible():
    with pytest.raises(InfeasibleSpecError) as err:
        make_cantor_like(2, 2.5, 3)
    assert err.value.feasible_range == (0, 2)
    assert "feasible" in str(err.value)


def test_chaos_game_cantor_gap():
    s = chaos_game_sample(cantor(), 5000, 64, RngSeed(4))
    x = s.points[:, 0]
    assert x.min() >= -1e-12 and x.max() <= 1 + 1e-12
    delta = (1 / 3) ** 64
    assert not np.any((x > 1 / 3 + delta) & (x < 2 / 3 - delta))
    # second-level gaps too
    assert not np.any((x > 1 / 9 + 1e-12) & (x < 2 / 9 - 1e-12))


def test_chaos_game_burn_in_and_seed():
    ifs = make_cantor_like(2, 1.5, 3)
    with pytest.raises(ValueError):
        chaos_game_sample(ifs, 10, 16, RngSeed(0))
    a = chaos_game_sample(ifs, 1000, 64, RngSeed(9))
    b = chaos_game_sample(ifs, 1000, 64, RngSeed(9))
    assert np.array_equal(a.points, b.points)
    assert a.meta["burn_in"] == 64 and a.meta["n"] == 1000


def test_samples_inside_bounding_box():
    ident = OrthogonalMatrix.identity(2)
    rot = OrthogonalMatrix([[0.0, -1.0], [1.0, 0.0]])
    ifs = SimilarityIFS((
        Similarity(0.5, ident, [0.0, 0.0]),
        Similarity(0.4, rot, [1.0, 0.2]),
        Similarity(0.3, ident, [0.3, 0.9]),
    ), weights=[0.5, 0.3, 0.2])
    lo, hi = ifs.bounding_box
    s = chaos_game_sample(ifs, 20_000, 64, RngSeed(2))
    slack = 0.5**64 * ifs.diameter + 1e-9
    assert np.all(s.points >= lo - slack) and np.all(s.points <= hi + slack)
    # the box is tight: the extreme samples reach close to its faces
    assert np.all(s.points.min(0) - lo < 0.01) and np.all(hi - s.points.max(0) < 0.01)


def test_deterministic_cells_cantor():
    c, r, w = deterministic_cells(cantor(), 0)
    assert_allclose(c, [[0.5]])
    assert_allclose(r, [0.5])
    c, r, w = deterministic_cells(cantor(), 1)
    assert_allclose(sorted(c[:, 0] - r), [0, 2 / 3], atol=1e-12)
    assert_allclose(sorted(c[:, 0] + r), [1 / 3, 1], atol=1e-12)
    c, r, w = deterministic_cells(cantor(), 2)
    assert len(c) == 4
    assert_allclose(2 * r, 1 / 9)
    assert_allclose(sorted(c[:, 0] - r), [0, 2 / 9, 6 / 9, 8 / 9], atol=1e-12)
    assert_allclose(w.sum(), 1.0)


def test_deterministic_cells_cap():
    with pytest.raises(ValueError):
        deterministic_cells(make_cantor_like(2, 1.9, 3), 8, max_cells=1000)


def test_box_counting_matches_dimension():
    ifs = make_cantor_like(2, 1.9, 3)
    s = chaos_game_sample(ifs, 100_000, 64, RngSeed(21))
    sizes = 2.0 ** -np.arange(3, 9)
    est = box_counting_dimension(s.points, sizes)
    centers, _, _ = deterministic_cells(ifs, 6)
    oracle = box_counting_dimension(centers, sizes)
    assert abs(est - 1.9) < 0.19
    assert abs(oracle - 1.9) < 0.19


def _energy_distance(a, b):
    return 2 * cdist(a, b).mean() - cdist(a, a).mean() - cdist(b, b).mean()


def _push_forward(ifs, pts, gen):
    idx = gen.choice(len(ifs.maps), size=len(pts), p=ifs.weights)
    out = np.empty_like(pts)
    for i, m in enumerate(ifs.maps):
        out[idx == i] = m.apply(pts[idx == i])
    return out


def test_self_similarity_push_forward():
    ifs = make_cantor_like(2, 1.6, 2)
    gen = np.random.default_rng(0)
    a = chaos_game_sample(ifs, 2000, 64, RngSeed(1)).points
    b = chaos_game_sample(ifs, 2000, 64, RngSeed(2)).points
    pushed = _push_forward(ifs, a, gen)
    stat = _energy_distance(pushed, b)
    pooled = np.concatenate([pushed, b])
    null = []
    for _ in range(50):
        perm = gen.permutation(len(pooled))
        null.append(_energy_distance(pooled[perm[:2000]], pooled[perm[2000:]]))
    assert stat < np.quantile(null, 0.99)
    # a wrong push-forward (one map only) is detected
    wrong = ifs.maps[0].apply(a)
    assert _energy_distance(wrong, b) > 10 * np.quantile(null, 0.99)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0.05, 0.6), min_size=2, max_size=6), st.floats(0.05, 0.6), st.data())
def test_similarity_dimension_monotone(ratios, extra, data):
    base = similarity_dimension(ifs_from_ratios(ratios))
    assert similarity_dimension(ifs_from_ratios(ratios + [extra])) > base
    i = data.draw(st.integers(0, len(ratios) - 1))
    shrunk = list(ratios)
    shrunk[i] *= 0.9
    assert similarity_dimension(ifs_from_ratios(shrunk)) < base


def test_sample_file_roundtrip(tmp_path):
    s = chaos_game_sample(make_cantor_like(2, 1.9, 3), 50, 64, RngSeed(3))
    path = tmp_path / "s.txt"
    write_samples(path, s, seed=3)
    text = path.read_text()
    assert text.splitlines()[0] == "# d=2 n=50 seed=3"
    back = read_samples(path)
    assert np.array_equal(back.points, s.points)
    assert back.meta["similarity_dimension"] == pytest.approx(1.9)
    # the configuration reader accepts the same file
    (config,) = read_configurations(path)
    assert np.array_equal(config.points, s.points)


def test_sample_file_header_mismatch(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("# d=3 n=2 seed=1\n0 0\n1 1\n")
    with pytest.raises(ValueError):
        read_samples(path)


def test_sample_set_bounds():
    s = SampleSet(np.array([[3.0, 4.0], [0.0, 0.0]]))
    assert s.norm_bound() == 5.0
    assert s.diameter() == 5.0
