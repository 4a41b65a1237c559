import numpy as np
import pytest

from conftest import random_unit_feature_map
from wedgealign.correspondence import (
    best_buddies,
    correspondences_to_jsonable,
    filter_foreground,
)
from wedgealign.features import SimilarityVolume, similarity_volume


def brute_force_mutual_argmax(volume):
    """Oracle: independent double-argmax enumeration over all cell pairs."""
    ph, pw = volume.proto_grid_shape
    th, tw = volume.target_grid_shape
    m = volume.data.reshape(ph * pw, th * tw)
    pairs = set()
    for p in range(m.shape[0]):
        k = int(np.argmax(m[p]))
        if int(np.argmax(m[:, k])) == p:
            pairs.add((p, k))
    return pairs


def pairs_from(volume):
    tw = volume.target_grid_shape[1]
    pw = volume.proto_grid_shape[1]
    cell_w_p = volume.proto_image_size[1] / pw
    cell_w_t = volume.target_image_size[1] / tw
    out = set()
    for c in best_buddies(volume):
        pr = round(c.proto.y / (volume.proto_image_size[0] / volume.proto_grid_shape[0]) - 0.5)
        pc = round(c.proto.x / cell_w_p - 0.5)
        tr = round(c.target.y / (volume.target_image_size[0] / volume.target_grid_shape[0]) - 0.5)
        tc = round(c.target.x / cell_w_t - 0.5)
        out.add((pr * pw + pc, tr * tw + tc))
    return out


class TestBestBuddies:
    def test_identical_maps_all_self_pairs(self):
        rng = np.random.default_rng(0)
        fm = random_unit_feature_map(rng, 16, (6, 6), (48, 48))
        vol = similarity_volume(fm, fm)
        corrs = best_buddies(vol)
        assert len(corrs) == 36
        for c in corrs:
            assert (c.proto.x, c.proto.y) == (c.target.x, c.target.y)
            assert c.score == pytest.approx(1.0, abs=1e-6)

    def test_single_mutual_pair_two_by_two(self):
        m = np.array(
            [
                [0.1, 0.9, 0.2, 0.3],
                [0.2, 0.8, 0.1, 0.0],
                [0.0, 0.7, 0.1, 0.2],
                [0.3, 0.6, 0.2, 0.1],
            ],
            dtype=np.float32,
        )
        vol = SimilarityVolume(
            data=m.reshape(2, 2, 2, 2),
            proto_image_size=(16, 16),
            target_image_size=(16, 16),
        )
        corrs = best_buddies(vol)
        assert len(corrs) == 1
        c = corrs[0]
        # proto cell (0, 0) has center (4, 4); target cell (0, 1) has (12, 4)
        assert (c.proto.x, c.proto.y) == (4.0, 4.0)
        assert (c.target.x, c.target.y) == (12.0, 4.0)
        assert c.score == pytest.approx(0.9)

    def test_matches_brute_force_oracle(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            a = random_unit_feature_map(rng, 12, (6, 6), (48, 48))
            b = random_unit_feature_map(rng, 12, (6, 6), (48, 48))
            vol = similarity_volume(a, b)
            assert pairs_from(vol) == brute_force_mutual_argmax(vol)

    def test_transposed_volume_swaps_roles(self):
        rng = np.random.default_rng(33)
        a = random_unit_feature_map(rng, 10, (5, 5), (40, 40))
        b = random_unit_feature_map(rng, 10, (5, 5), (40, 40))
        fwd = similarity_volume(a, b)
        bwd = similarity_volume(b, a)
        fwd_pairs = {((c.proto.x, c.proto.y), (c.target.x, c.target.y)) for c in best_buddies(fwd)}
        bwd_pairs = {((c.target.x, c.target.y), (c.proto.x, c.proto.y)) for c in best_buddies(bwd)}
        assert fwd_pairs == bwd_pairs

    def test_each_cell_at_most_once(self):
        rng = np.random.default_rng(44)
        a = random_unit_feature_map(rng, 8, (8, 8), (64, 64))
        b = random_unit_feature_map(rng, 8, (8, 8), (64, 64))
        corrs = best_buddies(similarity_volume(a, b))
        protos = [(c.proto.x, c.proto.y) for c in corrs]
        targets = [(c.target.x, c.target.y) for c in corrs]
        assert len(protos) == len(set(protos))
        assert len(targets) == len(set(targets))

    def test_constant_volume_degenerate_behavior(self):
        vol = SimilarityVolume(
            data=np.full((4, 4, 4, 4), 0.5, dtype=np.float32),
            proto_image_size=(32, 32),
            target_image_size=(32, 32),
        )
        corrs = best_buddies(vol)
        # documented degenerate case: H*W tie-broken self-pairs
        assert len(corrs) == 16
        for c in corrs:
            assert (c.proto.x, c.proto.y) == (c.target.x, c.target.y)


class TestFilterForeground:
    def _corrs(self):
        rng = np.random.default_rng(5)
        fm = random_unit_feature_map(rng, 8, (8, 8), (64, 64))
        return best_buddies(similarity_volume(fm, fm))

    def test_all_background_empty(self):
        corrs = self._corrs()
        white = np.full((64, 64), 255, dtype=np.uint8)
        assert filter_foreground(corrs, white, 128) == []

    def test_threshold_above_max_keeps_all(self):
        corrs = self._corrs()
        white = np.full((64, 64), 255, dtype=np.uint8)
        assert filter_foreground(corrs, white, 256) == corrs

    def test_half_black_keeps_exactly_dark_half(self):
        corrs = self._corrs()
        img = np.full((64, 64), 255, dtype=np.uint8)
        img[:, :32] = 0  # left half dark
        kept = filter_foreground(corrs, img, 128)
        expected = [c for c in corrs if c.proto.x < 32]
        assert kept == expected
        assert 0 < len(kept) < len(corrs)


def test_jsonable_dump_shape():
    rng = np.random.default_rng(9)
    fm = random_unit_feature_map(rng, 4, (3, 3), (24, 24))
    corrs = best_buddies(similarity_volume(fm, fm))
    dump = correspondences_to_jsonable(corrs)
    assert {"proto", "target", "score"} == set(dump[0])
    assert len(dump) == len(corrs)
