import _reference as ref
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ecgvit import tensor as T
from ecgvit.gradcheck import randomize_params
from ecgvit.models import SwinConfig, init_model, preset_config, swin_forward
from ecgvit.models.layers import mhsa
from ecgvit.models.swin import (
    MASK_VALUE,
    cyclic_shift,
    patch_merging,
    region_ids,
    shift_attention_mask,
    swin_block,
    window_partition,
    window_reverse,
)
from ecgvit.tensor import ShapeError, Tensor

maps = st.tuples(st.integers(1, 4), st.integers(1, 4), st.integers(1, 4), st.integers(1, 3)).flatmap(
    lambda t: st.tuples(
        arrays(np.float64, (t[0] * t[3], t[1] * t[3], t[2]), elements=st.floats(-1e6, 1e6)),
        st.just(t[3]),
    )
)


def random_point(cfg, seed=0):
    params = init_model(cfg, seed=seed)
    randomize_params(params, np.random.default_rng(seed))
    return params


class TestWindows:
    def test_count(self):
        assert window_partition(Tensor(np.zeros((8, 8, 3))), 4).shape == (4, 16, 3)

    def test_single_window_is_flattened_map(self):
        x = np.random.default_rng(0).normal(size=(4, 4, 2))
        np.testing.assert_array_equal(window_partition(Tensor(x), 4).data[0], x.reshape(16, 2))

    def test_raster_windows_against_loop(self):
        x = np.arange(12 * 8 * 2, dtype=float).reshape(12, 8, 2)
        got = window_partition(Tensor(x), 4).data
        k = 0
        for wr in range(3):
            for wc in range(2):
                expected = [x[wr * 4 + a, wc * 4 + b] for a in range(4) for b in range(4)]
                np.testing.assert_array_equal(got[k], expected)
                k += 1

    def test_round_trip_12x8(self):
        x = np.random.default_rng(1).normal(size=(12, 8, 5))
        out = window_reverse(window_partition(Tensor(x), 4), 4, 12, 8).data
        assert out.tobytes() == x.tobytes()

    @given(maps)
    def test_round_trip_property(self, case):
        x, m = case
        h, w, _ = x.shape
        assert window_reverse(window_partition(Tensor(x), m), m, h, w).data.tobytes() == x.tobytes()

    def test_indivisible(self):
        with pytest.raises(ShapeError):
            window_partition(Tensor(np.zeros((6, 8, 1))), 4)


class TestCyclicShift:
    def test_zero_is_identity(self):
        x = Tensor(np.random.default_rng(0).normal(size=(4, 4, 2)))
        assert cyclic_shift(x, 0) is x

    def test_index_rule(self):
        grid = np.arange(16, dtype=float).reshape(4, 4, 1)
        out = cyclic_shift(Tensor(grid), 2).data
        assert out[2, 2, 0] == grid[0, 0, 0]
        for i in range(4):
            for j in range(4):
                assert out[(i - 2) % 4, (j - 2) % 4, 0] == grid[i, j, 0]

    @given(maps, st.integers(0, 11))
    def test_inverse(self, case, s):
        x, _ = case
        s = s % min(x.shape[:2])
        assert cyclic_shift(cyclic_shift(Tensor(x), s), -s).data.tobytes() == x.tobytes()


class TestShiftMask:
    def test_region_table_4_2_1(self):
        expected = np.array([[0, 0, 1, 2], [0, 0, 1, 2], [3, 3, 4, 5], [6, 6, 7, 8]])
        np.testing.assert_array_equal(region_ids(4, 4, 2, 1), expected)

    def test_masked_pair_counts_4_2_1(self):
        mask = shift_attention_mask(4, 4, 2, 1)
        # ordered masked pairs per window, from the table above
        assert [(mask[w] != 0).sum() for w in range(4)] == [0, 8, 8, 12]

    @pytest.mark.parametrize("h, m, s", [(4, 2, 1), (8, 4, 2), (8, 4, 1), (8, 4, 3), (12, 4, 2), (16, 8, 4)])
    def test_matches_wraparound_oracle(self, h, m, s):
        mask = shift_attention_mask(h, h, m, s)
        allowed = ref.wrap_allowed(h, h, m, s)
        np.testing.assert_array_equal(mask == 0, allowed)
        assert set(np.unique(mask)) <= {0.0, MASK_VALUE}

    def test_rectangular(self):
        np.testing.assert_array_equal(shift_attention_mask(8, 12, 4, 2) == 0, ref.wrap_allowed(8, 12, 4, 2))

    def test_interior_windows_unmasked(self):
        mask = shift_attention_mask(12, 12, 4, 2)
        interior = [r * 3 + c for r in range(2) for c in range(2)]
        assert not mask[interior].any()

    @pytest.mark.parametrize("h, m, s", [(4, 2, 1), (8, 4, 2), (12, 4, 3)])
    def test_symmetric(self, h, m, s):
        mask = shift_attention_mask(h, h, m, s)
        np.testing.assert_array_equal(mask, mask.transpose(0, 2, 1))

    @pytest.mark.parametrize("s", [0, 4, 5])
    def test_shift_range(self, s):
        with pytest.raises(ValueError):
            shift_attention_mask(8, 8, 4, s)

    @pytest.mark.parametrize("h, m, s", [(4, 2, 1), (8, 4, 2)])
    def test_masked_weights_vanish(self, h, m, s):
        rng = np.random.default_rng(0)
        d, heads = 4, 2
        p = {f"a.{n}.weight": Tensor(rng.normal(size=(d, d)) * 3) for n in ("q", "k", "v", "proj")}
        mask = shift_attention_mask(h, h, m, s)
        x = window_partition(Tensor(rng.normal(size=(h, h, d))), m)
        _, attn = mhsa(x, p, "a", heads, mask[:, None], return_attn=True)
        blocked = np.broadcast_to((mask != 0)[:, None], attn.shape)
        assert blocked.any()
        assert attn.data[blocked].max() < 1e-40
        np.testing.assert_allclose(attn.data.sum(-1), 1.0, atol=1e-12)


class TestPatchMerging:
    def params(self, d, rng):
        return {
            "m.norm.weight": Tensor(rng.normal(size=4 * d)),
            "m.norm.bias": Tensor(rng.normal(size=4 * d)),
            "m.reduction.weight": Tensor(rng.normal(size=(4 * d, 2 * d))),
        }

    def test_shape(self):
        p = self.params(8, np.random.default_rng(0))
        assert patch_merging(Tensor(np.zeros((4, 4, 8))), p, "m").shape == (2, 2, 16)

    def test_gather_oracle(self):
        rng = np.random.default_rng(1)
        d = 3
        x = rng.normal(size=(2, 6, 4, d))
        p = self.params(d, rng)
        got = patch_merging(Tensor(x), p, "m").data
        for b in range(2):
            for i in range(3):
                for j in range(2):
                    cat = np.concatenate([x[b, 2 * i, 2 * j], x[b, 2 * i + 1, 2 * j], x[b, 2 * i, 2 * j + 1], x[b, 2 * i + 1, 2 * j + 1]])
                    z = ref.ln(cat, p["m.norm.weight"].data, p["m.norm.bias"].data, 1e-5) @ p["m.reduction.weight"].data
                    np.testing.assert_allclose(got[b, i, j], z, rtol=1e-12, atol=1e-12)

    def test_constant_input(self):
        d = 2
        p = {
            "m.norm.weight": Tensor(np.zeros(4 * d)),
            "m.norm.bias": Tensor(np.full(4 * d, 0.5)),
            "m.reduction.weight": Tensor(np.vstack([np.eye(2 * d), np.eye(2 * d)]) / 2),
        }
        out = patch_merging(Tensor(np.full((4, 4, d), 3.0)), p, "m").data
        np.testing.assert_array_equal(out, np.full((2, 2, 2 * d), 0.5))

    def test_odd(self):
        with pytest.raises(ShapeError):
            patch_merging(Tensor(np.zeros((3, 4, 2))), self.params(2, np.random.default_rng(0)), "m")


class TestSwinBlock:
    @pytest.mark.parametrize("shift", [0, 1, 2])
    def test_matches_reference(self, shift):
        cfg = SwinConfig(image_side=32, patch_side=4, embed_dim=8, depths=(2,), heads=(2,), window=4)
        params = random_point(cfg, seed=shift)
        x = np.random.default_rng(9).normal(size=(8, 8, 8))
        got = swin_block(Tensor(x[None]), params, "stages.0.blocks.0", 2, 4, shift).data[0]
        expected = ref.swin_block(x, {k: v.data for k, v in params.items()}, "stages.0.blocks.0", 2, 4, shift, 1e-5)
        np.testing.assert_allclose(got, expected, rtol=1e-10, atol=1e-12)


class TestSwinForward:
    cfg = preset_config("swin", "tiny")

    def test_four_logits(self):
        assert swin_forward(np.zeros((2, 64, 64)), self.cfg, init_model(self.cfg)).shape == (2, 4)

    def test_geometry(self):
        assert self.cfg.stage_sides == [16, 8]
        assert self.cfg.stage_dims == [32, 64]
        assert [self.cfg.block_shift(0, j) for j in range(2)] == [0, 2]
        assert [self.cfg.block_shift(1, j) for j in range(2)] == [0, 2]

    def test_no_shift_when_window_covers_map(self):
        cfg = preset_config("swin", "gradcheck")
        assert cfg.stage_sides == [8, 4] and cfg.stage_window(1) == 4 and cfg.block_shift(1, 1) == 0

    def test_zero_shift_equals_plain_windows(self):
        cfg0 = SwinConfig(image_side=32, patch_side=4, embed_dim=8, depths=(2, 2), heads=(2, 2), window=4, shift=0)
        params = random_point(cfg0, seed=2)
        x = np.random.default_rng(3).uniform(size=(2, 32, 32))
        shifted = SwinConfig(image_side=32, patch_side=4, embed_dim=8, depths=(2, 2), heads=(2, 2), window=4)
        # manual forward with every block unshifted
        from ecgvit.models import swin as S
        from ecgvit.models.layers import dense, layer_norm, patch_embed

        h = layer_norm(patch_embed(x, 4, params["patch_embed.weight"], params["patch_embed.bias"]), params, "patch_norm", 1e-5)
        h = T.reshape(h, (2, 8, 8, 8))
        for i in range(2):
            for j in range(2):
                h = S.swin_block(h, params, f"stages.{i}.blocks.{j}", 2, cfg0.stage_window(i), 0)
            if i == 0:
                h = S.patch_merging(h, params, "stages.0.merge")
        h = layer_norm(h, params, "norm", 1e-5)
        manual = dense(T.mean(T.reshape(h, (2, 16, 16)), axis=1), params, "head").data
        np.testing.assert_array_equal(swin_forward(x, cfg0, params).data, manual)
        assert not np.allclose(swin_forward(x, shifted, params).data, manual)

    def test_invalid_geometry(self):
        with pytest.raises(ValueError):
            SwinConfig(image_side=64, patch_side=4, window=5)
        with pytest.raises(ValueError):
            SwinConfig(window=4, shift=4)

    @settings(max_examples=3, deadline=None)
    @given(st.integers(0, 100))
    def test_shifted_stack_gradients(self, seed):
        cfg = SwinConfig(image_side=32, patch_side=4, embed_dim=8, depths=(2,), heads=(2,), window=4, mlp_ratio=1.0)
        params = random_point(cfg, seed)
        rng = np.random.default_rng(seed)
        images, labels = rng.uniform(-1, 1, (2, 32, 32)), rng.integers(0, 4, 2)
        report = T.check_gradients(lambda: T.cross_entropy(swin_forward(images, cfg, params), labels), params,
                                   max_coords=4, seed=seed)
        assert report.passed, str(report)


class TestFlops:
    def test_linear_in_tokens(self):
        counts = {}
        for side in (32, 64, 128):
            cfg = SwinConfig(image_side=side, patch_side=4, embed_dim=16, depths=(1, 1), heads=(2, 2), window=4)
            params = init_model(cfg)
            with T.no_grad(), T.count_flops() as flops:
                swin_forward(np.zeros((1, side, side)), cfg, params)
            counts[side] = flops[0] / (side // 4) ** 2
        base = counts[64]
        for side, per_token in counts.items():
            assert abs(per_token / base - 1) < 0.10, counts

    def test_counter_counts_matmul(self):
        with T.count_flops() as flops:
            T.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 4))))
        assert flops[0] == 2 * 2 * 3 * 4
