"""Structural and behavioral tests for the residual image classifier."""

import numpy as np
import pytest

from infraclass import ops
from infraclass.errors import ConfigError, ShapeError
from infraclass.resnet import ResNet2DConfig, SmallResNet, build_small_resnet
from infraclass.tensor import Tensor

from conftest import fd_gradcheck


def mini_cfg(**kw):
    base = dict(in_channels=2, n_classes=3, stage_widths=(2, 3),
                blocks_per_stage=1, input_size=(8, 8))
    base.update(kw)
    return ResNet2DConfig(**base)


class TestStructure:
    def test_default_parameter_count(self):
        model = build_small_resnet(seed=0)
        assert model.parameter_count() == 175128

    def test_stage_layout(self):
        model = build_small_resnet(seed=0)
        assert [len(blocks) for blocks in model.stages] == [2, 2, 2]
        strides = [blocks[0].conv1.stride for blocks in model.stages]
        assert strides == [1, 2, 2]

    def test_shortcuts_only_at_stage_boundaries(self):
        model = build_small_resnet(seed=0)
        has_short = [[b.short_conv is not None for b in blocks]
                     for blocks in model.stages]
        assert has_short == [[False, False], [True, False], [True, False]]

    def test_head_is_64_to_8(self):
        model = build_small_resnet(seed=0)
        assert model.head.weight.data.shape == (8, 64)

    def test_five_parameter_groups(self):
        model = build_small_resnet(seed=0)
        groups = model.parameter_groups()
        assert [g.label for g in groups] == ["stem", "stage0", "stage1",
                                             "stage2", "head"]
        named = [n for g in groups for n, _ in g.named]
        assert len(named) == len(set(named))
        assert len(named) == len(list(model.named_parameters()))

    def test_bad_config_rejected(self):
        with pytest.raises(ConfigError):
            ResNet2DConfig(stage_widths=()).validate()
        with pytest.raises(ConfigError):
            ResNet2DConfig(input_size=(3, 94)).validate()


class TestForward:
    def test_output_shape_and_downsampling(self):
        model = build_small_resnet(seed=1)
        x = Tensor(np.random.default_rng(0)
                   .standard_normal((2, 3, 94, 94)).astype(np.float32))
        out = model.forward(x, mode="eval")
        assert out.data.shape == (2, 8)

    def test_spatial_extents_halve_per_stage(self):
        """94 -> 47 -> 24 with ceil division at each stride-2 block."""
        model = build_small_resnet(seed=1)
        x = Tensor(np.random.default_rng(1)
                   .standard_normal((1, 3, 94, 94)).astype(np.float32))
        out = model.stem_conv.forward(x)
        assert out.data.shape[2:] == (94, 94)
        s2 = model.stages[1][0].conv1.forward(
            Tensor(np.zeros((1, 16, 94, 94), dtype=np.float32)))
        assert s2.data.shape[2:] == (47, 47)
        s3 = model.stages[2][0].conv1.forward(
            Tensor(np.zeros((1, 32, 47, 47), dtype=np.float32)))
        assert s3.data.shape[2:] == (24, 24)

    def test_wrong_image_size_rejected(self):
        model = build_small_resnet(seed=1)
        with pytest.raises(ShapeError):
            model.forward(Tensor(np.zeros((1, 3, 93, 94))), mode="eval")

    def test_same_seed_same_init(self):
        a = build_small_resnet(mini_cfg(), seed=4)
        b = build_small_resnet(mini_cfg(), seed=4)
        for (_, pa), (_, pb) in zip(a.named_parameters(),
                                    b.named_parameters()):
            assert np.array_equal(pa.data, pb.data)

    def test_eval_mode_deterministic(self):
        model = build_small_resnet(mini_cfg(), seed=2)
        x = Tensor(np.random.default_rng(2).standard_normal((2, 2, 8, 8)))
        a = model.forward(x, mode="eval").data.copy()
        b = model.forward(x, mode="eval").data.copy()
        assert np.array_equal(a, b)


class TestGradients:
    def test_miniature_end_to_end(self):
        model = SmallResNet(mini_cfg(), seed=3, dtype=np.float64)
        rng = np.random.default_rng(3)
        x = Tensor(rng.standard_normal((2, 2, 8, 8)))
        labels = np.array([0, 2])
        params = [p for g in model.parameter_groups() for _, p in g.named]

        def loss(tape):
            logits = model.forward(x, mode="train", tape=tape)
            value, _ = ops.softmax_cross_entropy(logits, labels, tape=tape)
            return value

        fd_gradcheck(loss, params, max_checks=6)


class TestStateDict:
    def test_roundtrip_through_copy(self):
        a = build_small_resnet(mini_cfg(), seed=5)
        b = build_small_resnet(mini_cfg(), seed=6)
        b.load_state_dict(a.copy_state())
        x = Tensor(np.random.default_rng(4).standard_normal((2, 2, 8, 8)))
        assert np.array_equal(a.forward(x, mode="eval").data,
                              b.forward(x, mode="eval").data)
