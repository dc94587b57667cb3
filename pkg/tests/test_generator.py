import numpy as np
import pytest
import torch

from bodyflow.errors import ConfigError
from bodyflow.generator import (
    FlowGenerator,
    GeneratorConfig,
    ablation_config,
    init_generator,
    predict_flow,
)
from bodyflow.priors import SkeletonMaps, StructureHeatmaps

TINY = dict(base_channels=8, depth=3, input_size=32)


def tiny_config(**kw):
    args = dict(TINY)
    args.update(kw)
    return GeneratorConfig(**args)


def tiny_inputs(batch=1, size=32, channels=15, seed=0):
    g = torch.Generator().manual_seed(seed)
    img = torch.rand(batch, 3, size, size, generator=g)
    skel = torch.rand(batch, 12, size, size, generator=g) if channels == 15 else None
    heat = torch.rand(batch, 5, size // 8, size // 8, generator=g)
    return img, skel, heat


class TestConfig:
    def test_defaults_match_contract(self):
        cfg = GeneratorConfig()
        assert cfg.input_channels == 15
        assert cfg.base_channels == 32
        assert cfg.depth == 4
        assert cfg.input_size == 256
        assert cfg.bottleneck_size == 16
        assert cfg.use_skip_connections

    def test_indivisible_input_size_rejected(self):
        with pytest.raises(ConfigError, match="divisible"):
            GeneratorConfig(input_size=100, depth=3)

    def test_bad_channel_count_rejected(self):
        with pytest.raises(ConfigError, match="input_channels"):
            GeneratorConfig(input_channels=7)

    def test_bad_attention_mode_rejected(self):
        with pytest.raises(ConfigError, match="attention_mode"):
            GeneratorConfig(attention_mode="transformer")

    def test_dict_roundtrip(self):
        cfg = tiny_config(attention_mode="none", input_channels=3)
        assert GeneratorConfig.from_dict(cfg.to_dict()) == cfg

    def test_ablation_presets(self):
        full = ablation_config("full", **TINY)
        wo_sp = ablation_config("wo_sp", **TINY)
        wo_aff = ablation_config("wo_aff", **TINY)
        assert (full.input_channels, full.attention_mode) == (15, "sasa")
        assert (wo_sp.input_channels, wo_sp.attention_mode) == (3, "self_attention_only")
        assert (wo_aff.input_channels, wo_aff.attention_mode) == (15, "self_attention_only")
        with pytest.raises(ConfigError, match="variant"):
            ablation_config("wo_everything")


class TestInit:
    def test_same_seed_bit_identical(self):
        a = init_generator(tiny_config(), seed=7)
        b = init_generator(tiny_config(), seed=7)
        for (na, pa), (nb, pb) in zip(a.state_dict().items(), b.state_dict().items()):
            assert na == nb and torch.equal(pa, pb)

    def test_different_seed_differs(self):
        a = init_generator(tiny_config(), seed=1)
        b = init_generator(tiny_config(), seed=2)
        assert any(
            not torch.equal(pa, pb)
            for pa, pb in zip(a.state_dict().values(), b.state_dict().values())
        )

    def test_fresh_generator_emits_zero_flow(self):
        model = init_generator(tiny_config(), seed=3)
        img, skel, heat = tiny_inputs()
        out = model(img, skel, heat)
        assert out.shape == (1, 2, 32, 32)
        assert torch.all(out == 0)

    def test_flow_head_zeroed(self):
        model = init_generator(tiny_config(), seed=4)
        assert torch.all(model.flow_head.weight == 0)
        assert torch.all(model.flow_head.bias == 0)

    def test_default_bottleneck_is_16(self):
        assert GeneratorConfig().bottleneck_size == 16
        assert tiny_config().bottleneck_size == 4


class TestForward:
    def test_output_shape_all_modes(self):
        for variant in ("full", "wo_sp", "wo_aff"):
            cfg = ablation_config(variant, **TINY)
            model = init_generator(cfg, seed=5)
            img, skel, heat = tiny_inputs(channels=cfg.input_channels)
            out = model(img, skel if cfg.wants_skeletons else None,
                        heat if cfg.wants_heatmaps else None)
            assert out.shape == (1, 2, 32, 32)

    def test_no_skip_variant_runs(self):
        cfg = tiny_config(use_skip_connections=False)
        model = init_generator(cfg, seed=5)
        img, skel, heat = tiny_inputs()
        assert model(img, skel, heat).shape == (1, 2, 32, 32)

    def test_missing_skeletons_rejected(self):
        model = init_generator(tiny_config(), seed=6)
        img, _, heat = tiny_inputs()
        with pytest.raises(ConfigError, match="skeleton"):
            model(img, None, heat)

    def test_missing_heatmaps_rejected(self):
        model = init_generator(tiny_config(), seed=6)
        img, skel, _ = tiny_inputs()
        with pytest.raises(ConfigError, match="heatmaps"):
            model(img, skel, None)

    def test_sasa_gamma_zero_equals_attention_none(self):
        # same seed: trunks are identical because attention is built last
        sasa = init_generator(tiny_config(attention_mode="sasa"), seed=8)
        none = init_generator(tiny_config(attention_mode="none"), seed=8)
        img, skel, heat = tiny_inputs(seed=9)
        assert torch.equal(sasa(img, skel, heat), none(img, skel))

    def test_self_attention_gamma_zero_equals_attention_none(self):
        attn = init_generator(tiny_config(attention_mode="self_attention_only"), seed=8)
        none = init_generator(tiny_config(attention_mode="none"), seed=8)
        img, skel, heat = tiny_inputs(seed=10)
        assert torch.equal(attn(img, skel, None), none(img, skel))

    def test_forward_deterministic(self):
        model = init_generator(tiny_config(), seed=11)
        with torch.no_grad():
            for p in model.parameters():
                p.add_(torch.randn_like(p) * 0.01)  # leave the zero head
        img, skel, heat = tiny_inputs(seed=12)
        a = model(img, skel, heat)
        b = model(img, skel, heat)
        assert torch.equal(a, b)

    def test_batch_independence(self):
        model = init_generator(tiny_config(), seed=13)
        with torch.no_grad():
            model.flow_head.weight.normal_(0, 0.1)
        img, skel, heat = tiny_inputs(batch=3, seed=14)
        full = model(img, skel, heat)
        one = model(img[1:2], skel[1:2], heat[1:2])
        assert torch.allclose(full[1:2], one, atol=1e-5)


class TestGradientFlow:
    def test_every_parameter_gets_gradient(self):
        for variant in ("full", "wo_sp", "wo_aff"):
            cfg = ablation_config(variant, **TINY)
            model = init_generator(cfg, seed=15)
            # un-zero the flow head so gradients reach every branch
            with torch.no_grad():
                model.flow_head.weight.normal_(0, 0.05)
                model.flow_head.bias.normal_(0, 0.05)
                if hasattr(model.attention, "gamma") and model.attention is not None:
                    model.attention.gamma.fill_(0.5)
            model.train(True)
            img, skel, heat = tiny_inputs(batch=2, channels=cfg.input_channels, seed=16)
            out = model(img, skel if cfg.wants_skeletons else None,
                        heat if cfg.wants_heatmaps else None)
            loss = (out ** 2).mean() + out.abs().mean()
            loss.backward()
            for name, p in model.named_parameters():
                assert p.grad is not None, f"{variant}: no grad for {name}"
                assert p.grad.abs().sum() > 0, f"{variant}: zero grad for {name}"


class TestPredictFlow:
    def test_numpy_roundtrip_shapes(self):
        model = init_generator(tiny_config(), seed=17)
        img = np.random.default_rng(0).random((3, 32, 32), dtype=np.float32)
        skel = SkeletonMaps(np.zeros((12, 32, 32), np.float32))
        heat = StructureHeatmaps(np.zeros((5, 4, 4), np.float32))
        flow = predict_flow(model, img, skel, heat)
        assert flow.resolution == (32, 32)
        assert np.all(flow.data == 0)

    def test_missing_heatmaps_rejected(self):
        model = init_generator(tiny_config(), seed=18)
        img = np.zeros((3, 32, 32), np.float32)
        skel = SkeletonMaps(np.zeros((12, 32, 32), np.float32))
        with pytest.raises(ConfigError, match="heatmaps"):
            predict_flow(model, img, skel, None)
