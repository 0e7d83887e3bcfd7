import numpy as np
import pytest
import torch
import torch.nn.functional as F

from defilter.errors import (
    ConfigError,
    InvalidArgument,
    ShapeError,
    UncheckedModelWarning,
)
from defilter.inpaint import (
    Discriminator,
    DiscriminatorConfig,
    GatedConv2d,
    Generator,
    GeneratorConfig,
    PerceptualNet,
    composite_np,
    discriminator_loss,
    generate,
    generator_loss,
    huber,
    perceptual_loss,
    reconstruction_loss,
    ssim_mean,
)
from defilter.masks import OcclusionMask
from defilter.schedules import LossWeights


class TestGatedConv:
    def test_output_is_activation_times_gate(self):
        torch.manual_seed(0)
        layer = GatedConv2d(2, 3, 3)
        x = torch.randn(1, 2, 8, 8)
        with torch.no_grad():
            y = layer(x)
            expect = F.leaky_relu(layer.conv_feat(x), 0.2) \
                * torch.sigmoid(layer.conv_gate(x))
        assert torch.allclose(y, expect, atol=1e-7)

    def test_stride_halves_resolution(self):
        layer = GatedConv2d(2, 2, 3, stride=2)
        assert layer(torch.randn(1, 2, 16, 16)).shape == (1, 2, 8, 8)

    def test_dilation_preserves_resolution(self):
        layer = GatedConv2d(2, 2, 3, dilation=8)
        assert layer(torch.randn(1, 2, 32, 32)).shape == (1, 2, 32, 32)

    def test_channel_mismatch_rejected(self):
        layer = GatedConv2d(4, 4, 3)
        with pytest.raises(ShapeError):
            layer(torch.randn(1, 3, 8, 8))


class TestGenerator:
    def test_two_stages_same_shape_and_range(self):
        torch.manual_seed(0)
        gen = Generator(GeneratorConfig(base_channels=4))
        img = torch.rand(1, 3, 32, 32) * 2 - 1
        mask = torch.zeros(1, 1, 32, 32)
        mask[..., 8:24, 8:24] = 1.0
        with torch.no_grad():
            coarse, refined = gen(img, mask)
        for out in (coarse, refined):
            assert out.shape == img.shape
            assert float(out.min()) >= -1.0
            assert float(out.max()) <= 1.0

    def test_input_channels_fixed_at_four(self):
        with pytest.raises(ConfigError):
            GeneratorConfig(input_channels=5)

    def test_layer_plan_counts(self):
        kinds = GeneratorConfig(base_channels=4).layer_kinds()
        for stage in ("coarse", "refine"):
            assert kinds[stage].count("dilated_gated") == 4
            assert kinds[stage].count("gated") == 10
            assert kinds[stage][-1] == "normal"


class TestDiscriminator:
    def test_256_input_gives_4x4_map(self):
        torch.manual_seed(0)
        d = Discriminator(DiscriminatorConfig(base_channels=4))
        out = d(torch.randn(1, 4, 256, 256))
        assert out.shape[2:] == (4, 4)

    def test_config_is_fixed_shape(self):
        with pytest.raises(ConfigError):
            DiscriminatorConfig(layers=5)


class TestHuber:
    @pytest.mark.parametrize("e,expect", [
        (0.5, 0.125),
        (1.0, 0.5),
        (2.0, 1.5),
    ])
    def test_known_values(self, e, expect):
        assert float(huber(torch.tensor([e]))) == pytest.approx(expect, abs=1e-7)

    def test_symmetry(self):
        assert float(huber(torch.tensor([-2.0]))) == pytest.approx(1.5, abs=1e-7)


class TestSsim:
    def test_identical_is_one(self):
        x = torch.rand(1, 3, 16, 16) * 2 - 1
        assert float(ssim_mean(x, x)) == pytest.approx(1.0, abs=1e-6)

    def test_window_shrinks_for_small_input(self):
        x = torch.rand(1, 3, 4, 4)
        assert float(ssim_mean(x, x)) == pytest.approx(1.0, abs=1e-6)

    def test_reconstruction_loss_zero_for_perfect(self):
        x = torch.rand(1, 3, 16, 16) * 2 - 1
        assert float(reconstruction_loss(x, x)) == pytest.approx(0.0, abs=1e-6)


class TestGeneratorLoss:
    def _parts(self, seed=0):
        torch.manual_seed(seed)
        coarse = (torch.rand(1, 3, 16, 16) * 2 - 1).double()
        refined = (torch.rand(1, 3, 16, 16) * 2 - 1).double()
        target = (torch.rand(1, 3, 16, 16) * 2 - 1).double()
        disc_out = torch.randn(1, 128, 4, 4).double()
        net = PerceptualNet().double()
        feats = (net(refined), net(target))
        return coarse, refined, target, disc_out, feats

    def test_total_is_weighted_sum_of_components(self):
        coarse, refined, target, disc_out, feats = self._parts()
        w = LossWeights()
        total, comp = generator_loss(coarse, refined, target, disc_out, feats, w)
        expect = (w.rc_coarse * comp["rc_coarse"]
                  + w.rc_refined * comp["rc_refined"]
                  + w.perc * comp["perc"]
                  + w.adv * comp["adv"])
        assert float(total) == pytest.approx(float(expect), rel=1e-6)

    def test_linear_in_each_weight(self):
        coarse, refined, target, disc_out, feats = self._parts(3)
        base = LossWeights()
        t0, comp = generator_loss(coarse, refined, target, disc_out, feats, base)
        bumped = LossWeights(rc_coarse=base.rc_coarse + 1.0)
        t1, _ = generator_loss(coarse, refined, target, disc_out, feats, bumped)
        assert float(t1 - t0) == pytest.approx(float(comp["rc_coarse"]), rel=1e-6)

    def test_default_weights(self):
        w = LossWeights()
        assert (w.rc_coarse, w.rc_refined, w.perc, w.adv) == (30.0, 70.0, 50.0, 0.7)

    def test_missing_component_rejected(self):
        coarse, refined, target, disc_out, feats = self._parts()
        with pytest.raises(InvalidArgument):
            generator_loss(coarse, refined, target, None, feats)


class TestDiscriminatorLoss:
    def test_hand_arithmetic(self):
        real = torch.full((1, 1, 2, 2), 0.5)
        fake = torch.full((1, 1, 2, 2), 0.5)
        # 0.5 * (MSE(0.5, 0) + MSE(0.5, 1)) = 0.5 * (0.25 + 0.25)
        assert float(discriminator_loss(real, fake)) == pytest.approx(0.25)

    def test_perfect_split_is_zero(self):
        real = torch.ones(1, 1, 2, 2)
        fake = torch.zeros(1, 1, 2, 2)
        assert float(discriminator_loss(real, fake)) == pytest.approx(0.0)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            discriminator_loss(torch.zeros(1, 1, 2, 2), torch.zeros(1, 1, 4, 4))


class TestPerceptual:
    def test_three_taps_with_expected_widths(self):
        net = PerceptualNet()
        feats = net(torch.randn(1, 3, 64, 64))
        assert [f.shape[1] for f in feats] == [32, 64, 128]

    def test_weights_deterministic(self):
        a, b = PerceptualNet(), PerceptualNet()
        for p, q in zip(a.parameters(), b.parameters()):
            assert torch.equal(p, q)

    def test_frozen(self):
        net = PerceptualNet()
        assert all(not p.requires_grad for p in net.parameters())

    def test_pretrained_backbones_refused(self):
        with pytest.raises(ConfigError):
            PerceptualNet(backbone="vgg16")

    def test_identical_features_zero_loss(self):
        net = PerceptualNet()
        x = torch.randn(1, 3, 32, 32)
        feats = net(x)
        assert float(perceptual_loss(feats, feats)) == 0.0


class TestNumpySide:
    def test_composite_carries_pixels_exactly(self):
        rng = np.random.default_rng(0)
        gen_img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        img = rng.integers(0, 256, (8, 8, 3), dtype=np.uint8)
        mask = np.zeros((8, 8), np.uint8)
        mask[2:5, 2:5] = 1
        out = composite_np(gen_img, img, mask)
        assert np.array_equal(out[mask == 1], gen_img[mask == 1])
        assert np.array_equal(out[mask == 0], img[mask == 0])

    def test_generate_warns_when_untrained(self):
        gen = Generator(GeneratorConfig(base_channels=4))
        img = np.zeros((32, 32, 3), np.uint8)
        mask = OcclusionMask(np.zeros((32, 32), np.uint8))
        with pytest.warns(UncheckedModelWarning):
            generate(gen, img, mask)

    def test_generate_rejects_mismatched_mask(self):
        gen = Generator(GeneratorConfig(base_channels=4))
        img = np.zeros((32, 32, 3), np.uint8)
        mask = OcclusionMask(np.zeros((16, 16), np.uint8))
        with pytest.raises(ShapeError):
            generate(gen, img, mask)

    def test_generate_rejects_indivisible_sides(self):
        gen = Generator(GeneratorConfig(base_channels=4))
        img = np.zeros((30, 30, 3), np.uint8)
        mask = OcclusionMask(np.zeros((30, 30), np.uint8))
        with pytest.raises(ShapeError):
            generate(gen, img, mask)
