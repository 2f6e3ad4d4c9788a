"""Tests for generator/discriminator construction, initialization and checkpoints."""

import numpy as np
import pytest

from cyclegan_lesion_seg.autodiff import Tape, Tensor, tensor_sum
from cyclegan_lesion_seg.autodiff.gradcheck import gradcheck
from cyclegan_lesion_seg.nets import (
    build_discriminator,
    build_generator,
    init_generator,
    init_weights,
    load_network,
    output_side,
    receptive_field,
    receptive_field_bounds,
    save_network,
)
from cyclegan_lesion_seg.shared.errors import MalformedHeaderError, ShapeMismatchError
from cyclegan_lesion_seg.shared.schemas import DiscriminatorConfig, GeneratorConfig


class TestGenerator:
    """Test the U-net generator."""

    def test_default_channels(self):
        """Test the eight-stage channel progression."""
        assert GeneratorConfig().channels == [64, 128, 256, 512, 512, 512, 512, 512]

    def test_shape_preserving(self, tiny_nets_config):
        """Test N x 1 x S x S maps to N x 1 x S x S within [-1, 1]."""
        net = init_weights(build_generator(tiny_nets_config.generator), seed=0, std=0.5)
        x = Tensor(np.random.default_rng(0).uniform(-1, 1, size=(2, 1, 8, 8)))
        out = net(x)
        assert out.shape == (2, 1, 8, 8)
        assert np.all(np.abs(out.data) <= 1.0)

    def test_encoder_sides(self, tiny_nets_config):
        """Test the bottleneck is 1x1."""
        net = build_generator(tiny_nets_config.generator)
        assert net.encoder_sides() == [4, 2, 1]
        feats = net.encode(Tensor(np.zeros((1, 1, 8, 8))))
        assert [f.shape for f in feats] == [(1, 2, 4, 4), (1, 4, 2, 2), (1, 4, 1, 1)]

    def test_innermost_stage_has_no_norm(self, tiny_nets_config):
        """Test instance norm is skipped where the map is 1x1."""
        net = build_generator(tiny_nets_config.generator)
        assert "enc2.norm" not in net.layers
        assert "enc1.norm" in net.layers

    def test_wrong_input_side(self, tiny_nets_config):
        """Test inputs of another size are rejected."""
        net = build_generator(tiny_nets_config.generator)
        with pytest.raises(ShapeMismatchError):
            net(Tensor(np.zeros((1, 1, 16, 16))))

    def test_gradcheck_through_generator(self, tiny_nets_config):
        """Test input gradients of the whole generator in double precision."""
        net = init_weights(build_generator(tiny_nets_config.generator), seed=1, std=0.3)
        net.astype(np.float64)
        readout = Tensor(np.random.default_rng(2).normal(size=(1, 1, 8, 8)))
        x = Tensor(np.random.default_rng(3).uniform(-1, 1, size=(1, 1, 8, 8)))
        assert gradcheck(lambda t: tensor_sum(net(t) * readout), x, h=1e-6) < 1e-3

    @pytest.mark.slow
    @pytest.mark.parametrize("stages, side", [(8, 256), (6, 64)])
    def test_full_and_phantom_scale_shapes(self, stages, side):
        """Test both shipped generator geometries keep the image size."""
        cfg = GeneratorConfig(stages=stages, input_side=side, base_channels=16 if stages == 6 else 64,
                              max_channels=128 if stages == 6 else 512)
        net = init_weights(build_generator(cfg), seed=0)
        assert net.encoder_sides()[-1] == 1
        x = Tensor(np.random.default_rng(1).uniform(-1, 1, size=(1, 1, side, side)).astype(np.float32))
        out = net(x)
        assert out.shape == (1, 1, side, side)
        assert np.all(np.isfinite(out.data)) and np.all(np.abs(out.data) <= 1.0)

    def test_finite_outputs_across_seeds(self, tiny_nets_config):
        """Test both networks give finite outputs for 100 seeded inits and inputs."""
        gen = build_generator(tiny_nets_config.generator)
        disc = build_discriminator(tiny_nets_config.discriminator)
        for seed in range(100):
            rng = np.random.default_rng(seed)
            init_weights(gen, seed=seed, std=0.5)
            init_weights(disc, seed=seed + 1000, std=0.5)
            x = Tensor(rng.uniform(-1, 1, size=(2, 1, 8, 8)).astype(np.float32))
            fake = gen(x)
            assert np.all(np.isfinite(fake.data)), seed
            assert np.all(np.isfinite(disc(fake).data)), seed


class TestResidualGenerator:
    """Test the generator variant that learns a correction to its input."""

    @pytest.fixture
    def residual_config(self, tiny_nets_config):
        return tiny_nets_config.generator.model_copy(update={"residual_output": True})

    def test_identity_at_init(self, residual_config):
        """Test a freshly initialized residual generator returns its input."""
        net = init_generator(residual_config, seed=4)
        assert not any(p.data.any() for p in net.layers["out.conv"].params.values())
        x = np.random.default_rng(0).uniform(-0.95, 0.95, size=(2, 1, 8, 8)).astype(np.float32)
        np.testing.assert_allclose(net(Tensor(x)).data, x, atol=1e-5)

    def test_zero_background_stays_zero(self, residual_config):
        """Test an all-zero slice maps to zero at init."""
        net = init_generator(residual_config, seed=5)
        assert not net(Tensor(np.zeros((1, 1, 8, 8), dtype=np.float32))).data.any()

    def test_plain_generator_is_not_zeroed(self, tiny_nets_config):
        """Test init_generator leaves the output conv of a plain generator Gaussian."""
        net = init_generator(tiny_nets_config.generator, seed=4)
        assert net.layers["out.conv"].params["weight"].data.any()

    def test_trained_correction_stays_in_range(self, residual_config):
        """Test outputs stay within [-1, 1] for saturated inputs and large weights."""
        net = init_weights(build_generator(residual_config), seed=2, std=0.5)
        x = np.random.default_rng(1).choice([-1.0, 1.0], size=(1, 1, 8, 8)).astype(np.float32)
        out = net(Tensor(x)).data
        assert np.all(np.isfinite(out)) and np.all(np.abs(out) <= 1.0)

    def test_gradcheck(self, residual_config):
        """Test input gradients through the residual path in double precision."""
        net = init_weights(build_generator(residual_config), seed=1, std=0.3).astype(np.float64)
        readout = Tensor(np.random.default_rng(2).normal(size=(1, 1, 8, 8)))
        x = Tensor(np.random.default_rng(3).uniform(-0.9, 0.9, size=(1, 1, 8, 8)))
        assert gradcheck(lambda t: tensor_sum(net(t) * readout), x, h=1e-6) < 1e-3

    def test_channel_mismatch_rejected(self):
        """Test the residual path needs as many output as input channels."""
        with pytest.raises(ValueError, match="residual_output"):
            GeneratorConfig(stages=3, input_side=8, in_channels=2, residual_output=True)


class TestDiscriminator:
    """Test the patch discriminator and its receptive field."""

    def test_default_receptive_field(self):
        """Test the five-layer default sees 70 x 70 patches."""
        cfg = DiscriminatorConfig()
        assert receptive_field(cfg) == 70
        assert output_side(cfg, 256) == 30
        assert output_side(cfg, 70) == 6

    def test_forward_shape(self, tiny_nets_config):
        """Test the score map has the predicted side and one channel."""
        cfg = tiny_nets_config.discriminator
        net = init_weights(build_discriminator(cfg), seed=0)
        out = net(Tensor(np.zeros((2, 1, 8, 8))))
        assert out.shape == (2, 1, output_side(cfg, 8), output_side(cfg, 8))

    def test_norm_layers(self, tiny_nets_config):
        """Test instance norm follows exactly the configured layers."""
        net = build_discriminator(tiny_nets_config.discriminator)
        assert [n for n in net.layers if n.endswith(".norm")] == ["layer2.norm"]

    def test_receptive_field_bounds_match_gradients(self):
        """Test the input span with nonzero gradient equals the computed bounds."""
        cfg = DiscriminatorConfig(
            layers=3, kernel=3, strides=[2, 2, 1], channels=[2, 2, 1], norm_layers=[],
            receptive_field_target=None,
        )
        net = init_weights(build_discriminator(cfg), seed=4, std=0.5).astype(np.float64)
        side = 24
        pos = output_side(cfg, side) // 2
        x = Tensor(np.random.default_rng(5).normal(size=(1, 1, side, side)), requires_grad=True)
        with Tape() as tape:
            out = net(x)
            mask = np.zeros(out.shape)
            mask[0, 0, pos, pos] = 1.0
            loss = tensor_sum(out * Tensor(mask))
        tape.backward(loss)

        rows = np.nonzero(np.abs(x.grad[0, 0]).sum(axis=1))[0]
        start, stop = receptive_field_bounds(cfg, pos)
        assert stop - start == receptive_field(cfg) == 15
        assert rows.min() >= start and rows.max() < stop
        assert rows.min() == max(start, 0) and rows.max() == min(stop, side) - 1


class TestInitialization:
    """Test seeded Gaussian initialization."""

    def test_same_seed_same_parameters(self, tiny_nets_config):
        """Test bit-identical parameters for equal seeds."""
        a = init_weights(build_generator(tiny_nets_config.generator), seed=9)
        b = init_weights(build_generator(tiny_nets_config.generator), seed=9)
        c = init_weights(build_generator(tiny_nets_config.generator), seed=10)
        for (name, pa), (_, pb), (_, pc) in zip(a.named_parameters(), b.named_parameters(), c.named_parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)
            if name.endswith("weight"):
                assert not np.array_equal(pa.data, pc.data)

    def test_parameter_kinds(self, tiny_nets_config):
        """Test zero biases and betas, unit gammas, small weights."""
        net = init_weights(build_generator(tiny_nets_config.generator), seed=0, std=0.02)
        for name, p in net.named_parameters():
            kind = name.rsplit(".", 1)[-1]
            if kind in ("bias", "beta"):
                assert not p.data.any()
            elif kind == "gamma":
                assert np.all(p.data == 1.0)
            else:
                assert np.abs(p.data).max() < 0.2

    def test_invalid_std(self, tiny_nets_config):
        """Test a non-positive std is rejected."""
        with pytest.raises(ValueError):
            init_weights(build_generator(tiny_nets_config.generator), std=0.0)

    def test_weight_statistics(self):
        """Test 10^5 weight draws have mean 0 and std 0.02 within sampling error."""
        cfg = GeneratorConfig(stages=6, input_side=64, base_channels=16, max_channels=128)
        net = init_weights(build_generator(cfg), seed=0, std=0.02)
        draws = np.concatenate([
            p.data.ravel() for name, p in net.named_parameters() if name.endswith("weight")
        ]).astype(np.float64)
        assert draws.size >= 100_000
        draws = draws[:100_000]
        assert abs(draws.mean()) < 4 * 0.02 / np.sqrt(draws.size)
        assert 0.018 <= draws.std() <= 0.022


class TestCheckpoint:
    """Test network save/load."""

    def test_round_trip(self, tiny_nets_config, temp_dir):
        """Test a saved generator reloads with identical parameters and outputs."""
        net = init_weights(build_generator(tiny_nets_config.generator), seed=3, std=0.3)
        save_network(net, temp_dir / "generator_xy")
        assert (temp_dir / "generator_xy.json").exists() and (temp_dir / "generator_xy.bin").exists()

        back = load_network(temp_dir / "generator_xy", tiny_nets_config.generator)
        for (n1, p1), (n2, p2) in zip(net.named_parameters(), back.named_parameters()):
            assert n1 == n2
            np.testing.assert_array_equal(p1.data, p2.data)
        x = Tensor(np.random.default_rng(0).uniform(-1, 1, size=(1, 1, 8, 8)))
        np.testing.assert_array_equal(net(x).data, back(x).data)

    def test_discriminator_round_trip(self, tiny_nets_config, temp_dir):
        """Test discriminators rebuild from their config echo."""
        net = init_weights(build_discriminator(tiny_nets_config.discriminator), seed=1)
        back = load_network(save_network(net, temp_dir / "disc_x"))
        assert back.cfg == tiny_nets_config.discriminator

    def test_config_mismatch(self, tiny_nets_config, temp_dir):
        """Test loading against a different expected config fails."""
        net = init_weights(build_generator(tiny_nets_config.generator), seed=3)
        save_network(net, temp_dir / "g")
        other = GeneratorConfig(stages=3, base_channels=4, max_channels=4, input_side=8)
        with pytest.raises(ShapeMismatchError):
            load_network(temp_dir / "g", other)

    def test_missing_manifest(self, temp_dir):
        """Test a missing checkpoint surfaces as a malformed header."""
        with pytest.raises(MalformedHeaderError):
            load_network(temp_dir / "nothing")

    def test_strict_state_dict(self, tiny_nets_config):
        """Test unknown or missing parameter names are rejected."""
        net = build_generator(tiny_nets_config.generator)
        state = net.state_dict()
        state.pop(next(iter(state)))
        with pytest.raises(ShapeMismatchError, match="missing"):
            net.load_state_dict(state)
