import numpy as np
import pytest
import torch

from planktonad.autoencoder import (
    ALL_CORES, ALL_PAIRS, AutoEncoder, ReconstructionTriplet, TrainedAE, TrainingConfig, build_model,
    compute_loss, encode_latent, kl_divergence, load_checkpoint, reconstruct, reconstruct_batch, train,
)
from planktonad.autoencoder.architectures import resolve_decoder, ENCODERS, DECODERS, downsampling_factor
from planktonad.dataset import AugmentationPolicy, DatasetSplit, SampleLabel
from planktonad.errors import ContractError, DomainError, NumericError, ShapeError
from planktonad.synthetic import make_fixture

OK, NOK = SampleLabel.OK, SampleLabel.NOK


def _filters(layers):
    return [layer.filters for layer in layers if layer.kind == "conv"]


def test_convm2_encoder_filters():
    spec = build_model("VQVAE1", "ConvM2", (128, 256, 1))
    assert _filters(spec.encoder) == [32, 32, 32, 64, 64, 128, 64, 32, 1]
    assert spec.factor == 16
    assert sum(1 for layer in spec.decoder if layer.scale < 0) == 4


@pytest.mark.parametrize("pair", ["ConvM2", "ConvM3", "ConvM6"])
def test_decoder_reconciliation_restores_factor(pair):
    spec = build_model("BAE1", pair, (128, 128, 1))
    ups = sum(1 for layer in spec.decoder if layer.scale < 0)
    assert 2 ** ups == spec.factor


def test_reconciliation_rules():
    m3 = resolve_decoder(DECODERS["ConvM3"], downsampling_factor(ENCODERS["ConvM3"]))
    assert [layer.kind for layer in m3] == ["conv", "upsample", "conv", "upsample", "conv"]
    m2 = resolve_decoder(DECODERS["ConvM2"], 16)
    # the three earliest upsamplings are dropped
    assert [layer.name for layer in m2 if layer.kind == "conv"][:4] == ["ConvD1", "ConvD2", "ConvD3", "ConvD4"]
    assert [layer.kind for layer in m2[:6]] == ["conv"] * 5 + ["upsample"]


def test_bae2_fc_bottleneck():
    spec = build_model("BAE2", "ConvM5", (128, 128, 1))
    net = AutoEncoder(spec)
    assert net.fc_in.out_features == 256
    assert spec.encoded_shape() == (16, 16, 4)


def test_indivisible_input_rejected():
    with pytest.raises(ShapeError):
        build_model("BAE1", "ConvM1", (100, 100, 1))


def test_unknown_enums_rejected():
    with pytest.raises(DomainError):
        build_model("GAN", "ConvM1", (128, 128, 1))
    with pytest.raises(DomainError):
        build_model("BAE1", "ConvM7", (128, 128, 1))


def test_bad_latent_config_rejected():
    with pytest.raises(DomainError):
        build_model("VAE1", "ConvM3", (32, 32, 1), {"latent_channels": 0})


@pytest.mark.parametrize("core", ALL_CORES)
@pytest.mark.parametrize("pair", ALL_PAIRS)
def test_all_combinations_roundtrip_shape(core, pair):
    torch.manual_seed(0)
    spec = build_model(core, pair, (128, 256, 1))
    net = AutoEncoder(spec).eval()
    x = torch.rand(2, 1, 128, 256)
    with torch.no_grad():
        out = net(x)
    assert out["recon"].shape == x.shape
    assert float(out["recon"].min()) >= 0.0 and float(out["recon"].max()) <= 1.0
    assert spec.layer_shapes()[-1][2] == (128, 256, 1)


def test_rgb_input_supported():
    spec = build_model("VAE2", "ConvM4", (32, 64, 3))
    with torch.no_grad():
        assert AutoEncoder(spec).eval()(torch.rand(2, 3, 32, 64))["recon"].shape == (2, 3, 32, 64)


def test_wrong_input_shape_raises():
    net = AutoEncoder(build_model("BAE1", "ConvM3", (32, 32, 1))).eval()
    with pytest.raises(ShapeError):
        net(torch.rand(1, 1, 64, 64))


def test_bae_loss_zero_for_perfect_reconstruction():
    x = torch.rand(2, 1, 8, 8)
    total, parts = compute_loss("BAE1", x, x, {"recon": x.clone()})
    assert float(total) == 0.0 and parts == {"reconstruction": 0.0}


def test_kl_zero_at_standard_normal_and_nonnegative():
    assert float(kl_divergence(torch.zeros(3, 16), torch.zeros(3, 16))) == 0.0
    g = torch.Generator().manual_seed(0)
    for _ in range(20):
        mu, logvar = torch.randn(4, 10, generator=g) * 3, torch.randn(4, 10, generator=g) * 3
        assert float(kl_divergence(mu, logvar)) >= 0.0


def test_vae_loss_includes_normalised_kl():
    x = torch.rand(2, 1, 8, 8)
    mu, logvar = torch.ones(2, 4), torch.zeros(2, 4)
    total, parts = compute_loss("VAE2", x, x, {"recon": x.clone(), "mu": mu, "logvar": logvar})
    assert parts["kl"] == pytest.approx(0.5 * 4 / 64)
    assert float(total) == pytest.approx(parts["kl"])


def test_vq_loss_zero_when_encoder_hits_codebook():
    spec = build_model("VQVAE1", "ConvM3", (32, 32, 1))
    q = AutoEncoder(spec).quantizer
    z_e = q.codebook.weight[torch.tensor([3, 7, 11, 500])].t().reshape(1, 64, 2, 2)
    z_q, idx = q(z_e)
    assert idx.flatten().tolist() == [3, 7, 11, 500]
    x = torch.rand(1, 1, 8, 8)
    _, parts = compute_loss("VQVAE1", x, x, {"recon": x.clone(), "z_e": z_e, "z_q": z_q})
    assert parts["codebook"] == 0.0 and parts["commitment"] == 0.0


def test_vq_nearest_codebook_bruteforce():
    torch.manual_seed(1)
    spec = build_model("VQVAE1", "ConvM3", (32, 32, 1), {"codebook_size": 40, "embedding_dim": 8})
    q = AutoEncoder(spec).quantizer
    q.codebook.weight.data.normal_()
    z_e = torch.randn(2, 8, 3, 3)
    z_q, idx = q(z_e)
    w = q.codebook.weight.detach().numpy()
    flat = z_e.permute(0, 2, 3, 1).reshape(-1, 8).numpy()
    brute = ((flat[:, None, :] - w[None]) ** 2).sum(-1).argmin(1)
    assert idx.flatten().tolist() == brute.tolist()
    np.testing.assert_allclose(z_q.detach().permute(0, 2, 3, 1).reshape(-1, 8).numpy(), w[brute], atol=1e-6)


def test_non_finite_loss_raises():
    x = torch.rand(1, 1, 4, 4)
    with pytest.raises(NumericError):
        compute_loss("BAE1", x, x, {"recon": torch.full_like(x, float("nan"))})


# ------------------------------------------------------------------ training


@pytest.fixture(scope="module")
def small_data():
    samples = make_fixture(n_ok=24, n_nok=6, size=(32, 32), seed=3)
    images = {s.id: s.pixels for s in samples}
    oks = [s.id for s in samples if s.label is OK]
    noks = [s.id for s in samples if s.label is NOK]
    split = DatasetSplit(train=oks[:16], validation=[(i, OK) for i in oks[16:20]] + [(i, NOK) for i in noks[:3]],
                         test=[(i, OK) for i in oks[20:]] + [(i, NOK) for i in noks[3:]], seed=0)
    return split, images


def _config(epochs=2, seed=0):
    return TrainingConfig(epochs=epochs, batch_size=8, learning_rate=1e-3,
                          augmentation=AugmentationPolicy.identity(seed), seed=seed)


def test_train_rejects_nok_in_training(small_data):
    split, images = small_data
    bad = DatasetSplit(split.train + ["nok0000"], split.validation, split.test, split.seed)
    with pytest.raises(ContractError):
        train(build_model("BAE1", "ConvM3", (32, 32, 1)), bad, images, _config(), labels={"nok0000": NOK})


def test_train_is_deterministic(small_data):
    split, images = small_data
    spec = build_model("BAE1", "ConvM4", (32, 32, 1))
    a = train(spec, split, images, _config())
    b = train(spec, split, images, _config())
    assert a.training_log == b.training_log
    assert a.checkpoint_hash() == b.checkpoint_hash()
    assert len(a.training_log) == 2 and len(a.validation_log) == 2


def test_train_shape_mismatch(small_data):
    split, images = small_data
    with pytest.raises(ShapeError):
        train(build_model("BAE1", "ConvM3", (64, 64, 1)), split, images, _config(epochs=1))


def test_early_stopping_patience(small_data):
    split, images = small_data
    cfg = TrainingConfig(epochs=30, batch_size=8, learning_rate=1e-9, patience=1,
                         augmentation=AugmentationPolicy.identity(0))
    model = train(build_model("BAE1", "ConvM4", (32, 32, 1)), split, images, cfg)
    assert len(model.training_log) < 30


@pytest.fixture(scope="module")
def trained(small_data):
    split, images = small_data
    return train(build_model("VQVAE1", "ConvM3", (32, 32, 1)), split, images, _config(epochs=1))


def test_reconstruct_triplet(trained, small_data):
    _, images = small_data
    t = reconstruct(trained, images["ok0000"])
    assert t.original.shape == t.reconstruction.shape == t.difference.shape == (32, 32, 1)
    np.testing.assert_allclose(t.difference, np.abs(t.original - t.reconstruction))
    batch = reconstruct_batch(trained, [images["ok0000"], images["nok0000"]])
    np.testing.assert_allclose(batch[0].reconstruction, t.reconstruction, atol=1e-6)


def test_identity_model_zero_difference():
    img = np.random.default_rng(0).random((32, 32, 1)).astype(np.float32)
    t = ReconstructionTriplet.from_pair(img, img)
    assert not t.difference.any()


def test_encode_latent_vq_indices(trained, small_data):
    _, images = small_data
    out = encode_latent(trained, images["ok0001"])
    assert out["indices"].shape == (8, 8)
    assert out["indices"].min() >= 0 and out["indices"].max() < 512
    np.testing.assert_array_equal(out["indices"], encode_latent(trained, images["ok0001"])["indices"])


def test_encode_latent_bae2_length():
    torch.manual_seed(0)
    spec = build_model("BAE2", "ConvM3", (32, 32, 1))
    model = TrainedAE(spec, AutoEncoder(spec))
    img = np.random.default_rng(0).random((32, 32, 1)).astype(np.float32)
    z = encode_latent(model, img)["latent"]
    assert z.shape == (256,)
    np.testing.assert_array_equal(z, encode_latent(model, img)["latent"])


def test_vae_encode_is_posterior_mean():
    torch.manual_seed(0)
    spec = build_model("VAE1", "ConvM3", (32, 32, 1))
    model = TrainedAE(spec, AutoEncoder(spec))
    img = np.random.default_rng(1).random((32, 32, 1)).astype(np.float32)
    a, b = reconstruct(model, img), reconstruct(model, img)
    np.testing.assert_array_equal(a.reconstruction, b.reconstruction)
    assert encode_latent(model, img)["latent"].shape == (16, 8, 8)


def test_checkpoint_roundtrip(trained, small_data, tmp_path):
    _, images = small_data
    trained.save(tmp_path / "ckpt")
    loaded = load_checkpoint(tmp_path / "ckpt")
    assert loaded.checkpoint_hash() == trained.checkpoint_hash()
    assert loaded.spec == trained.spec
    np.testing.assert_array_equal(reconstruct(loaded, images["ok0002"]).reconstruction,
                                  reconstruct(trained, images["ok0002"]).reconstruction)


def test_layer_table_lists_every_layer():
    spec = build_model("BAE1", "ConvM2", (128, 256, 1))
    table = spec.layer_table()
    assert len(table.splitlines()) == 2 + len(spec.encoder) + len(spec.decoder)
    assert "Image channels" in table
    assert "(8, 16, 1)" in table


def test_training_config_roundtrip():
    cfg = _config(epochs=3, seed=5)
    assert TrainingConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        TrainingConfig(epochs=0)
