import numpy as np
import pytest
import torch

from gamevqa_sidecar.model import (
    EMBED_DIM,
    SidecarConfig,
    WeightsError,
    extract_penultimate,
    load_backbone,
    preprocess,
)
from conftest import random_rgb


def test_config_validates_input_size(weights_path):
    with pytest.raises(ValueError):
        SidecarConfig(weights_path=weights_path, input_size=(100, 64))
    SidecarConfig(weights_path=weights_path)  # the (768, 432) default is valid


def test_config_requires_weights_file(tmp_path):
    with pytest.raises(WeightsError):
        SidecarConfig(weights_path=str(tmp_path / "missing.pt"))


def test_load_rejects_wrong_architecture(tmp_path):
    path = tmp_path / "bad.pt"
    torch.save({"conv.weight": torch.zeros(3, 3)}, str(path))
    with pytest.raises(WeightsError):
        load_backbone(str(path))


# --- preprocess ------------------------------------------------------------


def test_preprocess_output_geometry():
    out = preprocess(random_rgb(0, 30, 50), input_size=(96, 64))
    assert tuple(out.shape) == (1, 3, 96, 64)


def test_preprocess_zero_image_hits_normalization_zero_point():
    out = preprocess(np.zeros((10, 10, 3), dtype=np.uint8), input_size=(96, 64))
    expect = (0.0 - torch.tensor([0.485, 0.456, 0.406])) / torch.tensor([0.229, 0.224, 0.225])
    for c in range(3):
        assert torch.allclose(out[0, c], expect[c].expand(96, 64), atol=1e-6)


def test_preprocess_identity_resize_keeps_geometry():
    rgb = random_rgb(1, 96, 64)
    out = preprocess(rgb, input_size=(96, 64))
    # already at target size: only the affine normalization applies
    manual = (torch.from_numpy(rgb).float().permute(2, 0, 1) / 255.0 -
              torch.tensor([0.485, 0.456, 0.406]).view(3, 1, 1)) / \
             torch.tensor([0.229, 0.224, 0.225]).view(3, 1, 1)
    assert torch.allclose(out[0], manual, atol=1e-6)


def test_preprocess_rejects_empty():
    with pytest.raises(ValueError):
        preprocess(np.zeros((0, 5, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        preprocess(np.zeros((5, 5, 4), dtype=np.uint8))


# --- extraction ------------------------------------------------------------


def test_extract_length_and_determinism(config):
    backbone = load_backbone(config.weights_path)
    x = preprocess(random_rgb(2), config.input_size)
    a = extract_penultimate(backbone, x)
    b = extract_penultimate(backbone, x)
    assert a.shape == (EMBED_DIM,)
    assert a.dtype == np.dtype("<f4")
    np.testing.assert_array_equal(a, b)


def test_extract_single_pixel_sensitivity(config):
    backbone = load_backbone(config.weights_path)
    rgb = random_rgb(3, 96, 64)
    changed = rgb.copy()
    changed[10, 10, 0] = (int(changed[10, 10, 0]) + 128) % 256
    a = extract_penultimate(backbone, preprocess(rgb, config.input_size))
    b = extract_penultimate(backbone, preprocess(changed, config.input_size))
    assert not np.array_equal(a, b)
