import numpy as np
import pytest
import torch
from torchvision.models import densenet121

from gamevqa_sidecar.model import SidecarConfig


@pytest.fixture(scope="session")
def weights_path(tmp_path_factory):
    """Randomly initialized DenseNet-121 state dict; architecture-correct, tiny seed."""
    torch.manual_seed(0)
    net = densenet121(weights=None)
    path = tmp_path_factory.mktemp("weights") / "densenet121-random.pt"
    torch.save(net.state_dict(), str(path))
    return str(path)


@pytest.fixture(scope="session")
def config(weights_path):
    # small input keeps CPU forward passes fast in tests
    return SidecarConfig(weights_path=weights_path, input_size=(96, 64))


@pytest.fixture(scope="session")
def client(config):
    from fastapi.testclient import TestClient

    from gamevqa_sidecar.app import create_app

    return TestClient(create_app(config))


def random_rgb(seed: int, h: int = 48, w: int = 32) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 255, (h, w, 3), dtype=np.uint8)
