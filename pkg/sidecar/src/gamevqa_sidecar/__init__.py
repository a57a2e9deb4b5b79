"""HTTP inference sidecar: DenseNet-121 penultimate activations as a service."""

__version__ = "0.1.0"
