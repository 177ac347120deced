"""Stdio JSON bridge serving image classifiers to black-box attack tooling."""

from .models import DenseNet, TorchvisionNet, load_model
from .server import handle_request, serve

__version__ = "0.1.0"
