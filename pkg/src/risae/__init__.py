"""Double-RIS MIMO autoencoder link simulator with adversarial attacks."""

__version__ = "0.1.0"

from .config import SystemConfig

__all__ = ["SystemConfig", "__version__"]
