"""
DUALAUG - dual parameter/loss data augmentation for time-series anomaly detection

Trains a window autoencoder on a possibly contaminated series while an
agent expands, preserves or deletes training windows, rewarded by each
window's reconstruction loss and by how far its parameter influence lies
from the training set's center.
"""

__version__ = "1.0.0"

__all__ = ['__version__']
