"""Cycle-GAN lesion segmentation toolkit

Unsupervised lung-lesion segmentation: infected CT slices are translated to
synthetic healthy slices by a cycle-consistent adversarial network, and the
lesions are recovered from the subtraction residual by a morphology chain.
Synthetic phantoms make the whole pipeline trainable and checkable on a desk.
"""

__version__ = "0.1.0"
__author__ = "Lesion Segmentation Team"
