import numpy as np

from ..updates import LayeredUpdate


def amgrad(w: LayeredUpdate) -> LayeredUpdate:
    """Amplified magnitude sparsification.

    Each layer keeps only the sign pattern of its values, scaled by the
    layer's largest absolute value. ``sign(0) = 0``.
    """
    def one(layer):
        if layer.size == 0:
            return layer.copy()
        return np.sign(layer) * np.max(np.abs(layer))

    return w.map(one)
