import math

import numpy as np

from gaborlens.coremath import GaborParams, gabor_kernel
from gaborlens.ingestion import write_archive


def make_synthetic_archive(path, per_layer=10, k=9, seed=0, with_zero_tensor=False):
    """Archive of clean synthetic oriented-bandpass kernels in two pseudo-layers."""
    rng = np.random.default_rng(seed)

    def layer_tensor(count):
        kernels = []
        for _ in range(count):
            params = GaborParams(
                amplitude=rng.uniform(0.5, 1.5),
                phase=rng.uniform(-math.pi, math.pi),
                u1=rng.uniform(0.3, 2.0),
                u2=rng.uniform(0.0, 2.0),
                sigma=rng.uniform(1.0, k / 2.0),
            )
            kernels.append(gabor_kernel(k, params))
        return np.stack(kernels).reshape(count, 1, k, k).astype(np.float32)

    tensors = {
        "layer0.weight": layer_tensor(per_layer),
        "layer1.weight": layer_tensor(per_layer),
    }
    layer_order = ["layer0", "layer1"]
    if with_zero_tensor:
        tensors["dead.weight"] = np.zeros((2, 1, k, k), dtype=np.float32)
        layer_order.append("dead")
    write_archive(path, tensors, layer_order=layer_order, model_id="synthetic")
    return path
