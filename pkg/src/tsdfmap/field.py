"""Neural signed-distance field: sparse feature grid + MLP decoder.

predict() runs grid interpolation and the decoder; backward_mse()
produces the gradients adam_step() consumes; spatial_gradient() is the
analytic d(sdf)/d(position) used by the Fisher accumulation and by
surface-normal queries.
"""

from typing import NamedTuple

import numpy as np

from .adam import GradientStore
from .decoder import SdfDecoder
from .grid import FeatureGrid, trilinear_weight_gradients
from .kernels.scatter import scatter_add_rows


class FieldCache(NamedTuple):
    points: np.ndarray
    preds: np.ndarray
    record: "InterpRecord"  # grid rows/weights/fracs per level
    dec_cache: object


class NeuralSdfField:
    def __init__(self, grid: FeatureGrid = None, decoder: SdfDecoder = None, rng=None):
        self.grid = grid if grid is not None else FeatureGrid()
        self.decoder = (
            decoder
            if decoder is not None
            else SdfDecoder(feature_dim=self.grid.feature_dim, rng=rng)
        )

    def predict(self, points):
        """(n, 3) world points -> ((n,) sdf, cache). Raises UnallocatedQuery."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        feats, record = self.grid.interpolate(pts)
        preds, dec_cache = self.decoder.forward(feats)
        return preds, FieldCache(pts, preds, record, dec_cache)

    def backward_mse(self, cache: FieldCache, labels):
        """MSE loss and its gradients w.r.t. decoder params and grid rows."""
        labels = np.asarray(labels, dtype=np.float64)
        n = cache.preds.shape[0]
        resid = cache.preds - labels
        loss = float(resid @ resid) / n
        dec_grads, dfeat = self.decoder.backward(cache.dec_cache, 2.0 * resid / n)

        store = GradientStore(decoder=dec_grads)
        for li in range(self.grid.n_levels):
            rows = cache.record.rows[:, li]  # (n, 8)
            w = cache.record.weights[:, li]  # (n, 8)
            contrib = (w[:, :, None] * dfeat[:, None, :]).reshape(-1, dfeat.shape[1])
            uniq, inv = np.unique(rows.ravel(), return_inverse=True)
            g = np.zeros((uniq.shape[0], dfeat.shape[1]))
            scatter_add_rows(g, inv, contrib)
            store.level_rows.append(uniq)
            store.level_grads.append(g)
        return loss, store

    def spatial_gradient(self, points, cache: FieldCache = None):
        """Analytic d(sdf)/d(position) (n, 3) at the given points."""
        if cache is None:
            _, cache = self.predict(points)
        n = cache.points.shape[0]
        _, dfeat = self.decoder.backward(
            cache.dec_cache, np.ones(n), with_param_grads=False
        )
        grad = np.zeros((n, 3))
        for li, lvl in enumerate(self.grid.levels):
            rows = cache.record.rows[:, li]
            corner_feats = lvl.features[rows]  # (n, 8, D)
            # scalar contribution of each corner to the decoder input grad
            s_c = np.einsum("ncd,nd->nc", corner_feats, dfeat)
            dw = trilinear_weight_gradients(cache.record.fracs[:, li], lvl.voxel_size)
            grad += np.einsum("nc,nca->na", s_c, dw)
        return grad
