"""scikit-learn style wrappers around stereo training and masked pretraining."""

from __future__ import annotations

import numpy as np
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .net.config import ModelConfig
from .pretrain import MaskSpec, PretrainConfig, pretrain, pretrain_checkpoint
from .train.data import StereoSample, to_tensor
from .train.evaluate import pad_to_multiple, predict_disparity
from .train.loop import TrainConfig, train_model
from .train.metrics import compute_epe
from .validation import check_disparity, check_positive_int, check_stereo_pairs


def _samples(left, right, disp=None):
    zeros = np.zeros(left.shape[:3], np.float32)
    return [StereoSample(l, r, zeros[i] if disp is None else disp[i], "fit", str(i))
            for i, (l, r) in enumerate(zip(left, right))]


class StereoMatcher(BaseEstimator):
    """Supervised disparity regressor.

    X is ``(left, right)`` with (N, H, W, 3) stacks or an (N, 2, H, W, 3) array;
    y is (N, H, W) left-view disparity. `init` may be a pretrain checkpoint
    (path or dict) whose backbone weights seed the network.
    """

    def __init__(self, steps=1000, batch_size=2, crop_h=128, crop_w=256, learning_rate=2e-4, gamma=0.9,
                 train_iters=22, eval_iters=32, base_channels=32, max_disparity=192, augment=True, init=None, seed=0):
        self.steps = steps
        self.batch_size = batch_size
        self.crop_h = crop_h
        self.crop_w = crop_w
        self.learning_rate = learning_rate
        self.gamma = gamma
        self.train_iters = train_iters
        self.eval_iters = eval_iters
        self.base_channels = base_channels
        self.max_disparity = max_disparity
        self.augment = augment
        self.init = init
        self.seed = seed

    def fit(self, X, y):
        left, right = check_stereo_pairs(X)
        disp = check_disparity(y, left.shape[:3])
        check_positive_int(self.batch_size, "batch_size")
        config = TrainConfig(
            crop_h=self.crop_h, crop_w=self.crop_w, gamma=self.gamma, train_iters=self.train_iters,
            eval_iters=self.eval_iters, steps=self.steps, batch_size=self.batch_size,
            learning_rate=self.learning_rate, seed=self.seed, augment=self.augment,
        )
        model_config = None if self.init is not None else ModelConfig(
            base_channels=self.base_channels, max_disparity=self.max_disparity)
        self.model_, self.checkpoint_, self.log_ = train_model(
            _samples(left, right, disp), config, init=self.init, model_config=model_config)
        return self

    def _check_fitted(self):
        if not hasattr(self, "model_"):
            raise NotFittedError("StereoMatcher is not fitted; call fit first")

    def predict(self, X) -> np.ndarray:
        self._check_fitted()
        left, right = check_stereo_pairs(X)
        return np.stack([predict_disparity(self.model_, l, r, self.eval_iters) for l, r in zip(left, right)])

    def score(self, X, y) -> float:
        """Negative end-point error, so larger is better."""
        pred = self.predict(X)
        return -compute_epe(pred, check_disparity(y, pred.shape))


class MaskedPretrainer(BaseEstimator, TransformerMixin):
    """Masked paired reconstruction pretraining; `transform` returns left cost features at 1/4 resolution."""

    def __init__(self, steps=1000, batch_size=4, crop_h=128, crop_w=256, learning_rate=1e-4, patch_size=32,
                 left_ratio=0.5, right_ratio=0.5, base_channels=32, max_disparity=192, seed=0):
        self.steps = steps
        self.batch_size = batch_size
        self.crop_h = crop_h
        self.crop_w = crop_w
        self.learning_rate = learning_rate
        self.patch_size = patch_size
        self.left_ratio = left_ratio
        self.right_ratio = right_ratio
        self.base_channels = base_channels
        self.max_disparity = max_disparity
        self.seed = seed

    def _config(self) -> PretrainConfig:
        return PretrainConfig(
            steps=self.steps, batch_size=self.batch_size, crop_h=self.crop_h, crop_w=self.crop_w,
            learning_rate=self.learning_rate, seed=self.seed,
            mask=MaskSpec(self.patch_size, self.left_ratio, self.right_ratio, self.seed),
        )

    def fit(self, X, y=None):
        left, right = check_stereo_pairs(X)
        check_positive_int(self.batch_size, "batch_size")
        config = self._config()
        self.model_, self.log_ = pretrain(_samples(left, right), config,
                                         ModelConfig(base_channels=self.base_channels,
                                                     max_disparity=self.max_disparity))
        self.checkpoint_ = pretrain_checkpoint(self.model_, config)
        return self

    def transform(self, X) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise NotFittedError("MaskedPretrainer is not fitted; call fit first")
        left, right = check_stereo_pairs(X)
        stereo = self.model_.stereo.eval()
        out = []
        with torch.no_grad():
            for l, r in zip(left, right):
                lt, (h, w) = pad_to_multiple(to_tensor(l))
                rt, _ = pad_to_multiple(to_tensor(r))
                feats = stereo(lt, rt, mode="pretrain-backbone")
                out.append(feats.cost_feature[0, :, : -(-h // 4), : -(-w // 4)].numpy())
        return np.stack(out)
