# copyright ############################### #
# This file is part of the fmpscore Package. #
# Copyright (c) 2025.                        #
# ########################################## #

from .gbdt import GbdtConfig, ensemble_score, grow_tree, train_gbdt, tree_score
from .logreg import linear_score, log_loss_and_gradient, train_logreg
from .registry import ESTIMATORS, Estimator, register_estimator, train
from .trained import (TrainedModel, fmp_score, load_model, predict_raw, recalibrate,
                      save_model, sigmoid)
