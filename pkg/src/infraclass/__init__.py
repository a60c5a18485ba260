"""Signal classification toolkit: a 1-D inception-style network on raw
waveforms and a compact residual 2-D network on wavelet scalogram
images, backed by a small numpy tensor engine with reverse-mode
differentiation.
"""

from .data import (Batch, SignalDataset, SplitIndices, batches,
                   load_dataset, save_dataset, split, standardize)
from .errors import (ConfigError, DataError, InfraclassError, NumericError,
                     ShapeError)
from .pipelines import PipelineResult, build_model, run_training, wavelet_images
from .synth import generate, prototype
from .tensor import GradTape, Tensor, backward
from .training import (AdamState, EvalReport, FixedLr, LrFindResult,
                       OneCyclePolicy, OneCycleSchedule, SlicePolicy,
                       TrainConfig, TrainResult, adam_step, discriminative_lrs,
                       evaluate, history_json, lr_find, one_cycle_lr, train)
from .wavelet import (Scalogram, WaveletConfig, cwt, cwt_batch,
                      default_scales, export_heatmaps, morlet,
                      render_heatmap, write_heatmap_png)
from .checkpoint import (build_from_meta, load_checkpoint, load_model,
                         model_meta, save_checkpoint, save_model)
from .inception import InceptionConfig, InceptionTimeNet, build_inception_time
from .resnet import ResNet2DConfig, SmallResNet, build_small_resnet

__version__ = "0.1.0"

__all__ = [
    "Batch", "SignalDataset", "SplitIndices", "batches", "load_dataset",
    "save_dataset", "split", "standardize",
    "ConfigError", "DataError", "InfraclassError", "NumericError",
    "ShapeError",
    "PipelineResult", "build_model", "run_training", "wavelet_images",
    "generate", "prototype",
    "GradTape", "Tensor", "backward",
    "AdamState", "EvalReport", "FixedLr", "LrFindResult", "OneCyclePolicy",
    "OneCycleSchedule", "SlicePolicy", "TrainConfig", "TrainResult",
    "adam_step", "discriminative_lrs", "evaluate", "history_json", "lr_find",
    "one_cycle_lr", "train",
    "Scalogram", "WaveletConfig", "cwt", "cwt_batch", "default_scales",
    "export_heatmaps", "morlet", "render_heatmap", "write_heatmap_png",
    "build_from_meta", "load_checkpoint", "load_model", "model_meta",
    "save_checkpoint", "save_model",
    "InceptionConfig", "InceptionTimeNet", "build_inception_time",
    "ResNet2DConfig", "SmallResNet", "build_small_resnet",
    "__version__",
]
