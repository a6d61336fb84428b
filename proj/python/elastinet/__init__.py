"""Physics-informed neural networks for plane-strain elasticity.

Thin re-export of the compiled core. Everything heavy (autodiff tape, loss
assembly, Adam training loop) lives in C++; this package just makes it
importable.
"""

try:
    from ._elastinet import *  # noqa: F401,F403 — installed layout
    from ._elastinet import __doc__ as _core_doc
except ImportError:  # in-tree builds put the module next to the build dir
    from _elastinet import *  # noqa: F401,F403
    from _elastinet import __doc__ as _core_doc

__all__ = [
    "Dataset",
    "MaterialParams",
    "NetworkArch",
    "FieldModel",
    "TrainingConfig",
    "TrainingHistory",
    "EpochRecord",
    "Checkpoint",
    "TrainResult",
    "ElastinetError",
    "load_dataset",
    "generate_elastic_dataset",
    "generate_plastic_dataset",
    "central_difference_forces",
    "build_model",
    "loss_report",
    "train",
    "retrain",
    "train_surrogate",
    "load_checkpoint",
]
