"""Sequential personalized classification over unit-normalized embeddings."""

from .core import (DimensionMismatchError, LabeledRecord, LabelRegistry,
                   NormalizationError, PrototypeSet, SpcError, UserStore,
                   normalize)
from .data_io import (FileFormatError, ReportTable, read_prototypes,
                      read_records, render_report, write_manifest,
                      write_prototypes, write_records, write_report)
from .engine import (DotCounter, MeanState, Ranking, SpcConfig, SumConfig,
                     class_similarity, ncm_rank, ncm_update, register,
                     spc_rank, spc_sum_rank)
from .prototypes import (SubsetSpec, TrainIndex, build_prototypes, coverage,
                         estimate_real_world_accuracy, select_classes)
from .stream import (BucketReport, CvResult, Outcome, Strategy, bucket_report,
                     cross_validate_w, evaluate, group_by_user, mean_accuracy,
                     run_streams, run_user_stream, sweep_table, sweep_w,
                     sweep_ws)
from .synth import SynthConfig, generate_synthetic

__all__ = [
    "BucketReport", "CvResult", "DimensionMismatchError", "DotCounter",
    "FileFormatError", "LabelRegistry", "LabeledRecord", "MeanState",
    "NormalizationError", "Outcome", "PrototypeSet", "Ranking", "ReportTable",
    "SpcConfig", "SpcError", "Strategy", "SubsetSpec", "SumConfig",
    "SynthConfig", "TrainIndex", "UserStore", "bucket_report",
    "build_prototypes", "class_similarity", "coverage", "cross_validate_w",
    "estimate_real_world_accuracy", "evaluate", "generate_synthetic",
    "group_by_user", "mean_accuracy", "ncm_rank", "ncm_update", "normalize",
    "read_prototypes", "read_records", "register", "render_report",
    "run_streams", "run_user_stream", "select_classes", "spc_rank",
    "spc_sum_rank", "sweep_table", "sweep_w", "sweep_ws", "write_manifest",
    "write_prototypes", "write_records", "write_report",
]
