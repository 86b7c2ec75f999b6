"""Episode ingestion, orchestration, serialization, validation, statistics."""

from .io_formats import (
    decode_rle_mask,
    encode_rle_mask,
    read_depth_f32,
    read_depth_png_mm,
    read_flow_f32,
    read_pointcloud_bin,
    read_rgb,
    write_depth_f32,
    write_depth_png_mm,
    write_flow_f32,
    write_pointcloud,
    write_rgb,
)
from .manifest import EpisodeLoadError, load_episode, load_qa_records
from .run import (
    DatasetReport,
    annotate_episode,
    export_samples,
    run_pipeline,
    stats,
    validate_dataset,
)

__all__ = [
    "DatasetReport",
    "EpisodeLoadError",
    "annotate_episode",
    "decode_rle_mask",
    "encode_rle_mask",
    "export_samples",
    "load_episode",
    "load_qa_records",
    "read_depth_f32",
    "read_depth_png_mm",
    "read_flow_f32",
    "read_pointcloud_bin",
    "read_rgb",
    "run_pipeline",
    "stats",
    "validate_dataset",
    "write_depth_f32",
    "write_depth_png_mm",
    "write_flow_f32",
    "write_pointcloud",
    "write_rgb",
]
