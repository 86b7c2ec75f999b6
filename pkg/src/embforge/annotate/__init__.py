"""Noun chunking, question templates, sample builders, and the diversifier."""

from .builders import (
    DiversifierRequest,
    build_action_prediction_sample,
    build_dense_caption_sample,
    build_goal_generation_sample,
    build_localization_sample,
    build_task_caption_sample,
    build_verification_sample,
    build_whatif_request,
    build_whatif_sample_offline,
    ingest_external_qa,
    keyframe_select,
)
from .chunks import NounChunk, extract_noun_chunks
from .diversify import (
    CREDENTIAL_ENV_VAR,
    HttpClient,
    OfflineParaphraser,
    ReplayClient,
    diversify,
    request_hash,
    special_token_multiset,
)
from .templates import MODALITY_NAMES, TEMPLATES, Template

__all__ = [
    "CREDENTIAL_ENV_VAR",
    "DiversifierRequest",
    "HttpClient",
    "MODALITY_NAMES",
    "NounChunk",
    "OfflineParaphraser",
    "ReplayClient",
    "TEMPLATES",
    "Template",
    "build_action_prediction_sample",
    "build_dense_caption_sample",
    "build_goal_generation_sample",
    "build_localization_sample",
    "build_task_caption_sample",
    "build_verification_sample",
    "build_whatif_request",
    "build_whatif_sample_offline",
    "diversify",
    "extract_noun_chunks",
    "ingest_external_qa",
    "keyframe_select",
    "request_hash",
    "special_token_multiset",
]
