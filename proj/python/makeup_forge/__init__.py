# SPDX-License-Identifier: Apache-2.0
"""Paired makeup dataset curation: filters, metrics and the reference injector."""

from ._forge import (
    ForgeError,
    area,
    background_filter,
    clip_i,
    filter_manifest,
    gen_corpus,
    inject_check,
    l2m,
    load_image,
    load_mask,
    makeup_failed_filter,
    misalignment_filter,
    non_overlap_count,
    read_embedding,
    report,
    save_image,
    save_mask,
    ssim,
    thresholded_diff_count,
    write_embedding,
)

__all__ = [
    "ForgeError",
    "area",
    "background_filter",
    "clip_i",
    "filter_manifest",
    "gen_corpus",
    "inject_check",
    "l2m",
    "load_image",
    "load_mask",
    "makeup_failed_filter",
    "misalignment_filter",
    "non_overlap_count",
    "read_embedding",
    "report",
    "save_image",
    "save_mask",
    "ssim",
    "thresholded_diff_count",
    "write_embedding",
]
