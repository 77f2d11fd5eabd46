"""Synthetic attribute-composed dataset with ground-truth masks."""

from .attributes import ATTRIBUTE_POOL, ATTRIBUTES_BY_ID, PATCH, AttributeSpec, stencil
from .dataset_io import export_pngs, load_dataset, save_dataset, to_png_bytes
from .synth import (
    BACKGROUND,
    IMAGE_SIZE,
    ClassDef,
    DatasetSpec,
    SynthSample,
    class_attribute_table,
    generate,
    make_classes,
    stack_images,
    stack_labels,
)

__all__ = [
    "ATTRIBUTE_POOL",
    "ATTRIBUTES_BY_ID",
    "BACKGROUND",
    "IMAGE_SIZE",
    "PATCH",
    "AttributeSpec",
    "ClassDef",
    "DatasetSpec",
    "SynthSample",
    "class_attribute_table",
    "export_pngs",
    "generate",
    "load_dataset",
    "make_classes",
    "save_dataset",
    "stack_images",
    "stack_labels",
    "stencil",
    "to_png_bytes",
]
