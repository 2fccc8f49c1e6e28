"""Built-in dataset descriptors selectable by name."""

from __future__ import annotations

from archloop.model import DatasetSpec

_REGISTRY = {
    "CIFAR-10": DatasetSpec(
        name="CIFAR-10",
        input_channels=3,
        input_height=32,
        input_width=32,
        num_classes=10,
        task_description=(
            "Design an image classifier for CIFAR-10: 60,000 32x32 colour images "
            "in 10 balanced classes (50,000 train / 10,000 test)."
        ),
    ),
    "CIFAR-100": DatasetSpec(
        name="CIFAR-100",
        input_channels=3,
        input_height=32,
        input_width=32,
        num_classes=100,
        task_description=(
            "Design an image classifier for CIFAR-100: 60,000 32x32 colour images "
            "in 100 fine-grained classes (500 train images per class)."
        ),
    ),
    "ImageNette": DatasetSpec(
        name="ImageNette",
        input_channels=3,
        input_height=160,
        input_width=160,
        num_classes=10,
        task_description=(
            "Design an image classifier for ImageNette: a 10-class subset of "
            "ImageNet at 160x160 resolution, roughly 9,500 train / 4,000 test images."
        ),
    ),
}


def dataset_names() -> list[str]:
    return sorted(_REGISTRY)


def get_dataset(name: str) -> DatasetSpec:
    try:
        return _REGISTRY[name]
    except KeyError:
        known = ", ".join(dataset_names())
        raise ValueError(f"unknown dataset {name!r}; known datasets: {known}") from None
