"""Diversity-aware seed scheduling."""

from variantlab.scheduler.baselines import baseline_order
from variantlab.scheduler.greedy import DppScheduler, SelectionTrace
from variantlab.scheduler.kernel import KERNEL_EPSILON, build_kernel

__all__ = [
    "DppScheduler",
    "KERNEL_EPSILON",
    "SelectionTrace",
    "baseline_order",
    "build_kernel",
]
