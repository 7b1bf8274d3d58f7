"""Bundled worked example: one simulated surveillance table plus real
validation data for a rapid antigen test (Stream 1) and RT-qPCR (Stream 2).
"""

from .core import CellCounts, DesignParams, ValidationCounts

EXAMPLE_CELLS = CellCounts(3, 12, 0, 2, 27, 130, 6, 77, 743)
EXAMPLE_DESIGN = DesignParams(n_tot=1000, psi=0.1)
EXAMPLE_N_TRUE = 100

VALIDATION_STREAM1 = ValidationCounts(v11=65, v10=38, v01=1, v00=552)
VALIDATION_STREAM2 = ValidationCounts(v11=89, v10=6, v01=0, v00=100)

# accuracy taken as the exact validation proportions
EXAMPLE_ACC1 = VALIDATION_STREAM1.point_accuracy()  # 65/103, 552/553
EXAMPLE_ACC2 = VALIDATION_STREAM2.point_accuracy()  # 89/95, 1


def example_input() -> dict:
    """The example in the ``estimate`` input format."""
    return {
        "design": EXAMPLE_DESIGN.to_json(),
        "cells": EXAMPLE_CELLS.to_json(),
        "acc1": EXAMPLE_ACC1.to_json(),
        "acc2": EXAMPLE_ACC2.to_json(),
        "val1": VALIDATION_STREAM1.to_json(),
        "val2": VALIDATION_STREAM2.to_json(),
    }
