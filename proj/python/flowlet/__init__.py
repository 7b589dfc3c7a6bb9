"""Declarative serverless dataflow: pipeline compiler, data primitives, and a
deterministic discrete-event simulator."""

from ._core import (
    arrival_times,
    combine,
    compile_pipeline,
    rle_decode,
    rle_encode,
    run_local,
    simulate,
    split,
)

__all__ = [
    "arrival_times",
    "combine",
    "compile_pipeline",
    "rle_decode",
    "rle_encode",
    "run_local",
    "simulate",
    "split",
]
