"""Collaborative teacher-student domain adaptation at desk scale.

The package is self-contained: a tape-based reverse-mode autodiff core over
dense float64 arrays, small pre-norm transformer encoder classifiers, a
synthetic domain-shift data generator, analysis instruments (layer saliency,
linear CKA, parameter variation), the collaborative training loop, and a CLI
that emits JSON/SVG reports.
"""

import os as _os

# Must run before numpy is first imported anywhere in this process:
# multi-threaded BLAS reductions can reassociate floating-point sums and
# break run-to-run reproducibility.
if _os.environ.get("CLDA_DETERMINISTIC") == "1":
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        _os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
