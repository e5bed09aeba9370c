"""Staged pre-training workbench for tiny decoder-only Transformers.

Music tokenization, rule-based synthetic music, deterministic training with
selective weight transfer across vocabularies, behavioral probes, and
multi-seed experiment statistics, all reproducible from (config, seed).
"""

import os

# Default to sequential execution: on the small matrices this workload is
# made of, thread-pool handoff costs more than it saves, and the determinism
# contract is simplest single-threaded. Both can be overridden by setting
# the variables before Python starts (they only take effect if numpy has not
# been imported yet).
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del _var, os

__version__ = "0.1.0"
