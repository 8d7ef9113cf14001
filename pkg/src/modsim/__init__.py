"""modsim: a deterministic multi-camera household-task simulator with
live language-based modulation of in-flight robot plans.

The pieces, bottom to top:

* scene      frozen world snapshots + pinhole projection
* labels     synthetic "object #K" labels and reference resolution
* tasks      the desk-scale task library (scenes, plans, success checks)
* executor   20 Hz deterministic plan execution with step-boundary injection
* modlang    the controlled command grammar (parse / render / classify)
* modulate   plan rewriting: substitute, speed, reorder, skip, avoid, abort
* augment    TARGET-token text augmentation + per-camera highlights
* dataset    paired baseline/modulated episodes, instructions, JSONL export
* service    WebSocket session streaming + live commands
* cli        run / gen-dataset / replay / serve
"""

from . import augment, dataset, executor, labels, modlang, modulate, scene, service, tasks

__version__ = "0.1.0"

__all__ = [
    "augment",
    "dataset",
    "executor",
    "labels",
    "modlang",
    "modulate",
    "scene",
    "service",
    "tasks",
    "__version__",
]
