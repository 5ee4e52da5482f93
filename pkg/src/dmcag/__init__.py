"""Deep multi-view subspace clustering with anchor graphs."""

from .anchor_graph import AnchorGraph, build_anchor_graph, solve_simplex_qp
from .data import MultiViewDataset, SyntheticSpec, generate_synthetic, load_dataset, save_dataset
from .errors import InputError, LoadError, NumericalError, ShapeError, TrainingError
from .metrics import accuracy, ari, evaluate, nmi
from .pipeline import PipelineConfig, RunResult, run_pipeline, sweep

__version__ = "0.1.0"
