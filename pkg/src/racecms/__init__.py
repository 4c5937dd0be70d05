"""Sub-linear memory sketches for nearest-neighbor search over sparse sets."""

from .core import (
    Dataset,
    LshSharing,
    QueryResult,
    SketchConfig,
    SparseVector,
    StorageMode,
    make_sparse_vector,
    validate_config,
)
from .errors import (
    ConfigMismatch,
    CorruptSketch,
    CounterOverflow,
    DomainError,
    EmptyInput,
    InvalidConfig,
    ParseError,
    RaceError,
)
from .hashing import HashPlan, collision_model
from .recovery import MomPolicy, median_of_means, query, top_v
from .sketch import RaceCmsSketch, build_sketch, deserialize, merge, new_sketch, serialize

__version__ = "0.1.0"

__all__ = [
    "ConfigMismatch", "CorruptSketch", "CounterOverflow", "Dataset", "DomainError",
    "EmptyInput", "HashPlan", "InvalidConfig", "LshSharing", "MomPolicy", "ParseError",
    "QueryResult", "RaceCmsSketch", "RaceError", "SketchConfig", "SparseVector",
    "StorageMode", "build_sketch", "collision_model", "deserialize", "make_sparse_vector",
    "median_of_means", "merge", "new_sketch", "query", "serialize", "top_v", "validate_config",
]
