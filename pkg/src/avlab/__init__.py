"""avlab: a desk-scale laboratory for fine-grained temporal audio-visual
forgery detection.

Pieces: a synthetic correlated audio-visual generator (:mod:`avdata`),
temporally-local manipulation engine (:mod:`pseudofake`), a minimal
numpy autodiff stack (:mod:`tinynet`), the distance-map detector
(:mod:`detector`), the training harness (:mod:`trainloop`), the
evaluation kit (:mod:`evalkit`) and a CLI (:mod:`cli`).
"""

from .avdata import (
    AudioClip,
    AVPair,
    PairMeta,
    SynthConfig,
    VisualClip,
    load_pair,
    make_pairs,
    save_pair,
    synth_fake_pair,
    synth_real_pair,
)
from .container import read_container, write_container
from .detector import (
    Detector,
    DetectorConfig,
    attention_map,
    distance_map,
    load_checkpoint,
    save_checkpoint,
)
from .errors import (
    ChunkRejected,
    ConfigError,
    ContainerFormatError,
    DivergenceError,
    DonorError,
    MetricError,
    ShapeError,
)
from .evalkit import (
    AblationTable,
    EvalReport,
    ScoredVideo,
    SubsequencePolicy,
    ablation_run,
    auc,
    evaluate,
    make_split,
)
from .pseudofake import (
    ChunkParams,
    ManipulationSpec,
    apply_manipulation,
    index_map,
    sample_chunk,
    sample_manipulation,
)
from .rng import derive_seed, substream
from .trainloop import DataSpec, EvalSpec, RunConfig, TrainResult, augment_sample, train

__version__ = "0.1.0"
