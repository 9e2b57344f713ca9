"""Kernel classifiers regularized by the topology of their decision boundary.

The boundary of a classifier is its zero level set; its connected components
are found with a union-find sweep (0-dimensional sublevel persistence of the
field and its negation, plus one essential pair per graph component). Each
component's robustness — the smaller absolute value of its two critical
vertices — is squared and summed into a penalty whose exact gradient flows
through the weak critical vertex of each component.
"""

from .boundary import (
    BoundaryComponent,
    ComponentSet,
    Origin,
    boundary_components,
    pairing_signature,
    penalty_seeds,
    select_weak_critical,
    topo_penalty,
)
from .datasets import (
    Dataset,
    FoldPlan,
    flip_labels,
    inner_assignments,
    load_csv,
    make_blobs,
    make_moons,
    save_csv,
    split_folds,
)
from .errors import CapacityError, CsvFormatError, DivergenceError, FieldEvaluationError
from .experiments import ExperimentConfig, RunReport, component_counts, run_cv, run_train
from .graphs import (
    Graph,
    GridSpec,
    ScalarField,
    UnitBoxTransform,
    build_grid_graph,
    build_knn_graph,
    evaluate_field,
    normalize_unit_box,
)
from .klr import (
    Discretization,
    KernelModel,
    TrainConfig,
    TrainTrace,
    binary_boundary,
    class_scores,
    data_loss_grad,
    evaluate,
    gaussian_gram,
    kernel_vector,
    load_model,
    predict_binary,
    psi_fields,
    save_model,
    topo_loss_grad,
    train_binary,
    train_multilabel,
)
from .persistence import (
    PersistencePair,
    PersistenceResult,
    merge_pairs,
    total_order,
    zero_crossing_filter,
)

__version__ = "0.1.0"
