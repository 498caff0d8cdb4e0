"""Multi-resolution clustering configurations: extraction, alignment, export."""

from confmix.core import (
    Configuration,
    ConfigurationSet,
    ContingencyTable,
    FeatureMatrix,
    ari,
    contingency,
    load_configuration_set,
    relabel_contiguous,
    save_configuration_set,
)
from confmix.graph import (
    AffinityGraph,
    ReweightParams,
    column_stochastic,
    knn_build,
    sgtsne_reweight,
    solve_sigma,
    symmetrize,
)
from confmix.cluster import (
    BlueRedFront,
    FrontEntry,
    attraction,
    descending_triangulation,
    extract_configurations,
    front_gamma_max,
    leiden_at_gamma,
    objective,
    repulsion,
)
from confmix.align import (
    AlignmentMapping,
    AnchorSet,
    fiedler_vector,
    hungarian_mapping,
    pair_mapping,
    rms_align,
    score,
    two_walk_laplacian,
)

__version__ = "0.1.0"
