from .amgrad import amgrad
from .baselines import (
    DEFENSE_KINDS,
    DefenseSpec,
    baseline_aggregate,
    baseline_update,
    coordinate_median,
    coordinate_trimmed_mean,
    kmeans2_accept,
)
from .clipping import adaptive_clip, clip_to
from .fedward import RoundDefenseTrace, fedward_aggregate, fedward_update
from .optics import (
    NOISE,
    ClusterResult,
    attach_borders,
    auto_optics,
    cluster_distance_matrix,
    core_distances,
    extract_dbscan,
    largest_cluster,
    min_group_size,
    optics_order,
    select_eps,
)


def aggregate(global_prev, ws, spec: DefenseSpec):
    """Dispatch on ``spec.kind``; returns ``(global_new, trace)``."""
    if spec.kind == "fedward":
        return fedward_aggregate(global_prev, ws, spec.eps_rule)
    update, accepted = baseline_update(ws, spec)
    inds = tuple(range(len(ws))) if accepted is None else accepted
    return global_prev + update, RoundDefenseTrace(inds, None, None, False)
