"""Community detection toolkit: multiscale graph neural networks, spectral
baselines (Bethe Hessian, Laplacians, truncated power method), belief
propagation, and block-model generators."""

from .graphs import (SparseGraph, EdgeIncidence, build_graph, adjacency_apply,
                     degree_apply, degree_vector, broadcast_apply, power_graph,
                     line_graph, read_edge_list, write_edge_list)
from .generators import (SbmConfig, MixtureConfig, GbmConfig, LabeledGraph,
                         sample_sbm, sample_sbm_mixture, sample_gbm, snr,
                         snr_to_rates, save_dataset, load_dataset)
from .spectral import (SpectralConfig, GraphOperator, bethe_hessian_operator,
                       power_fiedler, smallest_eigenpairs, spectral_cluster,
                       truncated_pm_baseline, nonbacktracking_matrix,
                       nb_spectral_radius, kmeans)
from .bp import BpState, bp_sbm, bp_predict, bp_detect
from .gnn import (GnnConfig, GnnModel, gnn_forward, lgnn_forward,
                  perm_invariant_loss, cheap_perm_loss, predict, gnn_detect)
from .metrics import OverlapResult, overlap
from .train import TrainRun, train, evaluate
from .optim import AdamaxState, adamax_step

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
