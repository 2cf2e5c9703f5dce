"""knnlab: a laboratory for nearest-neighbor regret under test-time corruption."""

from .corruption import (CorruptionSpec, attack, attack_batch,
                         direction_second_moment, inject_noise,
                         lp_sphere_directions, perturb, sample_offsets)
from .dataspace import (Dataset, ExponentialLaw, LabeledSample, Model,
                        SyntheticModel, UniformLaw, bayes_label, bayes_risk,
                        eta, eta_grad, eta_hess, exponential_model,
                        ramp_model, sample_dataset, uniform_model)
from .lab import (DataSchema, ExperimentSpec, RateFit, RegretEstimate,
                  compare_variants, cross_validate_k, estimate_regret,
                  load_csv, phase_transition_scan, rate_fit, rows_to_csv_text,
                  run_cells, split, write_rows, write_summary)
from .neighbors import (NeighborSet, SearchIndex, brute_force_knn, classify,
                        classify_batch, eta_hat, eta_hat_batch, knn_query)
from .rng import RngHandle
from .theory import (BoundaryMesh, DegenerateBoundaryError, TheoryReport,
                     adversarial_theoretical_regret, b_term, boundary_mesh,
                     general_rate, general_rate_k, optimal_k, psi_grad_norm,
                     t_kn, theoretical_regret, variance_coefficient)
from .variants import (DistributedIndex, Partition, RelabeledDataset,
                       distributed_classify_batch, distributed_eta_hat,
                       distributed_eta_hat_batch, effective_k, make_partition,
                       pre1nn_classify, pre1nn_classify_batch, preprocess,
                       train_noise_injected)

__version__ = "0.1.0"
