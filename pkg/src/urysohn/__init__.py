"""Identification of discrete Urysohn operators and Urysohn trees."""

from .pwl import (Domain, PiecewiseLinear, SegmentLocation, UrysohnOperator, apply_nodal_increment,
                  evaluate_operator, evaluate_pwl, locate)
from .single import TrainConfig, TrainTrace, chi_norm, fit_urysohn, kaczmarz_step, make_linear_baseline, train_single
from .tree import (TreeConfig, UrysohnTree, forward, initialize_tree, phi_increments, reposition_root_domain,
                   threshold_derivative, train_tree, tree_step)

__version__ = "0.1.0"
