//! Analytic performance functionals.

pub mod pairwise;
pub mod qfunc;
pub mod quadrature;
pub mod report;
pub mod sep;
pub mod transition;

pub use pairwise::{
    pairwise_error_prob, pairwise_error_prob_literal, pairwise_stats, PairwiseErrorProb, PairwiseStats,
};
pub use qfunc::q_function;
pub use quadrature::{mi_dc, mi_dc_best, MiEstimate, QuadratureGrid};
pub use report::MetricReport;
pub use sep::{sep_floor, sep_floor_with, sep_union_bound, FloorForm, SepBound};
pub use transition::{mi_dd, transition_matrix, TransitionMatrix};
