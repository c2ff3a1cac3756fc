//! Grouped and overlapped-grouped Pauli measurement for energy estimation.
//!
//! The pipeline: parse or generate a Pauli-sum [`Hamiltonian`], partition it
//! with [`sorted_insertion`], grow the groups with [`posthoc_repack`] or
//! [`adhoc_repack`], pick a [`ShotAllocation`] and evaluate or sample the
//! resulting estimator. Numerical code is generic over [`Real`] (`f32` or
//! `f64`); the `*64` aliases below are what most callers want.

pub mod allocation;
pub mod clifford;
pub mod constructions;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod grouping;
pub mod hamiltonian;
pub mod pauli;
pub mod repacking;
pub mod rng;
pub mod scalar;
pub mod simulator;

pub use allocation::{
    alloc_l1, alloc_l2, alloc_optimize, alloc_uniform, min_variance_disjoint, round_allocation, AllocOptions,
    OptimizedAllocation,
};
pub use clifford::{diagonalize, is_z_diagonal, CliffordCircuit, Diagonalizer, Gate, Tableau};
pub use constructions::{
    build_theorem1, canonical_groupings, theorem1_variances, CanonicalGroupings, Theorem1Instance, Theorem1Label,
    Theorem1Variances,
};
pub use error::{Error, Result};
pub use estimator::{
    empirical_energy, estimator_variance, heuristic_weights, measurement_complexity, optimal_weights,
    shot_weighted_variance, worst_case_bound, EstimatorWeights, IntegerAllocation, Moments, MomentsFlavor,
    ShotAllocation, TabulatedMoments, VarianceParts, WorstCase, ZeroCovariance,
};
pub use grouping::{sorted_insertion, validate_grouping, CommutationOracle, Cover, Grouping, Violation};
pub use hamiltonian::{
    gen_hubbard_spinless_2xn, gen_ising_all_to_all, gen_random, parse_hamiltonian, write_hamiltonian,
    AbstractHamiltonian, Hamiltonian, Term,
};
pub use pauli::{Pauli, PauliString, Phase, Sign, SignedPauli};
pub use repacking::{
    adhoc_repack, complete_to_maximal, is_maximal, is_proper_refinement, is_refinement, one_step_delta,
    posthoc_repack, posthoc_repack_synthesized, OneStepDelta, RepackedGrouping,
};
pub use scalar::Real;
pub use simulator::{
    exact_moments, exact_moments_for_cover, ising_witness_state, product_state, product_state_seeded,
    variance_covariance_split,
    GroupSampleRecord, GroupSampler, ProductState, StateVector, VarianceSplit,
};

pub type Hamiltonian64 = Hamiltonian<f64>;
pub type Hamiltonian32 = Hamiltonian<f32>;
pub type AbstractHamiltonian64 = AbstractHamiltonian<f64>;
pub type StateVector64 = StateVector<f64>;
pub type StateVector32 = StateVector<f32>;
pub type ShotAllocation64 = ShotAllocation<f64>;
pub type EstimatorWeights64 = EstimatorWeights<f64>;
pub type TabulatedMoments64 = TabulatedMoments<f64>;
