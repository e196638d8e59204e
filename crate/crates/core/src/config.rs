/// Numerical tolerances and resource caps.
///
/// The edge test `|R_ij| = 1` is a measure-zero equality; states built in
/// tests hit it to machine precision, and the block-purity assertion
/// catches misclassification when `tol_edge` is set too loose.
#[derive(Debug, Clone, Copy)]
pub struct StructureConfig {
    /// An off-diagonal entry of the comparison matrix is an edge when
    /// `|R_ij| >= 1 - tol_edge`.
    pub tol_edge: f64,
    /// Diagonal entries at or below this are treated as unsupported.
    pub diag_cut: f64,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            tol_edge: TOL_EDGE,
            diag_cut: DIAG_CUT,
        }
    }
}

pub const TOL_EDGE: f64 = 1e-9;
pub const DIAG_CUT: f64 = 1e-12;

/// Hermiticity / trace tolerance for state validation.
pub const TOL_HERM: f64 = 1e-10;
/// Eigenvalues in [-TOL_PSD, 0) are clamped to 0; anything lower fails
/// validation.
pub const TOL_PSD: f64 = 1e-10;
/// Eigenvalues below this are treated as exact zeros in entropies and
/// support counts.
pub const EIG_ZERO: f64 = 1e-12;
/// Pure-state support threshold on amplitude modulus.
pub const AMP_ZERO: f64 = 1e-12;
/// Second-largest block eigenvalue allowed by the clique purity check.
pub const TOL_PURITY: f64 = 1e-8;

/// Largest product dimension `tensor` will build.
pub const TENSOR_CAP: usize = 4096;
/// Largest number of k-subsets the exact mu_k enumeration will visit.
pub const MU_ENUM_CAP: u128 = 2_000_000;
/// Largest dimension for exhaustive conditioning-set enumeration.
pub const V_EPS_DIM_CAP: usize = 16;
/// Largest support for exhaustive classical V_eps subset enumeration.
pub const CLASSICAL_EXHAUSTIVE_CAP: usize = 22;
/// Largest number of product-distribution atoms materialised by the
/// classical machinery (exact mode); greedy beyond.
pub const ATOMS_CAP: usize = 2_000_000;
/// Dilution plan search cap on the number of produced copies N.
pub const DILUTION_SEARCH_CAP: u64 = 1_000_000;
