//! Seeded random-state generators for tests, property suites and the CLI.
//!
//! All generators are deterministic functions of (parameters, seed); seeds
//! feed a counter-based generator so parallel batches stay reproducible.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CoherenceError, Result};
use crate::formation::{UniformDecomposition, UniformTerm};
use crate::state::{DensityMatrix, PureState};

#[derive(Debug, Clone, PartialEq)]
pub enum Ensemble {
    /// Ginibre G G† / Tr, full rank almost surely; quintessential
    /// coherence 0 with probability 1.
    HilbertSchmidt,
    /// Haar-random state vector projector.
    Pure,
    /// Pure blocks of the prescribed sizes embedded on disjoint index
    /// sets with random weights: the one ensemble with Q > 0.
    BlockStructured(Vec<usize>),
    /// Random Hermitian off-diagonals scaled under a dominant diagonal.
    DiagonallyDominant,
}

impl Ensemble {
    pub fn parse(name: &str) -> Result<Self> {
        if name == "hilbert-schmidt" {
            return Ok(Ensemble::HilbertSchmidt);
        }
        if name == "pure" {
            return Ok(Ensemble::Pure);
        }
        if name == "diagonally-dominant" {
            return Ok(Ensemble::DiagonallyDominant);
        }
        if let Some(profile) = name.strip_prefix("block-structured:") {
            let sizes: std::result::Result<Vec<usize>, _> =
                profile.split(',').map(|s| s.trim().parse()).collect();
            match sizes {
                Ok(v) if !v.is_empty() && v.iter().all(|&s| s >= 1) => {
                    return Ok(Ensemble::BlockStructured(v))
                }
                _ => {}
            }
        }
        Err(CoherenceError::InvalidParameter(format!(
            "unknown ensemble '{name}' (try hilbert-schmidt, pure, \
             block-structured:2,1, diagonally-dominant)"
        )))
    }
}

pub fn sample(ensemble: &Ensemble, dim: usize, seed: u64) -> Result<DensityMatrix> {
    match ensemble {
        Ensemble::HilbertSchmidt => Ok(hilbert_schmidt(dim, seed)),
        Ensemble::Pure => Ok(DensityMatrix::from_pure(&haar_pure(dim, seed))),
        Ensemble::BlockStructured(profile) => block_structured(dim, profile, seed),
        Ensemble::DiagonallyDominant => Ok(diagonally_dominant(dim, seed)),
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gaussian_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre-induced (Hilbert-Schmidt) random density matrix.
pub fn hilbert_schmidt(dim: usize, seed: u64) -> DensityMatrix {
    let mut rng = rng_for(seed);
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian_complex(&mut rng));
    let m = &g * g.adjoint();
    let trace = m.trace().re;
    DensityMatrix::from_entries(m / Complex64::new(trace, 0.0)).expect("Ginibre product is a state")
}

/// Haar-random unit vector.
pub fn haar_pure(dim: usize, seed: u64) -> PureState {
    let mut rng = rng_for(seed);
    let v: Vec<Complex64> = (0..dim).map(|_| gaussian_complex(&mut rng)).collect();
    PureState::normalized(v).expect("Gaussian vector is nonzero")
}

/// Random coherent pure state supported on the given indices (nonzero
/// amplitudes everywhere on the support).
fn random_block_vector(rng: &mut ChaCha8Rng, dim: usize, support: &[usize]) -> DVector<Complex64> {
    let mut v = DVector::<Complex64>::zeros(dim);
    loop {
        for &i in support {
            v[i] = gaussian_complex(rng);
        }
        if support.iter().all(|&i| v[i].norm() > 0.05) {
            break;
        }
    }
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

/// A state whose clique partition has the prescribed block-size profile:
/// pure states on disjoint index sets mixed with Dirichlet weights.
/// Every block of size at least 2 contributes distillable coherence.
pub fn block_structured(dim: usize, profile: &[usize], seed: u64) -> Result<DensityMatrix> {
    let total: usize = profile.iter().sum();
    if total > dim || profile.contains(&0) {
        return Err(CoherenceError::InvalidParameter(format!(
            "block profile {profile:?} does not fit in dimension {dim}"
        )));
    }
    let mut rng = rng_for(seed);
    // random disjoint supports over a shuffled index set
    let mut indices: Vec<usize> = (0..dim).collect();
    for i in (1..dim).rev() {
        let j = rng.gen_range(0..=i);
        indices.swap(i, j);
    }
    let mut cursor = 0;
    let mut weights: Vec<f64> = (0..profile.len())
        .map(|_| -(rng.gen_range(0.0f64..1.0).max(1e-9)).ln() + 0.05)
        .collect();
    let wsum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= wsum;
    }
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for (b, &size) in profile.iter().enumerate() {
        let mut support = indices[cursor..cursor + size].to_vec();
        support.sort_unstable();
        cursor += size;
        let v = random_block_vector(&mut rng, dim, &support);
        for &i in &support {
            for &j in &support {
                m[(i, j)] += Complex64::new(weights[b], 0.0) * v[i] * v[j].conj();
            }
        }
    }
    DensityMatrix::from_entries(m)
}

/// Diagonally dominant random state: every diagonal entry dominates its
/// absolute off-diagonal row sum with a small random margin.
pub fn diagonally_dominant(dim: usize, seed: u64) -> DensityMatrix {
    let mut rng = rng_for(seed);
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        for j in (i + 1)..dim {
            // keep some entries exactly zero to vary the support pattern
            if rng.gen_bool(0.75) {
                let z = gaussian_complex(&mut rng) * Complex64::new(0.2, 0.0);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
    }
    for i in 0..dim {
        let row: f64 = (0..dim).filter(|&j| j != i).map(|j| m[(i, j)].norm()).sum();
        m[(i, i)] = Complex64::new(row + rng.gen_range(0.01..0.5), 0.0);
    }
    let trace = m.trace().re;
    DensityMatrix::from_entries(m / Complex64::new(trace, 0.0))
        .expect("diagonally dominant Hermitian matrix is a state")
}

/// A random mixture of uniformly coherent states together with its
/// generating decomposition, for membership and monotonicity suites.
/// Supports are singletons, pairs and (optionally) one larger set.
pub fn co_u_mixture(
    dim: usize,
    n_terms: usize,
    allow_large: bool,
    seed: u64,
) -> (DensityMatrix, UniformDecomposition) {
    let mut rng = rng_for(seed);
    let mut terms: Vec<UniformTerm> = Vec::with_capacity(n_terms);
    let mut weights: Vec<f64> = (0..n_terms)
        .map(|_| -(rng.gen_range(0.0f64..1.0).max(1e-9)).ln() + 0.05)
        .collect();
    let wsum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= wsum;
    }
    for (t, &w) in weights.iter().enumerate() {
        let size = if t == 0 {
            1 // guarantee some incoherent weight
        } else if allow_large && t == 1 && dim > 2 {
            rng.gen_range(3..=dim)
        } else {
            2
        };
        let mut support = Vec::new();
        while support.len() < size {
            let i = rng.gen_range(0..dim);
            if !support.contains(&i) {
                support.push(i);
            }
        }
        support.sort_unstable();
        let mut phases: Vec<f64> = (0..size)
            .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
            .collect();
        phases[0] = 0.0;
        terms.push(UniformTerm {
            weight: w,
            support,
            phases,
        });
    }
    let dec = UniformDecomposition {
        terms,
        residual: 0.0,
    };
    let m = dec.reconstruction(dim);
    let rho = DensityMatrix::from_entries(m).expect("mixture of pure states is a state");
    (rho, dec)
}
