//! Validated density-matrix arithmetic: construction, entropy, distances,
//! tensor products, dephasing, partial trace.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{AMP_ZERO, EIG_ZERO, TENSOR_CAP, TOL_HERM, TOL_PSD};
use crate::eigen;
use crate::error::{CoherenceError, Result, Violation};

/// A validated d-dimensional quantum state in the incoherent basis.
///
/// Invariants enforced at construction: Hermitian within 1e-10 (the stored
/// matrix is the symmetrised (M + M†)/2), unit trace within 1e-10, and
/// positive semidefinite with eigenvalues above -1e-10.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_entries(entries: DMatrix<Complex64>) -> Result<Self> {
        let dim = entries.nrows();
        let mut violations = Vec::new();
        if entries.ncols() != dim {
            violations.push(Violation::BadShape {
                expected: dim,
                got: entries.ncols(),
            });
            return Err(CoherenceError::InvalidState(violations));
        }

        let mut max_asym = 0.0f64;
        for i in 0..dim {
            for j in i..dim {
                let asym = (entries[(i, j)] - entries[(j, i)].conj()).norm();
                max_asym = max_asym.max(asym);
            }
        }
        if max_asym > TOL_HERM {
            violations.push(Violation::NotHermitian {
                max_asymmetry: max_asym,
            });
        }

        // Symmetrise to absorb serialization round-off before the
        // eigendecomposition-based checks.
        let sym = (&entries + entries.adjoint()) * Complex64::new(0.5, 0.0);

        let trace = sym.trace().re;
        if (trace - 1.0).abs() > TOL_HERM {
            violations.push(Violation::TraceNotOne { trace });
        }

        if violations.is_empty() {
            let min_eig = *eigen::eigvals(&sym).first().expect("dims checked nonempty");
            if min_eig < -TOL_PSD {
                violations.push(Violation::NotPositiveSemidefinite {
                    min_eigenvalue: min_eig,
                });
            }
        }

        if violations.is_empty() {
            Ok(DensityMatrix { dim, entries: sym })
        } else {
            Err(CoherenceError::InvalidState(violations))
        }
    }

    pub fn from_rows(dim: usize, rows: &[Complex64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(CoherenceError::InvalidState(vec![Violation::BadShape {
                expected: dim * dim,
                got: rows.len(),
            }]));
        }
        Self::from_entries(DMatrix::from_row_slice(dim, dim, rows))
    }

    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        let c: Vec<Complex64> = rows.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        Self::from_rows(dim, &c)
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        let mut m = DMatrix::zeros(d, d);
        for (i, &p) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(p, 0.0);
        }
        Self::from_entries(m)
    }

    pub fn from_pure(psi: &PureState) -> Self {
        let d = psi.dim();
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = psi.amplitudes()[i] * psi.amplitudes()[j].conj();
            }
        }
        DensityMatrix { dim: d, entries: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let p = 1.0 / dim as f64;
        DensityMatrix::from_diagonal(&vec![p; dim]).expect("uniform diagonal is a state")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.entries[(i, i)].re).collect()
    }

    /// Eigenvalues, ascending, with tiny negatives clamped to 0.
    pub fn eigenvalues(&self) -> Vec<f64> {
        eigen::eigvals(&self.entries)
            .into_iter()
            .map(|v| if v < 0.0 { 0.0 } else { v })
            .collect()
    }

    pub fn purity(&self) -> f64 {
        (&self.entries * &self.entries).trace().re
    }

    /// Rank-1 check: second-largest eigenvalue at most `tol`.
    pub fn is_pure(&self, tol: f64) -> bool {
        let vals = self.eigenvalues();
        self.dim == 1 || vals[self.dim - 2] <= tol
    }
}

/// A unit-norm state vector in the incoherent basis.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    dim: usize,
    amplitudes: DVector<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > TOL_HERM {
            return Err(CoherenceError::InvalidPureState(vec![
                Violation::NotNormalized { norm },
            ]));
        }
        Ok(PureState { dim, amplitudes: v })
    }

    /// Normalises the given vector; errors on (numerically) zero input.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if norm <= AMP_ZERO {
            return Err(CoherenceError::InvalidPureState(vec![
                Violation::NotNormalized { norm },
            ]));
        }
        let dim = v.len();
        Ok(PureState {
            dim,
            amplitudes: v / Complex64::new(norm, 0.0),
        })
    }

    /// The uniformly coherent state with equal moduli 1/sqrt(|support|)
    /// and the given phases on `support` (phases default to 0 when empty).
    pub fn uniform(dim: usize, support: &[usize], phases: &[f64]) -> Result<Self> {
        if support.is_empty() || support.iter().any(|&j| j >= dim) {
            return Err(CoherenceError::InvalidParameter(format!(
                "support {support:?} not inside [0, {dim})"
            )));
        }
        let k = support.len() as f64;
        let amp = 1.0 / k.sqrt();
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        for (idx, &j) in support.iter().enumerate() {
            let theta = phases.get(idx).copied().unwrap_or(0.0);
            v[j] = Complex64::from_polar(amp, theta);
        }
        PureState::new(v)
    }

    /// Basis vector |i>.
    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![Complex64::new(0.0, 0.0); dim];
        v[i] = Complex64::new(1.0, 0.0);
        PureState::new(v).expect("basis vector is normalised")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amplitudes
    }

    /// Indices with |amplitude| above 1e-12.
    pub fn support(&self) -> Vec<usize> {
        (0..self.dim)
            .filter(|&i| self.amplitudes[i].norm() > AMP_ZERO)
            .collect()
    }

    /// True when all nonzero amplitudes share the modulus 1/sqrt(k).
    pub fn is_uniformly_coherent(&self, tol: f64) -> bool {
        let supp = self.support();
        if supp.is_empty() {
            return false;
        }
        let target = 1.0 / (supp.len() as f64).sqrt();
        supp.iter()
            .all(|&i| (self.amplitudes[i].norm() - target).abs() <= tol)
    }
}

/// The dephasing map: erase all off-diagonal entries.
pub fn dephase(rho: &DensityMatrix) -> DensityMatrix {
    let d = rho.dim();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(rho.entry(i, i).re, 0.0);
    }
    DensityMatrix { dim: d, entries: m }
}

/// Shannon entropy (bits) of a nonnegative vector; entries below 1e-12 are
/// treated as exact zeros.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > EIG_ZERO {
            h -= p * p.log2();
        }
    }
    h
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    shannon_entropy(&rho.eigenvalues())
}

/// Trace-norm distance ||a - b||_1.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(CoherenceError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let diff = a.entries() - b.entries();
    Ok(eigen::eigvals(&diff).iter().map(|v| v.abs()).sum())
}

/// Kronecker product with index convention (i, l) -> i * d_b + l.
pub fn tensor(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    let d = a.dim() * b.dim();
    if d > TENSOR_CAP {
        return Err(CoherenceError::CapExceeded {
            what: "tensor product dimension",
            required: d as u128,
            cap: TENSOR_CAP as u128,
        });
    }
    let m = a.entries().kronecker(b.entries());
    Ok(DensityMatrix { dim: d, entries: m })
}

pub fn tensor_power(rho: &DensityMatrix, n: u32) -> Result<DensityMatrix> {
    if n == 0 {
        return Err(CoherenceError::InvalidParameter(
            "tensor power requires n >= 1".into(),
        ));
    }
    let mut out = rho.clone();
    for _ in 1..n {
        out = tensor(&out, rho)?;
    }
    Ok(out)
}

/// <psi| rho |psi>, a real value in [0, 1].
pub fn overlap_with_pure(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    if rho.dim() != psi.dim() {
        return Err(CoherenceError::DimensionMismatch {
            left: rho.dim(),
            right: psi.dim(),
        });
    }
    let v = psi.amplitudes();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            acc += v[i].conj() * rho.entry(i, j) * v[j];
        }
    }
    Ok(acc.re.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace of a bipartite state with dims (d_a, d_b).
pub fn partial_trace(
    rho: &DensityMatrix,
    dims: (usize, usize),
    keep: Subsystem,
) -> Result<DensityMatrix> {
    let (da, db) = dims;
    if da * db != rho.dim() {
        return Err(CoherenceError::DimensionMismatch {
            left: da * db,
            right: rho.dim(),
        });
    }
    let out_dim = match keep {
        Subsystem::A => da,
        Subsystem::B => db,
    };
    let mut m = DMatrix::zeros(out_dim, out_dim);
    match keep {
        Subsystem::A => {
            for i in 0..da {
                for j in 0..da {
                    let mut s = Complex64::new(0.0, 0.0);
                    for l in 0..db {
                        s += rho.entry(i * db + l, j * db + l);
                    }
                    m[(i, j)] = s;
                }
            }
        }
        Subsystem::B => {
            for l in 0..db {
                for r in 0..db {
                    let mut s = Complex64::new(0.0, 0.0);
                    for i in 0..da {
                        s += rho.entry(i * db + l, i * db + r);
                    }
                    m[(l, r)] = s;
                }
            }
        }
    }
    Ok(DensityMatrix {
        dim: out_dim,
        entries: m,
    })
}

/// JSON wire format: `{"dim": d, "re": [[...]], "im": [[...]]}`.
#[derive(Serialize, Deserialize)]
pub struct StateJson {
    pub dim: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl DensityMatrix {
    pub fn to_json(&self) -> StateJson {
        let d = self.dim;
        let re = (0..d)
            .map(|i| (0..d).map(|j| self.entries[(i, j)].re).collect())
            .collect();
        let im = (0..d)
            .map(|i| (0..d).map(|j| self.entries[(i, j)].im).collect())
            .collect();
        StateJson { dim: d, re, im }
    }

    pub fn from_json(json: &StateJson) -> Result<Self> {
        let d = json.dim;
        let shape_ok = json.re.len() == d
            && json.im.len() == d
            && json.re.iter().all(|r| r.len() == d)
            && json.im.iter().all(|r| r.len() == d);
        if !shape_ok {
            return Err(CoherenceError::InvalidState(vec![Violation::BadShape {
                expected: d,
                got: json.re.len().min(json.im.len()),
            }]));
        }
        let mut m = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = Complex64::new(json.re[i][j], json.im[i][j]);
            }
        }
        Self::from_entries(m)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("state serialises")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let parsed: StateJson = serde_json::from_str(s)?;
        Self::from_json(&parsed)
    }
}
