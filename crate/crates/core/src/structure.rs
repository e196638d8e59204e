//! Distillation structure of a state: the comparison matrix R, its
//! modulus-1 edge graph, the clique partition with pure blocks, the
//! trimmed state, and the measures Q, C_r, lambda, eta, l.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::{StructureConfig, TOL_PURITY};
use crate::error::{CoherenceError, Result};
use crate::state::{dephase, shannon_entropy, von_neumann_entropy, DensityMatrix, PureState};

/// R = D^{-1/2} rho D^{-1/2} with D = diag(rho), inverted on its support.
///
/// Supported diagonal entries are set to exactly 1; rows and columns of
/// unsupported indices are zero.
#[derive(Debug, Clone)]
pub struct ComparisonMatrix {
    dim: usize,
    entries: DMatrix<Complex64>,
    support_mask: Vec<bool>,
    tol_edge: f64,
}

impl ComparisonMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn support_mask(&self) -> &[bool] {
        &self.support_mask
    }

    pub fn supported_indices(&self) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.support_mask[i]).collect()
    }

    pub fn tol_edge(&self) -> f64 {
        self.tol_edge
    }

    /// Edge predicate |R_ij| >= 1 - tol_edge on supported indices.
    pub fn is_edge(&self, i: usize, j: usize) -> bool {
        self.support_mask[i]
            && self.support_mask[j]
            && self.entries[(i, j)].norm() >= 1.0 - self.tol_edge
    }
}

pub fn comparison_matrix(rho: &DensityMatrix, cfg: &StructureConfig) -> ComparisonMatrix {
    let d = rho.dim();
    let diag = rho.diagonal();
    let support_mask: Vec<bool> = diag.iter().map(|&p| p > cfg.diag_cut).collect();
    let inv_sqrt: Vec<f64> = diag
        .iter()
        .zip(&support_mask)
        .map(|(&p, &s)| if s { 1.0 / p.sqrt() } else { 0.0 })
        .collect();
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            if !support_mask[i] || !support_mask[j] {
                continue;
            }
            if i == j {
                m[(i, i)] = Complex64::new(1.0, 0.0);
            } else {
                m[(i, j)] = rho.entry(i, j) * (inv_sqrt[i] * inv_sqrt[j]);
            }
        }
    }
    ComparisonMatrix {
        dim: d,
        entries: m,
        support_mask,
        tol_edge: cfg.tol_edge,
    }
}

/// Union-find over the thresholded edge set; connected components are the
/// clique blocks.
struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != node {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] = self.rank[a].saturating_add(1);
        }
    }
}

/// The family {I_s} of disjoint blocks covering the supported indices,
/// with block weights P(s) = Tr[Pi_s rho] and the normalised compressed
/// block states (each certified pure).
#[derive(Debug, Clone)]
pub struct CliquePartition {
    blocks: Vec<Vec<usize>>,
    block_weights: Vec<f64>,
    block_states: Vec<DensityMatrix>,
}

impl CliquePartition {
    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_weights(&self) -> &[f64] {
        &self.block_weights
    }

    pub fn block_states(&self) -> &[DensityMatrix] {
        &self.block_states
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block label containing index i, if i is supported.
    pub fn block_of(&self, i: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&i))
    }

    pub fn max_block_size(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).max().unwrap_or(0)
    }

    /// Entropy of the dephased normalised block s, in bits. For a pure
    /// block this is the block's entropy of coherence.
    pub fn block_dephased_entropy(&self, s: usize) -> f64 {
        shannon_entropy(&self.block_states[s].diagonal())
    }
}

/// Connected components of the modulus-1 edge graph, with the purity
/// certificate on every block. A block whose conditioned state is not
/// pure signals that tol_edge misclassified an edge.
pub fn edge_graph_and_cliques(
    r: &ComparisonMatrix,
    rho: &DensityMatrix,
) -> Result<CliquePartition> {
    let d = r.dim();
    let mut dsu = DisjointSet::new(d);
    for i in 0..d {
        for j in (i + 1)..d {
            if r.is_edge(i, j) {
                dsu.union(i, j);
            }
        }
    }
    let mut by_root: Vec<Vec<usize>> = vec![Vec::new(); d];
    for i in r.supported_indices() {
        let root = dsu.find(i);
        by_root[root].push(i);
    }
    let mut blocks: Vec<Vec<usize>> = by_root.into_iter().filter(|b| !b.is_empty()).collect();
    blocks.sort_by_key(|b| b[0]);

    let mut block_weights = Vec::with_capacity(blocks.len());
    let mut block_states = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let k = block.len();
        let mut sub = DMatrix::zeros(k, k);
        let mut weight = 0.0;
        for (a, &i) in block.iter().enumerate() {
            weight += rho.entry(i, i).re;
            for (b, &j) in block.iter().enumerate() {
                sub[(a, b)] = rho.entry(i, j);
            }
        }
        let normalized =
            DensityMatrix::from_entries(sub / Complex64::new(weight, 0.0)).map_err(|_| {
                CoherenceError::ImpureBlock {
                    block: block.clone(),
                    second_eigenvalue: f64::NAN,
                }
            })?;
        if !normalized.is_pure(TOL_PURITY) {
            let vals = normalized.eigenvalues();
            return Err(CoherenceError::ImpureBlock {
                block: block.clone(),
                second_eigenvalue: vals[k - 2],
            });
        }
        block_weights.push(weight);
        block_states.push(normalized);
    }

    Ok(CliquePartition {
        blocks,
        block_weights,
        block_states,
    })
}

/// The trimmed state: rho restricted to its clique blocks. Block-diagonal,
/// PSD, with the same diagonal as rho.
pub fn trimmed_state(rho: &DensityMatrix, part: &CliquePartition) -> DensityMatrix {
    let d = rho.dim();
    let mut block_label = vec![usize::MAX; d];
    for (s, block) in part.blocks().iter().enumerate() {
        for &i in block {
            block_label[i] = s;
        }
    }
    let mut m = DMatrix::zeros(d, d);
    for i in 0..d {
        m[(i, i)] = Complex64::new(rho.entry(i, i).re, 0.0);
        for j in 0..d {
            if i != j && block_label[i] != usize::MAX && block_label[i] == block_label[j] {
                m[(i, j)] = rho.entry(i, j);
            }
        }
    }
    DensityMatrix::from_entries(m).expect("trimmed state is a valid state")
}

/// Quintessential coherence Q = S(diag(rho)) - S(trimmed rho), in bits.
/// This is the SIO/PIO distillable coherence; it is 0 exactly when every
/// block is a singleton.
pub fn quintessential_coherence(rho: &DensityMatrix, cfg: &StructureConfig) -> Result<f64> {
    let r = comparison_matrix(rho, cfg);
    let part = edge_graph_and_cliques(&r, rho)?;
    Ok(quintessential_from_partition(rho, &part))
}

pub fn quintessential_from_partition(rho: &DensityMatrix, part: &CliquePartition) -> f64 {
    let trimmed = trimmed_state(rho, part);
    von_neumann_entropy(&dephase(rho)) - von_neumann_entropy(&trimmed)
}

/// Relative entropy of coherence C_r = S(diag(rho)) - S(rho), in bits.
pub fn relative_entropy_of_coherence(rho: &DensityMatrix) -> f64 {
    von_neumann_entropy(&dephase(rho)) - von_neumann_entropy(rho)
}

/// Entropy of coherence of a pure state: S(diag(|phi><phi|)).
pub fn entropy_of_coherence(psi: &PureState) -> f64 {
    let probs: Vec<f64> = (0..psi.dim())
        .map(|i| psi.amplitudes()[i].norm_sqr())
        .collect();
    shannon_entropy(&probs)
}

/// (lambda, eta): the largest off-diagonal |R_ij| strictly below the edge
/// threshold, and the overall largest (maximal coherence). Both 0 when no
/// off-diagonal moduli exist.
pub fn lambda_and_eta(r: &ComparisonMatrix) -> (f64, f64) {
    let mut lambda = 0.0f64;
    let mut eta = 0.0f64;
    let threshold = 1.0 - r.tol_edge();
    let supported = r.supported_indices();
    for (a, &i) in supported.iter().enumerate() {
        for &j in &supported[a + 1..] {
            let m = r.entry(i, j).norm();
            eta = eta.max(m);
            if m < threshold {
                lambda = lambda.max(m);
            }
        }
    }
    (lambda, eta)
}

/// l: the maximum number of modulus-1 entries in a row of R (diagonal
/// included), equal to the largest clique block size.
pub fn max_pure_block_size(r: &ComparisonMatrix) -> usize {
    let supported = r.supported_indices();
    supported
        .iter()
        .map(|&i| supported.iter().filter(|&&j| r.is_edge(i, j)).count())
        .max()
        .unwrap_or(0)
}
