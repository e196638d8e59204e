//! The mu_k monotone family: log of the largest operator norm over k x k
//! principal submatrices of the comparison matrix, its max-relative-entropy
//! cross-check, Gershgorin and overlap bounds, restricted smoothing over
//! conditioning sets, and the composed converse bound on distillation
//! rates.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::classical::{joint_from_state, tweaked_hmax_columns, ColumnAtoms};
use crate::config::{StructureConfig, MU_ENUM_CAP, V_EPS_DIM_CAP};
use crate::eigen;
use crate::error::{CoherenceError, Result};
use crate::par;
use crate::state::{dephase, trace_distance, DensityMatrix, PureState};
use crate::structure::{
    comparison_matrix, edge_graph_and_cliques, lambda_and_eta, max_pure_block_size,
    ComparisonMatrix,
};

const CHUNK: u128 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuMethod {
    ExactEnumeration,
    GreedyLowerBound,
}

/// One evaluated monotone: the value in bits, the optimal (or best-found)
/// index set, and how it was obtained.
#[derive(Debug, Clone, Serialize)]
pub struct MuResult {
    pub value: f64,
    pub witness: Vec<usize>,
    pub method: MuMethod,
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
    }
    out
}

/// Lexicographic unranking in the combinatorial number system.
fn unrank_combination(mut rank: u128, n: usize, k: usize) -> Vec<usize> {
    let mut combo = Vec::with_capacity(k);
    let mut v = 0usize;
    for i in 0..k {
        loop {
            let c = binom(n - 1 - v, k - 1 - i);
            if rank < c {
                combo.push(v);
                v += 1;
                break;
            }
            rank -= c;
            v += 1;
        }
    }
    combo
}

/// In-place lexicographic successor; false when exhausted.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn top_eig_of_principal_submatrix(r: &ComparisonMatrix, idx: &[usize]) -> f64 {
    let k = idx.len();
    if k == 1 {
        return 1.0;
    }
    let mut sub = DMatrix::<Complex64>::zeros(k, k);
    for (a, &i) in idx.iter().enumerate() {
        for (b, &j) in idx.iter().enumerate() {
            sub[(a, b)] = r.entry(i, j);
        }
    }
    eigen::top_eigval(&sub)
}

/// Gershgorin upper estimate on the top eigenvalue of a principal
/// submatrix: 1 + the largest off-diagonal absolute row sum.
fn gershgorin_radius(r: &ComparisonMatrix, idx: &[usize]) -> f64 {
    let mut worst = 0.0f64;
    for &i in idx {
        let mut row = 0.0;
        for &j in idx {
            if i != j {
                row += r.entry(i, j).norm();
            }
        }
        worst = worst.max(row);
    }
    1.0 + worst
}

struct ChunkBest {
    eig: f64,
    witness: Vec<usize>,
}

fn enumerate_chunk(
    r: &ComparisonMatrix,
    supported: &[usize],
    k: usize,
    start_rank: u128,
    len: u128,
) -> ChunkBest {
    let s = supported.len();
    let mut combo = unrank_combination(start_rank, s, k);
    let mut idx: Vec<usize> = combo.iter().map(|&c| supported[c]).collect();
    // every principal submatrix has unit diagonal, so 1 is a free lower
    // bound for the pruner
    let mut best = ChunkBest {
        eig: 1.0,
        witness: idx.clone(),
    };
    let mut remaining = len;
    loop {
        if gershgorin_radius(r, &idx) > best.eig {
            let eig = top_eig_of_principal_submatrix(r, &idx);
            if eig > best.eig {
                best.eig = eig;
                best.witness = idx.clone();
            }
        }
        remaining -= 1;
        if remaining == 0 || !next_combination(&mut combo, s) {
            break;
        }
        for (slot, &c) in combo.iter().enumerate() {
            idx[slot] = supported[c];
        }
    }
    best
}

fn mu_exact(r: &ComparisonMatrix, k: usize) -> MuResult {
    let supported = r.supported_indices();
    let s = supported.len();
    let k_eff = k.min(s);
    if k_eff <= 1 {
        return MuResult {
            value: 0.0,
            witness: supported.into_iter().take(1).collect(),
            method: MuMethod::ExactEnumeration,
        };
    }
    let total = binom(s, k_eff);
    let chunks = total.div_ceil(CHUNK) as usize;
    let bests = par::map_range_auto(chunks, |c| {
        let start = c as u128 * CHUNK;
        let len = CHUNK.min(total - start);
        enumerate_chunk(r, &supported, k_eff, start, len)
    });
    // order-fixed reduction: later chunks win only on strict improvement
    let mut best_eig = 1.0f64;
    let mut witness = bests.first().map(|b| b.witness.clone()).unwrap_or_default();
    for b in &bests {
        if b.eig > best_eig {
            best_eig = b.eig;
            witness = b.witness.clone();
        }
    }
    MuResult {
        value: best_eig.max(1.0).log2(),
        witness,
        method: MuMethod::ExactEnumeration,
    }
}

fn mu_greedy(r: &ComparisonMatrix, k: usize) -> MuResult {
    let supported = r.supported_indices();
    let k_eff = k.min(supported.len());
    if k_eff <= 1 {
        return MuResult {
            value: 0.0,
            witness: supported.into_iter().take(1).collect(),
            method: MuMethod::GreedyLowerBound,
        };
    }
    // seed with the strongest pair, then grow by the index that maximises
    // the new top eigenvalue
    let mut seed = (supported[0], supported[0], -1.0f64);
    for (a, &i) in supported.iter().enumerate() {
        for &j in &supported[a + 1..] {
            let m = r.entry(i, j).norm();
            if m > seed.2 {
                seed = (i, j, m);
            }
        }
    }
    let mut idx = vec![seed.0, seed.1];
    let mut eig = top_eig_of_principal_submatrix(r, &idx);
    while idx.len() < k_eff {
        let candidates: Vec<usize> = supported
            .iter()
            .copied()
            .filter(|c| !idx.contains(c))
            .collect();
        let scored = par::map_collect_auto(candidates, |c| {
            let mut trial = idx.clone();
            trial.push(c);
            trial.sort_unstable();
            (top_eig_of_principal_submatrix(r, &trial), c)
        });
        let mut best = scored[0];
        for &s in &scored[1..] {
            if s.0 > best.0 {
                best = s;
            }
        }
        idx.push(best.1);
        idx.sort_unstable();
        eig = best.0;
    }
    MuResult {
        value: eig.max(1.0).log2(),
        witness: idx,
        method: MuMethod::GreedyLowerBound,
    }
}

/// mu_k: the maximum over index sets of size at most k of the log operator
/// norm of the corresponding principal submatrix of R. Exact while the
/// enumeration stays within the cap, certified greedy lower bound beyond.
pub fn mu_k(rho: &DensityMatrix, k: usize, cfg: &StructureConfig) -> Result<MuResult> {
    if k < 1 || k > rho.dim() {
        return Err(CoherenceError::InvalidParameter(format!(
            "k = {k} outside 1..={}",
            rho.dim()
        )));
    }
    let r = comparison_matrix(rho, cfg);
    Ok(mu_k_of_comparison(&r, k))
}

pub fn mu_k_of_comparison(r: &ComparisonMatrix, k: usize) -> MuResult {
    let s = r.supported_indices().len();
    let k_eff = k.min(s);
    if binom(s, k_eff) <= MU_ENUM_CAP {
        mu_exact(r, k)
    } else {
        mu_greedy(r, k)
    }
}

/// Exact-only variant: errors when the enumeration cap would be exceeded.
pub fn mu_k_exact(rho: &DensityMatrix, k: usize, cfg: &StructureConfig) -> Result<MuResult> {
    if k < 1 || k > rho.dim() {
        return Err(CoherenceError::InvalidParameter(format!(
            "k = {k} outside 1..={}",
            rho.dim()
        )));
    }
    let r = comparison_matrix(rho, cfg);
    let s = r.supported_indices().len();
    let total = binom(s, k.min(s));
    if total > MU_ENUM_CAP {
        return Err(CoherenceError::CapExceeded {
            what: "mu_k subset enumeration",
            required: total,
            cap: MU_ENUM_CAP,
        });
    }
    Ok(mu_exact(&r, k))
}

/// The whole profile mu_1..mu_d with witnesses and methods.
#[derive(Debug, Clone, Serialize)]
pub struct MonotoneProfile {
    pub values: Vec<f64>,
    pub witnesses: Vec<Vec<usize>>,
    pub methods: Vec<MuMethod>,
}

pub fn mu_profile(rho: &DensityMatrix, cfg: &StructureConfig) -> MonotoneProfile {
    let r = comparison_matrix(rho, cfg);
    let d = rho.dim();
    let results: Vec<MuResult> = (1..=d).map(|k| mu_k_of_comparison(&r, k)).collect();
    MonotoneProfile {
        values: results.iter().map(|x| x.value).collect(),
        witnesses: results.iter().map(|x| x.witness.clone()).collect(),
        methods: results.iter().map(|x| x.method).collect(),
    }
}

/// Max-relative entropy D_max(sigma || omega) = log2 || w^{-1/2} s w^{-1/2} ||
/// with the inverse taken on the support of omega. Infinite when sigma has
/// weight outside that support.
pub fn d_max(sigma: &DMatrix<Complex64>, omega_diag: &[f64], diag_cut: f64) -> f64 {
    let d = omega_diag.len();
    let mut sandwich = DMatrix::<Complex64>::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let supported = omega_diag[i] > diag_cut && omega_diag[j] > diag_cut;
            if supported {
                sandwich[(i, j)] =
                    sigma[(i, j)] / Complex64::new((omega_diag[i] * omega_diag[j]).sqrt(), 0.0);
            } else if sigma[(i, j)].norm() > 1e-13 {
                return f64::INFINITY;
            }
        }
    }
    eigen::top_eigval(&sandwich).max(0.0).log2()
}

/// Recompute mu_k through the max-relative-entropy route
/// max_I D_max(Pi_I rho Pi_I || diag(rho)); errors if it disagrees with
/// the direct route beyond 1e-8 (that signals a support-handling bug).
pub fn mu_dmax_crosscheck(rho: &DensityMatrix, k: usize, cfg: &StructureConfig) -> Result<f64> {
    let direct = mu_k(rho, k, cfg)?.value;
    let r = comparison_matrix(rho, cfg);
    let supported = r.supported_indices();
    let s = supported.len();
    let k_eff = k.min(s);
    let total = binom(s, k_eff);
    if total > MU_ENUM_CAP {
        return Err(CoherenceError::CapExceeded {
            what: "D_max subset enumeration",
            required: total,
            cap: MU_ENUM_CAP,
        });
    }
    let omega = dephase(rho).diagonal();
    let d = rho.dim();
    let mut combo: Vec<usize> = (0..k_eff).collect();
    let mut best = f64::NEG_INFINITY;
    loop {
        let mut sigma = DMatrix::<Complex64>::zeros(d, d);
        for &a in &combo {
            for &b in &combo {
                sigma[(supported[a], supported[b])] = rho.entry(supported[a], supported[b]);
            }
        }
        best = best.max(d_max(&sigma, &omega, cfg.diag_cut));
        if !next_combination(&mut combo, s) {
            break;
        }
    }
    let gap = (best - direct).abs();
    if gap > 1e-8 {
        return Err(CoherenceError::DmaxMismatch { gap });
    }
    Ok(best)
}

/// Gershgorin bound: mu_k <= log2[l + lambda (k - l)] for k >= l, and the
/// trivial log2 k for k < l.
pub fn gershgorin_bound(rho: &DensityMatrix, k: usize, cfg: &StructureConfig) -> Result<f64> {
    if k < 1 {
        return Err(CoherenceError::InvalidParameter("k must be >= 1".into()));
    }
    let r = comparison_matrix(rho, cfg);
    let (lambda, _) = lambda_and_eta(&r);
    let l = max_pure_block_size(&r);
    if k < l {
        Ok((k as f64).log2())
    } else {
        Ok((l as f64 + lambda * (k - l) as f64).log2())
    }
}

/// Overlap lower bound mu_d >= log2 d + log2 <Psi_d| rho |Psi_d> for any
/// maximally coherent Psi_d.
pub fn overlap_lower_bound(rho: &DensityMatrix, psi: &PureState) -> Result<f64> {
    let d = rho.dim();
    if psi.dim() != d || psi.support().len() != d || !psi.is_uniformly_coherent(1e-10) {
        return Err(CoherenceError::NotMaximallyCoherent { expected: d });
    }
    let overlap = crate::state::overlap_with_pure(rho, psi)?;
    Ok((d as f64).log2() + overlap.log2())
}

/// One conditioned member of the quantum smoothing set.
#[derive(Debug, Clone)]
pub struct VMember {
    pub indices: Vec<usize>,
    pub state: DensityMatrix,
    pub distance: f64,
}

/// V_eps(rho): conditionings Pi_I rho Pi_I / Tr[rho Pi_I] within trace
/// distance eps of rho. rho itself appears as the full-support member.
#[derive(Debug, Clone)]
pub struct VEpsilonSet {
    pub epsilon: f64,
    pub members: Vec<VMember>,
}

pub fn v_epsilon(rho: &DensityMatrix, eps: f64, cfg: &StructureConfig) -> Result<VEpsilonSet> {
    let diag = rho.diagonal();
    let supported: Vec<usize> = (0..rho.dim()).filter(|&i| diag[i] > cfg.diag_cut).collect();
    let s = supported.len();
    if s > V_EPS_DIM_CAP {
        return Err(CoherenceError::CapExceeded {
            what: "quantum conditioning-set enumeration",
            required: s as u128,
            cap: V_EPS_DIM_CAP as u128,
        });
    }
    let d = rho.dim();
    let masks: Vec<u64> = (1u64..(1u64 << s)).collect();
    let candidates = par::map_collect_auto(masks, |mask| {
        let indices: Vec<usize> = (0..s)
            .filter(|&b| mask >> b & 1 == 1)
            .map(|b| supported[b])
            .collect();
        let mass: f64 = indices.iter().map(|&i| diag[i]).sum();
        if mass <= 1e-14 {
            return None;
        }
        let mut m = DMatrix::<Complex64>::zeros(d, d);
        for &i in &indices {
            for &j in &indices {
                m[(i, j)] = rho.entry(i, j) / Complex64::new(mass, 0.0);
            }
        }
        let state = DensityMatrix::from_entries(m).ok()?;
        let distance = trace_distance(&state, rho).ok()?;
        if distance <= eps + 1e-12 {
            Some(VMember {
                indices,
                state,
                distance,
            })
        } else {
            None
        }
    });
    Ok(VEpsilonSet {
        epsilon: eps,
        members: candidates.into_iter().flatten().collect(),
    })
}

/// Restricted smoothed monotone: min of mu_k over the conditioning set.
/// This is the certified object the converse chain consumes; it upper
/// bounds the true ball-smoothed value and never exceeds mu_k(rho).
pub fn mu_k_smoothed_v(
    rho: &DensityMatrix,
    k: usize,
    eps: f64,
    cfg: &StructureConfig,
) -> Result<f64> {
    let set = v_epsilon(rho, eps, cfg)?;
    let values = par::map_collect_auto(set.members, |m| {
        mu_k(&m.state, k.min(m.state.dim()).max(1), cfg).map(|r| r.value)
    });
    let mut best = f64::INFINITY;
    for v in values {
        best = best.min(v?);
    }
    Ok(best)
}

/// A heuristic upper bound on the ball-smoothed monotone.
#[derive(Debug, Clone, Serialize)]
pub struct HeuristicBound {
    pub value: f64,
    /// Always true: the ball minimum is a nonconvex problem and this is
    /// only the best of the restricted minimum, the dephasing path and a
    /// seeded local descent.
    pub heuristic_upper_bound: bool,
}

pub fn mu_k_smoothed_ball(
    rho: &DensityMatrix,
    k: usize,
    eps: f64,
    seed: u64,
    cfg: &StructureConfig,
) -> Result<HeuristicBound> {
    let mut best = mu_k(rho, k, cfg)?.value;
    if eps > 0.0 {
        if let Ok(v) = mu_k_smoothed_v(rho, k, eps, cfg) {
            best = best.min(v);
        }
        // deterministic dephasing path: mixing toward diag(rho) scales all
        // off-diagonal comparison entries by (1 - t)
        let deph = dephase(rho);
        let full = trace_distance(rho, &deph)?;
        if full > 1e-14 {
            for frac in [1.0, 0.5] {
                let t = (eps / full).min(1.0) * frac;
                let mixed = mix(rho, &deph, t);
                if trace_distance(&mixed, rho)? <= eps + 1e-12 {
                    best = best.min(mu_k(&mixed, k, cfg)?.value);
                }
            }
        }
        // seeded local perturbations with PSD projection
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = rho.dim();
        for _ in 0..40 {
            let mut h = DMatrix::<Complex64>::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let z = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    if i == j {
                        h[(i, i)] = Complex64::new(z.re, 0.0);
                    } else {
                        h[(i, j)] = z;
                        h[(j, i)] = z.conj();
                    }
                }
            }
            let step = eps * rng.gen_range(0.1..0.9);
            let norm1: f64 = eigen::eigvals(&h).iter().map(|v| v.abs()).sum();
            let cand = rho.entries() + h * Complex64::new(step / norm1, 0.0);
            if let Some(proj) = project_to_state(&cand) {
                if trace_distance(&proj, rho)? <= eps + 1e-12 {
                    best = best.min(mu_k(&proj, k, cfg)?.value);
                }
            }
        }
    }
    Ok(HeuristicBound {
        value: best,
        heuristic_upper_bound: true,
    })
}

fn mix(a: &DensityMatrix, b: &DensityMatrix, t: f64) -> DensityMatrix {
    let m = a.entries() * Complex64::new(1.0 - t, 0.0) + b.entries() * Complex64::new(t, 0.0);
    DensityMatrix::from_entries(m).expect("convex mixture of states is a state")
}

fn project_to_state(m: &DMatrix<Complex64>) -> Option<DensityMatrix> {
    let sym = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let (vals, vecs) = eigen::eigh(&sym);
    let clamped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total <= 1e-12 {
        return None;
    }
    let d = sym.nrows();
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for (c, &v) in clamped.iter().enumerate() {
        let col = vecs.column(c);
        let scale = Complex64::new(v / total, 0.0);
        for i in 0..d {
            for j in 0..d {
                out[(i, j)] += scale * col[i] * col[j].conj();
            }
        }
    }
    DensityMatrix::from_entries(out).ok()
}

/// The composed converse bound on the smoothed monotone of a tensor power.
#[derive(Debug, Clone, Serialize)]
pub struct ConverseReport {
    /// Upper bound on mu^eps_{2^floor(rn)}(rho^{(x) n}) through the
    /// Gershgorin chain: log2[ L (1 - lambda) + lambda k ] with
    /// L = 2^{H~^{eps^2/4}}, capped by log2 k.
    pub bound: f64,
    /// The relaxed display form log2 k + log2 lambda + log2(1 + L/(k lambda)).
    pub relaxed_bound: f64,
    /// Achievability demands bound >= floor(rn) + log2(1 - eps/2).
    pub threshold: f64,
    pub violates_achievability: bool,
    pub floor_rn: i64,
    pub h_tilde: f64,
    pub lambda: f64,
}

/// Evaluate the converse chain at k = 2^floor(rn). Errors when lambda = 0
/// (the bound is inapplicable; the relative-entropy route covers that
/// case) and when the classical product exceeds its atom cap.
pub fn converse_bound(
    rho: &DensityMatrix,
    rate: f64,
    n: u32,
    eps: f64,
    cfg: &StructureConfig,
) -> Result<ConverseReport> {
    if !rate.is_finite() || rate <= 0.0 || n == 0 || !(eps > 0.0 && eps < 2.0) {
        return Err(CoherenceError::InvalidParameter(
            "need rate > 0, n >= 1, 0 < eps < 2".into(),
        ));
    }
    let r = comparison_matrix(rho, cfg);
    let (lambda, _) = lambda_and_eta(&r);
    if lambda <= 0.0 {
        return Err(CoherenceError::LambdaZero);
    }
    let part = edge_graph_and_cliques(&r, rho)?;
    let joint = joint_from_state(rho, &part);
    let atoms = ColumnAtoms::from_joint(&joint).power(n)?;
    let h_tilde = tweaked_hmax_columns(&atoms, eps * eps / 4.0);

    let floor_rn = (rate * n as f64).floor() as i64;
    let k = 2f64.powi(floor_rn as i32);
    let big_l = 2f64.powf(h_tilde);
    let chain = (big_l * (1.0 - lambda) + lambda * k).log2();
    let bound = chain.min(floor_rn as f64);
    let relaxed_bound = k.log2() + lambda.log2() + (1.0 + big_l / (k * lambda)).log2();
    let threshold = floor_rn as f64 + (1.0 - eps / 2.0).log2();
    Ok(ConverseReport {
        bound,
        relaxed_bound,
        threshold,
        violates_achievability: bound < threshold,
        floor_rn,
        h_tilde,
        lambda,
    })
}
