//! Strictly incoherent and physically incoherent channels in their
//! structured Kraus forms: every Kraus operator is a permutation times a
//! diagonal, so application stays O(terms * d^2) and never touches a dense
//! superoperator.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoherenceError, Result};
use crate::state::DensityMatrix;

const TOL_TRACE_PRESERVING: f64 = 1e-10;

/// One SIO Kraus term U_pi D: a permutation and a complex diagonal.
#[derive(Debug, Clone)]
pub struct SioTerm {
    pub perm: Vec<usize>,
    pub diag: Vec<Complex64>,
}

/// A strictly incoherent operation: Kraus operators U_{pi_a} D_a with
/// trace preservation sum_a |d_a(i)|^2 = 1 for every basis index i.
#[derive(Debug, Clone)]
pub struct SioKraus {
    dim: usize,
    terms: Vec<SioTerm>,
}

fn check_perm(perm: &[usize], dim: usize) -> Result<()> {
    if perm.len() != dim {
        return Err(CoherenceError::InvalidChannel(format!(
            "permutation length {} does not match dimension {dim}",
            perm.len()
        )));
    }
    let mut seen = vec![false; dim];
    for &p in perm {
        if p >= dim || seen[p] {
            return Err(CoherenceError::InvalidChannel(format!(
                "not a permutation: {perm:?}"
            )));
        }
        seen[p] = true;
    }
    Ok(())
}

impl SioKraus {
    pub fn new(dim: usize, terms: Vec<SioTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(CoherenceError::InvalidChannel("no Kraus terms".into()));
        }
        for t in &terms {
            check_perm(&t.perm, dim)?;
            if t.diag.len() != dim {
                return Err(CoherenceError::InvalidChannel(format!(
                    "diagonal length {} does not match dimension {dim}",
                    t.diag.len()
                )));
            }
        }
        for i in 0..dim {
            let col: f64 = terms.iter().map(|t| t.diag[i].norm_sqr()).sum();
            if (col - 1.0).abs() > TOL_TRACE_PRESERVING {
                return Err(CoherenceError::InvalidChannel(format!(
                    "trace preservation violated on index {i}: column norm {col}"
                )));
            }
        }
        Ok(SioKraus { dim, terms })
    }

    pub fn identity(dim: usize) -> Self {
        SioKraus {
            dim,
            terms: vec![SioTerm {
                perm: (0..dim).collect(),
                diag: vec![Complex64::new(1.0, 0.0); dim],
            }],
        }
    }

    /// Full dephasing written as an SIO: d terms with indicator diagonals.
    pub fn dephasing(dim: usize) -> Self {
        let terms = (0..dim)
            .map(|k| {
                let mut diag = vec![Complex64::new(0.0, 0.0); dim];
                diag[k] = Complex64::new(1.0, 0.0);
                SioTerm {
                    perm: (0..dim).collect(),
                    diag,
                }
            })
            .collect();
        SioKraus { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[SioTerm] {
        &self.terms
    }
}

/// Apply an SIO: sum_a U_a D_a rho D_a^* U_a^T.
pub fn apply_sio(channel: &SioKraus, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = rho.dim();
    if channel.dim() != d {
        return Err(CoherenceError::DimensionMismatch {
            left: channel.dim(),
            right: d,
        });
    }
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for t in &channel.terms {
        for i in 0..d {
            for j in 0..d {
                let v = t.diag[i] * rho.entry(i, j) * t.diag[j].conj();
                out[(t.perm[i], t.perm[j])] += v;
            }
        }
    }
    DensityMatrix::from_entries(out)
}

/// An incoherent unitary: permutation composed with phases,
/// U = sum_j e^{i theta_j} |perm(j)><j|.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncoherentUnitary {
    pub perm: Vec<usize>,
    pub phases: Vec<f64>,
}

/// One branch of an elementary PIO: an incoherent unitary applied after
/// projecting onto an index set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PioBranch {
    pub unitary: IncoherentUnitary,
    pub projector: Vec<usize>,
}

/// An elementary PIO: branches whose projectors partition [d].
#[derive(Debug, Clone)]
pub struct ElementaryPio {
    dim: usize,
    branches: Vec<PioBranch>,
}

impl ElementaryPio {
    pub fn new(dim: usize, branches: Vec<PioBranch>) -> Result<Self> {
        let mut covered = vec![false; dim];
        for b in &branches {
            check_perm(&b.unitary.perm, dim)?;
            if b.unitary.phases.len() != dim {
                return Err(CoherenceError::InvalidChannel(
                    "phase vector length mismatch".into(),
                ));
            }
            for &i in &b.projector {
                if i >= dim || covered[i] {
                    return Err(CoherenceError::InvalidChannel(format!(
                        "projector sets do not partition [0, {dim}): index {i} repeated or out of range"
                    )));
                }
                covered[i] = true;
            }
        }
        if covered.iter().any(|&c| !c) {
            return Err(CoherenceError::InvalidChannel(
                "projector sets do not cover every index (incomplete measurement)".into(),
            ));
        }
        Ok(ElementaryPio { dim, branches })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn branches(&self) -> &[PioBranch] {
        &self.branches
    }
}

/// A PIO: a convex mixture of elementary PIO.
#[derive(Debug, Clone)]
pub struct PioChannel {
    dim: usize,
    mixture: Vec<(f64, ElementaryPio)>,
}

impl PioChannel {
    pub fn new(dim: usize, mixture: Vec<(f64, ElementaryPio)>) -> Result<Self> {
        if mixture.is_empty() {
            return Err(CoherenceError::InvalidChannel("empty mixture".into()));
        }
        let total: f64 = mixture.iter().map(|(w, _)| *w).sum();
        if (total - 1.0).abs() > TOL_TRACE_PRESERVING || mixture.iter().any(|(w, _)| *w < 0.0) {
            return Err(CoherenceError::InvalidChannel(format!(
                "mixture weights sum to {total}"
            )));
        }
        if mixture.iter().any(|(_, e)| e.dim() != dim) {
            return Err(CoherenceError::InvalidChannel(
                "elementary dimension mismatch".into(),
            ));
        }
        Ok(PioChannel { dim, mixture })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mixture(&self) -> &[(f64, ElementaryPio)] {
        &self.mixture
    }

    /// Expand into SIO Kraus form: K_{a,b} = sqrt(p_a) U_{a,b} Pi_{b|a}.
    /// Every PIO is an SIO, and the expansion revalidates as one.
    pub fn to_sio(&self) -> Result<SioKraus> {
        let d = self.dim;
        let mut terms = Vec::new();
        for (w, elem) in &self.mixture {
            let sw = w.sqrt();
            for b in elem.branches() {
                let mut diag = vec![Complex64::new(0.0, 0.0); d];
                for &i in &b.projector {
                    diag[i] = Complex64::from_polar(sw, b.unitary.phases[i]);
                }
                terms.push(SioTerm {
                    perm: b.unitary.perm.clone(),
                    diag,
                });
            }
        }
        SioKraus::new(d, terms)
    }
}

fn apply_branch(branch: &PioBranch, rho: &DensityMatrix) -> (f64, DMatrix<Complex64>) {
    let d = rho.dim();
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    let mut weight = 0.0;
    for &i in &branch.projector {
        weight += rho.entry(i, i).re;
        for &j in &branch.projector {
            let phase =
                Complex64::from_polar(1.0, branch.unitary.phases[i] - branch.unitary.phases[j]);
            out[(branch.unitary.perm[i], branch.unitary.perm[j])] = phase * rho.entry(i, j);
        }
    }
    (weight, out)
}

/// Apply the full PIO mixture.
pub fn apply_pio(channel: &PioChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = rho.dim();
    if channel.dim() != d {
        return Err(CoherenceError::DimensionMismatch {
            left: channel.dim(),
            right: d,
        });
    }
    let mut out = DMatrix::<Complex64>::zeros(d, d);
    for (w, elem) in channel.mixture() {
        for b in elem.branches() {
            let (_, m) = apply_branch(b, rho);
            out += m * Complex64::new(*w, 0.0);
        }
    }
    DensityMatrix::from_entries(out)
}

/// Run an elementary PIO as an instrument: outcome probabilities
/// q_b = Tr[rho Pi_b] and normalised post-measurement states.
/// Zero-probability branches are skipped.
pub fn pio_instrument(
    elem: &ElementaryPio,
    rho: &DensityMatrix,
) -> Result<Vec<(f64, DensityMatrix)>> {
    if elem.dim() != rho.dim() {
        return Err(CoherenceError::DimensionMismatch {
            left: elem.dim(),
            right: rho.dim(),
        });
    }
    let mut out = Vec::new();
    for b in elem.branches() {
        let (q, m) = apply_branch(b, rho);
        if q > 1e-14 {
            out.push((q, DensityMatrix::from_entries(m / Complex64::new(q, 0.0))?));
        }
    }
    Ok(out)
}

/// Deterministic random SIO: for every basis index i the column vector
/// (d_a(i))_a is an independent Haar-random unit vector in C^{n_terms},
/// so trace preservation holds by construction; permutations are uniform.
pub fn random_sio(dim: usize, n_terms: usize, seed: u64) -> SioKraus {
    assert!(n_terms >= 1, "need at least one Kraus term");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut v: Vec<Complex64> = (0..n_terms)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut v {
            *z /= norm;
        }
        cols.push(v);
    }
    let terms: Vec<SioTerm> = (0..n_terms)
        .map(|a| {
            let mut perm: Vec<usize> = (0..dim).collect();
            perm.shuffle(&mut rng);
            let diag = (0..dim).map(|i| cols[i][a]).collect();
            SioTerm { perm, diag }
        })
        .collect();
    SioKraus { dim, terms }
}

/// Deterministic random PIO: per elementary term a uniform random
/// partition of [d], uniform permutations and phases, and Dirichlet(1)
/// mixture weights.
pub fn random_pio(dim: usize, n_elementary: usize, seed: u64) -> PioChannel {
    assert!(n_elementary >= 1, "need at least one elementary term");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mixture = Vec::with_capacity(n_elementary);
    let mut raw_weights = Vec::with_capacity(n_elementary);
    for _ in 0..n_elementary {
        let groups = rng.gen_range(1..=dim);
        let mut parts: Vec<Vec<usize>> = vec![Vec::new(); groups];
        for i in 0..dim {
            parts[rng.gen_range(0..groups)].push(i);
        }
        parts.retain(|p| !p.is_empty());
        let branches = parts
            .into_iter()
            .map(|projector| {
                let mut perm: Vec<usize> = (0..dim).collect();
                perm.shuffle(&mut rng);
                let phases = (0..dim)
                    .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                    .collect();
                PioBranch {
                    unitary: IncoherentUnitary { perm, phases },
                    projector,
                }
            })
            .collect();
        let elem = ElementaryPio::new(dim, branches).expect("constructed partition is complete");
        raw_weights.push(-(rng.gen_range(0.0f64..1.0).max(1e-12)).ln());
        mixture.push(elem);
    }
    let total: f64 = raw_weights.iter().sum();
    let mixture = raw_weights
        .into_iter()
        .zip(mixture)
        .map(|(w, e)| (w / total, e))
        .collect();
    PioChannel { dim, mixture }
}

/// Channel wire format.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ChannelJson {
    Sio { terms: Vec<SioTermJson> },
    Pio { mixture: Vec<PioElementJson> },
}

#[derive(Serialize, Deserialize)]
pub struct SioTermJson {
    pub perm: Vec<usize>,
    pub diag_re: Vec<f64>,
    pub diag_im: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
pub struct PioElementJson {
    pub weight: f64,
    pub elementary: Vec<PioBranchJson>,
}

#[derive(Serialize, Deserialize)]
pub struct PioBranchJson {
    pub perm: Vec<usize>,
    pub phases: Vec<f64>,
    pub projector: Vec<usize>,
}

impl SioKraus {
    pub fn to_json(&self) -> ChannelJson {
        ChannelJson::Sio {
            terms: self
                .terms
                .iter()
                .map(|t| SioTermJson {
                    perm: t.perm.clone(),
                    diag_re: t.diag.iter().map(|z| z.re).collect(),
                    diag_im: t.diag.iter().map(|z| z.im).collect(),
                })
                .collect(),
        }
    }
}

impl PioChannel {
    pub fn to_json(&self) -> ChannelJson {
        ChannelJson::Pio {
            mixture: self
                .mixture
                .iter()
                .map(|(w, e)| PioElementJson {
                    weight: *w,
                    elementary: e
                        .branches()
                        .iter()
                        .map(|b| PioBranchJson {
                            perm: b.unitary.perm.clone(),
                            phases: b.unitary.phases.clone(),
                            projector: b.projector.clone(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }
}

pub enum ChannelKind {
    Sio(SioKraus),
    Pio(PioChannel),
}

pub fn channel_from_json(json: &ChannelJson) -> Result<ChannelKind> {
    match json {
        ChannelJson::Sio { terms } => {
            let dim = terms
                .first()
                .map(|t| t.perm.len())
                .ok_or_else(|| CoherenceError::InvalidChannel("no terms".into()))?;
            let terms = terms
                .iter()
                .map(|t| {
                    if t.diag_re.len() != t.diag_im.len() {
                        return Err(CoherenceError::InvalidChannel(
                            "diag_re and diag_im length mismatch".into(),
                        ));
                    }
                    Ok(SioTerm {
                        perm: t.perm.clone(),
                        diag: t
                            .diag_re
                            .iter()
                            .zip(&t.diag_im)
                            .map(|(&re, &im)| Complex64::new(re, im))
                            .collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ChannelKind::Sio(SioKraus::new(dim, terms)?))
        }
        ChannelJson::Pio { mixture } => {
            let dim = mixture
                .first()
                .and_then(|m| m.elementary.first())
                .map(|b| b.perm.len())
                .ok_or_else(|| CoherenceError::InvalidChannel("no terms".into()))?;
            let mix = mixture
                .iter()
                .map(|m| {
                    let branches = m
                        .elementary
                        .iter()
                        .map(|b| PioBranch {
                            unitary: IncoherentUnitary {
                                perm: b.perm.clone(),
                                phases: b.phases.clone(),
                            },
                            projector: b.projector.clone(),
                        })
                        .collect();
                    Ok((m.weight, ElementaryPio::new(dim, branches)?))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ChannelKind::Pio(PioChannel::new(dim, mix)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{dephase, trace_distance, DensityMatrix};
    use approx::assert_abs_diff_eq;

    fn rho1() -> DensityMatrix {
        DensityMatrix::from_real_rows(3, &[0.25, 0.25, 0.0, 0.25, 0.25, 0.0, 0.0, 0.0, 0.5])
            .unwrap()
    }

    #[test]
    fn identity_and_dephasing() {
        let rho = rho1();
        let id = SioKraus::identity(3);
        let out = apply_sio(&id, &rho).unwrap();
        assert_abs_diff_eq!(trace_distance(&out, &rho).unwrap(), 0.0, epsilon = 1e-12);

        let deph = SioKraus::dephasing(3);
        let out = apply_sio(&deph, &rho).unwrap();
        assert_abs_diff_eq!(
            trace_distance(&out, &dephase(&rho)).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn permutation_channel_conjugates() {
        // swap 0 <-> 2 on rho1
        let perm = vec![2, 1, 0];
        let chan = SioKraus::new(
            3,
            vec![SioTerm {
                perm,
                diag: vec![Complex64::new(1.0, 0.0); 3],
            }],
        )
        .unwrap();
        let out = apply_sio(&chan, &rho1()).unwrap();
        assert_abs_diff_eq!(out.entry(2, 2).re, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(2, 1).re, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(out.entry(0, 0).re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn trace_preservation_is_validated() {
        let bad = SioKraus::new(
            2,
            vec![SioTerm {
                perm: vec![0, 1],
                diag: vec![Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0)],
            }],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn single_term_sio_is_incoherent_unitary() {
        let chan = random_sio(4, 1, 11);
        for z in &chan.terms()[0].diag {
            assert_abs_diff_eq!(z.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn random_sio_is_deterministic_and_dephasing_covariant() {
        let a = random_sio(3, 4, 7);
        let b = random_sio(3, 4, 7);
        assert_eq!(a.terms()[2].perm, b.terms()[2].perm);
        assert_eq!(a.terms()[1].diag, b.terms()[1].diag);

        let rho = rho1();
        let lhs = dephase(&apply_sio(&a, &rho).unwrap());
        let rhs = apply_sio(&a, &dephase(&rho)).unwrap();
        assert!(trace_distance(&lhs, &rhs).unwrap() <= 1e-9);

        // incoherent states stay incoherent
        let diag = DensityMatrix::from_diagonal(&[0.2, 0.5, 0.3]).unwrap();
        let out = apply_sio(&a, &diag).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_abs_diff_eq!(out.entry(i, j).norm(), 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn pio_identity_and_clique_instrument() {
        // single projector = identity, identity unitary
        let elem = ElementaryPio::new(
            3,
            vec![PioBranch {
                unitary: IncoherentUnitary {
                    perm: vec![0, 1, 2],
                    phases: vec![0.0; 3],
                },
                projector: vec![0, 1, 2],
            }],
        )
        .unwrap();
        let chan = PioChannel::new(3, vec![(1.0, elem.clone())]).unwrap();
        let rho = rho1();
        let out = apply_pio(&chan, &rho).unwrap();
        assert_abs_diff_eq!(trace_distance(&out, &rho).unwrap(), 0.0, epsilon = 1e-12);

        // clique instrument {Pi_{0,1}, Pi_{2}} on rho1
        let clique = ElementaryPio::new(
            3,
            vec![
                PioBranch {
                    unitary: IncoherentUnitary {
                        perm: vec![0, 1, 2],
                        phases: vec![0.0; 3],
                    },
                    projector: vec![0, 1],
                },
                PioBranch {
                    unitary: IncoherentUnitary {
                        perm: vec![0, 1, 2],
                        phases: vec![0.0; 3],
                    },
                    projector: vec![2],
                },
            ],
        )
        .unwrap();
        let outcomes = pio_instrument(&clique, &rho).unwrap();
        assert_eq!(outcomes.len(), 2);
        assert_abs_diff_eq!(outcomes[0].0, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(outcomes[1].0, 0.5, epsilon = 1e-12);
        // first outcome is the pure cosbit-type block
        assert_abs_diff_eq!(outcomes[0].1.entry(0, 1).re, 0.5, epsilon = 1e-12);
        assert!(outcomes[0].1.is_pure(1e-10));
        // probabilities sum to 1
        let total: f64 = outcomes.iter().map(|(q, _)| q).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rank1_projector_family_dephases() {
        let branches = (0..3)
            .map(|i| PioBranch {
                unitary: IncoherentUnitary {
                    perm: vec![0, 1, 2],
                    phases: vec![0.0; 3],
                },
                projector: vec![i],
            })
            .collect();
        let elem = ElementaryPio::new(3, branches).unwrap();
        let chan = PioChannel::new(3, vec![(1.0, elem)]).unwrap();
        let out = apply_pio(&chan, &rho1()).unwrap();
        assert_abs_diff_eq!(
            trace_distance(&out, &dephase(&rho1())).unwrap(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn incomplete_projectors_rejected() {
        let bad = ElementaryPio::new(
            3,
            vec![PioBranch {
                unitary: IncoherentUnitary {
                    perm: vec![0, 1, 2],
                    phases: vec![0.0; 3],
                },
                projector: vec![0, 1],
            }],
        );
        assert!(bad.is_err());
    }

    #[test]
    fn random_pio_expands_to_valid_sio() {
        for seed in 0..20 {
            let pio = random_pio(4, 3, seed);
            let sio = pio.to_sio().expect("PIO expands to a valid SIO");
            let rho = DensityMatrix::maximally_mixed(4);
            let a = apply_pio(&pio, &rho).unwrap();
            let b = apply_sio(&sio, &rho).unwrap();
            assert!(trace_distance(&a, &b).unwrap() <= 1e-10);
        }
    }

    #[test]
    fn mixture_equals_weighted_elementary_sum() {
        let pio = random_pio(3, 2, 42);
        let rho = rho1();
        let direct = apply_pio(&pio, &rho).unwrap();
        let mut acc = DMatrix::<Complex64>::zeros(3, 3);
        for (w, elem) in pio.mixture() {
            for (q, post) in pio_instrument(elem, &rho).unwrap() {
                acc += post.entries() * Complex64::new(w * q, 0.0);
            }
        }
        let recombined = DensityMatrix::from_entries(acc).unwrap();
        assert!(trace_distance(&direct, &recombined).unwrap() <= 1e-10);
    }

    #[test]
    fn channel_json_round_trip() {
        let sio = random_sio(3, 2, 5);
        let s = serde_json::to_string(&sio.to_json()).unwrap();
        let parsed: ChannelJson = serde_json::from_str(&s).unwrap();
        match channel_from_json(&parsed).unwrap() {
            ChannelKind::Sio(back) => {
                assert_eq!(back.terms()[0].perm, sio.terms()[0].perm);
                assert_eq!(back.terms()[1].diag, sio.terms()[1].diag);
            }
            _ => panic!("expected SIO"),
        }

        let pio = random_pio(3, 2, 5);
        let s = serde_json::to_string(&pio.to_json()).unwrap();
        let parsed: ChannelJson = serde_json::from_str(&s).unwrap();
        assert!(matches!(
            channel_from_json(&parsed).unwrap(),
            ChannelKind::Pio(_)
        ));
    }
}
