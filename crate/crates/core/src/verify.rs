//! Named property suites over seeded random states. The CLI `verify`
//! command runs these and reports one pass/fail line per property with a
//! counterexample dump on failure; the test suite drives the same
//! registry.

use crate::channels::{apply_pio, apply_sio, random_pio, random_sio};
use crate::classical::{cond_entropy, cond_max_entropy, joint_from_state, tweaked_hmax};
use crate::config::StructureConfig;
use crate::ensembles;
use crate::formation::{
    cfu_optimize, co_u_necessary_test, diagonally_dominant_decomposition, pio_pushforward,
    tensor_decomposition, CfuBudget,
};
use crate::measure::measure;
use crate::monotones::{gershgorin_bound, mu_k, mu_profile, overlap_lower_bound, v_epsilon};
use crate::protocols::{distill_accounting, plan_dilution, simulate_dilution, DilutionOutcome};
use crate::state::{
    dephase, tensor, trace_distance, von_neumann_entropy, DensityMatrix, PureState,
};
use crate::structure::{
    comparison_matrix, edge_graph_and_cliques, lambda_and_eta, max_pure_block_size,
    quintessential_from_partition, relative_entropy_of_coherence, trimmed_state,
};

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    pub cfg: StructureConfig,
    pub budget: CfuBudget,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 7,
            cfg: StructureConfig::default(),
            budget: CfuBudget::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropertyResult {
    pub name: &'static str,
    pub passed: bool,
    pub cases: usize,
    pub detail: String,
    pub counterexample: Option<String>,
}

struct Check {
    name: &'static str,
    run: fn(&VerifyConfig) -> PropertyResult,
}

fn ok(name: &'static str, cases: usize, detail: String) -> PropertyResult {
    PropertyResult {
        name,
        passed: true,
        cases,
        detail,
        counterexample: None,
    }
}

fn fail(name: &'static str, cases: usize, detail: String, dump: String) -> PropertyResult {
    PropertyResult {
        name,
        passed: false,
        cases,
        detail,
        counterexample: Some(dump),
    }
}

/// A mixed bag of states cycling through the ensembles.
fn state_bag(vc: &VerifyConfig, count: usize, dims: &[usize]) -> Vec<DensityMatrix> {
    (0..count)
        .map(|i| {
            let d = dims[i % dims.len()];
            let seed = vc.seed.wrapping_add(i as u64 * 101);
            match i % 4 {
                0 => ensembles::hilbert_schmidt(d, seed),
                1 => {
                    let profile = if d >= 3 { vec![2, 1] } else { vec![2] };
                    ensembles::block_structured(d, &profile, seed).expect("profile fits")
                }
                2 => ensembles::diagonally_dominant(d, seed),
                _ => DensityMatrix::from_pure(&ensembles::haar_pure(d, seed)),
            }
        })
        .collect()
}

fn dephase_laws(vc: &VerifyConfig) -> PropertyResult {
    let name = "dephase-idempotent-entropy";
    let states = state_bag(vc, 200, &[2, 3, 4]);
    for rho in &states {
        let d1 = dephase(rho);
        let d2 = dephase(&d1);
        if d1 != d2 {
            return fail(
                name,
                200,
                "dephase not idempotent".into(),
                rho.to_json_string(),
            );
        }
        let tr: f64 = d1.diagonal().iter().sum();
        if (tr - 1.0).abs() > 1e-10 {
            return fail(
                name,
                200,
                format!("trace drifted to {tr}"),
                rho.to_json_string(),
            );
        }
        if von_neumann_entropy(&d1) < von_neumann_entropy(rho) - 1e-9 {
            return fail(
                name,
                200,
                "entropy decreased under dephasing".into(),
                rho.to_json_string(),
            );
        }
    }
    ok(
        name,
        200,
        "idempotent, trace preserved, entropy nondecreasing".into(),
    )
}

fn dephase_contracts_distance(vc: &VerifyConfig) -> PropertyResult {
    let name = "dephase-contracts-trace-distance";
    for i in 0..200 {
        let d = [2, 3, 4][i % 3];
        let a = ensembles::hilbert_schmidt(d, vc.seed.wrapping_add(2 * i as u64));
        let b = ensembles::hilbert_schmidt(d, vc.seed.wrapping_add(2 * i as u64 + 1));
        let full = trace_distance(&a, &b).unwrap();
        let deph = trace_distance(&dephase(&a), &dephase(&b)).unwrap();
        if deph > full + 1e-9 {
            return fail(
                name,
                200,
                format!("dephased distance {deph} > {full}"),
                a.to_json_string(),
            );
        }
    }
    ok(name, 200, "data processing holds on all pairs".into())
}

fn tensor_entropy_additive(vc: &VerifyConfig) -> PropertyResult {
    let name = "tensor-entropy-additive";
    for i in 0..100 {
        let a = ensembles::hilbert_schmidt(3, vc.seed.wrapping_add(3 * i as u64));
        let b = ensembles::hilbert_schmidt(2, vc.seed.wrapping_add(3 * i as u64 + 1));
        let ab = tensor(&a, &b).unwrap();
        let gap =
            (von_neumann_entropy(&ab) - von_neumann_entropy(&a) - von_neumann_entropy(&b)).abs();
        if gap > 1e-9 {
            return fail(name, 100, format!("entropy gap {gap}"), a.to_json_string());
        }
    }
    ok(name, 100, "S(a x b) = S(a) + S(b) within 1e-9".into())
}

fn q_additivity(vc: &VerifyConfig) -> PropertyResult {
    let name = "additivity-q";
    for i in 0..100 {
        let seed = vc.seed.wrapping_add(5 * i as u64);
        let a = if i % 2 == 0 {
            ensembles::block_structured(4, &[2, 1], seed).unwrap()
        } else {
            ensembles::hilbert_schmidt(3, seed)
        };
        let b = if i % 3 == 0 {
            ensembles::block_structured(3, &[2, 1], seed + 1).unwrap()
        } else {
            ensembles::hilbert_schmidt(2, seed + 1)
        };
        let ab = tensor(&a, &b).unwrap();
        let qa = quintessential(vc, &a);
        let qb = quintessential(vc, &b);
        let qab = quintessential(vc, &ab);
        if (qab - qa - qb).abs() > 1e-9 {
            return fail(
                name,
                100,
                format!("Q(a x b) = {qab} vs {qa} + {qb}"),
                a.to_json_string(),
            );
        }
    }
    ok(name, 100, "Q additive within 1e-9 on 100 pairs".into())
}

fn quintessential(vc: &VerifyConfig, rho: &DensityMatrix) -> f64 {
    let r = comparison_matrix(rho, &vc.cfg);
    let part = edge_graph_and_cliques(&r, rho).expect("clique partition");
    quintessential_from_partition(rho, &part)
}

fn lambda_eta_tensorisation(vc: &VerifyConfig) -> PropertyResult {
    let name = "additivity-lambda-eta-tensorise";
    for i in 0..100 {
        let seed = vc.seed.wrapping_add(7 * i as u64);
        let a = if i % 2 == 0 {
            ensembles::block_structured(3, &[2, 1], seed).unwrap()
        } else {
            ensembles::hilbert_schmidt(3, seed)
        };
        let b = ensembles::hilbert_schmidt(2, seed + 1);
        let ab = tensor(&a, &b).unwrap();
        let ra = comparison_matrix(&a, &vc.cfg);
        let rb = comparison_matrix(&b, &vc.cfg);
        let rab = comparison_matrix(&ab, &vc.cfg);
        // representation check: R(a x b) = kron(R(a), R(b)) entrywise
        let kron = ra.entries().kronecker(rb.entries());
        let mut worst = 0.0f64;
        for r in 0..kron.nrows() {
            for c in 0..kron.ncols() {
                worst = worst.max((kron[(r, c)] - rab.entry(r, c)).norm());
            }
        }
        if worst > 1e-12 {
            return fail(
                name,
                100,
                format!("comparison matrix fails to factorise: {worst:.2e}"),
                a.to_json_string(),
            );
        }
        let (la, ea) = lambda_and_eta(&ra);
        let (lb, eb) = lambda_and_eta(&rb);
        let (lab, eab) = lambda_and_eta(&rab);
        if (lab - la.max(lb)).abs() > 1e-12 || (eab - ea.max(eb)).abs() > 1e-12 {
            return fail(
                name,
                100,
                format!(
                    "lambda {lab} vs {}, eta {eab} vs {}",
                    la.max(lb),
                    ea.max(eb)
                ),
                a.to_json_string(),
            );
        }
    }
    ok(name, 100, "lambda and eta tensorise at 1e-12".into())
}

fn trimmed_state_laws(vc: &VerifyConfig) -> PropertyResult {
    let name = "trimmed-psd-diagonal-preserved";
    let states = state_bag(vc, 100, &[2, 3, 4, 5]);
    for rho in &states {
        let r = comparison_matrix(rho, &vc.cfg);
        let part = match edge_graph_and_cliques(&r, rho) {
            Ok(p) => p,
            Err(e) => {
                return fail(
                    name,
                    100,
                    format!("partition failed: {e}"),
                    rho.to_json_string(),
                )
            }
        };
        let t = trimmed_state(rho, &part);
        let min_eig = t.eigenvalues()[0];
        if min_eig < -1e-10 {
            return fail(
                name,
                100,
                format!("trimmed not PSD: {min_eig}"),
                rho.to_json_string(),
            );
        }
        let dmax: f64 = t
            .diagonal()
            .iter()
            .zip(rho.diagonal())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dmax > 1e-12 {
            return fail(
                name,
                100,
                format!("diagonal moved by {dmax}"),
                rho.to_json_string(),
            );
        }
        // Q = C_r(trimmed) and Q <= C_r
        let q = quintessential_from_partition(rho, &part);
        if (q - relative_entropy_of_coherence(&t)).abs() > 1e-9 {
            return fail(name, 100, "Q != C_r(trimmed)".into(), rho.to_json_string());
        }
        if q > relative_entropy_of_coherence(rho) + 1e-9 {
            return fail(name, 100, "Q exceeds C_r".into(), rho.to_json_string());
        }
    }
    ok(
        name,
        100,
        "trimmed states PSD, diagonal fixed, Q = C_r(trimmed) <= C_r".into(),
    )
}

fn block_purity(vc: &VerifyConfig) -> PropertyResult {
    let name = "block-purity";
    let states = state_bag(vc, 200, &[2, 3, 4, 5]);
    for rho in &states {
        let r = comparison_matrix(rho, &vc.cfg);
        if let Err(e) = edge_graph_and_cliques(&r, rho) {
            return fail(
                name,
                200,
                format!("purity certificate failed: {e}"),
                rho.to_json_string(),
            );
        }
    }
    ok(name, 200, "every clique block conditioned pure".into())
}

fn monotone_suite(vc: &VerifyConfig) -> PropertyResult {
    let name = "mu-sio-monotone-suite";
    for i in 0..100 {
        let d = [2, 3, 4][i % 3];
        let seed = vc.seed.wrapping_add(11 * i as u64);
        let rho = match i % 3 {
            0 => ensembles::block_structured(d, &[2], seed).unwrap(),
            1 => ensembles::hilbert_schmidt(d, seed),
            _ => ensembles::diagonally_dominant(d, seed),
        };
        let chan = random_sio(d, 2 + i % 3, seed + 1);
        let out = match apply_sio(&chan, &rho) {
            Ok(o) => o,
            Err(e) => {
                return fail(
                    name,
                    100,
                    format!("apply failed: {e}"),
                    rho.to_json_string(),
                )
            }
        };
        let prof_in = mu_profile(&rho, &vc.cfg);
        let prof_out = mu_profile(&out, &vc.cfg);
        let r = comparison_matrix(&rho, &vc.cfg);
        let (_, eta) = lambda_and_eta(&r);
        let l = max_pure_block_size(&r);
        if prof_in.values[0] != 0.0 {
            return fail(name, 100, "mu_1 != 0".into(), rho.to_json_string());
        }
        if d >= 2 && (prof_in.values[1] - (1.0 + eta).log2()).abs() > 1e-9 {
            return fail(
                name,
                100,
                "mu_2 != log2(1 + eta)".into(),
                rho.to_json_string(),
            );
        }
        for k in 1..=d {
            if prof_out.values[k - 1] > prof_in.values[k - 1] + 1e-9 {
                return fail(
                    name,
                    100,
                    format!("mu_{k} increased under SIO"),
                    rho.to_json_string(),
                );
            }
            if k >= l {
                let g = gershgorin_bound(&rho, k, &vc.cfg).unwrap();
                if prof_in.values[k - 1] > g + 1e-9 {
                    return fail(
                        name,
                        100,
                        format!("mu_{k} violates the Gershgorin bound"),
                        rho.to_json_string(),
                    );
                }
            }
        }
        // overlap bound with a random-phase maximally coherent state
        let mut rng_phases = vec![0.0f64; d];
        for (p, ph) in rng_phases.iter_mut().enumerate() {
            *ph = (seed as f64 * 0.37 + p as f64).sin() * std::f64::consts::PI;
        }
        let psi = PureState::uniform(d, &(0..d).collect::<Vec<_>>(), &rng_phases).unwrap();
        let bound = overlap_lower_bound(&rho, &psi).unwrap();
        if bound > prof_in.values[d - 1] + 1e-9 {
            return fail(
                name,
                100,
                format!("overlap bound {bound} exceeds mu_d"),
                rho.to_json_string(),
            );
        }
    }
    ok(
        name,
        100,
        "mu_1 = 0, mu_2 = log2(1+eta), SIO non-increase, Gershgorin and overlap bounds hold".into(),
    )
}

fn smoothed_v_monotone(vc: &VerifyConfig) -> PropertyResult {
    let name = "mu-smoothed-v-sio-monotone";
    for i in 0..100 {
        let d = [2, 3][i % 2];
        let seed = vc.seed.wrapping_add(13 * i as u64);
        let rho = if i % 2 == 0 {
            ensembles::block_structured(d, &[2], seed).unwrap()
        } else {
            ensembles::hilbert_schmidt(d, seed)
        };
        let chan = random_sio(d, 2, seed + 1);
        let eps = [0.1, 0.5][i % 2];
        let set = v_epsilon(&rho, eps, &vc.cfg).unwrap();
        for member in &set.members {
            let k = 2.min(member.state.dim());
            let before = mu_k(&member.state, k, &vc.cfg).unwrap().value;
            let after = match apply_sio(&chan, &member.state) {
                Ok(out) => mu_k(&out, k, &vc.cfg).unwrap().value,
                Err(e) => {
                    return fail(
                        name,
                        100,
                        format!("apply failed: {e}"),
                        rho.to_json_string(),
                    )
                }
            };
            if after > before + 1e-9 {
                return fail(
                    name,
                    100,
                    format!("member mu increased: {before} -> {after}"),
                    rho.to_json_string(),
                );
            }
        }
    }
    ok(
        name,
        100,
        "the channel contracts mu_k on every conditioning member".into(),
    )
}

fn v_member_structure(vc: &VerifyConfig) -> PropertyResult {
    let name = "v-member-lambda-and-block-alignment";
    for i in 0..60 {
        let d = [3, 4][i % 2];
        let seed = vc.seed.wrapping_add(17 * i as u64);
        let rho = if i % 2 == 0 {
            ensembles::block_structured(d, &[2, 1], seed).unwrap()
        } else {
            ensembles::hilbert_schmidt(d, seed)
        };
        let r = comparison_matrix(&rho, &vc.cfg);
        let (lam, _) = lambda_and_eta(&r);
        let base_part = edge_graph_and_cliques(&r, &rho).unwrap();
        let set = v_epsilon(&rho, 1.0, &vc.cfg).unwrap();
        for member in &set.members {
            let rm = comparison_matrix(&member.state, &vc.cfg);
            let (lam_m, _) = lambda_and_eta(&rm);
            if lam_m > lam + 1e-12 {
                return fail(
                    name,
                    60,
                    format!("lambda grew on a member: {lam_m} > {lam}"),
                    rho.to_json_string(),
                );
            }
            let part_m = match edge_graph_and_cliques(&rm, &member.state) {
                Ok(p) => p,
                Err(e) => {
                    return fail(
                        name,
                        60,
                        format!("member partition: {e}"),
                        rho.to_json_string(),
                    )
                }
            };
            for mb in part_m.blocks() {
                let inside_one = base_part
                    .blocks()
                    .iter()
                    .any(|bb| mb.iter().all(|i| bb.contains(i)));
                if !inside_one {
                    return fail(
                        name,
                        60,
                        format!("member block {mb:?} not inside a base block"),
                        rho.to_json_string(),
                    );
                }
            }
        }
    }
    ok(
        name,
        60,
        "lambda contracts and member blocks refine the base blocks".into(),
    )
}

fn mu_variational_witness(vc: &VerifyConfig) -> PropertyResult {
    let name = "mu-variational-psd-witness";
    let states = state_bag(vc, 60, &[2, 3, 4]);
    for rho in &states {
        let d = rho.dim();
        for k in 1..=d {
            let res = mu_k(rho, k, &vc.cfg).unwrap();
            let scale = 2f64.powf(res.value);
            let mut m = nalgebra::DMatrix::<num_complex::Complex64>::zeros(d, d);
            for i in 0..d {
                m[(i, i)] = num_complex::Complex64::new(scale * rho.entry(i, i).re + 1e-8, 0.0);
            }
            for &i in &res.witness {
                for &j in &res.witness {
                    m[(i, j)] -= rho.entry(i, j);
                }
            }
            let min_eig = crate::eigen::eigvals(&m)[0];
            if min_eig < -1e-10 {
                return fail(
                    name,
                    60,
                    format!("witness PSD check failed at k = {k}: {min_eig:.2e}"),
                    rho.to_json_string(),
                );
            }
        }
    }
    ok(
        name,
        60,
        "Pi rho Pi <= 2^mu diag(rho) + 1e-8 I on every witness".into(),
    )
}

fn cfu_sandwich(vc: &VerifyConfig) -> PropertyResult {
    let name = "cfu-sandwich-and-dd";
    for i in 0..40 {
        let d = [2, 3][i % 2];
        let seed = vc.seed.wrapping_add(19 * i as u64);
        let rho = ensembles::diagonally_dominant(d, seed);
        let rep = cfu_optimize(&rho, &vc.budget);
        if rep.upper_bound.is_infinite() {
            return fail(
                name,
                40,
                "diagonally dominant state reported infinite".into(),
                rho.to_json_string(),
            );
        }
        if rep.lower_bound > rep.upper_bound + 1e-7 {
            return fail(
                name,
                40,
                format!(
                    "sandwich inverted: {} > {}",
                    rep.lower_bound, rep.upper_bound
                ),
                rho.to_json_string(),
            );
        }
        let dd = diagonally_dominant_decomposition(&rho).expect("generator made it dominant");
        if dd.residual > 1e-7 {
            return fail(
                name,
                40,
                format!("dd residual {}", dd.residual),
                rho.to_json_string(),
            );
        }
        if dd.cost() > 1.0 + 1e-9 {
            return fail(
                name,
                40,
                format!("dd cost {} > 1", dd.cost()),
                rho.to_json_string(),
            );
        }
        if rep.upper_bound > dd.cost() + 1e-9 {
            return fail(
                name,
                40,
                "optimizer worse than the dominant witness".into(),
                rho.to_json_string(),
            );
        }
        // the roof estimate upper-bounds C_f, which dominates C_r
        let est = crate::formation::cf_estimate(&rho, &vc.budget);
        if crate::structure::relative_entropy_of_coherence(&rho) > est + 1e-6 {
            return fail(
                name,
                40,
                format!("roof estimate {est} under C_r"),
                rho.to_json_string(),
            );
        }
    }
    ok(
        name,
        40,
        "bounds ordered, dominant states decompose with cost <= 1, roof above C_r".into(),
    )
}

fn cfu_pio_monotone(vc: &VerifyConfig) -> PropertyResult {
    let name = "cfu-pio-monotone";
    for i in 0..50 {
        let seed = vc.seed.wrapping_add(23 * i as u64);
        let (d, allow_large) = match i % 3 {
            0 => (2, false),
            1 => (3, false),
            _ => (3, true),
        };
        let (rho, _witness) = ensembles::co_u_mixture(d, 3 + i % 2, allow_large, seed);
        let chan = random_pio(d, 1 + i % 2, seed + 1);
        let out = apply_pio(&chan, &rho).unwrap();
        let rep_in = cfu_optimize(&rho, &vc.budget);
        let rep_out = cfu_optimize(&out, &vc.budget);
        let mut ub_out = rep_out.upper_bound;
        // the pushforward of the input witness certifies the output too
        if let Some(w) = &rep_in.witness {
            let pushed = pio_pushforward(w, &chan, &out);
            if pushed.residual <= crate::formation::TOL_RESIDUAL {
                ub_out = ub_out.min(pushed.cost());
            }
        }
        if ub_out > rep_in.upper_bound + 2e-3 {
            return fail(
                name,
                50,
                format!("upper bound grew: {} -> {}", rep_in.upper_bound, ub_out),
                rho.to_json_string(),
            );
        }
        if !co_u_necessary_test(&out) {
            return fail(
                name,
                50,
                "PIO output failed the membership test".into(),
                rho.to_json_string(),
            );
        }
    }
    ok(
        name,
        50,
        "upper bounds contract under PIO; outputs stay in the hull".into(),
    )
}

fn cfu_product_additivity(vc: &VerifyConfig) -> PropertyResult {
    let name = "cfu-product-subadditive";
    for i in 0..20 {
        let seed = vc.seed.wrapping_add(29 * i as u64);
        let (a, _) = ensembles::co_u_mixture(2, 2, false, seed);
        let (b, _) = ensembles::co_u_mixture(2, 2, false, seed + 1);
        let ab = tensor(&a, &b).unwrap();
        let rep_a = cfu_optimize(&a, &vc.budget);
        let rep_b = cfu_optimize(&b, &vc.budget);
        let (wa, wb) = match (&rep_a.witness, &rep_b.witness) {
            (Some(wa), Some(wb)) => (wa, wb),
            _ => {
                return fail(
                    name,
                    20,
                    "factor witness missing".into(),
                    a.to_json_string(),
                )
            }
        };
        let prod = tensor_decomposition(wa, wb, 2, &ab);
        if prod.residual > 1e-7 {
            return fail(
                name,
                20,
                format!("product witness residual {}", prod.residual),
                a.to_json_string(),
            );
        }
        let rep_ab = cfu_optimize(&ab, &vc.budget);
        let ub = rep_ab.upper_bound.min(prod.cost());
        if ub > rep_a.upper_bound + rep_b.upper_bound + 2e-3 {
            return fail(
                name,
                20,
                format!(
                    "product bound {} exceeds {} + {}",
                    ub, rep_a.upper_bound, rep_b.upper_bound
                ),
                a.to_json_string(),
            );
        }
    }
    ok(
        name,
        20,
        "product decompositions certify subadditive upper bounds".into(),
    )
}

fn channel_laws(vc: &VerifyConfig) -> PropertyResult {
    let name = "channels-dephasing-covariant-pio-in-sio";
    for i in 0..60 {
        let d = [2, 3, 4][i % 3];
        let seed = vc.seed.wrapping_add(31 * i as u64);
        let rho = ensembles::hilbert_schmidt(d, seed);
        let sio = random_sio(d, 2 + i % 2, seed + 1);
        let lhs = dephase(&apply_sio(&sio, &rho).unwrap());
        let rhs = apply_sio(&sio, &dephase(&rho)).unwrap();
        if trace_distance(&lhs, &rhs).unwrap() > 1e-9 {
            return fail(
                name,
                60,
                "SIO does not commute with dephasing".into(),
                rho.to_json_string(),
            );
        }
        let pio = random_pio(d, 1 + i % 2, seed + 2);
        match pio.to_sio() {
            Ok(expanded) => {
                let a = apply_pio(&pio, &rho).unwrap();
                let b = apply_sio(&expanded, &rho).unwrap();
                if trace_distance(&a, &b).unwrap() > 1e-9 {
                    return fail(
                        name,
                        60,
                        "PIO expansion disagrees with direct application".into(),
                        rho.to_json_string(),
                    );
                }
            }
            Err(e) => {
                return fail(
                    name,
                    60,
                    format!("PIO failed to validate as SIO: {e}"),
                    rho.to_json_string(),
                )
            }
        }
    }
    ok(
        name,
        60,
        "SIO commute with dephasing; PIO expand to valid SIO".into(),
    )
}

fn instrument_frequencies(vc: &VerifyConfig) -> PropertyResult {
    let name = "instrument-frequencies-3sigma";
    let rho = ensembles::block_structured(3, &[2, 1], vc.seed).unwrap();
    let n = 4000u64;
    let freqs = crate::protocols::distill_simulate_small(&rho, n, vc.seed + 1, &vc.cfg).unwrap();
    let r = comparison_matrix(&rho, &vc.cfg);
    let part = edge_graph_and_cliques(&r, &rho).unwrap();
    for (s, &w) in part.block_weights().iter().enumerate() {
        let sigma = (w * (1.0 - w) / n as f64).sqrt();
        if (freqs[s] - w).abs() > 3.0 * sigma + 1e-9 {
            return fail(
                name,
                1,
                format!("block {s}: frequency {} vs weight {w}", freqs[s]),
                rho.to_json_string(),
            );
        }
    }
    ok(
        name,
        1,
        "sampled frequencies within 3 sigma of Tr[rho Pi]".into(),
    )
}

fn distill_consistency(vc: &VerifyConfig) -> PropertyResult {
    let name = "distill-rate-equals-q";
    for i in 0..200 {
        let d = 2 + (i % 4); // 2..=5
        let seed = vc.seed.wrapping_add(37 * i as u64);
        let profile: Vec<usize> = match d {
            2 => vec![2],
            3 => vec![2, 1],
            _ => vec![2, 2],
        };
        let rho = ensembles::block_structured(d, &profile, seed).unwrap();
        let run = distill_accounting(&rho, 50, seed, 2, &vc.cfg).unwrap();
        let q = quintessential(vc, &rho);
        if (run.deterministic_rate - q).abs() > 1e-9 {
            return fail(
                name,
                200,
                format!("rate {} vs Q {q}", run.deterministic_rate),
                rho.to_json_string(),
            );
        }
        if run.deterministic_rate > relative_entropy_of_coherence(&rho) + 1e-9 {
            return fail(name, 200, "rate above C_r".into(), rho.to_json_string());
        }
    }
    ok(
        name,
        200,
        "deterministic rate = Q <= C_r on 200 block-structured states".into(),
    )
}

fn dilution_plans(vc: &VerifyConfig) -> PropertyResult {
    let name = "dilution-feasible-plans-obey-bounds";
    let _ = vc;
    for (k, n, delta, eps) in [
        (4u64, 50u64, 0.1, 0.1),
        (3, 39, 0.1, 0.1),
        (3, 128, 0.1, 0.1),
        (5, 200, 0.2, 0.3),
        (6, 120, 0.15, 0.2),
    ] {
        match plan_dilution(k, n, delta, eps).unwrap() {
            DilutionOutcome::Feasible { plan } => {
                let (err, rate) = simulate_dilution(&plan).unwrap();
                if err > eps + 1e-12 || rate > (k as f64).log2() + delta + 1e-12 {
                    return fail(
                        name,
                        5,
                        format!("k={k} n={n}: error {err} rate {rate}"),
                        format!("{plan:?}"),
                    );
                }
                if plan.success_probability < 1.0 - eps / 2.0 - 1e-12 {
                    return fail(
                        name,
                        5,
                        format!("success probability {}", plan.success_probability),
                        format!("{plan:?}"),
                    );
                }
            }
            DilutionOutcome::Infeasible { searched_up_to } => {
                return fail(
                    name,
                    5,
                    format!(
                        "expected feasible plan for k={k} n={n} (searched to {searched_up_to})"
                    ),
                    String::new(),
                );
            }
        }
    }
    ok(
        name,
        5,
        "error <= eps and rate <= log2 k + delta on every feasible plan".into(),
    )
}

fn entropy_identities(vc: &VerifyConfig) -> PropertyResult {
    let name = "classical-entropy-identities";
    let states = state_bag(vc, 100, &[2, 3, 4, 5]);
    for rho in &states {
        let r = comparison_matrix(rho, &vc.cfg);
        let part = edge_graph_and_cliques(&r, rho).unwrap();
        let joint = joint_from_state(rho, &part);
        let q = quintessential_from_partition(rho, &part);
        if (cond_entropy(&joint) - q).abs() > 1e-9 {
            return fail(
                name,
                100,
                format!("H(X|Y) = {} vs Q = {q}", cond_entropy(&joint)),
                rho.to_json_string(),
            );
        }
        let l = max_pure_block_size(&r);
        if cond_max_entropy(&joint) != (l as f64).log2() {
            return fail(
                name,
                100,
                format!(
                    "H_max = {} vs log2 l = {}",
                    cond_max_entropy(&joint),
                    (l as f64).log2()
                ),
                rho.to_json_string(),
            );
        }
    }
    ok(
        name,
        100,
        "H(X|Y) = Q and H_max = log2 l on every state".into(),
    )
}

/// f(q) = max over rho's blocks of log2 |{j in block : q_j > 0}|, the
/// conditional max entropy with the block structure pinned to rho.
fn hmax_given_partition(diag: &[f64], blocks: &[Vec<usize>]) -> f64 {
    let mut best = 0usize;
    for block in blocks {
        let supp = block.iter().filter(|&&j| diag[j] > 1e-12).count();
        best = best.max(supp);
    }
    (best.max(1) as f64).log2()
}

fn lemma_sandwich(vc: &VerifyConfig) -> PropertyResult {
    let name = "classical-quantum-smoothing-sandwich";
    for i in 0..50 {
        let d = 2 + (i % 4);
        let seed = vc.seed.wrapping_add(41 * i as u64);
        let rho = if i % 2 == 0 {
            let profile: Vec<usize> = if d == 2 { vec![2] } else { vec![2, 1] };
            ensembles::block_structured(d, &profile, seed).unwrap()
        } else {
            ensembles::hilbert_schmidt(d, seed)
        };
        let r = comparison_matrix(&rho, &vc.cfg);
        let part = edge_graph_and_cliques(&r, &rho).unwrap();
        let blocks = part.blocks().to_vec();
        let diag = rho.diagonal();
        for eps in [0.1, 0.5] {
            let classical_min = crate::classical::v_epsilon_classical(&diag, eps)
                .iter()
                .map(|m| hmax_given_partition(&m.probs, &blocks))
                .fold(f64::INFINITY, f64::min);
            let quantum_min = v_epsilon(&rho, eps, &vc.cfg)
                .unwrap()
                .members
                .iter()
                .map(|m| hmax_given_partition(&m.state.diagonal(), &blocks))
                .fold(f64::INFINITY, f64::min);
            let tight_min = crate::classical::v_epsilon_classical(&diag, eps * eps / 4.0)
                .iter()
                .map(|m| hmax_given_partition(&m.probs, &blocks))
                .fold(f64::INFINITY, f64::min);
            if !(classical_min <= quantum_min && quantum_min <= tight_min) {
                return fail(
                    name,
                    50,
                    format!("eps = {eps}: {classical_min} / {quantum_min} / {tight_min}"),
                    rho.to_json_string(),
                );
            }
        }
    }
    ok(
        name,
        50,
        "three-way minimum ordering holds exactly at eps in {0.1, 0.5}".into(),
    )
}

fn aep_consistency(vc: &VerifyConfig) -> PropertyResult {
    let name = "aep-scan-envelope";
    let rho1 = DensityMatrix::from_real_rows(3, &[0.25, 0.25, 0.0, 0.25, 0.25, 0.0, 0.0, 0.0, 0.5])
        .unwrap();
    let r = comparison_matrix(&rho1, &vc.cfg);
    let part = edge_graph_and_cliques(&r, &rho1).unwrap();
    let joint = joint_from_state(&rho1, &part);
    let pts = crate::classical::aep_scan(&joint, 0.2, 8);
    for pt in &pts {
        if pt.value > pt.upper_curve + 1e-9 {
            return fail(
                name,
                8,
                format!(
                    "n = {}: value {} above the typical-set curve {}",
                    pt.n, pt.value, pt.upper_curve
                ),
                String::new(),
            );
        }
    }
    // the single-copy value agrees with the direct smoothed computation
    let direct = tweaked_hmax(&joint, 0.2);
    if (pts[0].value - direct).abs() > 1e-12 {
        return fail(
            name,
            8,
            "n = 1 disagrees with tweaked_hmax".into(),
            String::new(),
        );
    }
    ok(
        name,
        8,
        "scan values sit under the typical-set envelope".into(),
    )
}

fn cli_round_trip(vc: &VerifyConfig) -> PropertyResult {
    let name = "state-json-round-trip";
    let states = state_bag(vc, 50, &[2, 3, 4]);
    for rho in &states {
        let s = rho.to_json_string();
        let back = match DensityMatrix::from_json_str(&s) {
            Ok(b) => b,
            Err(e) => return fail(name, 50, format!("reparse failed: {e}"), s),
        };
        if back.entries() != rho.entries() {
            return fail(name, 50, "round trip not bit-identical".into(), s);
        }
    }
    ok(name, 50, "emitted states reparse bit-identically".into())
}

fn determinism(vc: &VerifyConfig) -> PropertyResult {
    let name = "determinism-measure-report";
    let rho = ensembles::block_structured(3, &[2, 1], vc.seed).unwrap();
    let a = measure(&rho, &vc.budget, &vc.cfg).unwrap();
    let b = measure(&rho, &vc.budget, &vc.cfg).unwrap();
    let ja = serde_json::to_string(&a).unwrap();
    let jb = serde_json::to_string(&b).unwrap();
    if ja != jb {
        return fail(name, 1, "same seed produced different reports".into(), ja);
    }
    ok(
        name,
        1,
        "identical (command, seed) gives identical reports".into(),
    )
}

fn registry() -> Vec<Check> {
    vec![
        Check {
            name: "dephase-idempotent-entropy",
            run: dephase_laws,
        },
        Check {
            name: "dephase-contracts-trace-distance",
            run: dephase_contracts_distance,
        },
        Check {
            name: "tensor-entropy-additive",
            run: tensor_entropy_additive,
        },
        Check {
            name: "additivity-q",
            run: q_additivity,
        },
        Check {
            name: "additivity-lambda-eta-tensorise",
            run: lambda_eta_tensorisation,
        },
        Check {
            name: "trimmed-psd-diagonal-preserved",
            run: trimmed_state_laws,
        },
        Check {
            name: "block-purity",
            run: block_purity,
        },
        Check {
            name: "mu-sio-monotone-suite",
            run: monotone_suite,
        },
        Check {
            name: "mu-smoothed-v-sio-monotone",
            run: smoothed_v_monotone,
        },
        Check {
            name: "v-member-lambda-and-block-alignment",
            run: v_member_structure,
        },
        Check {
            name: "mu-variational-psd-witness",
            run: mu_variational_witness,
        },
        Check {
            name: "cfu-sandwich-and-dd",
            run: cfu_sandwich,
        },
        Check {
            name: "cfu-pio-monotone",
            run: cfu_pio_monotone,
        },
        Check {
            name: "cfu-product-subadditive",
            run: cfu_product_additivity,
        },
        Check {
            name: "channels-dephasing-covariant-pio-in-sio",
            run: channel_laws,
        },
        Check {
            name: "instrument-frequencies-3sigma",
            run: instrument_frequencies,
        },
        Check {
            name: "distill-rate-equals-q",
            run: distill_consistency,
        },
        Check {
            name: "dilution-feasible-plans-obey-bounds",
            run: dilution_plans,
        },
        Check {
            name: "classical-entropy-identities",
            run: entropy_identities,
        },
        Check {
            name: "classical-quantum-smoothing-sandwich",
            run: lemma_sandwich,
        },
        Check {
            name: "aep-scan-envelope",
            run: aep_consistency,
        },
        Check {
            name: "state-json-round-trip",
            run: cli_round_trip,
        },
        Check {
            name: "determinism-measure-report",
            run: determinism,
        },
    ]
}

pub fn property_names() -> Vec<&'static str> {
    registry().iter().map(|c| c.name).collect()
}

/// Run every property whose name contains `filter` (all when None).
pub fn run_properties(vc: &VerifyConfig, filter: Option<&str>) -> Vec<PropertyResult> {
    registry()
        .iter()
        .filter(|c| filter.map(|f| c.name.contains(f)).unwrap_or(true))
        .map(|c| (c.run)(vc))
        .collect()
}
