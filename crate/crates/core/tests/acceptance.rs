//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `-- --nocapture` to see every line). Tolerances are
//! pinned in code; expected values marked as derived were computed with
//! the independent oracles in the unit-test modules and frozen here.

use coherence_core::channels::{apply_pio, apply_sio, random_pio, random_sio};
use coherence_core::classical::{aep_scan, cond_entropy, cond_max_entropy, joint_from_state};
use coherence_core::config::StructureConfig;
use coherence_core::ensembles;
use coherence_core::formation::{
    cfu_optimize, cfu_qubit, diagonally_dominant_decomposition, pio_pushforward, CfuBudget,
    CfuStatus, TOL_RESIDUAL,
};
use coherence_core::measure::measure;
use coherence_core::monotones::{
    converse_bound, gershgorin_bound, mu_profile, overlap_lower_bound,
};
use coherence_core::protocols::{
    distill_accounting, plan_dilution, simulate_dilution, DilutionOutcome,
};
use coherence_core::state::{
    partial_trace, tensor, trace_distance, DensityMatrix, PureState, Subsystem,
};
use coherence_core::structure::{
    comparison_matrix, edge_graph_and_cliques, lambda_and_eta, max_pure_block_size,
    quintessential_from_partition, relative_entropy_of_coherence,
};
use num_complex::Complex64;
use std::time::Instant;

fn cfg() -> StructureConfig {
    StructureConfig::default()
}

fn rho0() -> DensityMatrix {
    DensityMatrix::from_real_rows(2, &[2.0 / 3.0, 0.4, 0.4, 1.0 / 3.0]).unwrap()
}

fn rho1() -> DensityMatrix {
    DensityMatrix::from_real_rows(3, &[0.25, 0.25, 0.0, 0.25, 0.25, 0.0, 0.0, 0.0, 0.5]).unwrap()
}

fn report(criterion: &str, failures: &[String], start: Instant) {
    let status = if failures.is_empty() { "PASS" } else { "FAIL" };
    println!(
        "acceptance {criterion}: {status} ({:.2}s)",
        start.elapsed().as_secs_f64()
    );
    for f in failures {
        println!("  - {f}");
    }
    assert!(
        failures.is_empty(),
        "criterion {criterion} failed: {failures:?}"
    );
}

#[test]
fn acceptance_01_abyssal_witness() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let rep = measure(&rho0(), &CfuBudget::default(), &cfg()).unwrap();
    if rep.q != 0.0 {
        failures.push(format!("Q = {} but the blocks are singletons", rep.q));
    }
    if (rep.cr - 0.56494).abs() > 1e-3 {
        failures.push(format!("Cr = {} vs 0.56494 +- 1e-3", rep.cr));
    }
    if rep.cfu_status != CfuStatus::Infinite || rep.cfu.0.is_finite() {
        failures.push(format!(
            "CfU should be infinite via the membership test, got {:?} / {}",
            rep.cfu_status, rep.cfu.0
        ));
    }
    report("01 abyssal witness", &failures, start);
}

#[test]
fn acceptance_02_theorem1_consistency() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for i in 0..200u64 {
        let d = 2 + (i as usize % 4); // 2..=5
        let profile: Vec<usize> = match d {
            2 => vec![2],
            3 => vec![2, 1],
            4 => vec![2, 2],
            _ => vec![3, 2],
        };
        let rho = ensembles::block_structured(d, &profile, 1000 + i).unwrap();
        let run = distill_accounting(&rho, 40, i, 2, &cfg()).unwrap();
        let r = comparison_matrix(&rho, &cfg());
        let part = edge_graph_and_cliques(&r, &rho).unwrap();
        let q = quintessential_from_partition(&rho, &part);
        if (run.deterministic_rate - q).abs() > 1e-9 {
            failures.push(format!(
                "state {i}: deterministic rate {} vs Q {q}",
                run.deterministic_rate
            ));
            break;
        }
        if q > relative_entropy_of_coherence(&rho) + 1e-9 {
            failures.push(format!("state {i}: Q above C_r"));
            break;
        }
    }
    report("02 theorem-1 consistency (200 states)", &failures, start);
}

#[test]
fn acceptance_03_additivity_and_tensorisation() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for i in 0..100u64 {
        let a = if i % 2 == 0 {
            ensembles::block_structured(4, &[2, 1], 2000 + i).unwrap()
        } else {
            ensembles::hilbert_schmidt(3, 2000 + i)
        };
        let b = if i % 3 == 0 {
            ensembles::block_structured(3, &[2], 3000 + i).unwrap()
        } else {
            ensembles::hilbert_schmidt(2, 3000 + i)
        };
        let ab = tensor(&a, &b).unwrap();
        let q = |rho: &DensityMatrix| {
            let r = comparison_matrix(rho, &cfg());
            let part = edge_graph_and_cliques(&r, rho).unwrap();
            quintessential_from_partition(rho, &part)
        };
        if (q(&ab) - q(&a) - q(&b)).abs() > 1e-9 {
            failures.push(format!("pair {i}: Q not additive"));
            break;
        }
        let (la, ea) = lambda_and_eta(&comparison_matrix(&a, &cfg()));
        let (lb, eb) = lambda_and_eta(&comparison_matrix(&b, &cfg()));
        let (lab, eab) = lambda_and_eta(&comparison_matrix(&ab, &cfg()));
        // exact identity at the representation level; 1e-12 covers the
        // one-ulp rounding of tensor-product entries
        if (lab - la.max(lb)).abs() > 1e-12 || (eab - ea.max(eb)).abs() > 1e-12 {
            failures.push(format!(
                "pair {i}: tensorisation off: lambda {lab} vs {}, eta {eab} vs {}",
                la.max(lb),
                ea.max(eb)
            ));
            break;
        }
    }
    report(
        "03 additivity and tensorisation (100 pairs)",
        &failures,
        start,
    );
}

#[test]
fn acceptance_04_monotone_suite() {
    let start = Instant::now();
    let mut failures = Vec::new();
    'outer: for i in 0..100u64 {
        let d = 2 + (i as usize % 3); // 2..=4
        let rho = match i % 3 {
            0 => ensembles::block_structured(d, &[2], 4000 + i).unwrap(),
            1 => ensembles::hilbert_schmidt(d, 4000 + i),
            _ => ensembles::diagonally_dominant(d, 4000 + i),
        };
        let chan = random_sio(d, 2 + (i as usize % 3), 5000 + i);
        let out = apply_sio(&chan, &rho).unwrap();
        let prof_in = mu_profile(&rho, &cfg());
        let prof_out = mu_profile(&out, &cfg());
        let r = comparison_matrix(&rho, &cfg());
        let (_, eta) = lambda_and_eta(&r);
        let l = max_pure_block_size(&r);
        if prof_in.values[0] != 0.0 {
            failures.push(format!("state {i}: mu_1 != 0"));
            break;
        }
        if (prof_in.values[1] - (1.0 + eta).log2()).abs() > 1e-9 {
            failures.push(format!("state {i}: mu_2 != log2(1 + eta)"));
            break;
        }
        for k in 1..=d {
            if prof_out.values[k - 1] > prof_in.values[k - 1] + 1e-9 {
                failures.push(format!("state {i}: mu_{k} increased under SIO"));
                break 'outer;
            }
            if k >= l && prof_in.values[k - 1] > gershgorin_bound(&rho, k, &cfg()).unwrap() + 1e-9 {
                failures.push(format!("state {i}: Gershgorin bound violated at k = {k}"));
                break 'outer;
            }
        }
        let phases: Vec<f64> = (0..d).map(|p| ((i + p as u64) as f64).sin()).collect();
        let psi = PureState::uniform(d, &(0..d).collect::<Vec<_>>(), &phases).unwrap();
        if overlap_lower_bound(&rho, &psi).unwrap() > prof_in.values[d - 1] + 1e-9 {
            failures.push(format!("state {i}: overlap bound violated"));
            break;
        }
    }
    report("04 monotone suite (100 pairs, all k)", &failures, start);
}

#[test]
fn acceptance_05_entropy_identities() {
    let start = Instant::now();
    let mut failures = Vec::new();
    for i in 0..120u64 {
        let d = 2 + (i as usize % 4);
        let rho = match i % 3 {
            0 => {
                let profile: Vec<usize> = if d == 2 { vec![2] } else { vec![2, 1] };
                ensembles::block_structured(d, &profile, 6000 + i).unwrap()
            }
            1 => ensembles::hilbert_schmidt(d, 6000 + i),
            _ => ensembles::diagonally_dominant(d, 6000 + i),
        };
        let r = comparison_matrix(&rho, &cfg());
        let part = edge_graph_and_cliques(&r, &rho).unwrap();
        let joint = joint_from_state(&rho, &part);
        let q = quintessential_from_partition(&rho, &part);
        if (cond_entropy(&joint) - q).abs() > 1e-9 {
            failures.push(format!("state {i}: H(X|Y) != Q"));
            break;
        }
        if cond_max_entropy(&joint) != (max_pure_block_size(&r) as f64).log2() {
            failures.push(format!("state {i}: H_max != log2 l"));
            break;
        }
    }
    report("05 entropy identities", &failures, start);
}

#[test]
fn acceptance_06_smoothing_sandwich() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let hmax_given = |diag: &[f64], blocks: &[Vec<usize>]| -> f64 {
        let best = blocks
            .iter()
            .map(|b| b.iter().filter(|&&j| diag[j] > 1e-12).count())
            .max()
            .unwrap_or(1);
        (best.max(1) as f64).log2()
    };
    'outer: for i in 0..50u64 {
        let d = 2 + (i as usize % 4); // 2..=5
        let rho = if i % 2 == 0 {
            let profile: Vec<usize> = if d == 2 { vec![2] } else { vec![2, 1] };
            ensembles::block_structured(d, &profile, 7000 + i).unwrap()
        } else {
            ensembles::hilbert_schmidt(d, 7000 + i)
        };
        let r = comparison_matrix(&rho, &cfg());
        let part = edge_graph_and_cliques(&r, &rho).unwrap();
        let blocks = part.blocks().to_vec();
        let diag = rho.diagonal();
        for eps in [0.1, 0.5] {
            let classical = coherence_core::classical::v_epsilon_classical(&diag, eps)
                .iter()
                .map(|m| hmax_given(&m.probs, &blocks))
                .fold(f64::INFINITY, f64::min);
            let quantum = coherence_core::monotones::v_epsilon(&rho, eps, &cfg())
                .unwrap()
                .members
                .iter()
                .map(|m| hmax_given(&m.state.diagonal(), &blocks))
                .fold(f64::INFINITY, f64::min);
            let tight = coherence_core::classical::v_epsilon_classical(&diag, eps * eps / 4.0)
                .iter()
                .map(|m| hmax_given(&m.probs, &blocks))
                .fold(f64::INFINITY, f64::min);
            if !(classical <= quantum && quantum <= tight) {
                failures.push(format!(
                    "state {i} eps {eps}: {classical} / {quantum} / {tight}"
                ));
                break 'outer;
            }
        }
    }
    report("06 smoothing sandwich (50 states)", &failures, start);
}

#[test]
fn acceptance_07_tweaked_aep() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let rho = rho1();
    let r = comparison_matrix(&rho, &cfg());
    let part = edge_graph_and_cliques(&r, &rho).unwrap();
    let joint = joint_from_state(&rho, &part);
    assert!((cond_entropy(&joint) - 0.5).abs() < 1e-12);
    let pts = aep_scan(&joint, 0.2, 12);
    let values: Vec<f64> = pts.iter().map(|p| p.value).collect();
    println!(
        "  scan values (1/n) H~ for n = 1..12: {:?}",
        values
            .iter()
            .map(|v| (v * 1e4).round() / 1e4)
            .collect::<Vec<_>>()
    );
    if (values[11] - 0.5).abs() > 0.2 {
        failures.push(format!("value(12) = {} not within 0.2 of 0.5", values[11]));
    }
    // Stated criterion: the sequence is non-increasing for n >= 4. The
    // exhaustive-enumeration oracle (cross-checked against brute-force
    // subset enumeration in the unit tests) produces small parity
    // oscillations, e.g. at n = 8 -> 9; this sub-check documents that
    // discrepancy rather than hiding it.
    for n in 4..12 {
        if values[n] > values[n - 1] + 1e-12 {
            failures.push(format!(
                "sequence increases at n = {} -> {}: {} -> {} (exact oracle value)",
                n,
                n + 1,
                values[n - 1],
                values[n]
            ));
        }
    }
    report("07 tweaked equipartition scan", &failures, start);
}

#[test]
fn acceptance_08_qubit_cost_grid() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let budget = CfuBudget {
        restarts: 2,
        iterations: 150,
        seed: 0,
    };
    'outer: for ip in 0..20 {
        let p = (ip as f64 + 0.5) / 20.0;
        let zmax = p.min(1.0 - p);
        for iz in 0..20 {
            // feasible band: 0 < z <= min(p, 1-p)
            let z = (iz as f64 + 0.5) / 20.0 * zmax;
            let rho = DensityMatrix::from_real_rows(2, &[p, z, z, 1.0 - p]).unwrap();
            let rep = cfu_optimize(&rho, &budget);
            if (rep.upper_bound - 2.0 * z).abs() > 1e-6 {
                failures.push(format!(
                    "feasible (p, z) = ({p:.3}, {z:.4}): {} vs {}",
                    rep.upper_bound,
                    2.0 * z
                ));
                break 'outer;
            }
            // abyssal band: min(p, 1-p) < z <= sqrt(p (1 - p)) is PSD but
            // has no uniformly coherent decomposition
            let hi = (p * (1.0 - p)).sqrt();
            if hi > zmax + 1e-9 {
                let zi = zmax + (iz as f64 + 0.5) / 20.0 * (hi - zmax) * 0.98;
                let rho = DensityMatrix::from_real_rows(2, &[p, zi, zi, 1.0 - p]).unwrap();
                let rep = cfu_optimize(&rho, &budget);
                if rep.status != CfuStatus::Infinite {
                    failures.push(format!(
                        "infeasible (p, z) = ({p:.3}, {zi:.4}) reported {:?}",
                        rep.status
                    ));
                    break 'outer;
                }
            }
        }
    }
    report("08 qubit cost grid (20 x 20)", &failures, start);
}

#[test]
fn acceptance_09_formation_properties() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let budget = CfuBudget::default();

    // PIO monotonicity of the upper bound on 50 trials
    for i in 0..50u64 {
        let (d, allow_large) = match i % 3 {
            0 => (2, false),
            1 => (3, false),
            _ => (3, true),
        };
        let (rho, _) = ensembles::co_u_mixture(d, 3 + (i as usize % 2), allow_large, 8000 + i);
        let chan = random_pio(d, 1 + (i as usize % 2), 9000 + i);
        let out = apply_pio(&chan, &rho).unwrap();
        let rep_in = cfu_optimize(&rho, &budget);
        let rep_out = cfu_optimize(&out, &budget);
        let mut ub_out = rep_out.upper_bound;
        if let Some(w) = &rep_in.witness {
            let pushed = pio_pushforward(w, &chan, &out);
            if pushed.residual <= TOL_RESIDUAL {
                ub_out = ub_out.min(pushed.cost());
            }
        }
        if ub_out > rep_in.upper_bound + 2e-3 {
            failures.push(format!(
                "trial {i}: upper bound grew {} -> {}",
                rep_in.upper_bound, ub_out
            ));
            break;
        }
    }

    // diagonally dominant states decompose tightly
    for i in 0..25u64 {
        let d = 2 + (i as usize % 3);
        let rho = ensembles::diagonally_dominant(d, 9500 + i);
        let dec = diagonally_dominant_decomposition(&rho).expect("dominant by construction");
        if dec.residual > 1e-7 {
            failures.push(format!("dominant state {i}: residual {}", dec.residual));
            break;
        }
        if dec.cost() > 1.0 + 1e-9 {
            failures.push(format!("dominant state {i}: cost {} > 1", dec.cost()));
            break;
        }
    }

    // superadditivity instance: Psi = (|00> + |01> + |10>)/sqrt(3)
    let s = 1.0 / 3.0f64.sqrt();
    let psi = PureState::new(vec![
        Complex64::new(s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(s, 0.0),
        Complex64::new(0.0, 0.0),
    ])
    .unwrap();
    let rho_ab = DensityMatrix::from_pure(&psi);
    let rho_a = partial_trace(&rho_ab, (2, 2), Subsystem::A).unwrap();
    let rho_b = partial_trace(&rho_ab, (2, 2), Subsystem::B).unwrap();
    let sum = cfu_qubit(&rho_a).unwrap() + cfu_qubit(&rho_b).unwrap();
    if (sum - 4.0 / 3.0).abs() > 1e-9 {
        failures.push(format!("marginal sum {} vs 4/3", sum));
    }
    if sum > 3f64.log2() + 1e-9 {
        failures.push(format!("marginal sum {} exceeds log2 3", sum));
    }
    // the optimizer reproduces the closed form on both marginals
    for marg in [&rho_a, &rho_b] {
        let rep = cfu_optimize(marg, &budget);
        if (rep.upper_bound - 2.0 / 3.0).abs() > 1e-6 {
            failures.push(format!("marginal optimizer value {}", rep.upper_bound));
        }
    }
    report("09 formation properties", &failures, start);
}

#[test]
fn acceptance_10_dilution() {
    let start = Instant::now();
    let mut failures = Vec::new();
    // Stated criterion: (k, delta, eps, n) = (3, 0.1, 0.1, 100) is
    // feasible. The four-inequality chain forces
    // ceil(N log2 3) - N log2 3 <= -log2(0.95) = 0.0740 with
    // N in [100, 106] (the budget caps M at 168); the actual gaps are
    // {0.504, 0.919, 0.334, 0.749, 0.164, 0.579, 0.994}, so no plan
    // exists; the smallest feasible n past 100 is 105 (N = 111, M = 176).
    // The assertion is kept as stated and documents the outcome.
    match plan_dilution(3, 100, 0.1, 0.1).unwrap() {
        DilutionOutcome::Feasible { plan } => {
            let (err, rate) = simulate_dilution(&plan).unwrap();
            if err > 0.1 + 1e-12 {
                failures.push(format!("error {err} above eps"));
            }
            if rate > 3f64.log2() + 0.1 + 1e-12 {
                failures.push(format!("rate {rate} above log2 3 + delta"));
            }
        }
        DilutionOutcome::Infeasible { searched_up_to } => {
            failures.push(format!(
                "plan_dilution(3, 100, 0.1, 0.1) infeasible (searched N up to \
                 {searched_up_to}); ceiling gaps over the admissible window all \
                 exceed 0.0740; nearest feasible n is 105"
            ));
        }
    }
    // regression for the nearest feasible n, exercising the same bounds
    match plan_dilution(3, 105, 0.1, 0.1).unwrap() {
        DilutionOutcome::Feasible { plan } => {
            let (err, rate) = simulate_dilution(&plan).unwrap();
            if err > 0.1 + 1e-12 || rate > 3f64.log2() + 0.1 + 1e-12 {
                failures.push(format!("n = 105 plan out of bounds: {err}, {rate}"));
            }
        }
        other => failures.push(format!("n = 105 should be feasible, got {other:?}")),
    }
    // integer-log branch: k = 4 relabels exactly
    match plan_dilution(4, 100, 0.1, 0.1).unwrap() {
        DilutionOutcome::Feasible { plan } => {
            let (err, rate) = simulate_dilution(&plan).unwrap();
            if err != 0.0 || (rate - 2.0).abs() > 1e-12 {
                failures.push(format!("k = 4: error {err}, rate {rate}"));
            }
        }
        other => failures.push(format!("k = 4 should be exact, got {other:?}")),
    }
    report("10 dilution planning", &failures, start);
}

#[test]
fn acceptance_11_converse_witness() {
    let start = Instant::now();
    let mut failures = Vec::new();
    let rho = rho0();
    // Q(rho0) = 0, so any positive rate must violate the achievability
    // constraint; r = 0.2 at n = 8, eps = 0.1.
    let rep = converse_bound(&rho, 0.2, 8, 0.1, &cfg()).unwrap();
    let threshold = rep.floor_rn as f64 + (1.0f64 - 0.05).log2();
    if rep.bound >= threshold {
        failures.push(format!(
            "bound {} does not undercut floor(rn) + log2(1 - eps/2) = {}",
            rep.bound, threshold
        ));
    }
    if !rep.violates_achievability {
        failures.push("report does not flag the violation".into());
    }
    report("11 converse witness", &failures, start);
}

#[test]
fn acceptance_runtime_sanity() {
    // the abyssal witness report must come back in under a second
    let start = Instant::now();
    let _ = measure(&rho0(), &CfuBudget::default(), &cfg()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    println!("acceptance runtime: measure(rho0) took {elapsed:.3}s");
    assert!(elapsed < 1.0, "measure took {elapsed}s");
}

#[test]
fn acceptance_cross_checks() {
    // derived values reused across criteria: rho1's structure
    let rho = rho1();
    let r = comparison_matrix(&rho, &cfg());
    let part = edge_graph_and_cliques(&r, &rho).unwrap();
    assert_eq!(part.blocks(), &[vec![0, 1], vec![2]]);
    assert!((quintessential_from_partition(&rho, &part) - 0.5).abs() < 1e-12);
    // trace distance oracle behind the smoothing-set examples
    let member = {
        let mut m = nalgebra::DMatrix::<Complex64>::zeros(3, 3);
        m[(2, 2)] = Complex64::new(1.0, 0.0);
        DensityMatrix::from_entries(m).unwrap()
    };
    assert!((trace_distance(&rho, &member).unwrap() - 1.0).abs() < 1e-12);
}
