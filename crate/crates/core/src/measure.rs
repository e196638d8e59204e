//! The combined measure report: every asymptotic rate the library can
//! attach to a single state, with the method used for each entry.

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use crate::config::StructureConfig;
use crate::error::Result;
use crate::formation::{cf_estimate, cfu_optimize, CfuBudget, CfuReport};
use crate::monotones::{mu_profile, MonotoneProfile};
use crate::structure::{
    comparison_matrix, edge_graph_and_cliques, lambda_and_eta, max_pure_block_size,
    quintessential_from_partition, relative_entropy_of_coherence,
};
use crate::DensityMatrix;

/// Wrapper so infinite values serialise as the string "inf".
#[derive(Debug, Clone, Copy)]
pub struct MaybeInfinite(pub f64);

impl Serialize for MaybeInfinite {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str("inf")
        }
    }
}

/// Everything the `measure` command reports for one state.
///
/// Table rows: the MIO/DIO/IO distillable coherence is `Cr`, the SIO/PIO
/// distillable coherence is `Q`, the IO/SIO cost is estimated by
/// `Cf_estimate`, and the PIO cost is the `CfU` sandwich.
#[derive(Debug, Clone, Serialize)]
pub struct MeasureReport {
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "Cr")]
    pub cr: f64,
    pub eta: f64,
    pub lambda: f64,
    pub l: usize,
    pub blocks: Vec<Vec<usize>>,
    pub mu: Vec<f64>,
    #[serde(rename = "Cf_estimate")]
    pub cf_estimate: f64,
    #[serde(rename = "CfU")]
    pub cfu: MaybeInfinite,
    #[serde(rename = "CfU_lower")]
    pub cfu_lower: f64,
    #[serde(rename = "CfU_status")]
    pub cfu_status: crate::formation::CfuStatus,
    pub methods: Methods,
    #[serde(skip)]
    pub cfu_report: CfuReport,
    #[serde(skip)]
    pub mu_full: MonotoneProfile,
}

#[derive(Debug, Clone)]
pub struct Methods(pub Vec<(&'static str, String)>);

impl Serialize for Methods {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

pub fn measure(
    rho: &DensityMatrix,
    budget: &CfuBudget,
    cfg: &StructureConfig,
) -> Result<MeasureReport> {
    let r = comparison_matrix(rho, cfg);
    let part = edge_graph_and_cliques(&r, rho)?;
    let q = quintessential_from_partition(rho, &part);
    let cr = relative_entropy_of_coherence(rho);
    let (lambda, eta) = lambda_and_eta(&r);
    let l = max_pure_block_size(&r);
    let mu_full = mu_profile(rho, cfg);
    let cfu_report = cfu_optimize(rho, budget);
    let cf = cf_estimate(rho, budget);

    let methods = Methods(vec![
        ("Q", "entropy difference over the clique partition".into()),
        ("Cr", "eigendecomposition entropies".into()),
        (
            "mu",
            if mu_full
                .methods
                .iter()
                .all(|m| *m == crate::monotones::MuMethod::ExactEnumeration)
            {
                "exact-enumeration".into()
            } else {
                "mixed exact/greedy".into()
            },
        ),
        ("Cf_estimate", "convex-roof descent upper bound".into()),
        ("CfU", format!("{:?}", cfu_report.status).to_lowercase()),
    ]);

    Ok(MeasureReport {
        q,
        cr,
        eta,
        lambda,
        l,
        blocks: part.blocks().to_vec(),
        mu: mu_full.values.clone(),
        cf_estimate: cf,
        cfu: MaybeInfinite(cfu_report.upper_bound),
        cfu_lower: cfu_report.lower_bound,
        cfu_status: cfu_report.status,
        methods,
        cfu_report,
        mu_full,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formation::CfuStatus;

    #[test]
    fn abyssal_witness_report() {
        let rho = DensityMatrix::from_real_rows(2, &[2.0 / 3.0, 0.4, 0.4, 1.0 / 3.0]).unwrap();
        let rep = measure(&rho, &CfuBudget::default(), &StructureConfig::default()).unwrap();
        assert_eq!(rep.q, 0.0);
        assert!((rep.cr - 0.56494).abs() <= 1e-3);
        assert_eq!(rep.cfu_status, CfuStatus::Infinite);
        let json = serde_json::to_string(&rep).unwrap();
        assert!(json.contains("\"CfU\":\"inf\""));
    }

    #[test]
    fn maximally_coherent_report() {
        let psi = crate::state::PureState::uniform(4, &[0, 1, 2, 3], &[]).unwrap();
        let rho = DensityMatrix::from_pure(&psi);
        let rep = measure(&rho, &CfuBudget::default(), &StructureConfig::default()).unwrap();
        assert!((rep.q - 2.0).abs() <= 1e-9);
        assert!((rep.cr - 2.0).abs() <= 1e-9);
        assert!((rep.cfu.0 - 2.0).abs() <= 1e-9);
        assert!((rep.cf_estimate - 2.0).abs() <= 1e-6);
    }

    #[test]
    fn diagonal_report_is_all_zero() {
        let rho = DensityMatrix::from_diagonal(&[0.25, 0.25, 0.5]).unwrap();
        let rep = measure(&rho, &CfuBudget::default(), &StructureConfig::default()).unwrap();
        assert_eq!(rep.q, 0.0);
        assert!(rep.cr.abs() <= 1e-12);
        assert_eq!(rep.cfu.0, 0.0);
        assert!(rep.cf_estimate.abs() <= 1e-9);
        assert_eq!(rep.eta, 0.0);
    }
}
