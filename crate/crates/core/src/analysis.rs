//! Combined order, stability and monotonicity report for one scheme.

use serde::Serialize;

use crate::error::Result;
use crate::monotonicity::{monotonicity_report, MonotonicityReport};
use crate::order::{decoupled_order_residuals, gark_order_residuals, order_report, remaining_order3_residuals, OrderReport, RemainingOrder3};
use crate::schemes::Scheme;
use crate::stability::{psd_verdict, rk_p_matrix, stability_report, Partitioning, StabilityReport, PSD_TOL};
use crate::tableau::{validate_rk, ValidationReport, ROUNDING_TOL};

/// Largest internal consistency residual still counted as consistent.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// Upper end of the conditional-stability weight search.
pub const WEIGHT_R_MAX: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Consistency {
    pub fast: f64,
    pub slow: f64,
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisOptions {
    pub tolerance: f64,
    pub partitioning: Partitioning,
    pub mu: Option<f64>,
    pub rho: Option<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { tolerance: crate::order::CONDITION_TOL, partitioning: Partitioning::Additive, mu: None, rho: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub ratio: usize,
    pub structure: &'static str,
    pub fast_base: Option<ValidationReport>,
    pub slow_base: Option<ValidationReport>,
    pub order: OrderReport,
    /// Conditions in the stability-decoupled form; absent when a fast
    /// weight vanishes.
    pub decoupled_order: Option<OrderReport>,
    pub remaining_order3: Option<RemainingOrder3>,
    pub internal_consistency: Option<Consistency>,
    /// Both base methods algebraically stable on their own.
    pub base_pair_stable: Option<bool>,
    pub stability: StabilityReport,
    pub monotonicity: MonotonicityReport,
}

pub fn analyze(scheme: &Scheme, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let flat = scheme.flat();
    let monotonicity = monotonicity_report(&flat, scheme.multirate(), opts.rho)?;
    let stability = stability_report(&flat, opts.partitioning, opts.mu, WEIGHT_R_MAX);
    let report = match scheme {
        Scheme::Multirate(s) => {
            let (fast, slow) = s.internal_consistency_residuals();
            AnalysisReport {
                ratio: s.ratio(),
                structure: s.structure().as_str(),
                fast_base: Some(validate_rk(s.fast(), ROUNDING_TOL)),
                slow_base: Some(validate_rk(s.slow(), ROUNDING_TOL)),
                order: order_report(s, 3).with_tolerance(opts.tolerance),
                decoupled_order: decoupled_order_residuals(s).ok().map(|r| r.with_tolerance(opts.tolerance)),
                remaining_order3: Some(remaining_order3_residuals(s)),
                internal_consistency: Some(Consistency {
                    fast,
                    slow,
                    consistent: fast.max(slow) <= CONSISTENCY_TOL,
                }),
                base_pair_stable: Some(
                    psd_verdict(&rk_p_matrix(s.fast()), PSD_TOL).0 && psd_verdict(&rk_p_matrix(s.slow()), PSD_TOL).0,
                ),
                stability,
                monotonicity,
            }
        }
        Scheme::Flat(f) => AnalysisReport {
            ratio: f.ratio(),
            structure: if f.is_explicit() { "explicit" } else { "implicit" },
            fast_base: None,
            slow_base: None,
            order: gark_order_residuals(f, 3).with_tolerance(opts.tolerance),
            decoupled_order: None,
            remaining_order3: None,
            internal_consistency: None,
            base_pair_stable: None,
            stability,
            monotonicity,
        },
    };
    Ok(report)
}
