//! Order conditions up to order three as numeric residuals, order
//! classification and empirical convergence studies.
//!
//! Condition ids:
//! - `slow.1`..`slow.11`: slow-partition conditions of a multirate scheme.
//! - `fast.1`..`fast.11`: fast-partition conditions; `fast.6-printed` is a
//!   diagnostic variant of `fast.6` with `(λ−1)A^{fs,λ}` in place of
//!   `(λ−1)I`.
//! - `decoupled.i`..`decoupled.xiv`: conditions for stability-decoupled
//!   schemes written with `D^λ = B^{f,−1}A^{sf,λᵀ}B^s`.
//! - `remaining.sf`, `remaining.fs`, `remaining.first-microstep`: the two
//!   conditions left over under internal consistency.
//! - `mrk.*`: Kvaerno–Rentrop coupling conditions.
//! - `mis.3`: the single order-3 coupling condition of MIS schemes.
//! - `gark.*`: generic two-partition GARK conditions of a flat tableau.

use serde::Serialize;

use crate::couplings::{kr_microstep_residual, EtaFamily, MisPair};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::integrator::{integrate, PartitionedIvp, SolverConfig, Stepper};
use crate::tableau::{max_abs, ones, FlatGarkTableau, Mat, MrGarkScheme, RkTableau, Vector};

/// Residual below which a condition counts as satisfied.
pub const CONDITION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionTag {
    Slow,
    Fast,
    Coupling,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub id: String,
    pub order: u8,
    pub tag: PartitionTag,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alias_of: Option<String>,
}

impl Residual {
    fn new(id: &str, order: u8, tag: PartitionTag, lhs: f64, rhs: f64) -> Self {
        Residual { id: id.to_string(), order, tag, value: (lhs - rhs).abs(), alias_of: None }
    }

    fn alias(mut self, of: &str) -> Self {
        self.alias_of = Some(of.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderReport {
    pub table_source: String,
    pub tolerance: f64,
    pub residuals: Vec<Residual>,
    /// Reported for information only; never used for classification.
    pub diagnostics: Vec<Residual>,
    pub classified_order: u8,
}

impl OrderReport {
    fn new(source: &str, residuals: Vec<Residual>, diagnostics: Vec<Residual>) -> Self {
        let mut rep = OrderReport {
            table_source: source.to_string(),
            tolerance: CONDITION_TOL,
            residuals,
            diagnostics,
            classified_order: 0,
        };
        rep.classified_order = classify(&rep.residuals, rep.tolerance);
        rep
    }

    /// Reclassify under a different tolerance.
    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self.classified_order = classify(&self.residuals, tol);
        self
    }

    pub fn get(&self, id: &str) -> Option<&Residual> {
        self.residuals.iter().chain(&self.diagnostics).find(|r| r.id == id)
    }

    /// Largest residual among conditions of order at most `p`.
    pub fn max_residual(&self, p: u8) -> f64 {
        max_abs(self.residuals.iter().filter(|r| r.order <= p).map(|r| r.value))
    }

    /// Conditions of order at most `p` that exceed the tolerance.
    pub fn failing(&self, p: u8) -> Vec<&Residual> {
        self.residuals
            .iter()
            .filter(|r| r.order <= p && r.value > self.tolerance)
            .collect()
    }

    fn merge(source: &str, parts: Vec<OrderReport>) -> Self {
        let mut residuals = Vec::new();
        let mut diagnostics = Vec::new();
        for p in parts {
            residuals.extend(p.residuals);
            diagnostics.extend(p.diagnostics);
        }
        OrderReport::new(source, residuals, diagnostics)
    }
}

/// Largest `p ≤ 3` such that every condition of order at most `p` is
/// satisfied, capped at the highest order present.
pub fn classify(residuals: &[Residual], tol: f64) -> u8 {
    let top = residuals.iter().map(|r| r.order).max().unwrap_or(0).min(3);
    let mut order = 0;
    for p in 1..=top {
        if residuals.iter().filter(|r| r.order == p).all(|r| r.value <= tol) {
            order = p;
        } else {
            break;
        }
    }
    order
}

fn mat_sum(ms: &[Mat]) -> Mat {
    let mut it = ms.iter();
    let first = it.next().expect("at least one matrix").clone();
    it.fold(first, |acc, m| acc + m)
}

/// Slow conditions of a multirate scheme, row by row.
pub fn slow_order_residuals(sch: &MrGarkScheme, up_to: u8) -> OrderReport {
    use PartitionTag::*;
    let m = sch.ratio() as f64;
    let (fast, slow) = (sch.fast(), sch.slow());
    let bs = slow.b();
    let ass = slow.a();
    let one_f = ones(fast.stages());
    let cs = ass * ones(slow.stages());
    let sum_sf = mat_sum(sch.couplings_sf());
    let sf1 = &sum_sf * &one_f;
    let cf = fast.a() * &one_f;

    let mut r = vec![Residual::new("slow.1", 1, Slow, bs.sum(), 1.0)];
    if up_to >= 2 {
        r.push(Residual::new("slow.2", 2, Slow, bs.dot(&cs), 0.5));
        r.push(Residual::new("slow.3", 2, Coupling, bs.dot(&sf1), m / 2.0));
    }
    if up_to >= 3 {
        let fs_chain = sch
            .couplings_sf()
            .iter()
            .zip(sch.couplings_fs())
            .fold(Vector::zeros(slow.stages()), |acc, (asf, afs)| {
                acc + asf * (afs * ones(slow.stages()))
            });
        let shifted = sch.couplings_sf().iter().enumerate().fold(
            Vector::zeros(slow.stages()),
            |acc, (l, asf)| acc + asf * cf.add_scalar(l as f64),
        );
        r.push(Residual::new("slow.4", 3, Slow, bs.dot(&cs.component_mul(&cs)), 1.0 / 3.0));
        r.push(Residual::new("slow.5", 3, Coupling, bs.dot(&cs.component_mul(&sf1)), m / 3.0));
        r.push(Residual::new("slow.6", 3, Coupling, bs.dot(&sf1.component_mul(&cs)), m / 3.0));
        r.push(Residual::new(
            "slow.7",
            3,
            Coupling,
            bs.dot(&sf1.component_mul(&sf1)),
            m * m / 3.0,
        ));
        r.push(Residual::new("slow.8", 3, Slow, bs.dot(&(ass * &cs)), 1.0 / 6.0));
        r.push(Residual::new("slow.9", 3, Coupling, bs.dot(&(ass * &sf1)), m / 6.0));
        r.push(Residual::new("slow.10", 3, Coupling, bs.dot(&fs_chain), m / 6.0));
        r.push(Residual::new("slow.11", 3, Coupling, bs.dot(&shifted), m * m / 6.0));
    }
    OrderReport::new("multirate slow conditions", r, Vec::new())
}

/// Fast conditions of a multirate scheme, row by row.
pub fn fast_order_residuals(sch: &MrGarkScheme, up_to: u8) -> OrderReport {
    use PartitionTag::*;
    let m = sch.ratio() as f64;
    let (fast, slow) = (sch.fast(), sch.slow());
    let bf = fast.b();
    let aff = fast.a();
    let one_s = ones(slow.stages());
    let cf = aff * ones(fast.stages());
    let fs1: Vec<Vector> = sch.couplings_fs().iter().map(|a| a * &one_s).collect();
    let sum_fs1 = fs1.iter().fold(Vector::zeros(fast.stages()), |acc, v| acc + v);

    let mut r = vec![Residual::new("fast.1", 1, Fast, bf.sum(), 1.0)];
    let mut diag = Vec::new();
    if up_to >= 2 {
        r.push(Residual::new("fast.2", 2, Fast, bf.dot(&cf), 0.5));
        r.push(Residual::new("fast.3", 2, Coupling, bf.dot(&sum_fs1), m / 2.0));
    }
    if up_to >= 3 {
        let zero = Vector::zeros(fast.stages());
        let weighted = fs1
            .iter()
            .enumerate()
            .fold(zero.clone(), |acc, (l, v)| acc + v * l as f64);
        let row5 = cf.component_mul(&sum_fs1) + &weighted;
        let row6 = fs1
            .iter()
            .enumerate()
            .fold(zero.clone(), |acc, (l, v)| acc + v.component_mul(&cf.add_scalar(l as f64)));
        let row6_printed = fs1.iter().enumerate().fold(zero.clone(), |acc, (l, v)| {
            acc + v.component_mul(&(&cf + v * l as f64))
        });
        let row7 = fs1.iter().fold(zero.clone(), |acc, v| acc + v.component_mul(v));
        let mut partial = zero.clone();
        let mut nested = zero.clone();
        for v in fs1.iter().take(sch.ratio().saturating_sub(1)) {
            partial += v;
            nested += &partial;
        }
        let row9 = aff * &sum_fs1 + nested;
        let sum_sf1 = mat_sum(sch.couplings_sf()) * ones(fast.stages());
        let row10 = mat_sum(sch.couplings_fs()) * sum_sf1;
        let row11 = mat_sum(sch.couplings_fs()) * (slow.a() * &one_s);

        r.push(Residual::new("fast.4", 3, Fast, bf.dot(&cf.component_mul(&cf)), 1.0 / 3.0));
        r.push(Residual::new("fast.5", 3, Coupling, bf.dot(&row5), m * m / 3.0));
        r.push(Residual::new("fast.6", 3, Coupling, bf.dot(&row6), m * m / 3.0));
        diag.push(Residual::new("fast.6-printed", 3, Coupling, bf.dot(&row6_printed), m * m / 3.0));
        r.push(Residual::new("fast.7", 3, Coupling, bf.dot(&row7), m / 3.0));
        r.push(Residual::new("fast.8", 3, Fast, bf.dot(&(aff * &cf)), 1.0 / 6.0));
        r.push(Residual::new("fast.9", 3, Coupling, bf.dot(&row9), m * m / 6.0));
        r.push(Residual::new("fast.10", 3, Coupling, bf.dot(&row10), m * m / 6.0));
        r.push(Residual::new("fast.11", 3, Coupling, bf.dot(&row11), m / 6.0));
    }
    OrderReport::new("multirate fast conditions", r, diag)
}

/// Slow and fast conditions together.
pub fn order_report(sch: &MrGarkScheme, up_to: u8) -> OrderReport {
    OrderReport::merge(
        "multirate slow and fast conditions",
        vec![slow_order_residuals(sch, up_to), fast_order_residuals(sch, up_to)],
    )
}

/// `D^λ = B^{f,−1}A^{sf,λᵀ}B^s` for every micro-step.
pub fn d_matrices(sch: &MrGarkScheme) -> Result<Vec<Mat>> {
    let bf = sch.fast().b();
    let bs = sch.slow().b();
    for (index, &value) in bf.iter().enumerate() {
        if value == 0.0 {
            return Err(Error::SingularWeights { index, value });
        }
    }
    Ok(sch
        .couplings_sf()
        .iter()
        .map(|asf| Mat::from_fn(bf.len(), bs.len(), |i, j| asf[(j, i)] * bs[j] / bf[i]))
        .collect())
}

/// Conditions for stability-decoupled schemes.
///
/// The nine independent conditions are ordinary residuals; the five that
/// coincide with one of them carry `alias_of`.
pub fn decoupled_order_residuals(sch: &MrGarkScheme) -> Result<OrderReport> {
    use PartitionTag::*;
    let d = d_matrices(sch)?;
    let m = sch.ratio() as f64;
    let (fast, slow) = (sch.fast(), sch.slow());
    let (bf, bs) = (fast.b(), slow.b());
    let (aff, ass) = (fast.a(), slow.a());
    let (one_f, one_s) = (ones(fast.stages()), ones(slow.stages()));
    let cf = aff * &one_f;
    let cs = ass * &one_s;
    let zero_f = Vector::zeros(fast.stages());
    let zero_s = Vector::zeros(slow.stages());

    let d1: Vec<Vector> = d.iter().map(|x| x * &one_s).collect();
    let sum_d1 = d1.iter().fold(zero_f.clone(), |acc, v| acc + v);
    let weighted_d1 = d1.iter().enumerate().fold(zero_f.clone(), |acc, (l, v)| acc + v * l as f64);
    let sum_sf = mat_sum(sch.couplings_sf());
    let sf1 = &sum_sf * &one_f;

    let i = bf.dot(&sum_d1);
    let ii = bf.dot(&(cf.component_mul(&sum_d1) + &weighted_d1));
    let iii = bf.dot(&d1.iter().fold(zero_f.clone(), |acc, v| acc + v.component_mul(v)));
    let iv = bf.dot(&(d1.iter().fold(zero_f.clone(), |acc, v| acc + v.component_mul(&cf)) + &weighted_d1));
    let mut partial = zero_f.clone();
    let mut nested = zero_f.clone();
    for v in d1.iter().take(sch.ratio().saturating_sub(1)) {
        partial += v;
        nested += &partial;
    }
    let v = bf.dot(&(d1.iter().fold(zero_f.clone(), |acc, x| acc + aff * x) + nested));
    let vi = bf.dot(&(d.iter().fold(zero_f.clone(), |acc, x| acc + x * &sf1)));
    let vii = bf.dot(&(mat_sum(&d) * &cs));
    let viii = bs.dot(&sf1);
    let ix = bs.dot(&cs.component_mul(&sf1));
    let x = bs.dot(&sf1.component_mul(&cs));
    let xi = bs.dot(&sf1.component_mul(&sf1));
    let xii = bs.dot(&(ass * &sf1));
    let xiii = bs.dot(
        &sch.couplings_sf()
            .iter()
            .zip(&d1)
            .fold(zero_s.clone(), |acc, (asf, v)| acc + asf * v),
    );
    let xiv = bs.dot(
        &sch.couplings_sf()
            .iter()
            .enumerate()
            .fold(zero_s, |acc, (l, asf)| acc + asf * cf.add_scalar(l as f64)),
    );

    let m2 = m * m;
    let residuals = vec![
        Residual::new("decoupled.i", 2, Coupling, i, m / 2.0).alias("decoupled.viii"),
        Residual::new("decoupled.ii", 3, Coupling, ii, m2 / 6.0).alias("decoupled.xiv"),
        Residual::new("decoupled.iii", 3, Coupling, iii, m / 3.0).alias("decoupled.xiii"),
        Residual::new("decoupled.iv", 3, Coupling, iv, m2 / 6.0),
        Residual::new("decoupled.v", 3, Coupling, v, m2 / 3.0),
        Residual::new("decoupled.vi", 3, Coupling, vi, m2 / 3.0).alias("decoupled.xi"),
        Residual::new("decoupled.vii", 3, Coupling, vii, m / 3.0).alias("decoupled.x"),
        Residual::new("decoupled.viii", 2, Coupling, viii, m / 2.0),
        Residual::new("decoupled.ix", 3, Coupling, ix, m / 3.0),
        Residual::new("decoupled.x", 3, Coupling, x, m / 3.0),
        Residual::new("decoupled.xi", 3, Coupling, xi, m2 / 3.0),
        Residual::new("decoupled.xii", 3, Coupling, xii, m / 6.0),
        Residual::new("decoupled.xiii", 3, Coupling, xiii, m / 3.0),
        Residual::new("decoupled.xiv", 3, Coupling, xiv, m2 / 6.0),
    ];
    Ok(OrderReport::new("stability-decoupled coupling conditions", residuals, Vec::new()))
}

/// The order-3 coupling conditions left over under internal consistency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RemainingOrder3 {
    /// `|b^{sᵀ}Σ_λ A^{sf,λ}(A^{ff} + (λ−1)I)1 − M²/6|`.
    pub r_sf: f64,
    /// `|b^{fᵀ}(Σ_λ A^{fs,λ})A^{ss}1 − M/6|`.
    pub r_fs: f64,
    /// The first-microstep form of `r_fs` written with the η shifts,
    /// present when the scheme carries an η family.
    pub first_microstep: Option<f64>,
    /// Internal consistency residuals (fast, slow) the reduction assumes.
    pub consistency: (f64, f64),
}

pub fn remaining_order3_residuals(sch: &MrGarkScheme) -> RemainingOrder3 {
    let m = sch.ratio() as f64;
    let (fast, slow) = (sch.fast(), sch.slow());
    let cf = fast.a() * ones(fast.stages());
    let cs = slow.a() * ones(slow.stages());
    let lhs_sf = slow.b().dot(
        &sch.couplings_sf()
            .iter()
            .enumerate()
            .fold(Vector::zeros(slow.stages()), |acc, (l, a)| acc + a * cf.add_scalar(l as f64)),
    );
    let lhs_fs = fast.b().dot(&(mat_sum(sch.couplings_fs()) * &cs));
    let first_microstep = sch.eta().map(|eta| {
        let sf = fast.stages();
        let f0 = eta.matrix(sf, 0);
        let shifts = (0..sch.ratio())
            .fold(Mat::zeros(sf, slow.stages()), |acc, l| acc + (eta.matrix(sf, l) - &f0) / m);
        let lhs = fast.b().dot(&((&sch.couplings_fs()[0] * m + shifts) * &cs));
        (lhs - m / 6.0).abs()
    });
    RemainingOrder3 {
        r_sf: (lhs_sf - m * m / 6.0).abs(),
        r_fs: (lhs_fs - m / 6.0).abs(),
        first_microstep,
        consistency: sch.internal_consistency_residuals(),
    }
}

impl RemainingOrder3 {
    pub fn as_residuals(&self) -> Vec<Residual> {
        let mut out = vec![
            Residual { id: "remaining.sf".into(), order: 3, tag: PartitionTag::Coupling, value: self.r_sf, alias_of: None },
            Residual { id: "remaining.fs".into(), order: 3, tag: PartitionTag::Coupling, value: self.r_fs, alias_of: None },
        ];
        if let Some(v) = self.first_microstep {
            out.push(Residual {
                id: "remaining.first-microstep".into(),
                order: 3,
                tag: PartitionTag::Coupling,
                value: v,
                alias_of: Some("remaining.fs".into()),
            });
        }
        out
    }
}

/// Kvaerno–Rentrop conditions in terms of the mRK-normalized couplings
/// `a_fs`, `a_sf` and the η family, plus the simplifying conditions.
pub fn kr_order_residuals(
    fast: &RkTableau,
    slow: &RkTableau,
    a_fs: &Mat,
    a_sf: &Mat,
    eta: &EtaFamily,
    m: usize,
) -> OrderReport {
    use PartitionTag::*;
    let mf = m as f64;
    let (bf, bs) = (fast.b(), slow.b());
    let cf = fast.a() * ones(fast.stages());
    let cs = slow.a() * ones(slow.stages());
    let shifts = (0..m).fold(Mat::zeros(fast.stages(), slow.stages()), |acc, l| {
        acc + eta.matrix(fast.stages(), l)
    }) / mf;
    let r = vec![
        Residual::new("mrk.fast.1", 1, Fast, bf.sum(), 1.0),
        Residual::new("mrk.fast.2", 2, Fast, bf.dot(&cf), 0.5),
        Residual::new("mrk.fast.3", 3, Fast, bf.dot(&cf.component_mul(&cf)), 1.0 / 3.0),
        Residual::new("mrk.fast.4", 3, Fast, bf.dot(&(fast.a() * &cf)), 1.0 / 6.0),
        Residual::new("mrk.fast.5", 3, Coupling, bf.dot(&((a_fs + shifts) * &cs)), mf / 6.0),
        Residual::new("mrk.slow.1", 1, Slow, bs.sum(), 1.0),
        Residual::new("mrk.slow.2", 2, Slow, bs.dot(&cs), 0.5),
        Residual::new("mrk.slow.3", 3, Slow, bs.dot(&cs.component_mul(&cs)), 1.0 / 3.0),
        Residual::new("mrk.slow.4", 3, Slow, bs.dot(&(slow.a() * &cs)), 1.0 / 6.0),
        Residual::new("mrk.slow.5", 3, Coupling, bs.dot(&(a_sf * &cf)), mf / 6.0),
        Residual {
            id: "mrk.consistency.fs".into(),
            order: 2,
            tag: Coupling,
            value: max_abs((a_fs * ones(slow.stages()) - &cf).iter().copied()),
            alias_of: None,
        },
        Residual {
            id: "mrk.consistency.sf".into(),
            order: 2,
            tag: Coupling,
            value: max_abs((a_sf * ones(fast.stages()) - &cs).iter().copied()),
            alias_of: None,
        },
        Residual {
            id: "mrk.eta-sum".into(),
            order: 2,
            tag: Coupling,
            value: (0..m)
                .map(|l| ((0..eta.cols()).map(|j| eta.eval(j, l)).sum::<f64>() - l as f64).abs())
                .fold(0.0, f64::max),
            alias_of: None,
        },
    ];
    let diag = vec![Residual {
        id: "mrk.microstep".into(),
        order: 3,
        tag: Coupling,
        value: kr_microstep_residual(fast, slow, eta, m),
        alias_of: None,
    }];
    OrderReport::new("Kvaerno-Rentrop coupling conditions", r, diag)
}

/// `|LHS − 1/3|` of the MIS order-3 coupling condition.
pub fn mis_order3_residual(p: &MisPair) -> f64 {
    let outer = p.outer();
    let c = outer.c();
    let s = c.len();
    let ac = outer.a() * c;
    let mut lhs = 0.0;
    for i in 1..s {
        lhs += (c[i] - c[i - 1]) * (ac[i] + ac[i - 1]);
    }
    lhs += (1.0 - c[s - 1]) * (0.5 + ac[s - 1]);
    (lhs - 1.0 / 3.0).abs()
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Part {
    F,
    S,
}

impl Part {
    fn name(self) -> &'static str {
        match self {
            Part::F => "f",
            Part::S => "s",
        }
    }
}

/// Generic two-partition GARK conditions of a flat tableau:
/// `b^qᵀ1 = 1`, `b^qᵀc^{q,m} = 1/2`, `b^qᵀ(c^{q,m}∘c^{q,n}) = 1/3` and
/// `b^qᵀA^{q,m}c^{m,n} = 1/6` for all partitions `q, m, n`.
pub fn gark_order_residuals(flat: &FlatGarkTableau, up_to: u8) -> OrderReport {
    let parts = [Part::F, Part::S];
    let a = |q: Part, m: Part| -> &Mat {
        match (q, m) {
            (Part::F, Part::F) => flat.a_ff(),
            (Part::F, Part::S) => flat.a_fs(),
            (Part::S, Part::F) => flat.a_sf(),
            (Part::S, Part::S) => flat.a_ss(),
        }
    };
    let b = |q: Part| if q == Part::F { flat.b_f() } else { flat.b_s() };
    let c = |q: Part, m: Part| -> Vector {
        let n = if m == Part::F { flat.n_fast() } else { flat.n_slow() };
        a(q, m) * ones(n)
    };
    let tag = |ps: &[Part]| {
        if ps.iter().all(|&p| p == Part::F) {
            PartitionTag::Fast
        } else if ps.iter().all(|&p| p == Part::S) {
            PartitionTag::Slow
        } else {
            PartitionTag::Coupling
        }
    };
    let mut r = Vec::new();
    for q in parts {
        r.push(Residual::new(&format!("gark.1.{}", q.name()), 1, tag(&[q]), b(q).sum(), 1.0));
    }
    if up_to >= 2 {
        for q in parts {
            for m in parts {
                let id = format!("gark.2.{}.{}", q.name(), m.name());
                r.push(Residual::new(&id, 2, tag(&[q, m]), b(q).dot(&c(q, m)), 0.5));
            }
        }
    }
    if up_to >= 3 {
        for q in parts {
            for m in parts {
                for n in parts {
                    let id = format!("gark.3a.{}.{}.{}", q.name(), m.name(), n.name());
                    let lhs = b(q).dot(&c(q, m).component_mul(&c(q, n)));
                    r.push(Residual::new(&id, 3, tag(&[q, m, n]), lhs, 1.0 / 3.0));
                }
            }
        }
        for q in parts {
            for m in parts {
                for n in parts {
                    let id = format!("gark.3b.{}.{}.{}", q.name(), m.name(), n.name());
                    let lhs = b(q).dot(&(a(q, m) * c(m, n)));
                    r.push(Residual::new(&id, 3, tag(&[q, m, n]), lhs, 1.0 / 6.0));
                }
            }
        }
    }
    OrderReport::new("generic two-partition GARK conditions", r, Vec::new())
}

/// Classical conditions of a single method up to order three.
pub fn rk_order_residuals(t: &RkTableau, up_to: u8) -> OrderReport {
    let b = t.b();
    let c = t.a() * ones(t.stages());
    let mut r = vec![Residual::new("rk.1", 1, PartitionTag::Slow, b.sum(), 1.0)];
    if up_to >= 2 {
        r.push(Residual::new("rk.2", 2, PartitionTag::Slow, b.dot(&c), 0.5));
    }
    if up_to >= 3 {
        r.push(Residual::new("rk.3a", 3, PartitionTag::Slow, b.dot(&c.component_mul(&c)), 1.0 / 3.0));
        r.push(Residual::new("rk.3b", 3, PartitionTag::Slow, b.dot(&(t.a() * &c)), 1.0 / 6.0));
    }
    OrderReport::new("classical Runge-Kutta conditions", r, Vec::new())
}

/// Final-time errors over a list of macro-step sizes and the least-squares
/// slope of `log(error)` against `log(H)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Empirical order on `ivp` over `[t0, t_end]`.
///
/// Uses the exact solution when the problem has one, otherwise a reference
/// computed with the same stepper at `min(H)/8`.
pub fn observed_order(
    stepper: &dyn Stepper,
    ivp: &PartitionedIvp,
    steps: &[f64],
    t_end: f64,
    cfg: &SolverConfig,
    exec: Execution,
) -> Result<ConvergenceStudy> {
    if steps.len() < 3 {
        return Err(Error::InvalidGrid("a convergence study needs at least three step sizes".into()));
    }
    let reference = match &ivp.exact {
        Some(exact) => exact(t_end),
        None => {
            let h_min = steps.iter().copied().fold(f64::INFINITY, f64::min);
            let fine = integrate(stepper, ivp, t_end, h_min / 8.0, cfg)
                .map_err(|e| e.error)?;
            fine.states.last().expect("trajectory has an initial state").clone()
        }
    };
    let results: Vec<Result<f64>> = exec::map(exec, steps, |&h| {
        let traj = integrate(stepper, ivp, t_end, h, cfg).map_err(|e| match e.error {
            Error::Diverged { .. } => Error::DivergedAt { h },
            other => other,
        })?;
        let last = traj.states.last().expect("trajectory has an initial state");
        let err = max_abs((last - &reference).iter().copied());
        if err.is_finite() {
            Ok(err)
        } else {
            Err(Error::DivergedAt { h })
        }
    });
    let errors = results.into_iter().collect::<Result<Vec<f64>>>()?;
    let slope = fit_slope(steps, &errors);
    Ok(ConvergenceStudy { steps: steps.to_vec(), errors, slope })
}

/// Least-squares slope of `log(y)` against `log(x)`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
