//! Absolute monotonicity: the bordered matrix `Â`, α(r)/β(r) checks, the
//! radius of absolute monotonicity and incidence conditions for telescopic
//! schemes.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tableau::{FlatGarkTableau, Mat, MrGarkScheme, RkTableau, Vector, NONZERO};

/// Relative tolerance on α/β entries: `−AM_TOL·(1 + r)`.
pub const AM_TOL: f64 = 1e-10;

/// Default search interval and resolution of [`am_radius`].
pub const R_MAX: f64 = 100.0;
pub const RADIUS_TOL: f64 = 1e-6;

/// `[[A_ff, A_fs, 0], [A_sf, A_ss, 0], [b_fᵀ, b_sᵀ, 0]]`.
pub fn build_atilde(flat: &FlatGarkTableau) -> Mat {
    let n = flat.n_stages();
    let mut t = Mat::zeros(n + 1, n + 1);
    t.view_mut((0, 0), (n, n)).copy_from(&flat.full_a());
    for (k, &w) in flat.full_b().iter().enumerate() {
        t[(n, k)] = w;
    }
    t
}

/// `Ã·diag(M·I, I, 1)`: the fast columns rescaled from micro-step to
/// macro-step units.
pub fn build_ahat(flat: &FlatGarkTableau) -> Mat {
    let mut t = build_atilde(flat);
    let m = flat.ratio() as f64;
    for j in 0..flat.n_fast() {
        t.column_mut(j).scale_mut(m);
    }
    t
}

/// `[[A, 0], [bᵀ, 0]]` of a single method.
pub fn bordered(t: &RkTableau) -> Mat {
    let s = t.stages();
    let mut out = Mat::zeros(s + 1, s + 1);
    out.view_mut((0, 0), (s, s)).copy_from(t.a());
    for j in 0..s {
        out[(s, j)] = t.b()[j];
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmVerdict {
    Monotonic,
    NotMonotonic,
    /// `Â` has a negative entry; the definition does not apply.
    NegativeCoefficients,
    SingularResolvent,
}

impl AmVerdict {
    pub fn holds(self) -> bool {
        self == AmVerdict::Monotonic
    }
}

fn has_negative(ahat: &Mat) -> bool {
    ahat.iter().any(|&x| x < -NONZERO)
}

/// Verdict for an arbitrary bordered matrix `Â` at `r`.
pub fn am_verdict(ahat: &Mat, r: f64, rel_tol: f64) -> AmVerdict {
    if has_negative(ahat) {
        return AmVerdict::NegativeCoefficients;
    }
    let n = ahat.nrows();
    let scaled = ahat * r;
    let lu = (Mat::identity(n, n) + &scaled).lu();
    let Some(alpha) = lu.solve(&Vector::from_element(n, 1.0)) else {
        return AmVerdict::SingularResolvent;
    };
    let Some(beta) = lu.solve(&scaled) else {
        return AmVerdict::SingularResolvent;
    };
    let floor = -rel_tol * (1.0 + r);
    if alpha.iter().chain(beta.iter()).all(|&x| x >= floor) {
        AmVerdict::Monotonic
    } else {
        AmVerdict::NotMonotonic
    }
}

/// α(r) = (I + rÂ)⁻¹1 ≥ 0 and β(r) = (I + rÂ)⁻¹rÂ ≥ 0, with `Â ≥ 0`
/// required.
pub fn is_absolutely_monotonic(flat: &FlatGarkTableau, r: f64, rel_tol: f64) -> AmVerdict {
    am_verdict(&build_ahat(flat), r, rel_tol)
}

/// Whether the radius can be positive at all: for `Â ≥ 0`,
/// β(r) = Σ_k (−1)^{k−1} r^k Â^k, so every entry reachable through a walk
/// must be reachable through a walk of odd shortest length.
pub fn positive_radius_possible(ahat: &Mat) -> bool {
    if has_negative(ahat) {
        return false;
    }
    let n = ahat.nrows();
    let edge = |i: usize, j: usize| ahat[(i, j)].abs() > NONZERO;
    for start in 0..n {
        // Breadth-first search over walks of length ≥ 1.
        let mut dist = vec![usize::MAX; n];
        let mut frontier: Vec<usize> = (0..n).filter(|&j| edge(start, j)).collect();
        for &j in &frontier {
            dist[j] = 1;
        }
        let mut len = 1;
        while !frontier.is_empty() {
            len += 1;
            let mut next = Vec::new();
            for &k in &frontier {
                for j in 0..n {
                    if edge(k, j) && dist[j] == usize::MAX {
                        dist[j] = len;
                        next.push(j);
                    }
                }
            }
            frontier = next;
        }
        if dist.iter().any(|&d| d != usize::MAX && d % 2 == 0) {
            return false;
        }
    }
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadiusResult {
    pub radius: f64,
    /// Monotonic throughout `[0, r_max]`; the true radius may be larger.
    pub saturated: bool,
    pub samples: Vec<(f64, bool)>,
}

/// Radius of absolute monotonicity of a bordered matrix by bisection.
pub fn ahat_radius(ahat: &Mat, r_max: f64, tol: f64) -> RadiusResult {
    let mut samples = Vec::new();
    if !positive_radius_possible(ahat) {
        return RadiusResult { radius: 0.0, saturated: false, samples };
    }
    let mut check = |r: f64| {
        let ok = am_verdict(ahat, r, AM_TOL).holds();
        samples.push((r, ok));
        ok
    };
    if check(r_max) {
        return RadiusResult { radius: r_max, saturated: true, samples };
    }
    let (mut lo, mut hi) = (0.0, r_max);
    while hi - lo > tol * 1e-3 {
        let mid = 0.5 * (lo + hi);
        if check(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    RadiusResult { radius: lo, saturated: false, samples }
}

pub fn am_radius(flat: &FlatGarkTableau, r_max: f64, tol: f64) -> RadiusResult {
    ahat_radius(&build_ahat(flat), r_max, tol)
}

/// Classical radius of a single method.
pub fn rk_am_radius(t: &RkTableau, r_max: f64, tol: f64) -> RadiusResult {
    ahat_radius(&bordered(t), r_max, tol)
}

/// `H ≤ ℛ·ρ`.
pub fn step_bound(radius: f64, rho: f64) -> Result<f64> {
    if rho <= 0.0 || !rho.is_finite() {
        return Err(Error::Domain(format!("monotonicity radius rho = {rho} must be positive")));
    }
    Ok(radius * rho)
}

fn abs(m: &Mat) -> Mat {
    m.abs()
}

/// `Inc(x) ≤ Inc(y)` entrywise.
fn inc_le(x: &Mat, y: &Mat) -> bool {
    x.iter().zip(y.iter()).all(|(a, b)| a.abs() <= NONZERO || b.abs() > NONZERO)
}

/// Incidence conditions for a telescopic scheme (one base method for both
/// partitions).
///
/// Products are formed from absolute values, so the incidence of every sum
/// is structural and never hidden by cancellation.
///
/// - `full.a`: `A_M² + (A^{fs,i}A^{sf,j})_{ij} ≤ A_M` where `A_M` is the
///   bordered `M`-fold composition of the base method.
/// - `full.b`: `[[A,0],[bᵀ,0]]² + [[Σ A^{sf,λ}A^{fs,λ}, 0], [Σ bᵀA^{fs,λ}, 0]] ≤ [[A,0],[bᵀ,0]]`.
/// - `full.c`: `Σ_{λ<i} 1bᵀA^{fs,λ} + A·A^{fs,i} + A^{fs,i}·A ≤ A^{fs,i}` for all i.
/// - `full.d`: `Σ_{λ>j} A^{sf,λ}1bᵀ + A^{sf,j}·A + A·A^{sf,j} ≤ A^{sf,j}` for all j.
/// - `full.e`: `(M−j)bᵀ + bᵀA + bᵀA^{sf,j} ≤ bᵀ` for all j.
/// - `necessary.lower`: `A^{fs,i}A^{sf,j} = 0` for `i > j`.
///
/// When only `A^{sf,1}` and `A^{fs,M}` are nonzero the simplified set is
/// added:
/// - `simple.a`: `A² + A^{fs,M}A^{sf,1} ≤ A`.
/// - `simple.b`: `bᵀA + bᵀA^{fs,M} ≤ bᵀ`.
/// - `simple.c`: `A·A^{fs,M} + A^{fs,M}·A ≤ A^{fs,M}`.
/// - `simple.d`: `A^{sf,1}·A + A·A^{sf,1} ≤ A^{sf,1}`.
pub fn incidence_conditions(
    base: &RkTableau,
    couplings_fs: &[Mat],
    couplings_sf: &[Mat],
    m: usize,
) -> Result<BTreeMap<String, bool>> {
    let s = base.stages();
    if m == 0 || couplings_fs.len() != m || couplings_sf.len() != m {
        return Err(Error::Structural(format!("expected {m} couplings per direction")));
    }
    if couplings_fs.iter().chain(couplings_sf).any(|c| c.shape() != (s, s)) {
        return Err(Error::Unsupported(
            "incidence conditions need square couplings of the base size".into(),
        ));
    }
    let a = abs(base.a());
    let b = Mat::from_row_slice(1, s, base.b().abs().as_slice());
    let fs: Vec<Mat> = couplings_fs.iter().map(abs).collect();
    let sf: Vec<Mat> = couplings_sf.iter().map(abs).collect();
    let one = Vector::from_element(s, 1.0);
    let mut out = BTreeMap::new();

    // A_M: M concatenated base steps bordered with the weight row.
    let n = m * s + 1;
    let mut a_m = Mat::zeros(n, n);
    for i in 0..m {
        a_m.view_mut((i * s, i * s), (s, s)).copy_from(&a);
        for j in 0..i {
            a_m.view_mut((i * s, j * s), (s, s)).copy_from(&(&one * &b));
        }
        a_m.view_mut((m * s, i * s), (1, s)).copy_from(&b);
    }
    let mut lhs = &a_m * &a_m;
    for i in 0..m {
        for j in 0..m {
            let prod = &fs[i] * &sf[j];
            let mut blk = lhs.view_mut((i * s, j * s), (s, s));
            blk += prod;
        }
    }
    out.insert("full.a".to_string(), inc_le(&lhs, &a_m));

    let bord = {
        let mut x = Mat::zeros(s + 1, s + 1);
        x.view_mut((0, 0), (s, s)).copy_from(&a);
        x.view_mut((s, 0), (1, s)).copy_from(&b);
        x
    };
    let mut lhs = &bord * &bord;
    for l in 0..m {
        let mut top = lhs.view_mut((0, 0), (s, s));
        top += &sf[l] * &fs[l];
        let mut bottom = lhs.view_mut((s, 0), (1, s));
        bottom += &b * &fs[l];
    }
    out.insert("full.b".to_string(), inc_le(&lhs, &bord));

    let full_c = (0..m).all(|i| {
        let mut lhs = &a * &fs[i] + &fs[i] * &a;
        for l in 0..i {
            lhs += &one * (&b * &fs[l]);
        }
        inc_le(&lhs, &fs[i])
    });
    out.insert("full.c".to_string(), full_c);

    let full_d = (0..m).all(|j| {
        let mut lhs = &sf[j] * &a + &a * &sf[j];
        for l in (j + 1)..m {
            lhs += (&sf[l] * &one) * &b;
        }
        inc_le(&lhs, &sf[j])
    });
    out.insert("full.d".to_string(), full_d);

    let full_e = (0..m).all(|j| {
        let lhs = &b * (m - 1 - j) as f64 + &b * &a + &b * &sf[j];
        inc_le(&lhs, &b)
    });
    out.insert("full.e".to_string(), full_e);

    let lower = (0..m).all(|i| (0..i).all(|j| (&fs[i] * &sf[j]).iter().all(|x| *x <= NONZERO)));
    out.insert("necessary.lower".to_string(), lower);

    let zero = |x: &Mat| x.iter().all(|v| v.abs() <= NONZERO);
    let simple_pattern = sf.iter().skip(1).all(zero) && fs.iter().take(m - 1).all(zero);
    if simple_pattern {
        let (f_last, s_first) = (&fs[m - 1], &sf[0]);
        out.insert("simple.a".to_string(), inc_le(&(&a * &a + f_last * s_first), &a));
        out.insert("simple.b".to_string(), inc_le(&(&b * &a + &b * f_last), &b));
        out.insert(
            "simple.c".to_string(),
            inc_le(&(&a * f_last + f_last * &a), f_last),
        );
        out.insert(
            "simple.d".to_string(),
            inc_le(&(s_first * &a + &a * s_first), s_first),
        );
    }
    Ok(out)
}

/// [`incidence_conditions`] for a scheme whose fast and slow base methods
/// coincide.
pub fn scheme_incidence_conditions(sch: &MrGarkScheme) -> Result<BTreeMap<String, bool>> {
    if sch.fast() != sch.slow() {
        return Err(Error::Unsupported(
            "incidence conditions apply to telescopic schemes (same base method for both partitions)"
                .into(),
        ));
    }
    incidence_conditions(sch.fast(), sch.couplings_fs(), sch.couplings_sf(), sch.ratio())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub radius: f64,
    pub saturated: bool,
    pub ahat_nonnegative: bool,
    pub am_checked_at: Vec<(f64, bool)>,
    pub incidence_verdicts: BTreeMap<String, bool>,
    pub step_bound: Option<f64>,
}

pub fn monotonicity_report(
    flat: &FlatGarkTableau,
    scheme: Option<&MrGarkScheme>,
    rho: Option<f64>,
) -> Result<MonotonicityReport> {
    let ahat = build_ahat(flat);
    let res = ahat_radius(&ahat, R_MAX, RADIUS_TOL);
    let incidence_verdicts = match scheme {
        Some(s) if s.fast() == s.slow() => scheme_incidence_conditions(s)?,
        _ => BTreeMap::new(),
    };
    let step_bound = rho.map(|r| step_bound(res.radius, r)).transpose()?;
    Ok(MonotonicityReport {
        radius: res.radius,
        saturated: res.saturated,
        ahat_nonnegative: !has_negative(&ahat),
        am_checked_at: res.samples,
        incidence_verdicts,
        step_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::mat;

    fn ssp2() -> RkTableau {
        RkTableau::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn ssp2_classical_radius_is_one() {
        let t = ssp2();
        let res = rk_am_radius(&t, R_MAX, RADIUS_TOL);
        assert!((res.radius - 1.0).abs() <= RADIUS_TOL);
        assert!(am_verdict(&bordered(&t), 1.0, AM_TOL).holds());
        assert!(!am_verdict(&bordered(&t), 1.0 + 1e-6, AM_TOL).holds());
    }

    #[test]
    fn zero_r_is_always_monotonic() {
        assert!(am_verdict(&bordered(&ssp2()), 0.0, AM_TOL).holds());
    }

    #[test]
    fn ahat_single_rate_layout() {
        let t = ssp2();
        let flat = MrGarkScheme::new(t.clone(), t.clone(), 1, vec![t.a().clone()], vec![t.a().clone()])
            .unwrap()
            .flatten();
        let ahat = build_ahat(&flat);
        assert_eq!(ahat.nrows(), 5);
        assert!(ahat.column(4).iter().all(|&x| x == 0.0));
        assert_eq!(ahat.view((0, 0), (2, 2)).into_owned(), mat(&[&[0.0, 0.0], &[1.0, 0.0]]));
        assert_eq!(ahat.row(4).iter().copied().collect::<Vec<_>>(), vec![0.5, 0.5, 0.5, 0.5, 0.0]);
    }

    #[test]
    fn walk_parity_precheck() {
        // 0 → 1 → 2 without the shortcut 0 → 2: β_{02} ≈ −r² at small r.
        let chain = mat(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert!(!positive_radius_possible(&chain));
        assert_eq!(ahat_radius(&chain, R_MAX, RADIUS_TOL).radius, 0.0);
        let with_shortcut = mat(&[&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[0.5, 0.5, 0.0]]);
        assert!(positive_radius_possible(&with_shortcut));
    }

    #[test]
    fn step_bound_rules() {
        assert_eq!(step_bound(1.0, 0.1).unwrap(), 0.1);
        assert_eq!(step_bound(0.0, 0.1).unwrap(), 0.0);
        assert!(matches!(step_bound(1.0, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn non_telescopic_is_unsupported() {
        let t = ssp2();
        let other = RkTableau::from_rows(&[&[0.0, 0.0], &[0.5, 0.0]], &[0.0, 1.0]).unwrap();
        let sch = MrGarkScheme::new(t.clone(), other, 1, vec![t.a().clone()], vec![t.a().clone()])
            .unwrap();
        assert!(matches!(scheme_incidence_conditions(&sch), Err(Error::Unsupported(_))));
    }
}
