//! Named scheme catalog.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::couplings::{additive_multirate, kr_scheme, mis_to_gark, stability_decoupled_fs, EtaFamily, MisPair};
use crate::error::{Error, Result};
use crate::integrator::Stepper;
use crate::tableau::{frac, mat, mat_frac, FlatGarkTableau, Mat, MrGarkScheme, RkTableau, Vector};

/// A catalog scheme: either a multirate scheme with equal micro-steps or a
/// flattened tableau (MIS schemes have unequal micro-steps).
#[derive(Debug, Clone)]
pub enum Scheme {
    Multirate(MrGarkScheme),
    Flat(FlatGarkTableau),
}

impl Scheme {
    pub fn flat(&self) -> FlatGarkTableau {
        match self {
            Scheme::Multirate(s) => s.flatten(),
            Scheme::Flat(f) => f.clone(),
        }
    }

    pub fn multirate(&self) -> Option<&MrGarkScheme> {
        match self {
            Scheme::Multirate(s) => Some(s),
            Scheme::Flat(_) => None,
        }
    }

    pub fn stepper(&self) -> &dyn Stepper {
        match self {
            Scheme::Multirate(s) => s,
            Scheme::Flat(f) => f,
        }
    }
}

/// What the literature asserts about an entry. `None` means no claim.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claims {
    pub order: Option<u8>,
    pub internally_consistent: Option<bool>,
    pub stability_decoupled: Option<bool>,
    /// Verdict for the base pair under component partitioning.
    pub base_pair_stable: Option<bool>,
    pub radius: Option<f64>,
    pub flags: Vec<&'static str>,
}

impl Claims {
    fn order(p: u8) -> Self {
        Claims {
            order: Some(p),
            internally_consistent: None,
            stability_decoupled: None,
            base_pair_stable: None,
            radius: None,
            flags: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub variants: &'static [&'static str],
    pub summary: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "mrk-radau1a-3",
        variants: &[],
        summary: "mRK coupling over RADAU-IA, order 3, internally consistent",
    },
    CatalogEntry {
        name: "mrk-radau2a-3",
        variants: &["printed", "radau2a-base"],
        summary: "mRK coupling labelled RADAU-IIA; printed base repeats RADAU-IA",
    },
    CatalogEntry {
        name: "add-stable-2",
        variants: &[],
        summary: "algebraically stable additive multirate pair, order 2, stability-decoupled",
    },
    CatalogEntry {
        name: "add-stable-3-radau",
        variants: &[],
        summary: "doubled RADAU-IA component pair, order 3",
    },
    CatalogEntry {
        name: "ssp2-mr-decoupled",
        variants: &[],
        summary: "SSP2 base, stability-decoupled coupling, negative coupling entry",
    },
    CatalogEntry {
        name: "ssp2-mr-firstfast",
        variants: &[],
        summary: "SSP2 base, slow stages coupled to the first micro-step, A^fs = A",
    },
    CatalogEntry {
        name: "ssp2-mr-lastslow",
        variants: &[],
        summary: "SSP2 base, slow terms only in the last micro-step, explicit",
    },
    CatalogEntry {
        name: "table3-2stage",
        variants: &["ralston", "ssp2", "midpoint"],
        summary: "2-stage stability-decoupled coupling over an order-2 explicit base",
    },
    CatalogEntry {
        name: "mis",
        variants: &["heun3", "midpoint"],
        summary: "multirate infinitesimal step scheme as a GARK tableau, inner method composed M times",
    },
];

/// `name` or `name:variant` together with the multirate ratio.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemeId {
    pub name: String,
    pub variant: Option<String>,
    pub m: usize,
}

impl SchemeId {
    pub fn new(spec: &str, m: usize) -> Result<Self> {
        let mut id: SchemeId = spec.parse()?;
        id.m = m;
        Ok(id)
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, variant) = match s.split_once(':') {
            Some((n, v)) => (n, Some(v.to_string())),
            None => (s, None),
        };
        let entry = CATALOG
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))?;
        if let Some(v) = &variant {
            if !entry.variants.contains(&v.as_str()) {
                return Err(Error::UnknownScheme(s.to_string()));
            }
        }
        Ok(SchemeId { name: name.to_string(), variant, m: 1 })
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            Some(v) => write!(f, "{}:{} (M = {})", self.name, v, self.m),
            None => write!(f, "{} (M = {})", self.name, self.m),
        }
    }
}

pub fn radau1a() -> RkTableau {
    RkTableau::from_fractions(&[&[(1, 4), (-1, 4)], &[(1, 4), (5, 12)]], &[(1, 4), (3, 4)])
        .expect("valid tableau")
}

pub fn radau2a() -> RkTableau {
    RkTableau::from_fractions(&[&[(5, 12), (-1, 12)], &[(3, 4), (1, 4)]], &[(3, 4), (1, 4)])
        .expect("valid tableau")
}

/// Two-stage explicit order-2 method with the second abscissa equal to 1
/// and weights 1/2.
pub fn ssp2() -> RkTableau {
    RkTableau::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]], &[0.5, 0.5]).expect("valid tableau")
}

pub fn ralston2() -> RkTableau {
    RkTableau::from_fractions(&[&[(0, 1), (0, 1)], &[(2, 3), (0, 1)]], &[(1, 4), (3, 4)])
        .expect("valid tableau")
}

pub fn midpoint() -> RkTableau {
    RkTableau::from_fractions(&[&[(0, 1), (0, 1)], &[(1, 2), (0, 1)]], &[(0, 1), (1, 1)])
        .expect("valid tableau")
}

/// Heun's third-order method, c = (0, 1/3, 2/3).
pub fn heun3() -> RkTableau {
    RkTableau::from_fractions(
        &[&[(0, 1), (0, 1), (0, 1)], &[(1, 3), (0, 1), (0, 1)], &[(0, 1), (2, 3), (0, 1)]],
        &[(1, 4), (0, 1), (3, 4)],
    )
    .expect("valid tableau")
}

fn check_ratio(m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Structural("multirate ratio M must be at least 1".into()));
    }
    Ok(())
}

pub fn mrk_radau1a(m: usize) -> Result<MrGarkScheme> {
    check_ratio(m)?;
    let base = radau1a();
    let mf = m as f64;
    let tilde = mat(&[&[0.0, 0.0], &[frac(2, 3) - mf / 3.0, mf / 3.0]]);
    kr_scheme(&base, &base, &tilde, &tilde, &EtaFamily::linear(&[1.0, 0.0]), m)
}

/// The coefficients printed under the RADAU-IIA label; `standard_base`
/// swaps in the RADAU-IIA tableau.
pub fn mrk_radau2a(m: usize, standard_base: bool) -> Result<MrGarkScheme> {
    check_ratio(m)?;
    let base = if standard_base { radau2a() } else { radau1a() };
    let mf = m as f64;
    let tilde = mat(&[&[frac(1, 3), 0.0], &[1.0 - (mf - 1.0), mf - 1.0]]);
    kr_scheme(&base, &base, &tilde, &tilde, &EtaFamily::linear(&[1.5, -0.5]), m)
}

pub fn add_stable_2(m: usize) -> Result<MrGarkScheme> {
    check_ratio(m)?;
    let mf = m as f64;
    let d = 4.0 * mf + 2.0;
    let b_f = Vector::from_vec(vec![0.5, 0.5]);
    let b_s = Vector::from_vec(vec![3.0 / d, (4.0 * mf - 1.0) / d]);
    let fast_a = mat(&[&[0.25, -mf / 2.0], &[(mf + 1.0) / 2.0, 0.25]]);
    let slow_a = mat(&[&[1.5, -mf * (4.0 * mf - 1.0)], &[3.0 * (mf + 1.0), (4.0 * mf - 1.0) / 2.0]]) / d;
    let later = Vector::from_element(2, 1.0) * b_s.transpose();
    additive_multirate(&fast_a, &slow_a, &vec![later; m - 1], &b_f, &b_s, m)
}

/// Doubled RADAU-IA pair with `A^f = A + (M−1)Ã^f`, `A^s = A + (M−1)Ã^s`,
/// coupled like an mRK scheme with `η₁ = λ` and the other η zero.
pub fn add_stable_3_radau(m: usize) -> Result<MrGarkScheme> {
    check_ratio(m)?;
    let z = (0, 1);
    let doubled = mat_frac(&[
        &[(1, 4), (-1, 4), z, z],
        &[(1, 4), (5, 12), z, z],
        &[z, z, (1, 4), (-1, 4)],
        &[z, z, (1, 4), (5, 12)],
    ]);
    let mut tilde_f = Mat::zeros(4, 4);
    tilde_f[(3, 2)] = -frac(1, 3);
    tilde_f[(3, 3)] = frac(1, 3);
    let mut tilde_s = Mat::zeros(4, 4);
    tilde_s[(1, 0)] = -frac(1, 3);
    tilde_s[(1, 1)] = frac(1, 3);
    let k = (m - 1) as f64;
    let fast_a = &doubled + &tilde_f * k;
    let slow_a = &doubled + &tilde_s * k;
    let fast = RkTableau::new(fast_a.clone(), Vector::from_vec(vec![0.25, 0.75, 0.0, 0.0]))?;
    let slow = RkTableau::new(slow_a.clone(), Vector::from_vec(vec![0.0, 0.0, 0.25, 0.75]))?;
    kr_scheme(&fast, &slow, &slow_a, &fast_a, &EtaFamily::linear(&[1.0, 0.0, 0.0, 0.0]), m)
}

/// Slow stages read only the first micro-step: `A^{sf,1} = [[0, 0], [M, 0]]`.
fn ssp2_first_sf(m: usize) -> Vec<Mat> {
    let mut sf = vec![Mat::zeros(2, 2); m];
    sf[0][(1, 0)] = m as f64;
    sf
}

pub fn ssp2_mr_decoupled(m: usize) -> Result<MrGarkScheme> {
    check_ratio(m)?;
    let base = ssp2();
    let sf = ssp2_first_sf(m);
    let fs = stability_decoupled_fs(&base, &base, &sf)?;
    MrGarkScheme::new(base.clone(), base, m, fs, sf)
}

pub fn ssp2_mr_firstfast(m: usize) -> Result<MrGarkScheme> {
    check_ratio(m)?;
    let base = ssp2();
    let fs = vec![base.a().clone(); m];
    MrGarkScheme::new(base.clone(), base, m, fs, ssp2_first_sf(m))
}

pub fn ssp2_mr_lastslow(m: usize) -> Result<MrGarkScheme> {
    check_ratio(m)?;
    let base = ssp2();
    let mut fs = vec![Mat::zeros(2, 2); m];
    fs[m - 1] = base.a() * m as f64;
    MrGarkScheme::new(base.clone(), base, m, fs, ssp2_first_sf(m))
}

/// `A^{sf,1} = [[0, 0], [M/(2b₂), 0]]` with stability-decoupled fast
/// couplings over a two-stage order-2 base (used for both partitions).
pub fn table3_two_stage(base: &RkTableau, m: usize) -> Result<MrGarkScheme> {
    check_ratio(m)?;
    if base.stages() != 2 {
        return Err(Error::Structural("the two-stage coupling needs a two-stage base".into()));
    }
    let b2 = base.b()[1];
    if b2.abs() <= crate::tableau::NONZERO {
        return Err(Error::Domain("b_2 must be nonzero for an order-2 base".into()));
    }
    let mut sf = vec![Mat::zeros(2, 2); m];
    sf[0][(1, 0)] = m as f64 / (2.0 * b2);
    let fs = stability_decoupled_fs(base, base, &sf)?;
    MrGarkScheme::new(base.clone(), base.clone(), m, fs, sf)
}

/// MIS pair with the inner method composed `m` times.
pub fn mis_pair(outer: RkTableau, inner: &RkTableau, m: usize) -> Result<MisPair> {
    check_ratio(m)?;
    MisPair::new(outer, inner.compose_steps(m)?)
}

/// Build a catalog scheme.
pub fn make(name: &str, m: usize) -> Result<Scheme> {
    make_id(&SchemeId::new(name, m)?)
}

pub fn make_id(id: &SchemeId) -> Result<Scheme> {
    let m = id.m;
    let variant = id.variant.as_deref();
    let multirate = |s: Result<MrGarkScheme>| s.map(Scheme::Multirate);
    match id.name.as_str() {
        "mrk-radau1a-3" => multirate(mrk_radau1a(m)),
        "mrk-radau2a-3" => multirate(mrk_radau2a(m, variant == Some("radau2a-base"))),
        "add-stable-2" => multirate(add_stable_2(m)),
        "add-stable-3-radau" => multirate(add_stable_3_radau(m)),
        "ssp2-mr-decoupled" => multirate(ssp2_mr_decoupled(m)),
        "ssp2-mr-firstfast" => multirate(ssp2_mr_firstfast(m)),
        "ssp2-mr-lastslow" => multirate(ssp2_mr_lastslow(m)),
        "table3-2stage" => {
            let base = match variant {
                Some("ssp2") => ssp2(),
                Some("midpoint") => midpoint(),
                _ => ralston2(),
            };
            multirate(table3_two_stage(&base, m))
        }
        "mis" => {
            let pair = match variant {
                Some("midpoint") => mis_pair(midpoint(), &midpoint(), m)?,
                _ => mis_pair(heun3(), &heun3(), m)?,
            };
            Ok(Scheme::Flat(mis_to_gark(&pair)?))
        }
        other => Err(Error::UnknownScheme(other.to_string())),
    }
}

/// Asserted properties of an entry.
pub fn claims(id: &SchemeId) -> Claims {
    let variant = id.variant.as_deref();
    // Radius claims concern the multirate couplings; with M = 1 the
    // couplings collapse to a single-rate layout.
    let multirate_radius = |r: f64| (id.m >= 2).then_some(r);
    match id.name.as_str() {
        "mrk-radau1a-3" => Claims {
            internally_consistent: Some(true),
            stability_decoupled: Some(false),
            ..Claims::order(3)
        },
        "mrk-radau2a-3" => Claims {
            internally_consistent: Some(variant == Some("radau2a-base")),
            flags: if variant == Some("radau2a-base") { vec![] } else { vec!["suspected_typo"] },
            ..Claims::order(3)
        },
        "add-stable-2" => Claims {
            stability_decoupled: Some(true),
            base_pair_stable: Some(true),
            ..Claims::order(2)
        },
        "add-stable-3-radau" => Claims { base_pair_stable: Some(true), ..Claims::order(3) },
        "ssp2-mr-decoupled" => Claims {
            stability_decoupled: Some(true),
            radius: Some(0.0),
            ..Claims::order(2)
        },
        "ssp2-mr-firstfast" => Claims { radius: multirate_radius(0.0), ..Claims::order(2) },
        "ssp2-mr-lastslow" => Claims { radius: multirate_radius(1.0), ..Claims::order(2) },
        "table3-2stage" => Claims { stability_decoupled: Some(true), ..Claims::order(2) },
        "mis" => Claims::order(2),
        _ => Claims { order: None, ..Claims::order(0) },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::order::{order_report, CONDITION_TOL};

    #[test]
    fn add_stable_2_slow_weights() {
        let s = add_stable_2(3).unwrap();
        assert!((s.slow().b()[0] - 3.0 / 14.0).abs() < 1e-16);
        assert!((s.slow().b()[1] - 11.0 / 14.0).abs() < 1e-16);
    }

    #[test]
    fn decoupled_fs_matches_printed_example() {
        let s = ssp2_mr_decoupled(2).unwrap();
        assert_eq!(s.couplings_fs()[0], mat(&[&[0.5, -1.5], &[0.5, 0.5]]));
        assert_eq!(s.couplings_fs()[1], mat(&[&[0.5, 0.5], &[0.5, 0.5]]));
    }

    #[test]
    fn ids_parse_and_reject() {
        assert_eq!(SchemeId::new("table3-2stage:ssp2", 2).unwrap().variant.as_deref(), Some("ssp2"));
        assert_eq!(make("nosuch", 2).unwrap_err().code(), "UnknownScheme");
        assert_eq!(make("mis:nosuch", 2).unwrap_err().code(), "UnknownScheme");
        assert!(make("mrk-radau1a-3", 0).is_err());
        assert!(make("table3-2stage:midpoint", 2).is_err());
    }

    #[test]
    fn radau1a_entry_is_order_three() {
        for m in 1..=4 {
            let s = mrk_radau1a(m).unwrap();
            let rep = order_report(&s, 3);
            assert!(rep.max_residual(3) <= CONDITION_TOL, "M = {m}");
        }
    }

    #[test]
    fn every_entry_builds() {
        for e in CATALOG {
            for m in 1..=4 {
                let mut ids = vec![SchemeId::new(e.name, m).unwrap()];
                for v in e.variants {
                    ids.push(SchemeId::new(&format!("{}:{v}", e.name), m).unwrap());
                }
                for id in ids {
                    if id.variant.as_deref() == Some("midpoint") && id.name == "table3-2stage" {
                        continue;
                    }
                    make_id(&id).unwrap_or_else(|err| panic!("{id}: {err}"));
                }
            }
        }
    }
}
