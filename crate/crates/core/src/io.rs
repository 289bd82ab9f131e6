//! JSON scheme files.
//!
//! ```json
//! {"fast": {"A": [[...]], "b": [...]}, "slow": {"A": [[...]], "b": [...]},
//!  "M": 2, "couplings_fs": [[[...]]], "couplings_sf": [[[...]]]}
//! ```
//!
//! Entries are numbers or rational strings such as `"-5/12"`. An optional
//! `"c"` per tableau overrides the row-sum abscissae.

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tableau::{FlatGarkTableau, Mat, MrGarkScheme, RkTableau, Vector};

/// A coefficient read from JSON.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Coefficient(pub f64);

impl<'de> Deserialize<'de> for Coefficient {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(x) => Ok(Coefficient(x)),
            Raw::Text(s) => parse_rational(&s).map(Coefficient).map_err(de::Error::custom),
        }
    }
}

/// `"p/q"`, `"p"` or a decimal literal.
pub fn parse_rational(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::Format(format!("cannot read coefficient '{s}'"));
    match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad())?;
            let q: f64 = q.trim().parse().map_err(|_| bad())?;
            if q == 0.0 {
                return Err(bad());
            }
            Ok(p / q)
        }
        None => s.parse().map_err(|_| bad()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableauFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<Coefficient>>,
    pub b: Vec<Coefficient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<Coefficient>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeFile {
    pub fast: TableauFile,
    pub slow: TableauFile,
    #[serde(rename = "M")]
    pub m: usize,
    pub couplings_fs: Vec<Vec<Vec<Coefficient>>>,
    pub couplings_sf: Vec<Vec<Vec<Coefficient>>>,
}

fn to_mat(rows: &[Vec<Coefficient>], what: &str) -> Result<Mat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(Error::Format(format!("{what}: rows have different lengths")));
    }
    Ok(Mat::from_fn(n, m, |i, j| rows[i][j].0))
}

fn to_vec(xs: &[Coefficient]) -> Vector {
    Vector::from_iterator(xs.len(), xs.iter().map(|c| c.0))
}

fn from_mat(m: &Mat) -> Vec<Vec<Coefficient>> {
    m.row_iter().map(|r| r.iter().map(|&x| Coefficient(x)).collect()).collect()
}

fn from_vec(v: &Vector) -> Vec<Coefficient> {
    v.iter().map(|&x| Coefficient(x)).collect()
}

impl TableauFile {
    pub fn to_tableau(&self, what: &str) -> Result<RkTableau> {
        let a = to_mat(&self.a, what)?;
        let b = to_vec(&self.b);
        match &self.c {
            Some(c) => RkTableau::with_abscissae(a, b, to_vec(c)),
            None => RkTableau::new(a, b),
        }
    }

    pub fn from_tableau(t: &RkTableau) -> Self {
        TableauFile { a: from_mat(t.a()), b: from_vec(t.b()), c: None }
    }
}

impl SchemeFile {
    pub fn to_scheme(&self) -> Result<MrGarkScheme> {
        let fast = self.fast.to_tableau("fast.A")?;
        let slow = self.slow.to_tableau("slow.A")?;
        let fs = self
            .couplings_fs
            .iter()
            .map(|m| to_mat(m, "couplings_fs"))
            .collect::<Result<Vec<_>>>()?;
        let sf = self
            .couplings_sf
            .iter()
            .map(|m| to_mat(m, "couplings_sf"))
            .collect::<Result<Vec<_>>>()?;
        MrGarkScheme::new(fast, slow, self.m, fs, sf)
    }

    pub fn from_scheme(s: &MrGarkScheme) -> Self {
        SchemeFile {
            fast: TableauFile::from_tableau(s.fast()),
            slow: TableauFile::from_tableau(s.slow()),
            m: s.ratio(),
            couplings_fs: s.couplings_fs().iter().map(from_mat).collect(),
            couplings_sf: s.couplings_sf().iter().map(from_mat).collect(),
        }
    }
}

pub fn parse_scheme(json: &str) -> Result<MrGarkScheme> {
    let file: SchemeFile = serde_json::from_str(json).map_err(|e| Error::Format(e.to_string()))?;
    file.to_scheme()
}

pub fn scheme_to_json(s: &MrGarkScheme) -> String {
    serde_json::to_string_pretty(&SchemeFile::from_scheme(s)).expect("finite coefficients serialize")
}

/// A flattened tableau as a single-rate scheme whose fast method holds
/// every fast stage.
pub fn flat_as_scheme(flat: &FlatGarkTableau) -> Result<MrGarkScheme> {
    MrGarkScheme::from_flat(flat, 1, flat.n_fast())
}
