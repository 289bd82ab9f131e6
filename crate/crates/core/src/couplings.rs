//! Constructors for coupling matrices: stability-decoupled coupling,
//! Kvaerno–Rentrop (mRK) coupling, dense-output coupling, multirate
//! additive Runge–Kutta and the MIS-as-GARK construction.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tableau::{max_abs, FlatGarkTableau, Mat, MrGarkScheme, RkTableau, Vector, NONZERO};

/// Tolerance of the η sum rule `Σ_j η_j(λ) = λ`.
pub const ETA_TOL: f64 = 1e-12;

type EtaFn = dyn Fn(usize, usize) -> f64 + Send + Sync;

/// Column functions `η_j(λ)` of the shift matrices `F(λ) = 1·[η_1(λ) … η_s(λ)]`.
#[derive(Clone)]
pub struct EtaFamily {
    cols: usize,
    eval: Arc<EtaFn>,
}

impl fmt::Debug for EtaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let first: Vec<f64> = (0..self.cols).map(|j| self.eval(j, 1)).collect();
        f.debug_struct("EtaFamily")
            .field("cols", &self.cols)
            .field("eta(1)", &first)
            .finish()
    }
}

impl EtaFamily {
    /// `eval(j, λ)` with a 0-based column index.
    pub fn new(cols: usize, eval: impl Fn(usize, usize) -> f64 + Send + Sync + 'static) -> Self {
        EtaFamily { cols, eval: Arc::new(eval) }
    }

    /// `η_j(λ) = w_j·λ`.
    pub fn linear(weights: &[f64]) -> Self {
        let w = weights.to_vec();
        EtaFamily::new(w.len(), move |j, lam| w[j] * lam as f64)
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn eval(&self, j: usize, lambda: usize) -> f64 {
        (self.eval)(j, lambda)
    }

    /// `F(λ)` with `rows` identical rows.
    pub fn matrix(&self, rows: usize, lambda: usize) -> Mat {
        Mat::from_fn(rows, self.cols, |_, j| self.eval(j, lambda))
    }

    /// Check the sum rule for λ = 0..M−1.
    pub fn check(&self, m: usize) -> Result<()> {
        for lambda in 0..m {
            let sum: f64 = (0..self.cols).map(|j| self.eval(j, lambda)).sum();
            if (sum - lambda as f64).abs() > ETA_TOL * (1.0 + lambda as f64) {
                return Err(Error::InvalidEta { lambda, sum });
            }
        }
        Ok(())
    }
}

fn positive_weights(b: &Vector) -> Result<()> {
    for (index, &value) in b.iter().enumerate() {
        if value <= 0.0 {
            return Err(Error::SingularWeights { index, value });
        }
    }
    Ok(())
}

/// Fast-to-slow couplings making the scheme stability-decoupled:
/// `A^{fs,λ} = B^{f,−1}(b^f b^{sᵀ} − A^{sf,λᵀ} B^s)`.
pub fn stability_decoupled_fs(
    fast: &RkTableau,
    slow: &RkTableau,
    couplings_sf: &[Mat],
) -> Result<Vec<Mat>> {
    positive_weights(fast.b())?;
    let (sf, ss) = (fast.stages(), slow.stages());
    let (bf, bs) = (fast.b(), slow.b());
    couplings_sf
        .iter()
        .map(|asf| {
            if asf.shape() != (ss, sf) {
                return Err(Error::Structural(format!(
                    "A^sf has shape {:?}, expected {:?}",
                    asf.shape(),
                    (ss, sf)
                )));
            }
            Ok(Mat::from_fn(sf, ss, |i, j| {
                (bf[i] * bs[j] - asf[(j, i)] * bs[j]) / bf[i]
            }))
        })
        .collect()
}

/// Kvaerno–Rentrop coupling.
///
/// `a_fs` and `a_sf` are the mRK-normalized coupling matrices (`a_fs·1 = c^f`,
/// `a_sf·1 = c^s` for internally consistent schemes). Slow stages see only
/// the first micro-step; micro-step λ+1 reads `(a_fs + F(λ))/M`.
pub fn kr_scheme(
    fast: &RkTableau,
    slow: &RkTableau,
    a_fs: &Mat,
    a_sf: &Mat,
    eta: &EtaFamily,
    m: usize,
) -> Result<MrGarkScheme> {
    let (sf, ss) = (fast.stages(), slow.stages());
    if a_fs.shape() != (sf, ss) || a_sf.shape() != (ss, sf) || eta.cols() != ss {
        return Err(Error::Structural(format!(
            "mRK shapes: A_fs {:?}, A_sf {:?}, eta columns {} for {sf} fast / {ss} slow stages",
            a_fs.shape(),
            a_sf.shape(),
            eta.cols()
        )));
    }
    if m == 0 {
        return Err(Error::Structural("multirate ratio M must be at least 1".into()));
    }
    eta.check(m)?;
    let scale = m as f64;
    let couplings_fs = (0..m).map(|lam| (a_fs + eta.matrix(sf, lam)) / scale).collect();
    let mut couplings_sf = vec![Mat::zeros(ss, sf); m];
    couplings_sf[0] = a_sf * scale;
    Ok(MrGarkScheme::new(fast.clone(), slow.clone(), m, couplings_fs, couplings_sf)?
        .with_eta(eta.clone()))
}

/// Residual of the optional mRK requirement
/// `b^{fᵀ}F(λ)c^s = λ(λ+1)/(2M)`, maximized over λ = 0..M−1.
pub fn kr_microstep_residual(fast: &RkTableau, slow: &RkTableau, eta: &EtaFamily, m: usize) -> f64 {
    (0..m)
        .map(|lam| {
            let f = eta.matrix(fast.stages(), lam);
            let lhs = fast.b().dot(&(f * slow.c()));
            let rhs = (lam * (lam + 1)) as f64 / (2 * m) as f64;
            (lhs - rhs).abs()
        })
        .fold(0.0, f64::max)
}

/// Dense-output coupling `a^{fs,λ}_{ij} = d_j((λ−1+c^f_i)/M)`.
pub fn dense_output_fs(
    slow: &RkTableau,
    d: impl Fn(usize, f64) -> f64,
    fast_c: &Vector,
    m: usize,
) -> Result<Vec<Mat>> {
    if m == 0 {
        return Err(Error::Structural("multirate ratio M must be at least 1".into()));
    }
    let ss = slow.stages();
    let mut out = Vec::with_capacity(m);
    for lam in 1..=m {
        let mut a = Mat::zeros(fast_c.len(), ss);
        for (i, &ci) in fast_c.iter().enumerate() {
            let theta = (lam as f64 - 1.0 + ci) / m as f64;
            if !(-NONZERO..=1.0 + NONZERO).contains(&theta) {
                return Err(Error::Domain(format!(
                    "dense output argument {theta} outside [0, 1] (micro-step {lam}, stage {i})"
                )));
            }
            for j in 0..ss {
                a[(i, j)] = d(j, theta);
            }
        }
        out.push(a);
    }
    Ok(out)
}

/// Multirate additive Runge–Kutta scheme: `A^{ss} = A^{fs,1} = slow_a`,
/// `A^{ff} = A^{sf,1} = fast_a`, `A^{fs,λ} = slow_a_lambda[λ−2]` and
/// `A^{sf,λ} = 0` for λ ≥ 2.
pub fn additive_multirate(
    fast_a: &Mat,
    slow_a: &Mat,
    slow_a_lambda: &[Mat],
    b_f: &Vector,
    b_s: &Vector,
    m: usize,
) -> Result<MrGarkScheme> {
    if m == 0 || slow_a_lambda.len() + 1 != m {
        return Err(Error::Structural(format!(
            "expected {} extra slow coupling matrices for M = {m}, got {}",
            m.saturating_sub(1),
            slow_a_lambda.len()
        )));
    }
    let s = fast_a.nrows();
    let square = |x: &Mat| x.shape() == (s, s);
    if !square(fast_a)
        || !square(slow_a)
        || !slow_a_lambda.iter().all(square)
        || b_f.len() != s
        || b_s.len() != s
    {
        return Err(Error::Structural(
            "additive multirate scheme needs all matrices s×s and weights of length s".into(),
        ));
    }
    let fast = RkTableau::new(fast_a.clone(), b_f.clone())?;
    let slow = RkTableau::new(slow_a.clone(), b_s.clone())?;
    let mut couplings_fs = vec![slow_a.clone()];
    couplings_fs.extend(slow_a_lambda.iter().cloned());
    let mut couplings_sf = vec![Mat::zeros(s, s); m];
    couplings_sf[0] = fast_a.clone();
    MrGarkScheme::new(fast, slow, m, couplings_fs, couplings_sf)
}

/// Outer explicit method and inner method of a multirate infinitesimal
/// step scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct MisPair {
    outer: RkTableau,
    inner: RkTableau,
}

impl MisPair {
    pub fn new(outer: RkTableau, inner: RkTableau) -> Result<Self> {
        if !outer.is_explicit() {
            return Err(Error::InvalidOuter("outer method must be explicit".into()));
        }
        let c = outer.c();
        if c[0].abs() > NONZERO {
            return Err(Error::InvalidOuter(format!("c_1 = {} must be 0", c[0])));
        }
        for i in 1..c.len() {
            if c[i] <= c[i - 1] {
                return Err(Error::InvalidOuter(format!(
                    "abscissae must increase strictly (c_{} = {}, c_{} = {})",
                    i,
                    c[i - 1],
                    i + 1,
                    c[i]
                )));
            }
        }
        if c[c.len() - 1] >= 1.0 {
            return Err(Error::InvalidOuter(format!(
                "last abscissa {} must be below 1",
                c[c.len() - 1]
            )));
        }
        Ok(MisPair { outer, inner })
    }

    pub fn outer(&self) -> &RkTableau {
        &self.outer
    }

    pub fn inner(&self) -> &RkTableau {
        &self.inner
    }

    /// Widths of the fast sub-integrations: `c_{k+1} − c_k` and `1 − c_s`.
    pub fn widths(&self) -> Vec<f64> {
        let c = self.outer.c();
        let s = c.len();
        (0..s)
            .map(|k| if k + 1 < s { c[k + 1] - c[k] } else { 1.0 - c[s - 1] })
            .collect()
    }
}

/// The MIS scheme (one inner step per outer interval, plus the trailing
/// interval up to the end of the step) as a two-partition GARK tableau.
pub fn mis_to_gark(p: &MisPair) -> Result<FlatGarkTableau> {
    let (ao, bo) = (p.outer.a(), p.outer.b());
    let (ai, bi, ci) = (p.inner.a(), p.inner.b(), p.inner.c());
    let so = p.outer.stages();
    let si = p.inner.stages();
    let widths = p.widths();
    let nf = so * si;
    let outer_row = |k: usize| -> Vec<f64> {
        if k < so {
            ao.row(k).iter().copied().collect()
        } else {
            bo.iter().copied().collect()
        }
    };

    let mut a_ff = Mat::zeros(nf, nf);
    let mut a_fs = Mat::zeros(nf, so);
    let mut a_sf = Mat::zeros(so, nf);
    for k in 0..so {
        let (from, to) = (outer_row(k), outer_row(k + 1));
        for kap in 0..si {
            let row = k * si + kap;
            for l in 0..k {
                for j in 0..si {
                    a_ff[(row, l * si + j)] = widths[l] * bi[j];
                }
            }
            for j in 0..si {
                a_ff[(row, k * si + j)] = widths[k] * ai[(kap, j)];
            }
            for j in 0..so {
                a_fs[(row, j)] = from[j] + ci[kap] * (to[j] - from[j]);
            }
        }
        for i in (k + 1)..so {
            for j in 0..si {
                a_sf[(i, k * si + j)] = widths[k] * bi[j];
            }
        }
    }
    let b_f = Vector::from_fn(nf, |r, _| widths[r / si] * bi[r % si]);
    let flat = FlatGarkTableau::new(a_ff, a_fs, a_sf, ao.clone(), b_f, bo.clone(), 1)?;

    let residual = mis_abscissa_residual(p, &flat);
    if residual > 1e-13 {
        return Err(Error::Structural(format!(
            "MIS tableau violates the abscissa identities (residual {residual:e})"
        )));
    }
    Ok(flat)
}

/// Largest deviation from `c^{sf} = c^{ss} = c^o` and
/// `c^{ff} = c^{fs} = [c_k·1 + (c_{k+1} − c_k)c^i; …; c_s·1 + (1 − c_s)c^i]`.
pub fn mis_abscissa_residual(p: &MisPair, flat: &FlatGarkTableau) -> f64 {
    let co = p.outer.c();
    let ci = p.inner.c();
    let si = p.inner.stages();
    let widths = p.widths();
    let stacked = Vector::from_fn(flat.n_fast(), |r, _| co[r / si] + widths[r / si] * ci[r % si]);
    let slow = max_abs((flat.c_sf() - co).iter().copied())
        .max(max_abs((flat.c_s() - co).iter().copied()));
    let fast = max_abs((flat.c_f() - &stacked).iter().copied())
        .max(max_abs((flat.c_fs() - &stacked).iter().copied()));
    slow.max(fast)
}
