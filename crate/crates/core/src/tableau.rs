//! Base Runge–Kutta tableaus, multirate GARK schemes and their flattened
//! single-tableau form.
//!
//! Stages of the flattened tableau are ordered fast-then-slow: the
//! `M·s_f` micro-stages come first (micro-step by micro-step), followed by
//! the `s_s` slow stages.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::couplings::EtaFamily;
use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Magnitude below which a coefficient counts as a structural zero.
pub const NONZERO: f64 = 1e-14;

/// Default tolerance for residuals that only carry construction rounding.
pub const ROUNDING_TOL: f64 = 1e-13;

/// `p/q` converted to binary floating point with a single rounding.
pub fn frac(p: i64, q: i64) -> f64 {
    p as f64 / q as f64
}

/// Dense matrix from row slices.
pub fn mat(rows: &[&[f64]]) -> Mat {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(nrows, ncols, |i, j| rows[i][j])
}

/// Dense matrix from rational row slices.
pub fn mat_frac(rows: &[&[(i64, i64)]]) -> Mat {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(nrows, ncols, |i, j| frac(rows[i][j].0, rows[i][j].1))
}

pub fn vector(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

pub fn ones(n: usize) -> Vector {
    Vector::from_element(n, 1.0)
}

pub(crate) fn inf_norm(m: &Mat) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}

/// One Runge–Kutta method `(A, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RkTableau {
    a: Mat,
    b: Vector,
    c: Vector,
}

impl RkTableau {
    /// Tableau with abscissae derived as row sums of `a`.
    pub fn new(a: Mat, b: Vector) -> Result<Self> {
        let c = &a * ones(a.ncols());
        Self::with_abscissae(a, b, c)
    }

    /// Tableau with explicit abscissae. Only shapes are checked here; a
    /// mismatch between `c` and `A·1` is reported by [`validate_rk`].
    pub fn with_abscissae(a: Mat, b: Vector, c: Vector) -> Result<Self> {
        let s = a.nrows();
        if s == 0 {
            return Err(Error::Structural("tableau needs at least one stage".into()));
        }
        if a.ncols() != s || b.len() != s || c.len() != s {
            return Err(Error::Structural(format!(
                "inconsistent tableau shapes: A {}x{}, b {}, c {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        Ok(RkTableau { a, b, c })
    }

    /// Build from rational entries `(p, q)`.
    pub fn from_fractions(a: &[&[(i64, i64)]], b: &[(i64, i64)]) -> Result<Self> {
        let bv = Vector::from_iterator(b.len(), b.iter().map(|&(p, q)| frac(p, q)));
        Self::new(mat_frac(a), bv)
    }

    pub fn from_rows(a: &[&[f64]], b: &[f64]) -> Result<Self> {
        Self::new(mat(a), vector(b))
    }

    pub fn stages(&self) -> usize {
        self.b.len()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn c(&self) -> &Vector {
        &self.c
    }

    /// Strictly lower triangular under the structural-zero threshold.
    pub fn is_explicit(&self) -> bool {
        let s = self.stages();
        (0..s).all(|i| (i..s).all(|j| self.a[(i, j)].abs() <= NONZERO))
    }

    /// `n` equal steps of this method written as a single method with
    /// `n·s` stages.
    pub fn compose_steps(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("compose_steps needs n >= 1".into()));
        }
        let s = self.stages();
        let scale = 1.0 / n as f64;
        let mut a = Mat::zeros(n * s, n * s);
        for k in 0..n {
            for i in 0..s {
                for l in 0..k {
                    for j in 0..s {
                        a[(k * s + i, l * s + j)] = scale * self.b[j];
                    }
                }
                for j in 0..s {
                    a[(k * s + i, k * s + j)] = scale * self.a[(i, j)];
                }
            }
        }
        let b = Vector::from_fn(n * s, |k, _| scale * self.b[k % s]);
        Self::new(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
    Info,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    fn from_findings(findings: Vec<Finding>) -> Self {
        let ok = findings.iter().all(|f| f.severity != Severity::Error);
        ValidationReport { ok, findings }
    }
}

/// Shape, finiteness and row-sum checks of a base tableau.
pub fn validate_rk(t: &RkTableau, tol: f64) -> ValidationReport {
    let mut findings = Vec::new();
    let finite = t.a.iter().chain(t.b.iter()).chain(t.c.iter()).all(|x| x.is_finite());
    if !finite {
        findings.push(Finding {
            severity: Severity::Error,
            code: "non_finite".into(),
            message: "tableau contains non-finite coefficients".into(),
            residual: None,
        });
    }
    let row_sums = &t.a * ones(t.stages());
    let residual = max_abs((row_sums - &t.c).iter().copied());
    findings.push(Finding {
        severity: if residual <= tol { Severity::Info } else { Severity::Error },
        code: "row_sum".into(),
        message: format!("max |A·1 - c| = {residual:e}"),
        residual: Some(residual),
    });
    let weight_gap = (t.b.sum() - 1.0).abs();
    if weight_gap > tol {
        findings.push(Finding {
            severity: Severity::Warning,
            code: "weights_sum".into(),
            message: format!("weights sum to {} (method is not consistent)", t.b.sum()),
            residual: Some(weight_gap),
        });
    }
    ValidationReport::from_findings(findings)
}

/// Computed solution strategy of a multirate scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureTag {
    /// Stage dependency graph is acyclic: a cascade with no nonlinear solves.
    Explicit,
    /// Slow stages couple only with the first micro-step.
    FirstMicrostepCoupled,
    /// The stage system splits into several sequentially solvable blocks.
    Staggered,
    /// One implicit system over all stages.
    FullyCoupled,
}

impl StructureTag {
    pub fn as_str(self) -> &'static str {
        match self {
            StructureTag::Explicit => "explicit",
            StructureTag::FirstMicrostepCoupled => "first-microstep-coupled",
            StructureTag::Staggered => "staggered",
            StructureTag::FullyCoupled => "fully-coupled",
        }
    }
}

/// Fast and slow base methods, ratio `M` and per-micro-step couplings.
///
/// Coupling matrices are stored in the flattened normalization: the fast
/// rows of micro-step λ read `A^{fs,λ}` unscaled, the slow rows read
/// `A^{sf,λ}/M`.
#[derive(Debug, Clone)]
pub struct MrGarkScheme {
    fast: RkTableau,
    slow: RkTableau,
    m: usize,
    couplings_fs: Vec<Mat>,
    couplings_sf: Vec<Mat>,
    eta: Option<EtaFamily>,
    structure: StructureTag,
}

impl MrGarkScheme {
    pub fn new(
        fast: RkTableau,
        slow: RkTableau,
        m: usize,
        couplings_fs: Vec<Mat>,
        couplings_sf: Vec<Mat>,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::Structural("multirate ratio M must be at least 1".into()));
        }
        if couplings_fs.len() != m || couplings_sf.len() != m {
            return Err(Error::Structural(format!(
                "expected {m} coupling matrices per direction, got {} (fs) and {} (sf)",
                couplings_fs.len(),
                couplings_sf.len()
            )));
        }
        let (sf, ss) = (fast.stages(), slow.stages());
        for (l, c) in couplings_fs.iter().enumerate() {
            if c.shape() != (sf, ss) {
                return Err(Error::Structural(format!(
                    "A^fs[{}] has shape {:?}, expected {:?}",
                    l + 1,
                    c.shape(),
                    (sf, ss)
                )));
            }
        }
        for (l, c) in couplings_sf.iter().enumerate() {
            if c.shape() != (ss, sf) {
                return Err(Error::Structural(format!(
                    "A^sf[{}] has shape {:?}, expected {:?}",
                    l + 1,
                    c.shape(),
                    (ss, sf)
                )));
            }
        }
        let mut sch = MrGarkScheme {
            fast,
            slow,
            m,
            couplings_fs,
            couplings_sf,
            eta: None,
            structure: StructureTag::FullyCoupled,
        };
        sch.structure = sch.flatten().structure(sf, m);
        Ok(sch)
    }

    /// Attach the η family the couplings were built from.
    pub fn with_eta(mut self, eta: EtaFamily) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn fast(&self) -> &RkTableau {
        &self.fast
    }

    pub fn slow(&self) -> &RkTableau {
        &self.slow
    }

    pub fn ratio(&self) -> usize {
        self.m
    }

    /// `A^{fs,λ}` for λ = 1..=M (stored 0-based).
    pub fn couplings_fs(&self) -> &[Mat] {
        &self.couplings_fs
    }

    /// `A^{sf,λ}` for λ = 1..=M (stored 0-based).
    pub fn couplings_sf(&self) -> &[Mat] {
        &self.couplings_sf
    }

    pub fn eta(&self) -> Option<&EtaFamily> {
        self.eta.as_ref()
    }

    pub fn structure(&self) -> StructureTag {
        self.structure
    }

    /// The equivalent two-partition GARK tableau.
    pub fn flatten(&self) -> FlatGarkTableau {
        let m = self.m;
        let (sf, ss) = (self.fast.stages(), self.slow.stages());
        let inv = 1.0 / m as f64;
        let nf = m * sf;
        let mut a_ff = Mat::zeros(nf, nf);
        let mut a_fs = Mat::zeros(nf, ss);
        let mut a_sf = Mat::zeros(ss, nf);
        for lam in 0..m {
            for i in 0..sf {
                let row = lam * sf + i;
                for l in 0..lam {
                    for j in 0..sf {
                        a_ff[(row, l * sf + j)] = inv * self.fast.b[j];
                    }
                }
                for j in 0..sf {
                    a_ff[(row, lam * sf + j)] = inv * self.fast.a[(i, j)];
                }
                for j in 0..ss {
                    a_fs[(row, j)] = self.couplings_fs[lam][(i, j)];
                }
            }
            for i in 0..ss {
                for j in 0..sf {
                    a_sf[(i, lam * sf + j)] = inv * self.couplings_sf[lam][(i, j)];
                }
            }
        }
        let b_f = Vector::from_fn(nf, |k, _| inv * self.fast.b[k % sf]);
        FlatGarkTableau::from_parts(
            a_ff,
            a_fs,
            a_sf,
            self.slow.a.clone(),
            b_f,
            self.slow.b.clone(),
            m,
        )
    }

    /// Recover a multirate scheme from a flattened tableau with ratio `m`
    /// and `fast_stages` stages per micro-step.
    pub fn from_flat(flat: &FlatGarkTableau, m: usize, fast_stages: usize) -> Result<Self> {
        if m == 0 || fast_stages == 0 || flat.n_fast() != m * fast_stages {
            return Err(Error::Structural(format!(
                "flat tableau with {} fast stages cannot hold M = {m} micro-steps of {fast_stages} stages",
                flat.n_fast()
            )));
        }
        let sf = fast_stages;
        let ss = flat.n_slow();
        let scale = m as f64;
        let fast_a = flat.a_ff.view((0, 0), (sf, sf)) * scale;
        let fast_b = flat.b_f.rows(0, sf) * scale;
        let fast = RkTableau::new(fast_a, fast_b.into_owned())?;
        let slow = RkTableau::new(flat.a_ss.clone(), flat.b_s.clone())?;
        let couplings_fs = (0..m)
            .map(|l| flat.a_fs.view((l * sf, 0), (sf, ss)).into_owned())
            .collect();
        let couplings_sf = (0..m)
            .map(|l| flat.a_sf.view((0, l * sf), (ss, sf)) * scale)
            .collect();
        Self::new(fast, slow, m, couplings_fs, couplings_sf)
    }

    /// Residuals of the internal consistency conditions.
    ///
    /// Fast: `max_λ ‖A^{fs,λ}1 − (A^{ff}1 + (λ−1)1)/M‖∞`.
    /// Slow: `‖(1/M)Σ_λ A^{sf,λ}1 − A^{ss}1‖∞`.
    pub fn internal_consistency_residuals(&self) -> (f64, f64) {
        let m = self.m as f64;
        let ss = self.slow.stages();
        let sf = self.fast.stages();
        let cf = self.fast.a.clone() * ones(sf);
        let mut res_fast: f64 = 0.0;
        for (l, afs) in self.couplings_fs.iter().enumerate() {
            let lhs = afs * ones(ss);
            for i in 0..sf {
                let target = (cf[i] + l as f64) / m;
                res_fast = res_fast.max((lhs[i] - target).abs());
            }
        }
        let mut sum = Vector::zeros(ss);
        for asf in &self.couplings_sf {
            sum += asf * ones(sf);
        }
        let cs = self.slow.a.clone() * ones(ss);
        let res_slow = max_abs((sum / m - cs).iter().copied());
        (res_fast, res_slow)
    }
}

/// Two-partition GARK tableau, fast partition first.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatGarkTableau {
    a_ff: Mat,
    a_fs: Mat,
    a_sf: Mat,
    a_ss: Mat,
    b_f: Vector,
    b_s: Vector,
    ratio: usize,
}

impl FlatGarkTableau {
    /// Build from blocks; `ratio` is the number of micro-steps the fast
    /// partition represents (1 when there is no multirate structure).
    pub fn new(
        a_ff: Mat,
        a_fs: Mat,
        a_sf: Mat,
        a_ss: Mat,
        b_f: Vector,
        b_s: Vector,
        ratio: usize,
    ) -> Result<Self> {
        let nf = b_f.len();
        let ns = b_s.len();
        if nf == 0 || ns == 0 {
            return Err(Error::Structural("both partitions need at least one stage".into()));
        }
        let ok = a_ff.shape() == (nf, nf)
            && a_fs.shape() == (nf, ns)
            && a_sf.shape() == (ns, nf)
            && a_ss.shape() == (ns, ns);
        if !ok {
            return Err(Error::Structural(format!(
                "inconsistent block shapes: A_ff {:?}, A_fs {:?}, A_sf {:?}, A_ss {:?}, b_f {nf}, b_s {ns}",
                a_ff.shape(),
                a_fs.shape(),
                a_sf.shape(),
                a_ss.shape()
            )));
        }
        if ratio == 0 {
            return Err(Error::Structural("ratio must be at least 1".into()));
        }
        Ok(Self::from_parts(a_ff, a_fs, a_sf, a_ss, b_f, b_s, ratio))
    }

    fn from_parts(
        a_ff: Mat,
        a_fs: Mat,
        a_sf: Mat,
        a_ss: Mat,
        b_f: Vector,
        b_s: Vector,
        ratio: usize,
    ) -> Self {
        FlatGarkTableau { a_ff, a_fs, a_sf, a_ss, b_f, b_s, ratio }
    }

    pub fn a_ff(&self) -> &Mat {
        &self.a_ff
    }

    pub fn a_fs(&self) -> &Mat {
        &self.a_fs
    }

    pub fn a_sf(&self) -> &Mat {
        &self.a_sf
    }

    pub fn a_ss(&self) -> &Mat {
        &self.a_ss
    }

    pub fn b_f(&self) -> &Vector {
        &self.b_f
    }

    pub fn b_s(&self) -> &Vector {
        &self.b_s
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn n_fast(&self) -> usize {
        self.b_f.len()
    }

    pub fn n_slow(&self) -> usize {
        self.b_s.len()
    }

    pub fn n_stages(&self) -> usize {
        self.n_fast() + self.n_slow()
    }

    /// Fast abscissae `A_ff·1`.
    pub fn c_f(&self) -> Vector {
        &self.a_ff * ones(self.n_fast())
    }

    /// Slow abscissae `A_ss·1`.
    pub fn c_s(&self) -> Vector {
        &self.a_ss * ones(self.n_slow())
    }

    /// Fast-stage abscissae seen through the slow coupling, `A_fs·1`.
    pub fn c_fs(&self) -> Vector {
        &self.a_fs * ones(self.n_slow())
    }

    /// Slow-stage abscissae seen through the fast coupling, `A_sf·1`.
    pub fn c_sf(&self) -> Vector {
        &self.a_sf * ones(self.n_fast())
    }

    /// The full `(n_fast + n_slow)²` coefficient matrix.
    pub fn full_a(&self) -> Mat {
        let (nf, ns) = (self.n_fast(), self.n_slow());
        let mut a = Mat::zeros(nf + ns, nf + ns);
        a.view_mut((0, 0), (nf, nf)).copy_from(&self.a_ff);
        a.view_mut((0, nf), (nf, ns)).copy_from(&self.a_fs);
        a.view_mut((nf, 0), (ns, nf)).copy_from(&self.a_sf);
        a.view_mut((nf, nf), (ns, ns)).copy_from(&self.a_ss);
        a
    }

    pub fn full_b(&self) -> Vector {
        let (nf, ns) = (self.n_fast(), self.n_slow());
        Vector::from_fn(nf + ns, |k, _| if k < nf { self.b_f[k] } else { self.b_s[k - nf] })
    }

    /// Stage abscissae used as time offsets: fast stages `A_ff·1`, slow
    /// stages `A_ss·1`.
    pub fn stage_times(&self) -> Vector {
        let (cf, cs) = (self.c_f(), self.c_s());
        let nf = self.n_fast();
        Vector::from_fn(self.n_stages(), |k, _| if k < nf { cf[k] } else { cs[k - nf] })
    }

    /// A topological ordering of the stage dependency graph, or `None`
    /// when some stage depends on itself (directly or through a cycle).
    pub fn explicit_order(&self) -> Option<Vec<usize>> {
        let a = self.full_a();
        let n = a.nrows();
        let mut indegree: Vec<usize> = (0..n)
            .map(|i| (0..n).filter(|&j| a[(i, j)].abs() > NONZERO).count())
            .collect();
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        while let Some(j) = ready.pop() {
            order.push(j);
            for i in 0..n {
                if a[(i, j)].abs() > NONZERO {
                    indegree[i] -= 1;
                    if indegree[i] == 0 {
                        ready.push(i);
                    }
                }
            }
            ready.sort_unstable_by(|x, y| y.cmp(x));
        }
        (order.len() == n).then_some(order)
    }

    pub fn is_explicit(&self) -> bool {
        self.explicit_order().is_some()
    }

    /// Strongly connected components of the stage dependency graph in an
    /// order where every component only depends on earlier ones.
    pub fn stage_blocks(&self) -> Vec<Vec<usize>> {
        let a = self.full_a();
        let n = a.nrows();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| a[(i, j)].abs() > NONZERO).collect())
            .collect();
        tarjan(&adj)
    }

    fn structure(&self, fast_stages: usize, m: usize) -> StructureTag {
        if self.is_explicit() {
            return StructureTag::Explicit;
        }
        let first_only = (fast_stages..self.n_fast())
            .all(|k| (0..self.n_slow()).all(|i| self.a_sf[(i, k)].abs() <= NONZERO));
        if m > 1 && first_only {
            return StructureTag::FirstMicrostepCoupled;
        }
        if self.stage_blocks().len() > 1 {
            StructureTag::Staggered
        } else {
            StructureTag::FullyCoupled
        }
    }
}

/// Tarjan's algorithm; components come out in dependency order because an
/// edge `i → j` means stage `i` reads stage `j`.
fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(st: &mut State, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for k in 0..st.adj[v].len() {
            let w = st.adj[v][k];
            match st.index[w] {
                None => {
                    visit(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = st.stack.pop() {
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            st.out.push(comp);
        }
    }
    let n = adj.len();
    let mut st = State {
        adj,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.out
}
