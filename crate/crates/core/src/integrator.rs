//! Macro-step integration: structured multirate steps, the flattened
//! single-tableau step used as oracle, Newton stage solves and the
//! fixed-step driver.

use std::cell::RefCell;
use std::fmt;
use std::ops::AddAssign;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;
use thiserror::Error as ThisError;

use crate::error::{Error, Result};
use crate::tableau::{FlatGarkTableau, Mat, MrGarkScheme, Vector, NONZERO};

pub type Rhs = Arc<dyn Fn(f64, &Vector) -> Vector + Send + Sync>;
pub type Jacobian = Arc<dyn Fn(f64, &Vector) -> Mat + Send + Sync>;
pub type Solution = Arc<dyn Fn(f64) -> Vector + Send + Sync>;

/// Dissipativity and monotonicity constants of a test problem.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ProblemMetadata {
    /// Coercivity constant of the full right-hand side.
    pub mu: Option<f64>,
    pub nu_slow: Option<f64>,
    pub nu_fast: Option<f64>,
    /// Forward-Euler monotonicity step limit.
    pub rho: Option<f64>,
}

/// `y' = f_slow(t, y) + f_fast(t, y)`, `y(t0) = y0`.
#[derive(Clone)]
pub struct PartitionedIvp {
    pub name: String,
    pub dim: usize,
    pub f_slow: Rhs,
    pub f_fast: Rhs,
    pub y0: Vector,
    pub t0: f64,
    pub exact: Option<Solution>,
    pub jac_slow: Option<Jacobian>,
    pub jac_fast: Option<Jacobian>,
    pub metadata: ProblemMetadata,
}

impl fmt::Debug for PartitionedIvp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PartitionedIvp")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("y0", &self.y0.as_slice())
            .field("t0", &self.t0)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

impl PartitionedIvp {
    pub fn new(
        name: impl Into<String>,
        f_slow: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
        f_fast: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
        y0: Vector,
        t0: f64,
    ) -> Result<Self> {
        if y0.is_empty() {
            return Err(Error::Structural("problem dimension must be at least 1".into()));
        }
        Ok(Self {
            name: name.into(),
            dim: y0.len(),
            f_slow: Arc::new(f_slow),
            f_fast: Arc::new(f_fast),
            y0,
            t0,
            exact: None,
            jac_slow: None,
            jac_fast: None,
            metadata: ProblemMetadata::default(),
        })
    }

    pub fn with_exact(mut self, exact: impl Fn(f64) -> Vector + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn with_jacobians(
        mut self,
        slow: impl Fn(f64, &Vector) -> Mat + Send + Sync + 'static,
        fast: impl Fn(f64, &Vector) -> Mat + Send + Sync + 'static,
    ) -> Self {
        self.jac_slow = Some(Arc::new(slow));
        self.jac_fast = Some(Arc::new(fast));
        self
    }

    pub fn with_metadata(mut self, metadata: ProblemMetadata) -> Self {
        self.metadata = metadata;
        self
    }

    pub fn with_initial_state(mut self, y0: Vector) -> Self {
        self.y0 = y0;
        self
    }

    /// Full right-hand side `f_slow + f_fast`.
    pub fn rhs(&self, t: f64, y: &Vector) -> Vector {
        (self.f_slow)(t, y) + (self.f_fast)(t, y)
    }
}

/// Split `f` by components: the slow part keeps the entries listed in
/// `slow`, the fast part those in `fast`.
pub fn component_partition(
    f: impl Fn(f64, &Vector) -> Vector + Send + Sync + 'static,
    dim: usize,
    slow: &[usize],
    fast: &[usize],
) -> Result<(Rhs, Rhs)> {
    let mut owner = vec![None; dim];
    for (set, part) in [(slow, 0u8), (fast, 1u8)] {
        for &i in set {
            if i >= dim {
                return Err(Error::Structural(format!("component {i} outside 0..{dim}")));
            }
            if owner[i].replace(part).is_some() {
                return Err(Error::Structural(format!("component {i} assigned twice")));
            }
        }
    }
    if let Some(i) = owner.iter().position(Option::is_none) {
        return Err(Error::Structural(format!("component {i} is in neither index set")));
    }
    let f: Rhs = Arc::new(f);
    let mask = |part: u8| -> Rhs {
        let f = Arc::clone(&f);
        let keep: Vec<bool> = owner.iter().map(|o| *o == Some(part)).collect();
        Arc::new(move |t, y| {
            let mut out = f(t, y);
            for (v, k) in out.iter_mut().zip(&keep) {
                if !k {
                    *v = 0.0;
                }
            }
            out
        })
    };
    Ok((mask(0), mask(1)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum JacobianMode {
    /// Analytic Jacobians when the problem provides them, finite
    /// differences otherwise.
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub jacobian_mode: JacobianMode,
    /// Relative increment; column `i` uses `fd_epsilon·(1 + |y_i|)`.
    pub fd_epsilon: f64,
    pub record_micro_states: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            newton_max_iter: 25,
            jacobian_mode: JacobianMode::Analytic,
            fd_epsilon: f64::EPSILON.sqrt(),
            record_micro_states: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) || self.newton_max_iter == 0 || !(self.fd_epsilon > 0.0) {
            return Err(Error::Domain(
                "newton_tol and fd_epsilon must be positive, newton_max_iter at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub rhs_slow_evals: usize,
    pub rhs_fast_evals: usize,
    /// Evaluations spent on finite-difference Jacobians.
    pub rhs_jacobian_evals: usize,
    pub jacobian_evals: usize,
    pub newton_solves: usize,
    pub newton_iters: usize,
}

impl AddAssign for Stats {
    fn add_assign(&mut self, o: Self) {
        self.rhs_slow_evals += o.rhs_slow_evals;
        self.rhs_fast_evals += o.rhs_fast_evals;
        self.rhs_jacobian_evals += o.rhs_jacobian_evals;
        self.jacobian_evals += o.jacobian_evals;
        self.newton_solves += o.newton_solves;
        self.newton_iters += o.newton_iters;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub solution: Vector,
    pub iterations: usize,
    pub residual_norm: f64,
}

fn norm_inf(v: &Vector) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Full Newton iteration on `residual(z) = 0`.
///
/// Stops when `‖residual‖∞ ≤ newton_tol`, or when the update stagnates at
/// roundoff level (`‖Δz‖∞ ≤ 1e−15·(1 + ‖z‖∞)`).
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    guess: Vector,
    cfg: &SolverConfig,
) -> Result<NewtonOutcome>
where
    R: FnMut(&Vector) -> Result<Vector>,
    J: FnMut(&Vector) -> Result<Mat>,
{
    let mut z = guess;
    let mut iter = 0;
    loop {
        let r = residual(&z)?;
        let norm = norm_inf(&r);
        if !norm.is_finite() {
            return Err(Error::NonConvergence { iterations: iter, residual: norm });
        }
        if norm <= cfg.newton_tol {
            return Ok(NewtonOutcome { solution: z, iterations: iter, residual_norm: norm });
        }
        if iter == cfg.newton_max_iter {
            return Err(Error::NonConvergence { iterations: iter, residual: norm });
        }
        let jac = jacobian(&z)?;
        let dz = jac.lu().solve(&r).ok_or(Error::SingularJacobian)?;
        if dz.iter().any(|x| !x.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        z -= &dz;
        iter += 1;
        if norm_inf(&dz) <= 1e-15 * (1.0 + norm_inf(&z)) {
            return Ok(NewtonOutcome { solution: z, iterations: iter, residual_norm: norm });
        }
    }
}

/// Result of one macro-step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub y: Vector,
    /// Stage values in flattened order (fast micro-stages, then slow).
    pub stages: Vec<Vector>,
    /// Intermediate solutions after each micro-step; the last one excludes
    /// the slow weights.
    pub micro_states: Vec<Vector>,
}

/// A one-step method on partitioned problems. Implementations are
/// stateless, so one stepper may drive many trajectories concurrently.
pub trait Stepper: Send + Sync {
    fn step(
        &self,
        ivp: &PartitionedIvp,
        t: f64,
        y: &Vector,
        h: f64,
        cfg: &SolverConfig,
        stats: &mut Stats,
    ) -> Result<StepOutput>;
}

/// How stage values are assembled from right-hand side values.
trait StageLayout {
    fn stage_values(&self, y: &Vector, h: f64, block: &[usize], f: &[Option<Vector>]) -> Vec<Vector>;
    fn micro_states(&self, y: &Vector, h: f64, f: &[Option<Vector>]) -> Vec<Vector>;
    fn update(&self, y: &Vector, h: f64, f: &[Option<Vector>]) -> Vector;
}

fn axpy(acc: &mut Vector, w: f64, x: &Option<Vector>) {
    if w != 0.0 {
        if let Some(x) = x {
            acc.axpy(w, x, 1.0);
        }
    }
}

/// Every stage as `y + H Σ_j a_kj F_j` over the flattened tableau.
struct FlatLayout<'a> {
    flat: &'a FlatGarkTableau,
    a: Mat,
    b: Vector,
}

impl StageLayout for FlatLayout<'_> {
    fn stage_values(&self, y: &Vector, h: f64, block: &[usize], f: &[Option<Vector>]) -> Vec<Vector> {
        block
            .iter()
            .map(|&k| {
                let mut v = y.clone();
                for (j, fj) in f.iter().enumerate() {
                    axpy(&mut v, h * self.a[(k, j)], fj);
                }
                v
            })
            .collect()
    }

    fn micro_states(&self, y: &Vector, h: f64, f: &[Option<Vector>]) -> Vec<Vector> {
        let m = self.flat.ratio();
        let nf = self.flat.n_fast();
        if m == 0 || nf % m != 0 {
            return Vec::new();
        }
        let per = nf / m;
        let mut acc = y.clone();
        (0..m)
            .map(|lam| {
                for k in lam * per..(lam + 1) * per {
                    axpy(&mut acc, h * self.b[k], &f[k]);
                }
                acc.clone()
            })
            .collect()
    }

    fn update(&self, y: &Vector, h: f64, f: &[Option<Vector>]) -> Vector {
        let mut v = y.clone();
        for (j, fj) in f.iter().enumerate() {
            axpy(&mut v, h * self.b[j], fj);
        }
        v
    }
}

/// Micro-step recursion: fast stages start from the intermediate solution
/// `ỹ_{λ−1}` and use the base tableau with step `H/M`.
struct StructuredLayout<'a> {
    sch: &'a MrGarkScheme,
    flat: FlatGarkTableau,
}

impl StructuredLayout<'_> {
    fn intermediate(&self, y: &Vector, h: f64, f: &[Option<Vector>]) -> Vec<Vector> {
        let m = self.sch.ratio();
        let sf = self.sch.fast().stages();
        let micro = h / m as f64;
        let b = self.sch.fast().b();
        let mut out = Vec::with_capacity(m + 1);
        out.push(y.clone());
        for lam in 0..m {
            let mut next = out[lam].clone();
            for i in 0..sf {
                axpy(&mut next, micro * b[i], &f[lam * sf + i]);
            }
            out.push(next);
        }
        out
    }
}

impl StageLayout for StructuredLayout<'_> {
    fn stage_values(&self, y: &Vector, h: f64, block: &[usize], f: &[Option<Vector>]) -> Vec<Vector> {
        let sch = self.sch;
        let m = sch.ratio();
        let (sf, ss) = (sch.fast().stages(), sch.slow().stages());
        let nf = m * sf;
        let micro = h / m as f64;
        let base = self.intermediate(y, h, f);
        block
            .iter()
            .map(|&k| {
                if k < nf {
                    let (lam, i) = (k / sf, k % sf);
                    let mut v = base[lam].clone();
                    let a = sch.fast().a();
                    for j in 0..sf {
                        axpy(&mut v, micro * a[(i, j)], &f[lam * sf + j]);
                    }
                    let afs = &sch.couplings_fs()[lam];
                    for j in 0..ss {
                        axpy(&mut v, h * afs[(i, j)], &f[nf + j]);
                    }
                    v
                } else {
                    let i = k - nf;
                    let mut v = y.clone();
                    let a = sch.slow().a();
                    for j in 0..ss {
                        axpy(&mut v, h * a[(i, j)], &f[nf + j]);
                    }
                    for (lam, asf) in sch.couplings_sf().iter().enumerate() {
                        for j in 0..sf {
                            axpy(&mut v, micro * asf[(i, j)], &f[lam * sf + j]);
                        }
                    }
                    v
                }
            })
            .collect()
    }

    fn micro_states(&self, y: &Vector, h: f64, f: &[Option<Vector>]) -> Vec<Vector> {
        self.intermediate(y, h, f).split_off(1)
    }

    fn update(&self, y: &Vector, h: f64, f: &[Option<Vector>]) -> Vector {
        let mut v = self.intermediate(y, h, f).pop().expect("at least one micro-step");
        let nf = self.flat.n_fast();
        for (i, &w) in self.sch.slow().b().iter().enumerate() {
            axpy(&mut v, h * w, &f[nf + i]);
        }
        v
    }
}

struct Engine<'a> {
    ivp: &'a PartitionedIvp,
    cfg: &'a SolverConfig,
    t: f64,
    h: f64,
    times: Vector,
    coeff: Mat,
    n_fast: usize,
}

impl Engine<'_> {
    fn eval(&self, k: usize, y: &Vector, stats: &mut Stats) -> Result<Vector> {
        let tk = self.t + self.times[k] * self.h;
        let out = if k < self.n_fast {
            stats.rhs_fast_evals += 1;
            (self.ivp.f_fast)(tk, y)
        } else {
            stats.rhs_slow_evals += 1;
            (self.ivp.f_slow)(tk, y)
        };
        if out.len() != self.ivp.dim {
            return Err(Error::Structural(format!(
                "right-hand side returned {} components, expected {}",
                out.len(),
                self.ivp.dim
            )));
        }
        if out.iter().any(|x| !x.is_finite()) || y.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { t: tk });
        }
        Ok(out)
    }

    fn jacobian(&self, k: usize, y: &Vector, fy: &Vector, stats: &mut Stats) -> Result<Mat> {
        let tk = self.t + self.times[k] * self.h;
        let (analytic, f) = if k < self.n_fast {
            (&self.ivp.jac_fast, &self.ivp.f_fast)
        } else {
            (&self.ivp.jac_slow, &self.ivp.f_slow)
        };
        stats.jacobian_evals += 1;
        if let (JacobianMode::Analytic, Some(jac)) = (self.cfg.jacobian_mode, analytic) {
            return Ok(jac(tk, y));
        }
        let n = y.len();
        let mut jac = Mat::zeros(n, n);
        let mut probe = y.clone();
        for i in 0..n {
            let eps = self.cfg.fd_epsilon * (1.0 + y[i].abs());
            probe[i] = y[i] + eps;
            let df = (f(tk, &probe) - fy) / eps;
            stats.rhs_jacobian_evals += 1;
            jac.set_column(i, &df);
            probe[i] = y[i];
        }
        Ok(jac)
    }

    fn run(
        &self,
        layout: &dyn StageLayout,
        schedule: &[Vec<usize>],
        y: &Vector,
        stats: &mut Stats,
    ) -> Result<StepOutput> {
        let n = self.coeff.nrows();
        let dim = y.len();
        let mut f: Vec<Option<Vector>> = vec![None; n];
        let mut stages: Vec<Option<Vector>> = vec![None; n];
        for block in schedule {
            if block.len() == 1 && self.coeff[(block[0], block[0])].abs() <= NONZERO {
                let k = block[0];
                let v = layout.stage_values(y, self.h, block, &f).pop().expect("one stage");
                f[k] = Some(self.eval(k, &v, stats)?);
                stages[k] = Some(v);
                continue;
            }
            let nb = block.len();
            let work = RefCell::new((f.clone(), *stats));
            let unpack = |z: &Vector, i: usize| z.rows(i * dim, dim).into_owned();
            let residual = |z: &Vector| -> Result<Vector> {
                let mut guard = work.borrow_mut();
                let (fw, st) = &mut *guard;
                for (i, &k) in block.iter().enumerate() {
                    fw[k] = Some(self.eval(k, &unpack(z, i), st)?);
                }
                let vals = layout.stage_values(y, self.h, block, fw);
                let mut r = z.clone();
                for (i, v) in vals.iter().enumerate() {
                    let mut seg = r.rows_mut(i * dim, dim);
                    seg -= v;
                }
                Ok(r)
            };
            let jacobian = |z: &Vector| -> Result<Mat> {
                let mut guard = work.borrow_mut();
                let (fw, st) = &mut *guard;
                let mut big = Mat::identity(nb * dim, nb * dim);
                for (jb, &j) in block.iter().enumerate() {
                    let zj = unpack(z, jb);
                    let fj = fw[j].clone().expect("residual evaluated before the Jacobian");
                    let jac = self.jacobian(j, &zj, &fj, st)?;
                    for (ib, &i) in block.iter().enumerate() {
                        let w = self.h * self.coeff[(i, j)];
                        if w != 0.0 {
                            let mut blk = big.view_mut((ib * dim, jb * dim), (dim, dim));
                            blk -= &jac * w;
                        }
                    }
                }
                Ok(big)
            };
            let mut guess = Vector::zeros(nb * dim);
            for i in 0..nb {
                guess.rows_mut(i * dim, dim).copy_from(y);
            }
            let outcome = newton_solve(residual, jacobian, guess, self.cfg);
            let (_, st) = work.into_inner();
            *stats = st;
            let outcome = outcome?;
            stats.newton_solves += 1;
            stats.newton_iters += outcome.iterations;
            for (i, &k) in block.iter().enumerate() {
                let v = unpack(&outcome.solution, i);
                f[k] = Some(self.eval(k, &v, stats)?);
                stages[k] = Some(v);
            }
        }
        let out = layout.update(y, self.h, &f);
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diverged { t: self.t + self.h });
        }
        Ok(StepOutput {
            micro_states: if self.cfg.record_micro_states {
                layout.micro_states(y, self.h, &f)
            } else {
                Vec::new()
            },
            y: out,
            stages: stages.into_iter().map(|s| s.expect("every stage scheduled")).collect(),
        })
    }
}

fn engine<'a>(
    flat: &FlatGarkTableau,
    ivp: &'a PartitionedIvp,
    cfg: &'a SolverConfig,
    t: f64,
    y: &Vector,
    h: f64,
) -> Result<Engine<'a>> {
    cfg.validate()?;
    if y.len() != ivp.dim {
        return Err(Error::Structural(format!("state has {} components, expected {}", y.len(), ivp.dim)));
    }
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("step size H = {h} must be finite and non-negative")));
    }
    Ok(Engine {
        ivp,
        cfg,
        t,
        h,
        times: flat.stage_times(),
        coeff: flat.full_a(),
        n_fast: flat.n_fast(),
    })
}

/// Reference step on the flattened tableau: an explicit cascade when the
/// stage graph is acyclic, otherwise one Newton solve over all stages.
/// Stage evaluations after a Newton solve are not reused, so each implicit
/// stage costs one extra right-hand side evaluation.
impl Stepper for FlatGarkTableau {
    fn step(
        &self,
        ivp: &PartitionedIvp,
        t: f64,
        y: &Vector,
        h: f64,
        cfg: &SolverConfig,
        stats: &mut Stats,
    ) -> Result<StepOutput> {
        let eng = engine(self, ivp, cfg, t, y, h)?;
        let schedule = match self.explicit_order() {
            Some(order) => order.into_iter().map(|k| vec![k]).collect(),
            None => vec![(0..self.n_stages()).collect()],
        };
        let layout = FlatLayout { flat: self, a: self.full_a(), b: self.full_b() };
        eng.run(&layout, &schedule, y, stats)
    }
}

/// Structured macro-step. Stages are solved block by block in dependency
/// order: explicit schemes need no Newton solves, first-microstep coupled
/// schemes solve the slow stages together with the first micro-step and
/// then each later micro-step on its own, fully coupled schemes solve one
/// system.
impl Stepper for MrGarkScheme {
    fn step(
        &self,
        ivp: &PartitionedIvp,
        t: f64,
        y: &Vector,
        h: f64,
        cfg: &SolverConfig,
        stats: &mut Stats,
    ) -> Result<StepOutput> {
        let flat = self.flatten();
        let eng = engine(&flat, ivp, cfg, t, y, h)?;
        let schedule = match flat.explicit_order() {
            Some(order) => order.into_iter().map(|k| vec![k]).collect(),
            None => flat.stage_blocks(),
        };
        let layout = StructuredLayout { sch: self, flat };
        eng.run(&layout, &schedule, y, stats)
    }
}

pub fn mgark_step(
    sch: &MrGarkScheme,
    ivp: &PartitionedIvp,
    y: &Vector,
    t: f64,
    h: f64,
    cfg: &SolverConfig,
) -> Result<(Vector, Stats)> {
    let mut stats = Stats::default();
    let out = sch.step(ivp, t, y, h, cfg, &mut stats)?;
    Ok((out.y, stats))
}

pub fn flat_gark_step(
    flat: &FlatGarkTableau,
    ivp: &PartitionedIvp,
    y: &Vector,
    t: f64,
    h: f64,
    cfg: &SolverConfig,
) -> Result<(Vector, Stats)> {
    let mut stats = Stats::default();
    let out = flat.step(ivp, t, y, h, cfg, &mut stats)?;
    Ok((out.y, stats))
}

/// Macro-grid solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    /// Per macro-step intermediate solutions, when recorded.
    pub micro_states: Option<Vec<Vec<Vector>>>,
    pub stats: Stats,
}

impl Trajectory {
    /// `t,y0,y1,...` with one row per macro-step.
    pub fn to_csv(&self) -> String {
        let dim = self.states.first().map_or(0, |s| s.len());
        let mut out = String::from("t");
        for i in 0..dim {
            out.push_str(&format!(",y{i}"));
        }
        out.push('\n');
        for (t, y) in self.times.iter().zip(&self.states) {
            out.push_str(&t.to_string());
            for v in y.iter() {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let vecs = |xs: &[Vector]| -> Vec<Vec<f64>> { xs.iter().map(|v| v.iter().copied().collect()).collect() };
        json!({
            "times": self.times,
            "states": vecs(&self.states),
            "micro_states": self.micro_states.as_ref().map(|ms| ms.iter().map(|s| vecs(s)).collect::<Vec<_>>()),
            "stats": self.stats,
        })
    }
}

/// A failed integration with everything computed before the failure.
#[derive(Debug, Clone, ThisError)]
#[error("{error}")]
pub struct IntegrationFailure {
    pub error: Error,
    pub partial: Box<Trajectory>,
}

/// Number of macro-steps of size `h` covering `[t0, t_end]`.
pub fn step_count(t0: f64, t_end: f64, h: f64) -> Result<usize> {
    if !(h > 0.0) || !h.is_finite() || !(t_end > t0) {
        return Err(Error::InvalidGrid(format!("need H > 0 and t_end > t0, got H = {h}, [{t0}, {t_end}]")));
    }
    let ratio = (t_end - t0) / h;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 4.0 * f64::EPSILON * n {
        return Err(Error::InvalidGrid(format!(
            "(t_end − t0)/H = {ratio} is not an integer number of steps"
        )));
    }
    Ok(n as usize)
}

/// Fixed-step integration from `ivp.t0` to `t_end`. Grid points are
/// `t0 + k·H` computed with a fused multiply-add; the last one is `t_end`.
pub fn integrate(
    stepper: &dyn Stepper,
    ivp: &PartitionedIvp,
    t_end: f64,
    h: f64,
    cfg: &SolverConfig,
) -> std::result::Result<Trajectory, IntegrationFailure> {
    let mut traj = Trajectory {
        times: vec![ivp.t0],
        states: vec![ivp.y0.clone()],
        micro_states: cfg.record_micro_states.then(Vec::new),
        stats: Stats::default(),
    };
    let n = match step_count(ivp.t0, t_end, h) {
        Ok(n) => n,
        Err(error) => return Err(IntegrationFailure { error, partial: Box::new(traj) }),
    };
    let mut y = ivp.y0.clone();
    for k in 0..n {
        let t = (k as f64).mul_add(h, ivp.t0);
        match stepper.step(ivp, t, &y, h, cfg, &mut traj.stats) {
            Ok(out) => {
                y = out.y;
                let t_next = if k + 1 == n { t_end } else { ((k + 1) as f64).mul_add(h, ivp.t0) };
                traj.times.push(t_next);
                traj.states.push(y.clone());
                if let Some(ms) = traj.micro_states.as_mut() {
                    ms.push(out.micro_states);
                }
            }
            Err(error) => return Err(IntegrationFailure { error, partial: Box::new(traj) }),
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tableau::{mat, RkTableau};

    fn scalar_ivp(ls: f64, lf: f64) -> PartitionedIvp {
        PartitionedIvp::new(
            "scalar",
            move |_, y: &Vector| y * ls,
            move |_, y: &Vector| y * lf,
            Vector::from_element(1, 1.0),
            0.0,
        )
        .unwrap()
    }

    fn ssp2() -> RkTableau {
        RkTableau::from_rows(&[&[0.0, 0.0], &[1.0, 0.0]], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn linear_residual_converges_in_one_iteration() {
        let a = mat(&[&[2.0, 1.0], &[0.0, 3.0]]);
        let rhs = Vector::from_vec(vec![1.0, 2.0]);
        let out = newton_solve(
            |z: &Vector| Ok(&a * z - &rhs),
            |_: &Vector| Ok(a.clone()),
            Vector::zeros(2),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(out.iterations, 1);
        assert!((&a * &out.solution - &rhs).amax() <= 1e-14);
    }

    #[test]
    fn implicit_euler_stage_closed_form() {
        let (a0, theta, lam) = (0.7, 0.5, -3.0);
        let out = newton_solve(
            |z: &Vector| Ok(z.map(|y| y - a0 - theta * lam * y)),
            |_: &Vector| Ok(Mat::from_element(1, 1, 1.0 - theta * lam)),
            Vector::zeros(1),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!((out.solution[0] - a0 / (1.0 - theta * lam)).abs() <= 1e-14);
    }

    #[test]
    fn nonconvergence_is_reported() {
        let cfg = SolverConfig { newton_max_iter: 1, ..SolverConfig::default() };
        let err = newton_solve(
            |z: &Vector| Ok(z.map(|y| y.powi(3) - 2.0)),
            |z: &Vector| Ok(Mat::from_element(1, 1, 3.0 * z[0] * z[0])),
            Vector::from_element(1, 10.0),
            &cfg,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 1, .. }));
    }

    #[test]
    fn component_partition_splits_entries() {
        let (slow, fast) =
            component_partition(|_, y: &Vector| Vector::from_vec(vec![-y[0], -10.0 * y[1]]), 2, &[0], &[1])
                .unwrap();
        let y = Vector::from_vec(vec![1.0, 2.0]);
        assert_eq!(slow(0.0, &y).as_slice(), &[-1.0, 0.0]);
        assert_eq!(fast(0.0, &y).as_slice(), &[0.0, -20.0]);
        assert!(component_partition(|_, y: &Vector| y.clone(), 2, &[0, 1], &[1]).is_err());
        assert!(component_partition(|_, y: &Vector| y.clone(), 2, &[0], &[]).is_err());
    }

    #[test]
    fn zero_step_returns_state() {
        let t = ssp2();
        let sch = MrGarkScheme::new(t.clone(), t.clone(), 2, vec![t.a().clone(); 2], vec![t.a().clone(); 2])
            .unwrap();
        let ivp = scalar_ivp(-1.0, -10.0);
        let y = Vector::from_element(1, 0.3);
        let (out, _) = mgark_step(&sch, &ivp, &y, 0.0, 0.0, &SolverConfig::default()).unwrap();
        assert_eq!(out, y);
        let (out, _) = flat_gark_step(&sch.flatten(), &ivp, &y, 0.0, 0.0, &SolverConfig::default()).unwrap();
        assert_eq!(out, y);
    }

    #[test]
    fn grid_ends_exactly() {
        assert_eq!(step_count(0.0, 1.0, 0.1).unwrap(), 10);
        assert!(step_count(0.0, 1.0, 0.3).is_err());
        let t = ssp2();
        let sch = MrGarkScheme::new(t.clone(), t.clone(), 1, vec![t.a().clone()], vec![t.a().clone()])
            .unwrap();
        let traj = integrate(&sch, &scalar_ivp(-1.0, -1.0), 1.0, 0.1, &SolverConfig::default()).unwrap();
        assert_eq!(traj.times.len(), 11);
        assert_eq!(*traj.times.last().unwrap(), 1.0);
    }

    #[test]
    fn divergence_keeps_partial_trajectory() {
        let ivp = PartitionedIvp::new(
            "blowup",
            |_, y: &Vector| y.map(|v| v * v * 1e200),
            |_, y: &Vector| y * 0.0,
            Vector::from_element(1, 1.0),
            0.0,
        )
        .unwrap();
        let t = ssp2();
        let sch = MrGarkScheme::new(t.clone(), t.clone(), 1, vec![t.a().clone()], vec![t.a().clone()])
            .unwrap();
        let err = integrate(&sch, &ivp, 1.0, 0.5, &SolverConfig::default()).unwrap_err();
        assert_eq!(err.error.code(), "Diverged");
        assert!(!err.partial.states.is_empty());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let traj = Trajectory {
            times: vec![0.0, 0.5],
            states: vec![Vector::from_vec(vec![1.0, 2.0]), Vector::from_vec(vec![0.5, 1.0])],
            micro_states: None,
            stats: Stats::default(),
        };
        assert_eq!(traj.to_csv(), "t,y0,y1\n0,1,2\n0.5,0.5,1\n");
    }
}
