//! Algebraic stability: P-matrix assembly, PSD verdicts, stability
//! decoupling and the conditional-stability weight.

use serde::Serialize;

use crate::tableau::{inf_norm, FlatGarkTableau, Mat, RkTableau, Vector};

/// Relative PSD tolerance: eigenvalues down to `−PSD_TOL·(1 + ‖P‖∞)` count
/// as zero.
pub const PSD_TOL: f64 = 1e-10;

/// Absolute tolerance for `‖P_fs‖∞ = 0`.
pub const DECOUPLING_TOL: f64 = 1e-13;

/// Bisection steps of the conditional-stability weight search.
const WEIGHT_BISECTIONS: usize = 60;

/// How the right-hand side is split; decides whether a nonzero `P_fs`
/// block downgrades the stability verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Partitioning {
    #[default]
    Additive,
    Component,
}

/// The three independent blocks of the symmetric P matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PBlocks {
    pub p_ff: Mat,
    /// Block with fast rows and slow columns.
    pub p_fs: Mat,
    pub p_ss: Mat,
}

impl PBlocks {
    pub fn full(&self) -> Mat {
        let (nf, ns) = (self.p_ff.nrows(), self.p_ss.nrows());
        let mut p = Mat::zeros(nf + ns, nf + ns);
        p.view_mut((0, 0), (nf, nf)).copy_from(&self.p_ff);
        p.view_mut((0, nf), (nf, ns)).copy_from(&self.p_fs);
        p.view_mut((nf, 0), (ns, nf)).copy_from(&self.p_fs.transpose());
        p.view_mut((nf, nf), (ns, ns)).copy_from(&self.p_ss);
        p
    }
}

fn p_block(a_ml: &Mat, a_lm: &Mat, b_m: &Vector, b_l: &Vector) -> Mat {
    // Entry (i, j) of A^{m,l}ᵀB^m + B^l A^{l,m} − b^l b^mᵀ.
    Mat::from_fn(b_l.len(), b_m.len(), |i, j| {
        a_ml[(j, i)] * b_m[j] + b_l[i] * a_lm[(i, j)] - b_l[i] * b_m[j]
    })
}

pub fn p_blocks(flat: &FlatGarkTableau) -> PBlocks {
    let (bf, bs) = (flat.b_f(), flat.b_s());
    PBlocks {
        p_ff: p_block(flat.a_ff(), flat.a_ff(), bf, bf),
        p_fs: p_block(flat.a_sf(), flat.a_fs(), bs, bf),
        p_ss: p_block(flat.a_ss(), flat.a_ss(), bs, bs),
    }
}

/// `AᵀB + BA − bbᵀ` of a single method.
pub fn rk_p_matrix(t: &RkTableau) -> Mat {
    p_block(t.a(), t.a(), t.b(), t.b())
}

/// Smallest eigenvalue of the symmetrized matrix.
pub fn min_eigenvalue(p: &Mat) -> f64 {
    let sym = (p + p.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

/// `(verdict, min eigenvalue)` with threshold `−rel_tol·(1 + ‖P‖∞)`.
pub fn psd_verdict(p: &Mat, rel_tol: f64) -> (bool, f64) {
    let lam = min_eigenvalue(p);
    (lam >= -rel_tol * (1.0 + inf_norm(p)), lam)
}

/// Full-P verdict; `rel_tol` scales with `1 + ‖P‖∞`.
pub fn is_algebraically_stable(flat: &FlatGarkTableau, rel_tol: f64) -> (bool, f64) {
    psd_verdict(&p_blocks(flat).full(), rel_tol)
}

pub fn is_stability_decoupled(flat: &FlatGarkTableau, tol: f64) -> bool {
    inf_norm(&p_blocks(flat).p_fs) <= tol
}

fn weighted_p(blocks: &PBlocks, flat: &FlatGarkTableau, r: f64) -> Mat {
    let mut p = blocks.full();
    let nf = flat.n_fast();
    let m = flat.ratio() as f64;
    for (k, &w) in flat.b_f().iter().enumerate() {
        p[(k, k)] += r * m * w;
    }
    for (k, &w) in flat.b_s().iter().enumerate() {
        p[(nf + k, nf + k)] += r * w;
    }
    p
}

/// Smallest `r ∈ [0, r_max]` making
/// `[[P_ff + rM·B_f, P_fs], [P_sf, P_ss + r·B_s]]` positive semidefinite,
/// located to `r_max·2⁻⁶⁰`; `None` when infeasible at `r_max`.
pub fn conditional_stability_weight(flat: &FlatGarkTableau, r_max: f64) -> Option<f64> {
    let blocks = p_blocks(flat);
    let feasible = |r: f64| psd_verdict(&weighted_p(&blocks, flat, r), PSD_TOL).0;
    if feasible(0.0) {
        return Some(0.0);
    }
    if !feasible(r_max) {
        return None;
    }
    let (mut lo, mut hi) = (0.0, r_max);
    for _ in 0..WEIGHT_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Step bound `H ≤ −2μ/r` for a coercivity constant `μ < 0`.
pub fn stability_step_bound(mu: f64, r: f64) -> Option<f64> {
    if mu >= 0.0 {
        None
    } else if r == 0.0 {
        Some(f64::INFINITY)
    } else {
        Some(-2.0 * mu / r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub partitioning: Partitioning,
    pub p_ff: Vec<Vec<f64>>,
    pub p_fs: Vec<Vec<f64>>,
    pub p_ss: Vec<Vec<f64>>,
    /// Verdict under the chosen partitioning: the full P for additive
    /// splitting, the two diagonal blocks for component splitting.
    pub algebraically_stable: bool,
    pub full_p_psd: bool,
    pub fast_block_psd: bool,
    pub slow_block_psd: bool,
    pub stability_decoupled: bool,
    pub p_fs_norm: f64,
    pub min_eigenvalue: f64,
    pub conditional_r: Option<f64>,
    pub step_bound: Option<f64>,
}

pub(crate) fn rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Combined stability analysis. `mu` is the problem's coercivity constant;
/// the step bound is reported only when it is given.
pub fn stability_report(
    flat: &FlatGarkTableau,
    partitioning: Partitioning,
    mu: Option<f64>,
    r_max: f64,
) -> StabilityReport {
    let blocks = p_blocks(flat);
    let (full_ok, lam) = psd_verdict(&blocks.full(), PSD_TOL);
    let (ff_ok, _) = psd_verdict(&blocks.p_ff, PSD_TOL);
    let (ss_ok, _) = psd_verdict(&blocks.p_ss, PSD_TOL);
    let p_fs_norm = inf_norm(&blocks.p_fs);
    let algebraically_stable = match partitioning {
        Partitioning::Additive => full_ok,
        Partitioning::Component => ff_ok && ss_ok,
    };
    let conditional_r = conditional_stability_weight(flat, r_max);
    let step_bound = match (mu, conditional_r) {
        (Some(mu), Some(r)) => stability_step_bound(mu, r),
        _ => None,
    };
    StabilityReport {
        partitioning,
        p_ff: rows(&blocks.p_ff),
        p_fs: rows(&blocks.p_fs),
        p_ss: rows(&blocks.p_ss),
        algebraically_stable,
        full_p_psd: full_ok,
        fast_block_psd: ff_ok,
        slow_block_psd: ss_ok,
        stability_decoupled: p_fs_norm <= DECOUPLING_TOL,
        p_fs_norm,
        min_eigenvalue: lam,
        conditional_r,
        step_bound,
    }
}
