//! Registered test problems.

use crate::error::{Error, Result};
use crate::integrator::{PartitionedIvp, ProblemMetadata};
use crate::tableau::{mat, Mat, Vector};

/// Names accepted by [`problem`].
pub const PROBLEMS: &[&str] = &["scalar-linear", "linear2", "dissipative2", "decay", "advection"];

/// `y' = λ_s y + λ_f y` with `λ_s = −1`, `λ_f = −10`, `y(0) = 1`.
pub fn scalar_linear() -> PartitionedIvp {
    let (ls, lf) = (-1.0, -10.0);
    PartitionedIvp::new(
        "scalar-linear",
        move |_, y: &Vector| y * ls,
        move |_, y: &Vector| y * lf,
        Vector::from_element(1, 1.0),
        0.0,
    )
    .expect("nonempty state")
    .with_exact(move |t| Vector::from_element(1, ((ls + lf) * t).exp()))
    .with_jacobians(
        move |_, _| Mat::from_element(1, 1, ls),
        move |_, _| Mat::from_element(1, 1, lf),
    )
}

/// Linear system with non-commuting slow and fast matrices; the exact
/// solution is a matrix exponential.
pub fn linear2() -> PartitionedIvp {
    let slow = mat(&[&[-0.5, 0.5], &[-0.5, -0.5]]);
    let fast = mat(&[&[-10.0, 4.0], &[0.0, -6.0]]);
    let total = &slow + &fast;
    let y0 = Vector::from_vec(vec![1.0, 1.0]);
    let (s1, f1, s2, f2) = (slow.clone(), fast.clone(), slow.clone(), fast.clone());
    let init = y0.clone();
    PartitionedIvp::new(
        "linear2",
        move |_, y: &Vector| &s1 * y,
        move |_, y: &Vector| &f1 * y,
        y0,
        0.0,
    )
    .expect("nonempty state")
    .with_exact(move |t| (&total * t).exp() * &init)
    .with_jacobians(move |_, _| s2.clone(), move |_, _| f2.clone())
}

/// `f_s = −y − y³` componentwise and `f_f = [[−10, 4], [−4, −10]]y`.
/// Both parts are dissipative (one-sided Lipschitz constants −1 and −10).
pub fn dissipative2() -> PartitionedIvp {
    let fast = mat(&[&[-10.0, 4.0], &[-4.0, -10.0]]);
    let (f1, f2) = (fast.clone(), fast);
    PartitionedIvp::new(
        "dissipative2",
        |_, y: &Vector| y.map(|v| -v - v * v * v),
        move |_, y: &Vector| &f1 * y,
        Vector::from_vec(vec![1.0, -0.5]),
        0.0,
    )
    .expect("nonempty state")
    .with_jacobians(
        |_, y: &Vector| Mat::from_diagonal(&y.map(|v| -1.0 - 3.0 * v * v)),
        move |_, _| f2.clone(),
    )
    .with_metadata(ProblemMetadata {
        mu: Some(-11.0),
        nu_slow: Some(-1.0),
        nu_fast: Some(-10.0),
        rho: None,
    })
}

/// Linear decay `y' = −k_s y − k_f y` with `k_s = 1`, `k_f = 10`. Forward
/// Euler is monotone in any norm for `τ k ≤ 1`, so `ρ = min(1/k_s, M/k_f)`.
pub fn decay(m: usize) -> PartitionedIvp {
    let (ks, kf) = (1.0_f64, 10.0_f64);
    let rho = (1.0 / ks).min(m as f64 / kf);
    PartitionedIvp::new(
        "decay",
        move |_, y: &Vector| y * -ks,
        move |_, y: &Vector| y * -kf,
        Vector::from_vec(vec![1.0, -2.0, 0.5]),
        0.0,
    )
    .expect("nonempty state")
    .with_exact(move |t| Vector::from_vec(vec![1.0, -2.0, 0.5]) * (-(ks + kf) * t).exp())
    .with_jacobians(
        move |_, y: &Vector| Mat::identity(y.len(), y.len()) * -ks,
        move |_, y: &Vector| Mat::identity(y.len(), y.len()) * -kf,
    )
    .with_metadata(ProblemMetadata { mu: Some(-(ks + kf)), nu_slow: Some(-ks), nu_fast: Some(-kf), rho: Some(rho) })
}

/// First-order upwind advection on a periodic grid of 20 cells, split into
/// a slow and a fast transport speed. Forward Euler with the slow part is
/// max-norm monotone for `τ a_s ≤ 1`, with the fast part for `τ a_f ≤ 1`,
/// giving `ρ = min(1/a_s, M/a_f)`.
pub fn advection(m: usize) -> PartitionedIvp {
    let n = 20;
    let (a_s, a_f) = (1.0_f64, 8.0_f64);
    let rho = (1.0 / a_s).min(m as f64 / a_f);
    let upwind = move |speed: f64| {
        move |_: f64, y: &Vector| Vector::from_fn(n, |i, _| -speed * (y[i] - y[(i + n - 1) % n]))
    };
    let jac = move |speed: f64| {
        move |_: f64, _: &Vector| {
            let mut j = Mat::zeros(n, n);
            for i in 0..n {
                j[(i, i)] = -speed;
                j[(i, (i + n - 1) % n)] = speed;
            }
            j
        }
    };
    let y0 = Vector::from_fn(n, |i, _| if (5..10).contains(&i) { 1.0 } else { 0.1 * (i % 3) as f64 });
    PartitionedIvp::new("advection", upwind(a_s), upwind(a_f), y0, 0.0)
        .expect("nonempty state")
        .with_jacobians(jac(a_s), jac(a_f))
        .with_metadata(ProblemMetadata { mu: None, nu_slow: None, nu_fast: None, rho: Some(rho) })
}

/// Registered problem by name; `m` only matters for problems whose
/// monotonicity constant depends on the multirate ratio.
pub fn problem(name: &str, m: usize) -> Result<PartitionedIvp> {
    match name {
        "scalar-linear" => Ok(scalar_linear()),
        "linear2" => Ok(linear2()),
        "dissipative2" => Ok(dissipative2()),
        "decay" => Ok(decay(m.max(1))),
        "advection" => Ok(advection(m.max(1))),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}
