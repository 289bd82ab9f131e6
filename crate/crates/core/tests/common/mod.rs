//! Oracles shared by the integration tests.
#![allow(dead_code)]

use mrgark::{PartitionedIvp, RkTableau, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_state(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> Vector {
    Vector::from_fn(dim, |_, _| rng.random_range(-scale..scale))
}

/// Three-stage explicit order-3 method with abscissae (0, c2, c3).
pub fn kutta3(c2: f64, c3: f64) -> RkTableau {
    let b2 = (3.0 * c3 - 2.0) / (6.0 * c2 * (c3 - c2));
    let b3 = (2.0 - 3.0 * c2) / (6.0 * c3 * (c3 - c2));
    let a32 = c3 * (c3 - c2) / (c2 * (2.0 - 3.0 * c2));
    RkTableau::from_rows(
        &[&[0.0, 0.0, 0.0], &[c2, 0.0, 0.0], &[c3 - a32, a32, 0.0]],
        &[1.0 - b2 - b3, b2, b3],
    )
    .unwrap()
}

/// Signed order-3 coupling defect of an MIS outer method: the trapezoidal
/// sum of `(A c)_k` over the outer intervals, closed by `bᵀc`, minus `1/3`.
pub fn mis_order3_defect(outer: &RkTableau) -> f64 {
    let s = outer.stages();
    let c = outer.c();
    let ac = outer.a() * c;
    let node = |k: usize| if k < s { c[k] } else { 1.0 };
    let value = |k: usize| if k < s { ac[k] } else { outer.b().dot(c) };
    (0..s).map(|k| (node(k + 1) - node(k)) * (value(k) + value(k + 1))).sum::<f64>() - 1.0 / 3.0
}

/// `c3` in `(lo, hi)` making the three-stage outer method with `c2` satisfy
/// the MIS order-3 coupling condition, by bisection on a sign change.
pub fn kutta3_mis_root(c2: f64, mut lo: f64, mut hi: f64) -> f64 {
    let f = |c3: f64| mis_order3_defect(&kutta3(c2, c3));
    assert!(f(lo) * f(hi) < 0.0, "no sign change in [{lo}, {hi}]");
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(lo) * f(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One MIS macro-step computed by the stage recursion: between outer
/// nodes the fast variable is advanced by `steps` steps of `inner` applied
/// to `v' = f_f(v) + g`, with the constant slow forcing `g` assembled from
/// the outer coefficient differences.
pub fn mis_recursion_step(
    outer: &RkTableau,
    inner: &RkTableau,
    steps: usize,
    ivp: &PartitionedIvp,
    t: f64,
    y: &Vector,
    h: f64,
) -> Vector {
    let s = outer.stages();
    let c = outer.c();
    let row = |k: usize, j: usize| if k < s { outer.a()[(k, j)] } else { outer.b()[j] };
    let node = |k: usize| if k < s { c[k] } else { 1.0 };
    let mut stages: Vec<Vector> = vec![y.clone()];
    let mut slow_f: Vec<Vector> = vec![(ivp.f_slow)(t, y)];
    for k in 0..s {
        let width = node(k + 1) - node(k);
        let mut g = Vector::zeros(y.len());
        for j in 0..=k.min(s - 1) {
            g += &slow_f[j] * ((row(k + 1, j) - row(k, j)) / width);
        }
        let tau = width * h / steps as f64;
        let mut v = stages[k].clone();
        let mut tk = t + node(k) * h;
        for _ in 0..steps {
            let si = inner.stages();
            let mut kv: Vec<Vector> = Vec::with_capacity(si);
            for i in 0..si {
                let mut arg = v.clone();
                for (l, kl) in kv.iter().enumerate() {
                    arg += kl * (tau * inner.a()[(i, l)]);
                }
                kv.push((ivp.f_fast)(tk + inner.c()[i] * tau, &arg) + &g);
            }
            for (i, ki) in kv.iter().enumerate() {
                v += ki * (tau * inner.b()[i]);
            }
            tk += tau;
        }
        if k + 1 < s {
            slow_f.push((ivp.f_slow)(t + node(k + 1) * h, &v));
        }
        stages.push(v);
    }
    stages.pop().unwrap()
}
