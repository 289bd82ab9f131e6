//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness and exits nonzero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use mrgark::couplings::{mis_abscissa_residual, mis_to_gark, stability_decoupled_fs};
use mrgark::integrator::{flat_gark_step, mgark_step, Stats};
use mrgark::io::flat_as_scheme;
use mrgark::monotonicity::{am_radius, build_atilde, rk_am_radius, scheme_incidence_conditions, R_MAX, RADIUS_TOL};
use mrgark::order::{gark_order_residuals, mis_order3_residual, observed_order, order_report, CONDITION_TOL};
use mrgark::problems::{advection, dissipative2, linear2};
use mrgark::schemes::{self, make, make_id, SchemeId, CATALOG};
use mrgark::stability::p_blocks;
use mrgark::tableau::{Mat, MrGarkScheme, RkTableau, Vector};
use mrgark::{integrate, Execution, Scheme, SolverConfig};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn inf_norm(m: &Mat) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

fn order_zeroing() -> Outcome {
    let start = Instant::now();
    let entries = [("mrk-radau1a-3", 3), ("mrk-radau2a-3", 3), ("add-stable-2", 2), ("add-stable-3-radau", 3)];
    let mut failures = Vec::new();
    for (name, order) in entries {
        for m in 1..=4 {
            let s = make(name, m).unwrap();
            let worst = order_report(s.multirate().unwrap(), order).max_residual(order);
            if worst > 1e-10 {
                failures.push(format!("{name} M={m} max residual {worst:.3e}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let info = {
        let worst = (1..=4)
            .map(|m| {
                let s = make_id(&SchemeId::new("mrk-radau2a-3:radau2a-base", m).unwrap()).unwrap();
                order_report(s.multirate().unwrap(), 3).max_residual(3)
            })
            .fold(0.0, f64::max);
        format!("radau2a-base variant max residual {worst:.1e}")
    };
    let fast_enough = elapsed < Duration::from_secs(1);
    outcome(
        failures.is_empty() && fast_enough,
        format!("{} failing; {info}; {:.3} s; {}", failures.len(), elapsed.as_secs_f64(), failures.join(", ")),
    )
}

fn observed_convergence() -> Outcome {
    let start = Instant::now();
    let ivp = linear2();
    let steps = [0.1, 0.05, 0.025, 0.0125];
    let cfg = SolverConfig::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, target, tol) in [("mrk-radau1a-3", 3.0, 0.25), ("add-stable-3-radau", 3.0, 0.25), ("add-stable-2", 2.0, 0.2)] {
        let s = make(name, 2).unwrap();
        match observed_order(s.stepper(), &ivp, &steps, 1.0, &cfg, Execution::Parallel) {
            Ok(study) => {
                pass &= (study.slope - target).abs() <= tol;
                parts.push(format!("{name} slope {:.3}", study.slope));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("{name} error {e}"));
            }
        }
    }
    let elapsed = start.elapsed();
    pass &= elapsed < Duration::from_secs(5);
    outcome(pass, format!("{}; {:.2} s", parts.join(", "), elapsed.as_secs_f64()))
}

fn random_tableau(rng: &mut impl Rng, stages: usize, positive: bool) -> RkTableau {
    let a = Mat::from_fn(stages, stages, |_, _| rng.random_range(-1.0..1.0));
    let b = Vector::from_fn(stages, |_, _| if positive { rng.random_range(0.05..1.0) } else { rng.random_range(-1.0..1.0) });
    RkTableau::new(a, b).unwrap()
}

fn decoupling_theorem() -> Outcome {
    let mut rng = common::rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (sf, ss) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let m = rng.random_range(1..=5);
        let fast = random_tableau(&mut rng, sf, true);
        let slow = random_tableau(&mut rng, ss, false);
        let couplings_sf: Vec<Mat> = (0..m).map(|_| Mat::from_fn(ss, sf, |_, _| rng.random_range(-2.0..2.0))).collect();
        let couplings_fs = stability_decoupled_fs(&fast, &slow, &couplings_sf).unwrap();
        let sch = MrGarkScheme::new(fast, slow, m, couplings_fs, couplings_sf).unwrap();
        worst = worst.max(inf_norm(&p_blocks(&sch.flatten()).p_fs));
    }
    let radau = schemes::mrk_radau1a(2).unwrap();
    let (cf, cs) = radau.internal_consistency_residuals();
    let consistency = cf.max(cs);
    let p_fs = inf_norm(&p_blocks(&radau.flatten()).p_fs);
    outcome(
        worst <= 1e-13 && consistency <= 4.0 * f64::EPSILON && p_fs > 0.0,
        format!("max random ‖P_fs‖∞ {worst:.2e}; mrk-radau1a-3 M=2 consistency {consistency:.1e}, ‖P_fs‖∞ {p_fs:.4}"),
    )
}

fn contractivity() -> Outcome {
    let cfg = SolverConfig::default();
    let base = dissipative2();
    let mut rng = common::rng(4);
    let mut worst_growth: f64 = 0.0;
    let mut failures = Vec::new();
    for m in [2, 3] {
        let s = make("add-stable-2", m).unwrap();
        for h in [1.0, 0.1, 0.01] {
            let t_end = 20.0 * h;
            for pair in 0..3 {
                let a = base.clone().with_initial_state(common::random_state(&mut rng, 2, 2.0));
                let b = base.clone().with_initial_state(common::random_state(&mut rng, 2, 2.0));
                let (ta, tb) = match (integrate(s.stepper(), &a, t_end, h, &cfg), integrate(s.stepper(), &b, t_end, h, &cfg)) {
                    (Ok(x), Ok(y)) => (x, y),
                    _ => {
                        failures.push(format!("M={m} H={h} pair {pair}: integration failed"));
                        continue;
                    }
                };
                let gaps: Vec<f64> = ta.states.iter().zip(&tb.states).map(|(x, y)| (x - y).norm()).collect();
                for w in gaps.windows(2) {
                    worst_growth = worst_growth.max(w[1] / w[0] - 1.0);
                    if w[1] > w[0] * (1.0 + 1e-12) {
                        failures.push(format!("M={m} H={h} pair {pair}: {:.3e} -> {:.3e}", w[0], w[1]));
                    }
                }
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!("largest relative gap change {worst_growth:+.2e}; {} violations {}", failures.len(), failures.join(", ")),
    )
}

fn radius(name: &str, m: usize) -> f64 {
    am_radius(&make(name, m).unwrap().flat(), R_MAX, RADIUS_TOL).radius
}

fn monotonicity_radii() -> Outcome {
    let decoupled = make("ssp2-mr-decoupled", 2).unwrap().flat();
    let atilde_negative = build_atilde(&decoupled).iter().any(|x| *x < 0.0);
    let decoupled_r = radius("ssp2-mr-decoupled", 2);
    let firstfast_r = radius("ssp2-mr-firstfast", 2);
    let lastslow: Vec<f64> = (2..=4).map(|m| radius("ssp2-mr-lastslow", m)).collect();
    let base_r = rk_am_radius(&schemes::ssp2(), R_MAX, RADIUS_TOL).radius;
    let pass = atilde_negative
        && decoupled_r == 0.0
        && firstfast_r == 0.0
        && lastslow.iter().all(|r| (r - 1.0).abs() <= 1e-6)
        && (base_r - 1.0).abs() <= 1e-6;
    outcome(
        pass,
        format!(
            "decoupled Ã has negative entries: {atilde_negative}, radius {decoupled_r}; firstfast M=2 radius {firstfast_r}; \
             lastslow M=2,3,4 radii {:.6}, {:.6}, {:.6} (claimed 1); SSP2 base radius {base_r:.6}",
            lastslow[0], lastslow[1], lastslow[2]
        ),
    )
}

fn incidence_verdicts() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for m in 2..=4 {
        let last = scheme_incidence_conditions(&schemes::ssp2_mr_lastslow(m).unwrap()).unwrap();
        let all = last.values().all(|v| *v);
        pass &= all;
        let first = scheme_incidence_conditions(&schemes::ssp2_mr_firstfast(m).unwrap()).unwrap();
        let failed: Vec<&str> = first.iter().filter(|(_, v)| !**v).map(|(k, _)| k.as_str()).collect();
        pass &= !failed.is_empty();
        parts.push(format!("M={m}: lastslow all pass {all}, firstfast fails [{}]", failed.join(" ")));
    }
    outcome(pass, parts.join("; "))
}

fn catalog_ids() -> Vec<SchemeId> {
    let mut ids = Vec::new();
    for entry in CATALOG {
        let mut specs = vec![entry.name.to_string()];
        specs.extend(entry.variants.iter().map(|v| format!("{}:{v}", entry.name)));
        for spec in specs {
            for m in 1..=4 {
                let id = SchemeId::new(&spec, m).unwrap();
                if make_id(&id).is_ok() {
                    ids.push(id);
                }
            }
        }
    }
    ids
}

fn flattened_equivalence() -> Outcome {
    let cfg = SolverConfig::default();
    let ivp = dissipative2();
    let mut rng = common::rng(7);
    let mut worst: f64 = 0.0;
    let mut where_worst = String::new();
    let mut errors = Vec::new();
    let ids = catalog_ids();
    for id in &ids {
        let scheme = make_id(id).unwrap();
        let flat = scheme.flat();
        let structured = match &scheme {
            Scheme::Multirate(s) => s.clone(),
            Scheme::Flat(f) => flat_as_scheme(f).unwrap(),
        };
        for _ in 0..20 {
            let y = common::random_state(&mut rng, 2, 1.0);
            let h = rng.random_range(0.01..0.1);
            let t = rng.random_range(0.0..1.0);
            match (mgark_step(&structured, &ivp, &y, t, h, &cfg), flat_gark_step(&flat, &ivp, &y, t, h, &cfg)) {
                (Ok((a, _)), Ok((b, _))) => {
                    let dev = (a - b).amax() / (1.0 + y.amax());
                    if dev > worst {
                        worst = dev;
                        where_worst = id.to_string();
                    }
                }
                (a, b) => errors.push(format!("{id}: {:?} / {:?}", a.err(), b.err())),
            }
        }
    }
    outcome(
        errors.is_empty() && worst <= 1e-11,
        format!("{} schemes × 20 states, max scaled deviation {worst:.2e} ({where_worst}) {}", ids.len(), errors.join(", ")),
    )
}

fn mis_construction() -> Outcome {
    let ivp = linear2();
    let cfg = SolverConfig::default();
    let order2_bases = [schemes::midpoint(), schemes::ralston2(), schemes::heun3()];
    let mut pass = true;
    let mut parts = Vec::new();

    let mut worst_c: f64 = 0.0;
    let mut worst_o2: f64 = 0.0;
    for outer in &order2_bases {
        for inner in &order2_bases {
            for m in 1..=3 {
                let pair = schemes::mis_pair(outer.clone(), inner, m).unwrap();
                let flat = mis_to_gark(&pair).unwrap();
                worst_c = worst_c.max(mis_abscissa_residual(&pair, &flat));
                worst_o2 = worst_o2.max(gark_order_residuals(&flat, 2).max_residual(2));
            }
        }
    }
    pass &= worst_c <= 1e-13 && worst_o2 <= 1e-10;
    parts.push(format!("c-identities {worst_c:.1e}, order-2 {worst_o2:.1e}"));

    // Two-stage outer methods: the flattened tableau reproduces the stage
    // recursion step for step.
    let mut rng = common::rng(8);
    let mut worst_rec: f64 = 0.0;
    for outer in [schemes::midpoint(), schemes::ralston2()] {
        for m in 1..=3 {
            let inner = schemes::heun3();
            let flat = mis_to_gark(&schemes::mis_pair(outer.clone(), &inner, m).unwrap()).unwrap();
            for _ in 0..5 {
                let y = common::random_state(&mut rng, 2, 2.0);
                let (a, _) = flat_gark_step(&flat, &ivp, &y, 0.0, 0.1, &cfg).unwrap();
                let b = common::mis_recursion_step(&outer, &inner, m, &ivp, 0.0, &y, 0.1);
                worst_rec = worst_rec.max((a - b).amax() / (1.0 + y.amax()));
            }
        }
    }
    pass &= worst_rec <= 1e-13;
    parts.push(format!("s^o=2 recursion deviation {worst_rec:.1e}"));

    // Order-3 gating: classification agrees with the coupling residual, and
    // the recursion's observed order agrees with both.
    let root = common::kutta3_mis_root(1.0 / 3.0, 0.7, 0.8);
    let steps = [0.1, 0.05, 0.025, 0.0125];
    let exact = (ivp.exact.clone().unwrap())(1.0);
    for (label, outer) in [("heun3", schemes::heun3()), ("kutta3 c3=root", common::kutta3(1.0 / 3.0, root)), ("kutta3 c3=0.6", common::kutta3(1.0 / 3.0, 0.6))] {
        let pair = schemes::mis_pair(outer.clone(), &schemes::heun3(), 1).unwrap();
        let flat = mis_to_gark(&pair).unwrap();
        let residual = mis_order3_residual(&pair);
        let classified = gark_order_residuals(&flat, 3).classified_order;
        let errors: Vec<f64> = steps
            .iter()
            .map(|&h| {
                let n = (1.0_f64 / h).round() as usize;
                let mut y = ivp.y0.clone();
                for k in 0..n {
                    y = common::mis_recursion_step(&outer, &schemes::heun3(), 1, &ivp, k as f64 * h, &y, h);
                }
                (y - &exact).amax()
            })
            .collect();
        let slope = mrgark::order::fit_slope(&steps, &errors);
        let gated = residual <= CONDITION_TOL;
        let observed3 = slope > 2.75;
        pass &= gated == (classified == 3) && gated == observed3;
        parts.push(format!("{label}: residual {residual:.2e}, classified {classified}, recursion slope {slope:.2}"));
    }
    outcome(pass, parts.join("; "))
}

fn monotone_solution() -> Outcome {
    let m = 2;
    let scheme = make("ssp2-mr-lastslow", m).unwrap();
    let ivp = advection(m);
    let rho = ivp.metadata.rho.unwrap();
    let radius = am_radius(&scheme.flat(), R_MAX, RADIUS_TOL).radius;
    let cfg = SolverConfig::default();
    let run = |h: f64| -> (bool, bool) {
        let mut y = ivp.y0.clone();
        let mut monotone = true;
        let mut grew = false;
        let mut stats = Stats::default();
        for k in 0..100 {
            let out = scheme.stepper().step(&ivp, k as f64 * h, &y, h, &cfg, &mut stats).unwrap();
            let before = y.amax();
            let slack = 1e-14 * (1.0 + before);
            let stage_ok = out.stages.iter().all(|s| s.amax() <= before + slack);
            let step_ok = out.y.amax() <= before + slack;
            monotone &= stage_ok && step_ok;
            grew |= !(stage_ok && step_ok);
            y = out.y;
        }
        (monotone, grew)
    };
    let (monotone, _) = run(0.999 * radius * rho);
    let (_, grew) = run(1.5 * radius * rho);
    outcome(
        monotone,
        format!(
            "computed radius {radius:.6}, rho {rho}; 0.999·R·rho monotone: {monotone}; \
             1.5·R·rho norm increase observed (advisory): {grew}"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("order-condition zeroing", order_zeroing),
        ("observed convergence", observed_convergence),
        ("stability decoupling", decoupling_theorem),
        ("algebraic-stability contractivity", contractivity),
        ("monotonicity radii", monotonicity_radii),
        ("incidence verdicts", incidence_verdicts),
        ("flattened-oracle equivalence", flattened_equivalence),
        ("MIS construction", mis_construction),
        ("monotone solutions", monotone_solution),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let result = run();
        if !result.pass {
            failed += 1;
        }
        println!("criterion {} [{}] {}: {}", k + 1, if result.pass { "PASS" } else { "FAIL" }, name, result.detail);
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
