use std::collections::BTreeMap;
use std::time::Instant;

use elliptica_core::elliptic::Tau;
use elliptica_core::identities::{
    find_check, monodromy_constants, run_check, IdentityCheck, RankRule, Sample, SamplePlan,
};
use elliptica_core::painleve::{
    integrate, lax_acceleration, monodromy_defect, monodromy_residual, PVIState, ResidualMode, StepperConfig,
    DEFAULT_HBAR_SAMPLES,
};
use elliptica_core::report::run_suite_report;
use num_complex::Complex64 as C;

fn tau(re: f64, im: f64) -> Tau {
    Tau::new(C::new(re, im)).unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn run_ids(ids: &[&str], plan: &SamplePlan, tol: Option<f64>) -> (bool, f64, String) {
    let mut worst = 0.0f64;
    let mut worst_id = String::new();
    let mut pass = true;
    for id in ids {
        let check = find_check(id).unwrap();
        let r = run_check(&check, plan).unwrap();
        let ok = r.max_residual <= tol.unwrap_or(r.tolerance) && r.samples_run > 0;
        pass &= ok;
        if r.max_residual >= worst {
            worst = r.max_residual;
            worst_id = id.to_string();
        }
        if !ok {
            eprintln!("  {id}: max {:e} over {} samples", r.max_residual, r.samples_run);
        }
    }
    (pass, worst, worst_id)
}

fn ac1() -> Outcome {
    let start = Instant::now();
    let plan = SamplePlan {
        count: 200,
        n_list: vec![1],
        tau_list: vec![tau(0.0, 0.8), tau(0.5, 0.9)],
        ..SamplePlan::default()
    };
    let ids = [
        "scalar_fay",
        "scalar_fay_deg1",
        "scalar_fay_deg2",
        "scalar_fay_deg3",
        "scalar_sym",
        "scalar_parity",
        "scalar_qp",
        "scalar_residue",
    ];
    let (ok, worst, id) = run_ids(&ids, &plan, Some(1e-11));
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: ok && secs < 5.0,
        detail: format!("max residual {worst:.2e} ({id}) < 1e-11, {secs:.2} s < 5 s"),
    }
}

fn ac2() -> Outcome {
    let plan = SamplePlan {
        count: 100,
        n_list: vec![1],
        tau_list: vec![tau(0.0, 0.8), tau(0.5, 0.9)],
        ..SamplePlan::default()
    };
    let (q_ok, q, _) = run_ids(&["route_qseries"], &plan, Some(1e-12));
    let (d_ok, d, _) = run_ids(&["route_double_series"], &plan, Some(5e-2));
    Outcome {
        pass: q_ok && d_ok,
        detail: format!("q-series {q:.2e} < 1e-12, double series M=200 {d:.2e} < 5e-2"),
    }
}

fn rank_plan(count: usize) -> SamplePlan {
    SamplePlan {
        count,
        n_list: vec![1, 2, 3],
        tau_list: vec![tau(0.0, 0.8), tau(0.5, 0.9), tau(0.2, 0.5)],
        ..SamplePlan::default()
    }
}

fn ac3() -> Outcome {
    let start = Instant::now();
    let ids = [
        "sym_args",
        "prop31_components",
        "unitarity",
        "parity_R",
        "parity_rm",
        "qp_z_1",
        "qp_z_tau",
        "qp_h_1",
        "qp_h_tau",
        "qp_gamma_z",
        "qp_gamma_h",
        "qp_classical_r",
        "qp_slot_shift_1",
        "qp_slot_shift_tau",
        "znzn_symmetry",
        "kappa_sum",
    ];
    let (ok, worst, id) = run_ids(&ids, &rank_plan(50), Some(1e-10));
    let secs = start.elapsed().as_secs_f64();
    Outcome {
        pass: ok && secs < 30.0,
        detail: format!("max residual {worst:.2e} ({id}) < 1e-10, {secs:.2} s < 30 s"),
    }
}

fn ac4() -> Outcome {
    let plan = rank_plan(50);
    let (h_ok, h, _) = run_ids(&["local_h_expansion"], &plan, Some(0.2));
    let (z_ok, z, _) = run_ids(&["local_z_expansion"], &plan, Some(0.2));
    let (m_ok, m, _) = run_ids(&["r2_minus_2m"], &plan, Some(1e-10));
    Outcome {
        pass: h_ok && z_ok && m_ok,
        detail: format!(
            "ħ-order deviation {h:.3} < 0.2, z-order deviation {z:.3} < 0.2, r² − 2m {m:.2e} < 1e-10"
        ),
    }
}

fn ac5() -> Outcome {
    let ids = ["aybe", "fay_mat3_deg_r11", "fay_mat3_deg_r120"];
    let (ok, worst, id) = run_ids(&ids, &rank_plan(30), Some(1e-10));
    Outcome {
        pass: ok,
        detail: format!("max residual {worst:.2e} ({id}) < 1e-10"),
    }
}

fn ac6() -> Outcome {
    let ids = ["fay_mat2", "fay_mat2_deg_r12", "fay_mat2_deg_r13"];
    let (ok, worst, id) = run_ids(&ids, &rank_plan(50), Some(1e-10));
    let (c_ok, chain, _) = run_ids(&["fay_mat2_scalar_chain"], &rank_plan(50), Some(1e-10));
    Outcome {
        pass: ok && c_ok,
        detail: format!("max residual {worst:.2e} ({id}) < 1e-10, rank-one scalar chain {chain:.2e}"),
    }
}

fn ac7() -> Outcome {
    let plan = rank_plan(30);
    let (d_ok, d, _) = run_ids(&["deriv_h", "deriv_z"], &plan, Some(1e-10));
    let (h_ok, h, _) = run_ids(&["heat"], &plan, Some(1e-6));
    Outcome {
        pass: d_ok && h_ok,
        detail: format!("derivative identities {d:.2e} < 1e-10, heat {h:.2e} < 1e-6"),
    }
}

fn with_slots(check: &IdentityCheck, k: usize) -> IdentityCheck {
    check.map_residual(move |s, inner| {
        inner(&Sample {
            n_tilde: k,
            ..s.clone()
        })
    })
}

fn ac8() -> Outcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    for (k, n) in [(2, 2), (2, 3), (3, 2)] {
        let plan = SamplePlan {
            count: 20,
            n_list: vec![n],
            tau_list: vec![tau(0.0, 0.8), tau(0.5, 0.9)],
            ..SamplePlan::default()
        };
        for id in ["cm_qp_1", "cm_qp_tau"] {
            let r = run_check(&with_slots(&find_check(id).unwrap(), k), &plan).unwrap();
            worst = worst.max(r.max_residual);
            ok &= r.max_residual < 1e-10 && r.samples_run > 0;
        }
    }
    Outcome {
        pass: ok,
        detail: format!("(ñ,N) ∈ {{(2,2),(2,3),(3,2)}}: max residual {worst:.2e} < 1e-10"),
    }
}

const ZERO_CURVATURE_IDS: [&str; 5] = [
    "pvi_cross_commutators",
    "pvi_block_unitarity",
    "pvi_block_derivative",
    "pvi_cross_sum_scalar",
    "pvi_cross_sum_derivative",
];

fn zero_curvature_at(n: usize) -> (f64, String) {
    let plan = SamplePlan {
        count: 20,
        n_list: vec![n],
        tau_list: vec![tau(0.0, 0.8), tau(0.3, 1.1)],
        ..SamplePlan::default()
    };
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for id in ZERO_CURVATURE_IDS {
        let mut check = find_check(id).unwrap();
        check.ranks = RankRule::Any;
        let r = run_check(&check, &plan).unwrap();
        worst = worst.max(r.max_residual);
        parts.push(format!("{}={:.1e}", &id[4..], r.max_residual));
    }
    (worst, parts.join(" "))
}

fn ac9_zero_curvature_odd() -> Outcome {
    let (w1, _) = zero_curvature_at(1);
    let (w3, _) = zero_curvature_at(3);
    let worst = w1.max(w3);
    Outcome {
        pass: worst < 1e-10,
        detail: format!("N=1,3: cross_commutators block_unitarity block_derivative cross_sum_scalar (+u-independence) cross_sum_derivative max {worst:.2e} < 1e-10"),
    }
}

fn ac9_zero_curvature_even() -> Outcome {
    let (w2, parts) = zero_curvature_at(2);
    Outcome {
        pass: w2 < 1e-10,
        detail: format!("{parts}; max {w2:.2e} < 1e-10"),
    }
}

fn ac9_stationary() -> Outcome {
    let mut worst = 0.0f64;
    let states = [
        (C::new(0.31, 0.17), C::new(0.2, -0.1), tau(0.0, 0.9)),
        (C::new(0.13, 0.41), C::new(-0.3, 0.25), tau(0.4, 1.0)),
        (C::new(0.62, 0.23), C::new(0.05, 0.15), tau(-0.2, 0.7)),
    ];
    for n in 1..=3 {
        let k = monodromy_constants(n);
        for (u, v, t) in states {
            let state = PVIState { u, v, tau: t };
            for h in DEFAULT_HBAR_SAMPLES {
                let r = monodromy_residual(&state, &k, h, n, ResidualMode::Analytic).unwrap();
                worst = worst.max(r);
            }
        }
    }
    Outcome {
        pass: worst < 1e-8,
        detail: format!("N=1,2,3 × 3 states × 3 ħ: max residual {worst:.2e} < 1e-8"),
    }
}

fn ac9_trajectory() -> Outcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    let mut points = 0;
    for n in [1, 3] {
        let k = monodromy_constants(n);
        let init = PVIState {
            u: C::new(0.27, 0.31),
            v: C::new(0.1, 0.05),
            tau: tau(0.0, 0.9),
        };
        let tr = integrate(&init, &k, n, C::new(0.0, 1.2), &StepperConfig::default()).unwrap();
        ok &= tr.completed() && tr.points.len() >= 100;
        let stride = (tr.points.len() / 25).max(1);
        let mut idx: Vec<usize> = (0..tr.points.len()).step_by(stride).collect();
        idx.push(tr.points.len() - 1);
        for i in idx {
            let p = tr.points[i];
            let state = PVIState {
                u: p.u,
                v: p.v,
                tau: Tau::new(p.tau).unwrap(),
            };
            for h in DEFAULT_HBAR_SAMPLES {
                worst = worst.max(monodromy_residual(&state, &k, h, n, ResidualMode::Analytic).unwrap());
            }
            points += 1;
        }
    }
    Outcome {
        pass: ok && worst < 1e-7,
        detail: format!("N=1,3, τ 0.9i → 1.2i, {points} path points × 3 ħ: max residual {worst:.2e} < 1e-7"),
    }
}

fn ac9_off_shell() -> Outcome {
    let delta = 1e-3;
    let mut worst_ratio = 1.0f64;
    for n in [1, 3] {
        let k = monodromy_constants(n);
        let state = PVIState {
            u: C::new(0.31, 0.17),
            v: C::new(0.2, -0.1),
            tau: tau(0.0, 0.9),
        };
        let acc = lax_acceleration(&state, &k, n).unwrap() + delta;
        for h in DEFAULT_HBAR_SAMPLES {
            let r = monodromy_defect(&state, &k, h, n, acc, ResidualMode::Analytic)
                .unwrap()
                .max_abs();
            let ratio = r / (delta / 2.0);
            if (ratio.ln()).abs() > (worst_ratio.ln()).abs() {
                worst_ratio = ratio;
            }
        }
    }
    Outcome {
        pass: worst_ratio > 0.2 && worst_ratio < 5.0,
        detail: format!("δ = 1e-3: residual / (δ/2) worst {worst_ratio:.4} within [1/5, 5]"),
    }
}

fn ac9_even_collapse() -> Outcome {
    let plan = SamplePlan {
        count: 20,
        n_list: vec![2],
        ..SamplePlan::default()
    };
    let (ok, worst, _) = run_ids(&["pvi_even_collapse"], &plan, Some(1e-10));
    Outcome {
        pass: ok,
        detail: format!("N=2: spread of block_derivative right side over a {worst:.2e} < 1e-10"),
    }
}

fn ac10() -> Outcome {
    let plan = SamplePlan {
        count: 12,
        ..SamplePlan::default()
    };
    let none = BTreeMap::new();
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = serial
        .install(|| run_suite_report(None, &plan, &none))
        .unwrap()
        .to_json_without_wall_time()
        .unwrap();
    let b = run_suite_report(None, &plan, &none)
        .unwrap()
        .to_json_without_wall_time()
        .unwrap();
    Outcome {
        pass: a == b,
        detail: format!(
            "full suite, seed 42, 1 thread vs pool: {} bytes identical",
            a.len()
        ),
    }
}

fn main() {
    let start = Instant::now();
    let criteria: Vec<(&str, &str, fn() -> Outcome)> = vec![
        ("AC1", "scalar suite", ac1),
        ("AC2", "route agreement", ac2),
        ("AC3", "R-matrix suite", ac3),
        ("AC4", "expansion suite", ac4),
        ("AC5", "associative Yang-Baxter and degenerations", ac5),
        ("AC6", "Mat⊗2 Fay and degenerations", ac6),
        ("AC7", "derivative identities and heat equation", ac7),
        ("AC8", "Calogero-Moser Lax quasi-periodicity", ac8),
        (
            "AC9a",
            "Painlevé VI zero-curvature identities, odd N",
            ac9_zero_curvature_odd,
        ),
        (
            "AC9b",
            "Painlevé VI zero-curvature identities, N=2",
            ac9_zero_curvature_even,
        ),
        (
            "AC9c",
            "on-shell monodromy residual, stationary states",
            ac9_stationary,
        ),
        (
            "AC9d",
            "on-shell monodromy residual along trajectories",
            ac9_trajectory,
        ),
        ("AC9e", "off-shell perturbation residual", ac9_off_shell),
        ("AC9f", "even-N single-constant collapse", ac9_even_collapse),
        ("AC10", "determinism", ac10),
    ];
    let mut failed = 0;
    let mut ac9_secs = 0.0;
    for (tag, name, f) in criteria {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        if tag.starts_with("AC9") {
            ac9_secs += secs;
        }
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {tag} {name}: {} [{secs:.2} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    let ac9_ok = ac9_secs < 180.0;
    if !ac9_ok {
        failed += 1;
    }
    println!(
        "{} AC9 runtime: {ac9_secs:.1} s < 180 s",
        if ac9_ok { "PASS" } else { "FAIL" }
    );
    println!(
        "acceptance: {failed} failing, total {:.1} s",
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
