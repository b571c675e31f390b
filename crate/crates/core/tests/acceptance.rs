//! Acceptance criteria 1-10. Runs without the libtest harness so that one
//! PASS/FAIL line per criterion is always printed; exits nonzero if any fail.

use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tlrcool::config::{load, RunConfig};
use tlrcool::cooling::{cooling_limits, evaluate, n_ca, CoolingReport, EvalOptions};
use tlrcool::lyapunov::{compare_with_quadrature, FullCothComparison};
use tlrcool::model::{thermal_occupations_si, Detuning, DriveParams, SystemParams};
use tlrcool::optimize::{optimize, Bound, Objective, OptimizeSpec};
use tlrcool::stability::{assess, Verdict};
use tlrcool::steady_state::WorkingPoint;
use tlrcool::sweep::Param;
use tlrcool::variance::QuadratureOptions;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    summary: String,
    info: Vec<String>,
}

/// The low-temperature cooling parameters, entered as SI quantities.
fn caption_config(temperature: &str, damping: &str) -> RunConfig {
    let damping = if damping.is_empty() {
        "gamma_b = \"0.25e-4*omega_b\""
    } else {
        damping
    };
    let text = format!(
        r#"
[system]
units = "si"
mass = "1.5e-13kg"
omega_b = "4MHz"
g0 = "3e-5*g_unit"
omega_a = "2e4*omega_b"
kappa = "0.1*omega_b"
temperature = "{temperature}"
{damping}
[drive]
epsilon = "2.5e3*omega_b"
delta = "1*omega_b"
"#
    );
    load(&text, &[]).expect("caption configuration resolves")
}

fn delta_optimum(cfg: &RunConfig, objective: Objective) -> (f64, f64) {
    let mut spec = OptimizeSpec::new(
        vec![Bound {
            param: Param::Delta,
            min: 0.25,
            max: 3.0,
        }],
        cfg.system,
        cfg.drive,
    );
    spec.options = cfg.eval_options();
    spec.objective = objective;
    let o = optimize(&spec).expect("feasible optimum");
    (o.params[0].1, o.value)
}

fn within(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

fn pct(value: f64, target: f64) -> f64 {
    100.0 * (value - target) / target
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn report(p: &SystemParams, eps: f64, delta: f64, opts: &EvalOptions) -> CoolingReport {
    evaluate(p, &DriveParams::new(eps, Detuning::Effective(delta)), opts).expect("evaluation succeeds")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut info = Vec::new();
    for (t, target) in [("10mK", 0.16), ("30mK", 0.5), ("100mK", 1.6)] {
        let cfg = caption_config(t, "");
        let (d, n) = delta_optimum(&cfg, Objective::Approx);
        let ok = within(n, target, 0.15);
        pass &= ok;
        parts.push(format!(
            "T={t}: min n={n:.4} at Δ={d:.4} (target {target}, {:+.1}%)",
            pct(n, target)
        ));
        let (de, ne) = delta_optimum(&cfg, Objective::Exact);
        info.push(format!(
            "T={t}: quadrature objective min n={ne:.4} at Δ={de:.4} ({:+.1}% from {target})",
            pct(ne, target)
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    parts.push(format!("{secs:.2} s"));
    Outcome {
        pass,
        summary: parts.join("; "),
        info,
    }
}

fn criterion_2() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let mut info = Vec::new();
    for (q, target) in [(4e4, 0.16), (1e5, 0.06), (4e5, 0.02), (1e6, 0.01)] {
        let cfg = caption_config("10mK", &format!("q_b = {q}"));
        let (d, n) = delta_optimum(&cfg, Objective::Approx);
        let ok = within(n, target, 0.20);
        pass &= ok;
        parts.push(format!("Q_b={q:e}: n={n:.4} at Δ={d:.3} ({:+.1}%)", pct(n, target)));
        let (_, ne) = delta_optimum(&cfg, Objective::Exact);
        info.push(format!(
            "Q_b={q:e}: quadrature objective min n={ne:.4} ({:+.1}% from {target})",
            pct(ne, target)
        ));
    }
    Outcome {
        pass,
        summary: parts.join("; "),
        info,
    }
}

fn criterion_3() -> Outcome {
    let closed = n_ca(1.0, 0.1, 1.0, 0.0).unwrap();
    let rel_closed = ((closed - 0.0025) / 0.0025).abs();

    // Full pipeline at 10 mK, where N is negligible.
    let cfg = caption_config("10mK", "");
    let r = evaluate(&cfg.system, &cfg.drive, &cfg.eval_options()).unwrap();
    let from_report = r.n_ca.unwrap();
    let limit = cooling_limits(&cfg.system).resolved_sideband;
    let rel_report = ((from_report - 0.0025) / 0.0025).abs();
    let rel_limit = ((limit - 0.0025) / 0.0025).abs();
    Outcome {
        pass: rel_closed <= 1e-12 && rel_report <= 1e-12 && rel_limit <= 1e-12,
        summary: format!(
            "n_ca={closed:.16} (rel {rel_closed:.1e}); at 10 mK: report {from_report:.6} (rel {rel_report:.1e}), N+κ²/4ω_b² = {limit:.6} (rel {rel_limit:.1e})"
        ),
        info: vec![],
    }
}

fn criterion_4() -> Outcome {
    let opts = EvalOptions::default();
    let mut pass = true;
    let mut parts = Vec::new();
    let mut info = Vec::new();
    for kappa in [0.2, 1.0] {
        let p = SystemParams::figure2(kappa);
        let mut worst = (0.0f64, 0.0, 0.0);
        let mut checked = 0;
        for d in linspace(0.5, 2.0, 31) {
            let r = report(&p, 2.5e3, d, &opts);
            if !r.flags.weak_coupling || r.stability != Verdict::Stable {
                continue;
            }
            checked += 1;
            let ax = r.var_x_approx.unwrap();
            let ap = ax * (p.mass * p.omega_b).powi(2);
            let dx = (r.var_x.unwrap() - ax) / ax;
            let dp = (r.var_p.unwrap() - ap) / ap;
            for dev in [dx, dp] {
                if dev.abs() > worst.0.abs() {
                    worst = (dev, d, if dev == dx { 0.0 } else { 1.0 });
                }
            }
        }
        let ok = worst.0.abs() <= 0.05;
        pass &= ok;
        parts.push(format!(
            "κ={kappa}: max deviation {:+.2}% ({} at Δ={:.2}) over {checked} weak-coupling points",
            100.0 * worst.0,
            if worst.2 == 0.0 { "⟨δx²⟩" } else { "⟨δp²⟩" },
            worst.1
        ));
        if !ok {
            info.push(format!(
                "κ={kappa}: the weak-coupling closed form underestimates the quadrature variance by more than 5% here"
            ));
        }
    }
    Outcome {
        pass,
        summary: parts.join("; "),
        info,
    }
}

fn criterion_5() -> Outcome {
    let cfg = caption_config("10mK", "");
    let opts = cfg.eval_options();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut checked = 0;
    for d in linspace(0.5, 2.0, 31) {
        let r = report(&cfg.system, cfg.drive.epsilon.re, d, &opts);
        if r.flags.weak_coupling && r.stability == Verdict::Stable {
            let ratio = r.equipartition_ratio.unwrap();
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            checked += 1;
        }
    }
    let mut weak = cfg.system;
    weak.kappa = 0.05;
    let mut drift: f64 = 0.0;
    let mut at = 0.0;
    for d in linspace(0.5, 2.0, 31) {
        let r = report(&weak, cfg.drive.epsilon.re, d, &opts);
        if let Some(ratio) = r.equipartition_ratio {
            if (ratio - 1.0).abs() > drift.abs() {
                drift = ratio - 1.0;
                at = d;
            }
        }
    }
    Outcome {
        pass: checked > 0 && lo >= 0.95 && hi <= 1.05,
        summary: format!("κ=0.1: ratio in [{lo:.4}, {hi:.4}] over {checked} weak-coupling points"),
        info: vec![format!(
            "κ=0.05: largest equipartition drift {:+.2}% at Δ={at:.2}",
            100.0 * drift
        )],
    }
}

fn criterion_6() -> Outcome {
    let quad = QuadratureOptions::default();
    let mut parts = Vec::new();
    let mut pass = true;
    for kappa in [1.0, 0.2] {
        let p = SystemParams::figure2(kappa);
        let wp = WorkingPoint::from_effective_detuning(&p, &DriveParams::new(2.5e3, Detuning::Effective(1.0)));
        let cmp = compare_with_quadrature(
            &p,
            &wp,
            1e-3,
            &QuadratureOptions {
                bath_cutoff: Some(p.omega_a),
                ..quad
            },
        )
        .unwrap();
        let coth = match &cmp.full_coth {
            FullCothComparison::Compared(c) => {
                pass &= c.deviation_x < 0.01 && c.deviation_p < 0.01;
                c.deviation_x.max(c.deviation_p)
            }
            FullCothComparison::NotApplicable { .. } => {
                pass = false;
                f64::NAN
            }
        };
        pass &= cmp.white.pass;
        parts.push(format!(
            "κ={kappa}: white {:.1e}, quantum bath {coth:.1e}",
            cmp.white.deviation_x.max(cmp.white.deviation_p)
        ));
    }

    let mut rng = StdRng::seed_from_u64(0x5eed_0006);
    let mut draws = 0;
    let mut worst: f64 = 0.0;
    while draws < 100 {
        let p = SystemParams {
            mass: 1.0,
            omega_b: 1.0,
            gamma_b: 10f64.powf(rng.random_range(-5.0..-2.0)),
            omega_a: 2e4,
            kappa: 10f64.powf(rng.random_range(-1.3..0.5)),
            g0: 3e-5,
            temperature: rng.random_range(0.0..1e4),
            cavity_temperature: None,
        };
        let drive = DriveParams::new(
            rng.random_range(0.0..4e3),
            Detuning::Effective(rng.random_range(0.2..3.0)),
        );
        let wp = WorkingPoint::from_effective_detuning(&p, &drive);
        match assess(&p, &wp, 1e-12) {
            Ok(s) if s.verdict == Verdict::Stable => {}
            _ => continue,
        }
        draws += 1;
        let cmp = compare_with_quadrature(&p, &wp, 1e-3, &quad).unwrap();
        worst = worst.max(cmp.white.deviation_x).max(cmp.white.deviation_p);
    }
    pass &= worst < 1e-3;
    parts.push(format!("100 random stable draws: worst white deviation {worst:.1e}"));
    Outcome {
        pass,
        summary: parts.join("; "),
        info: vec![],
    }
}

fn criterion_7() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for kappa in [1.0, 0.2] {
        let p = SystemParams::figure2(kappa);
        let verdict = |d: f64| {
            let wp = WorkingPoint::from_effective_detuning(&p, &DriveParams::new(2.5e3, Detuning::Effective(d)));
            assess(&p, &wp, 1e-12).map(|s| s.verdict)
        };
        let (neg, posv) = (verdict(-1.0), verdict(1.0));
        pass &= neg == Ok(Verdict::Unstable) && posv == Ok(Verdict::Stable);
        parts.push(format!("κ={kappa}: Δ=−ω_b {:?}, Δ=+ω_b {:?}", neg, posv));
    }

    let mut rng = StdRng::seed_from_u64(0x5eed_0007);
    let mut agree = 0;
    let mut unstable = 0;
    for _ in 0..1000 {
        let p = SystemParams {
            mass: 1.0,
            omega_b: 1.0,
            gamma_b: 10f64.powf(rng.random_range(-6.0..-1.0)),
            omega_a: 2e4,
            kappa: 10f64.powf(rng.random_range(-2.0..1.0)),
            g0: 10f64.powf(rng.random_range(-6.0..-3.0)),
            temperature: 0.0,
            cavity_temperature: None,
        };
        let drive = DriveParams::new(
            10f64.powf(rng.random_range(0.0..4.5)),
            Detuning::Effective(rng.random_range(-3.0..3.0)),
        );
        let wp = WorkingPoint::from_effective_detuning(&p, &drive);
        if let Ok(s) = assess(&p, &wp, 1e-12) {
            if s.eigen_verdict == s.routh_verdict {
                agree += 1;
            }
            if s.verdict == Verdict::Unstable {
                unstable += 1;
            }
        }
    }
    pass &= agree == 1000;
    parts.push(format!(
        "methods agree on {agree}/1000 random draws ({unstable} unstable)"
    ));
    Outcome {
        pass,
        summary: parts.join("; "),
        info: vec![],
    }
}

fn criterion_8() -> Outcome {
    let mut info = Vec::new();

    // Classical limit: k_BT ≫ ħω_a, cavity noise dominates.
    let kappa: f64 = 0.1;
    let p = SystemParams {
        mass: 1.0,
        omega_b: 1.0,
        gamma_b: 1e-9,
        omega_a: 2e4,
        kappa,
        g0: 3e-5,
        temperature: 1e7,
        cavity_temperature: None,
    };
    let r = report(&p, 2.5e3, (1.0 + kappa * kappa).sqrt(), &EvalOptions::default());
    let ratio = r.t_eff.unwrap() / p.temperature;
    let stated = p.omega_a / p.omega_b;
    let classical_ok = within(ratio, stated, 0.10);
    info.push(format!(
        "classical point T=1e7: T_eff/T = {ratio:.4e}; ω_b/ω_a = {:.4e} ({:+.1}%)",
        p.omega_b / p.omega_a,
        pct(ratio, p.omega_b / p.omega_a)
    ));

    // Resolved-sideband optimum located by the optimizer.
    let mut opt_ok = true;
    let mut parts = vec![format!(
        "classical T_eff/T={ratio:.3e} vs ω_a/ω_b={stated:.0e} ({})",
        if classical_ok { "ok" } else { "off" }
    )];
    for kappa in [0.05, 0.1, 0.5] {
        let p = SystemParams {
            gamma_b: 1e-7,
            temperature: 0.0,
            ..SystemParams::figure2(kappa)
        };
        let mut spec = OptimizeSpec::new(
            vec![Bound {
                param: Param::Delta,
                min: 0.25,
                max: 3.0,
            }],
            p,
            DriveParams::new(2.5e3, Detuning::Effective(1.0)),
        );
        spec.objective = Objective::Exact;
        let o = optimize(&spec).unwrap();
        let d = o.params[0].1;
        let target = (1.0 + kappa * kappa).sqrt();
        let ok = within(d, target, 0.01);
        opt_ok &= ok;
        parts.push(format!("κ={kappa}: Δ*={d:.5} vs {target:.5} ({:+.2}%)", pct(d, target)));
    }
    Outcome {
        pass: classical_ok && opt_ok,
        summary: parts.join("; "),
        info,
    }
}

fn criterion_9() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    let cfg = caption_config("10mK", "");
    let points = [
        (SystemParams::figure2(1.0), 1.0),
        (SystemParams::figure2(0.2), 1.0),
        (cfg.system, 1.0),
        (cfg.system, 0.6),
    ];
    let mut worst_ratio: f64 = 0.0;
    let mut worst_change: f64 = 0.0;
    for (p, d) in points {
        let base = EvalOptions::default();
        let mut finer = base;
        finer.quadrature.rel_tol = base.quadrature.rel_tol / 2.0;
        let a = report(&p, 2.5e3, d, &base);
        let b = report(&p, 2.5e3, d, &finer);
        for (va, vb, err) in [
            (a.var_x.unwrap(), b.var_x.unwrap(), a.quadrature_error_x.unwrap()),
            (a.var_p.unwrap(), b.var_p.unwrap(), a.quadrature_error_p.unwrap()),
        ] {
            let change = (va - vb).abs();
            worst_change = worst_change.max(change / va);
            let ratio = if err > 0.0 {
                change / err
            } else if change == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst_ratio = worst_ratio.max(ratio);
            pass &= change < err || change == 0.0;
        }
    }
    parts.push(format!(
        "halving rel_tol: largest relative change {worst_change:.1e}, largest change/error-estimate {worst_ratio:.3}"
    ));

    // G = 0: a lone damped oscillator at Q_b = 4e4.
    let mut worst_osc: f64 = 0.0;
    for t in [0.0, cfg.system.temperature] {
        let p = SystemParams {
            temperature: t,
            ..cfg.system
        };
        let r = report(&p, 0.0, 1.0, &cfg.eval_options());
        let expected = p.occupations().n_mech + 0.5;
        for v in [r.var_x.unwrap(), r.var_p.unwrap()] {
            worst_osc = worst_osc.max(((v - expected) / expected).abs());
        }
    }
    pass &= worst_osc < 0.01;
    parts.push(format!(
        "G=0 oscillator (zero-point and 10 mK): worst deviation {:.2e}",
        worst_osc
    ));
    Outcome {
        pass,
        summary: parts.join("; "),
        info: vec![],
    }
}

fn criterion_10() -> Outcome {
    let occ = thermal_occupations_si(0.01, 8e10, 4e6);
    let nb_ok = within(occ.n_mech, 330.0, 0.02);
    let n_ok = occ.n_cav < 1e-20 && occ.n_cav >= 0.0;
    Outcome {
        pass: nb_ok && n_ok,
        summary: format!(
            "n_b(10 mK, 4 MHz)={:.2} ({:+.2}% from 330); N(10 mK, 8e10 rad/s)={:.3e}",
            occ.n_mech,
            pct(occ.n_mech, 330.0),
            occ.n_cav
        ),
        info: vec![],
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("low-temperature minima over detuning", criterion_1),
        ("minima versus mechanical quality factor", criterion_2),
        ("closed-form cavity-limited phonon number", criterion_3),
        ("quadrature versus closed-form variances", criterion_4),
        ("equipartition in the weak-coupling limit", criterion_5),
        ("covariance oracle versus quadrature", criterion_6),
        ("stability verdicts", criterion_7),
        ("classical and resolved-sideband limits", criterion_8),
        ("quadrature self-consistency", criterion_9),
        ("thermal occupations", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut passed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(f).unwrap_or_else(|e| Outcome {
            pass: false,
            summary: format!(
                "panicked: {}",
                e.downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default()
            ),
            info: vec![],
        });
        println!(
            "criterion {:>2} [{}] {name}: {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.summary
        );
        for line in &outcome.info {
            println!("             info: {line}");
        }
        passed += outcome.pass as usize;
    }
    println!("acceptance: {passed}/{} criteria passed", criteria.len());
    if passed == criteria.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
