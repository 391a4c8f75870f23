//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (no libtest harness) so the lines always reach the
//! console. The large ensembles are computed once and shared between
//! criteria. Exit status is nonzero if any criterion fails.

use std::time::Instant;

use qpl_core::ensemble::{
    martingale_report, overlap_fraction, run_ensemble, scaling_study, EnsembleConfig,
    EnsembleMode, EnsembleStats, ScalingBranch, MARTINGALE_CHECKPOINT,
};
use qpl_core::filter_reduced::{reduced_step, reduced_step_euler, PARITY};
use qpl_core::hilbert::build_catalog;
use qpl_core::noise::CounterNoise;
use qpl_core::observables::{emission_rate_scale, excited_population_scale, xx_variance_bound, PhysicalProbe};
use qpl_core::sde_physical::{
    dressed_steady_state, simulate_with, steady_state_oracle, PhysicalStepper, SimOptions,
};
use qpl_core::{QubitConfig, ReducedKet, SystemParams};

const N_PHYSICAL: usize = 200;
const N_TRACKING: usize = 100;
const N_IDEAL_OVERLAP: usize = 200;
const N_IDEAL_MARTINGALE: usize = 500;
const N_SCALING: usize = 32;

struct Outcome {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(outcomes: &mut Vec<Outcome>, id: u32, name: &'static str, pass: bool, detail: String) {
    println!(
        "[{}] criterion {id:>2} {name}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    outcomes.push(Outcome {
        id,
        name,
        pass,
        detail,
    });
}

fn info(msg: impl AsRef<str>) {
    println!("       {}", msg.as_ref());
}

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let t = Instant::now();
    let out = f();
    info(format!("({label}: {:.1} s)", t.elapsed().as_secs_f64()));
    out
}

fn ensemble(mode: EnsembleMode, n: usize, seed_base: u64, params: &SystemParams) -> EnsembleStats {
    let cfg = EnsembleConfig::new(mode, n, seed_base, params.clone());
    run_ensemble(&cfg).expect("ensemble run")
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn criterion_1(out: &mut Vec<Outcome>, phys: &EnsembleStats) {
    let n = phys.n_ok() as f64;
    let frac = phys.even_fraction();
    let tol = 3.0 * (0.25 / n).sqrt();
    report(
        out,
        1,
        "parity split",
        phys.n_ok() == N_PHYSICAL && (frac - 0.5).abs() <= tol,
        format!(
            "even fraction {frac:.3} over {} shots, allowed 0.5 ± {tol:.3}; {} failed shots",
            phys.n_ok(),
            phys.failures.len()
        ),
    );
}

fn criterion_2(out: &mut Vec<Outcome>, phys: &EnsembleStats) {
    let alpha = phys.params.alpha_max;
    let target = 2.0 * alpha;
    let projected: Vec<_> = phys.shots.iter().filter(|s| s.plateau_end_var < 1e-3).collect();
    let mut worst: f64 = 0.0;
    let mut within = 0usize;
    let mut sign_ok = 0usize;
    let mut raw_within = 0usize;
    let mut raw_sign_ok = 0usize;
    let mut raw_by_parity = [(0.0, 0usize), (0.0, 0usize)];
    for s in &projected {
        let p = s.physical.as_ref().unwrap();
        let rel = (p.homodyne_conditional.abs() - target).abs() / target;
        worst = worst.max(rel);
        if rel <= 0.15 {
            within += 1;
        }
        if (p.homodyne_conditional.signum() as i8) == s.parity_sign {
            sign_ok += 1;
        }
        if ((p.homodyne_raw.abs() - target).abs() / target) <= 0.15 {
            raw_within += 1;
        }
        if (p.homodyne_raw.signum() as i8) == s.parity_sign {
            raw_sign_ok += 1;
        }
        let k = if s.parity_sign > 0 { 0 } else { 1 };
        raw_by_parity[k].0 += p.homodyne_raw;
        raw_by_parity[k].1 += 1;
    }
    let n = projected.len();
    let sign_rate = sign_ok as f64 / n.max(1) as f64;
    report(
        out,
        2,
        "homodyne plateau",
        n > 0 && within == n && sign_rate >= 0.99,
        format!(
            "⟨L+L†⟩ over the last 20 plateau units: {within}/{n} projected shots within 15% of ±2α \
             (worst {:.1}%), sign agreement {:.1}%",
            100.0 * worst,
            100.0 * sign_rate
        ),
    );
    let mean = |(s, c): (f64, usize)| s / c.max(1) as f64;
    info(format!(
        "raw dY0/dt window averages: {raw_within}/{n} within 15%, sign agreement {:.1}% \
         (white noise alone gives sd {:.3}); ensemble means even {:+.4}, odd {:+.4}",
        100.0 * raw_sign_ok as f64 / n.max(1) as f64,
        1.0 / 20f64.sqrt(),
        mean(raw_by_parity[0]),
        mean(raw_by_parity[1])
    ));
}

fn criterion_3(out: &mut Vec<Outcome>, phys: &EnsembleStats, ideal: &EnsembleStats) {
    let frac = overlap_fraction(phys, "var_zz", ideal, "var_pi").unwrap();
    let med = median(phys.shots.iter().map(|s| s.plateau_end_var).collect());
    let med_ideal = median(ideal.shots.iter().map(|s| s.plateau_end_var).collect());
    report(
        out,
        3,
        "variance decay & ensemble overlap",
        frac >= 0.95 && med < 1e-3,
        format!(
            "overlap at {:.1}% of plateau grid points (need ≥ 95%); median Var(σZσZ) at γ²t = 80 is {med:.2e} (need < 1e-3)",
            100.0 * frac
        ),
    );
    info(format!("median ideal Var(Π) at γ²t = 80: {med_ideal:.2e}"));
}

fn criterion_4(out: &mut Vec<Outcome>, phys: &EnsembleStats) {
    let shots: Vec<_> = phys.shots.iter().take(N_TRACKING).collect();
    let maxes: Vec<f64> = shots.iter().map(|s| s.tracking.as_ref().unwrap().max_frac_err).collect();
    let worst = maxes.iter().copied().fold(0.0, f64::max);
    let over = maxes.iter().filter(|&&m| m >= 1.0).count();
    let mean = shots
        .iter()
        .map(|s| s.tracking.as_ref().unwrap().mean_frac_err_plateau)
        .sum::<f64>()
        / shots.len() as f64;
    let paired = shots.iter().all(|s| {
        s.physical.as_ref().unwrap().record_checksum == s.tracking.as_ref().unwrap().filter_checksum
    });
    report(
        out,
        4,
        "reduced-filter tracking",
        shots.len() == N_TRACKING && over == 0 && mean < 0.3 && paired,
        format!(
            "{} shots: max fractional residual error {worst:.3} ({over} shots ≥ 1); \
             mean over shots and plateau {mean:.3} (need < 0.3); record pairing verified: {paired}",
            shots.len()
        ),
    );
    let all_worst = phys
        .shots
        .iter()
        .map(|s| s.tracking.as_ref().unwrap().max_frac_err)
        .fold(0.0, f64::max);
    info(format!("all {} cross-driven shots: max error {all_worst:.3}", phys.n_ok()));
}

fn criterion_5(out: &mut Vec<Outcome>) {
    let base = SystemParams::default();
    let params = SystemParams {
        t_final: 20.0,
        ..base.clone()
    };
    let catalog = build_catalog(&params).unwrap();
    let probe = PhysicalProbe::new(&catalog);
    let mut stepper = PhysicalStepper::new(&catalog, &params).unwrap();
    let scale = 2.0 * params.alpha_max / params.kappa();
    let hom_scale = 2.0 * params.alpha_max;
    let mut worst_limit: f64 = 0.0;
    let mut worst_dressed: f64 = 0.0;
    let mut lines = Vec::new();
    for (k, cfg) in QubitConfig::ALL.into_iter().enumerate() {
        let v0 = cfg.vacuum_state(params.fock_dim);
        let rec = simulate_with(
            &params,
            &mut stepper,
            &probe,
            &v0,
            &mut CounterNoise::new(500 + k as u64),
            500 + k as u64,
            SimOptions::default(),
        )
        .unwrap();
        // time average over the settled plateau; single samples carry the
        // conditional fluctuations of one trajectory
        let t = &rec.observables;
        let rows: Vec<usize> = t.rows_in(12.0, 20.0).collect();
        let avg = |name: &str| {
            let c = t.require(name).unwrap();
            rows.iter().map(|&i| c[i]).sum::<f64>() / rows.len() as f64
        };
        let sim = [avg("b1_re"), avg("b2_re"), avg("homodyne_mean_rate")];
        let imag = avg("b1_im").abs().max(avg("b2_im").abs());
        let errs = |o: qpl_core::sde_physical::SteadyState| {
            [
                (sim[0] - o.beta1.re).abs() / scale,
                (sim[1] - o.beta2.re).abs() / scale,
                (sim[2] - o.homodyne_mean_rate).abs() / hom_scale,
                imag / scale,
            ]
        };
        let lim = errs(steady_state_oracle(cfg, &params));
        let dre = errs(dressed_steady_state(cfg, &params));
        worst_limit = lim.iter().copied().fold(worst_limit, f64::max);
        worst_dressed = dre.iter().copied().fold(worst_dressed, f64::max);
        lines.push(format!(
            "{}: mean over t ∈ [12, 20] b1 {:+.5} b2 {:+.5} ⟨L+L†⟩ {:+.5}; vs limit {:.2}%/{:.2}%/{:.2}%, vs finite-g {:.3}%/{:.3}%/{:.3}%",
            cfg.label(),
            sim[0],
            sim[1],
            sim[2],
            100.0 * lim[0],
            100.0 * lim[1],
            100.0 * lim[2],
            100.0 * dre[0],
            100.0 * dre[1],
            100.0 * dre[2]
        ));
    }
    report(
        out,
        5,
        "steady-state oracle agreement",
        worst_limit <= 0.01,
        format!(
            "worst deviation from the cascade limit values {:.2}% (need ≤ 1%); \
             from the finite-g cascade {:.3}%",
            100.0 * worst_limit,
            100.0 * worst_dressed
        ),
    );
    for l in lines {
        info(l);
    }
}

fn criterion_6(out: &mut Vec<Outcome>, phys: &EnsembleStats) {
    let p = &phys.params;
    let pop_limit = 3.0 * excited_population_scale(p);
    let (worst_shot, max_pop) = phys
        .shots
        .iter()
        .map(|s| (s.shot, s.physical.as_ref().unwrap().max_pop_e_any))
        .fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let plateau_pops: Vec<f64> =
        phys.shots.iter().map(|s| s.physical.as_ref().unwrap().max_pop_e).collect();
    let (mut jumps, mut exposure, mut raw_exposure) = (0u32, 0.0, 0.0);
    let (t0, t1) = (p.ramp.plateau_start(), p.ramp.plateau_end().min(p.t_final));
    for s in &phys.shots {
        let ph = s.physical.as_ref().unwrap();
        jumps += ph.plateau_jumps[0] + ph.plateau_jumps[1];
        exposure += ph.coupled_exposure[0] + ph.coupled_exposure[1];
        raw_exposure += 2.0 * (t1 - t0);
    }
    let scale = emission_rate_scale(p);
    let rate = jumps as f64 / exposure;
    report(
        out,
        6,
        "excited population & jump rate",
        max_pop <= pop_limit && rate >= 0.5 * scale && rate <= 2.0 * scale && exposure >= 500.0,
        format!(
            "max ⟨σ†σ⟩ {max_pop:.2e} (limit {pop_limit:.2e}); {jumps} plateau emissions over \
             {exposure:.0} coupled atom-time units → rate {rate:.2e} (band [{:.2e}, {:.2e}])",
            0.5 * scale,
            2.0 * scale
        ),
    );
    let emitted = |s: &&qpl_core::ensemble::ShotSummary| {
        let j = s.physical.as_ref().unwrap().jumps;
        j[0] + j[1] > 0
    };
    let over: Vec<_> = phys
        .shots
        .iter()
        .filter(|s| s.physical.as_ref().unwrap().max_pop_e_any > pop_limit)
        .collect();
    let quiet_max = phys
        .shots
        .iter()
        .filter(|s| !emitted(s))
        .map(|s| s.physical.as_ref().unwrap().max_pop_e_any)
        .fold(0.0, f64::max);
    info(format!(
        "largest value in shot {worst_shot}; median per-shot plateau maximum {:.2e}",
        median(plateau_pops)
    ));
    info(format!(
        "{} shots exceed the limit, {} of them with an emission; max over shots without emissions {quiet_max:.2e}",
        over.len(),
        over.iter().filter(|s| emitted(s)).count()
    ));
    info(format!(
        "per atom regardless of coupling: {:.2e} over {raw_exposure:.0} atom-time units",
        jumps as f64 / raw_exposure
    ));
}

fn criterion_7(out: &mut Vec<Outcome>, phys: &EnsembleStats) {
    let bound = xx_variance_bound(&phys.params);
    let threshold = bound - 1e-3;
    let even: Vec<_> = phys
        .shots
        .iter()
        .filter(|s| s.parity_sign > 0 && s.plateau_end_var < 1e-3)
        .collect();
    let mins: Vec<f64> = even
        .iter()
        .map(|s| s.physical.as_ref().unwrap().min_var_xx_plateau)
        .collect();
    let lowest = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let below = mins.iter().filter(|&&m| m < threshold).count();
    report(
        out,
        7,
        "XX-variance bound",
        !even.is_empty() && below == 0,
        format!(
            "{} even-projected shots: lowest plateau Var(σXσX) {lowest:.5}, bound {bound:.5} − 1e-3 = {threshold:.5}; {below} below",
            even.len()
        ),
    );
}

fn criterion_8(out: &mut Vec<Outcome>) {
    let (t_total, dt, alpha) = (10.0, 2e-4, 0.2);
    let n = (t_total / dt) as usize;
    let mut worst: f64 = 0.0;
    let mut worst_euler: f64 = 0.0;
    let started = Instant::now();
    for c in [2.0 * alpha, -2.0 * alpha, 0.05, 0.0] {
        let dy = c * dt;
        let v0 = ReducedKet::from_real([0.6, 0.2, 0.5, (1.0f64 - 0.36 - 0.04 - 0.25).sqrt()]).unwrap();
        let mut v = v0;
        let mut ve = v0;
        for _ in 0..n {
            v = reduced_step(&v, dy, alpha, dt);
            ve = reduced_step_euler(&ve, dy, alpha, dt).unwrap();
        }
        // closed form: amplitudes ∝ exp(±αY), Y = c·T
        let y = c * t_total;
        let mut exact = [0.0; 4];
        for (i, p) in PARITY.iter().enumerate() {
            exact[i] = v0.amplitudes()[i].re * (alpha * p * y).exp();
        }
        let norm = exact.iter().map(|a| a * a).sum::<f64>().sqrt();
        for (i, e) in exact.iter().enumerate() {
            let e = e / norm;
            worst = worst.max((v.amplitudes()[i].re - e).abs() / e.abs());
            worst_euler = worst_euler.max((ve.amplitudes()[i].re - e).abs() / e.abs());
        }
    }
    report(
        out,
        8,
        "reduced-filter closed form",
        worst <= 1e-8,
        format!(
            "worst relative amplitude error {worst:.2e} over four constant records (need ≤ 1e-8), {:.3} s",
            started.elapsed().as_secs_f64()
        ),
    );
    info(format!("plain Euler step for comparison: {worst_euler:.2e}"));
}

fn criterion_9(out: &mut Vec<Outcome>, ideal: &EnsembleStats, phys: &EnsembleStats) {
    let ri = martingale_report(ideal, None).unwrap();
    let rp = martingale_report(phys, None).unwrap();
    report(
        out,
        9,
        "martingale suites",
        ri.passed() && rp.passed() && ri.n == N_IDEAL_MARTINGALE && rp.n == N_PHYSICAL,
        format!(
            "ideal n={} max |z| {:.2}, physical n={} max |z| {:.2} over all {} grid points (need < 3)",
            ri.n,
            ri.max_abs_z,
            rp.n,
            rp.max_abs_z,
            ri.times.len()
        ),
    );
    let ci = martingale_report(ideal, Some(MARTINGALE_CHECKPOINT)).unwrap();
    let cp = martingale_report(phys, Some(MARTINGALE_CHECKPOINT)).unwrap();
    info(format!(
        "checkpoints every {MARTINGALE_CHECKPOINT} time units: ideal max |z| {:.2}, physical max |z| {:.2}",
        ci.max_abs_z, cp.max_abs_z
    ));
}

fn criterion_10(out: &mut Vec<Outcome>) {
    let base = SystemParams::default();
    let g = scaling_study(&base, &[1.0, 2.0, 4.0], &[ScalingBranch::G], N_SCALING, 1, None).unwrap();
    // scale 1 is the same parameter set on both branches; reuse it
    assert_eq!(ScalingBranch::AlphaKappa.apply(&base, 1.0), ScalingBranch::G.apply(&base, 1.0));
    let ak = scaling_study(&base, &[2.0], &[ScalingBranch::AlphaKappa], N_SCALING, 1, None).unwrap();
    let dg: Vec<f64> = g.rows.iter().map(|r| r.discrepancy.unwrap()).collect();
    let dak = [dg[0], ak.rows[0].discrepancy.unwrap()];
    let g_ok = dg.windows(2).all(|w| w[1] < w[0]);
    let ak_ok = dak[1] <= dak[0];
    report(
        out,
        10,
        "scaling study",
        g_ok && ak_ok,
        format!(
            "g-branch {:.4} → {:.4} → {:.4} (strictly decreasing: {g_ok}); α,κ-branch {:.4} → {:.4} (non-increasing: {ak_ok}); {N_SCALING} shots each",
            dg[0], dg[1], dg[2], dak[0], dak[1]
        ),
    );
}

fn main() {
    // `--list` answers the test runner; bare numbers select criteria
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let only: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let want = |ids: &[u32]| only.is_empty() || ids.iter().any(|i| only.contains(i));
    let started = Instant::now();
    let base = SystemParams::default();
    let mut outcomes = Vec::new();

    if want(&[8]) {
        criterion_8(&mut outcomes);
    }
    if want(&[5]) {
        criterion_5(&mut outcomes);
    }
    if want(&[1, 2, 3, 4, 6, 7, 9]) {
        let ideal = want(&[3]).then(|| {
            timed("ideal ensemble, 200 shots", || {
                ensemble(EnsembleMode::Ideal, N_IDEAL_OVERLAP, 10_001, &base)
            })
        });
        let phys = timed("cross-driven physical ensemble, 200 shots", || {
            ensemble(EnsembleMode::CrossDriven, N_PHYSICAL, 1, &base)
        });
        let checks: [(u32, &dyn Fn(&mut Vec<Outcome>)); 5] = [
            (1, &|o| criterion_1(o, &phys)),
            (2, &|o| criterion_2(o, &phys)),
            (4, &|o| criterion_4(o, &phys)),
            (6, &|o| criterion_6(o, &phys)),
            (7, &|o| criterion_7(o, &phys)),
        ];
        for (id, check) in checks {
            if want(&[id]) {
                check(&mut outcomes);
            }
        }
        if let Some(ideal) = &ideal {
            criterion_3(&mut outcomes, &phys, ideal);
        }
        if want(&[9]) {
            let ideal_mart = timed("ideal ensemble, 500 shots", || {
                ensemble(EnsembleMode::Ideal, N_IDEAL_MARTINGALE, 20_001, &base)
            });
            criterion_9(&mut outcomes, &ideal_mart, &phys);
        }
    }
    if want(&[10]) {
        timed("scaling study", || criterion_10(&mut outcomes));
    }

    outcomes.sort_by_key(|o| o.id);
    let failed: Vec<&Outcome> = outcomes.iter().filter(|o| !o.pass).collect();
    println!(
        "acceptance: {} passed, {} failed ({:.0} s)",
        outcomes.len() - failed.len(),
        failed.len(),
        started.elapsed().as_secs_f64()
    );
    for o in &failed {
        println!("  FAILED {} {}: {}", o.id, o.name, o.detail);
    }
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
