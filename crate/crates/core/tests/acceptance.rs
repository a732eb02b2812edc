//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N: PASS|FAIL ...` line to standard error (uncaptured).
//!
//! Tests take a shared lock so that wall-clock bounds are not measured
//! against each other on a small machine.

use std::io::Write;
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use optomech_macro::measure::macroscopicity;
use optomech_macro::model::make_params;
use optomech_macro::oracle::{
    consistency_report, single_mode_cat_calibration, FdOrder, QuadratureSpec, RATIO_CV_TOLERANCE,
};
use optomech_macro::sweep::{figure_dataset, run_sweep, FigureId, ParamName, SweepAxis, SweepRow, SweepSpec};
use optomech_macro::wigner::{normalization, phonon_number};

static SERIAL: Mutex<()> = Mutex::new(());

fn report(n: u32, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n:>2} [{title}]: {verdict} | {detail}\n");
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn finish(n: u32, title: &str, pass: bool, detail: String) {
    report(n, title, pass, &detail);
    assert!(pass, "criterion {n} failed: {detail}");
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

fn series(rows: &[SweepRow], keep: impl Fn(&SweepRow) -> bool) -> Vec<&SweepRow> {
    rows.iter().filter(|r| keep(r)).collect()
}

#[test]
fn criterion_01_zero_kick() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut bad = Vec::new();
    for n in 1..=10 {
        for nbar in [0.0, 1.0, 10.0] {
            for d in [0.0, 1.0] {
                let m = macroscopicity(&make_params(n, 0.0, nbar, d).unwrap()).unwrap();
                if !(m.value == 0.0 && m.raw_value <= 0.0) {
                    bad.push(format!("N={n} nbar={nbar} d={d}: raw {:e}", m.raw_value));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && within(elapsed, 1.0);
    finish(1, "zero-kick law", pass, format!("60 points, {} violations, {:.3}s {:?}", bad.len(), elapsed.as_secs_f64(), bad));
}

#[test]
fn criterion_02_analytic_single_particle() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for g in [0.25f64, 0.5, 1.0, 2.0, 4.0] {
        let g2 = g * g;
        let expected = g2 * (1.0 + (-g2 / 2.0).exp()) / (2.0 * (1.0 + (-g2).exp()).powi(2));
        let got = macroscopicity(&make_params(1, g, 0.0, 0.0).unwrap()).unwrap().value;
        worst = worst.max((got / expected - 1.0).abs());
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-12 && within(elapsed, 1.0);
    finish(2, "analytic N=1 curve", pass, format!("max relative error {worst:.2e} (tol 1e-12), {:.3}s", elapsed.as_secs_f64()));
}

#[test]
fn criterion_03_oracle_equivalence() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let mut grid = Vec::new();
    for n in [1, 2] {
        for g in [0.5, 1.0, 1.5] {
            for nbar in [0.0, 0.5] {
                for d in [0.0, 0.3] {
                    grid.push(make_params(n, g, nbar, d).unwrap());
                }
            }
        }
    }
    let spec = QuadratureSpec::new(121, 7.0, 0.01, FdOrder::Fourth).unwrap();
    let report = consistency_report(&grid, &spec).unwrap();
    let elapsed = start.elapsed();
    let summary = report.summary.expect("every grid point has a nonzero kick");
    let norm_gap = report.max_norm_gap();
    let phonon_gap = report.max_phonon_gap();
    let (lo, hi) = report
        .rows
        .iter()
        .filter_map(|r| r.ratio)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r), hi.max(r)));
    let pass = summary.coefficient_of_variation < RATIO_CV_TOLERANCE
        && norm_gap <= 1e-6
        && phonon_gap <= 1e-6
        && within(elapsed, 1800.0);
    finish(
        3,
        "oracle equivalence",
        pass,
        format!(
            "ratio cv {:.3e} (tol {RATIO_CV_TOLERANCE:e}), mean ratio {:.6}, range [{lo:.4}, {hi:.4}], \
             constant-factor flag {}, norm gap {norm_gap:.2e}, n_ph gap {phonon_gap:.2e} (tol 1e-6), \
             24 points at 121/axis in {:.1}s",
            summary.coefficient_of_variation,
            summary.mean_ratio,
            summary.constant_factor_flag,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_04_cat_calibration() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let spec = QuadratureSpec::new(201, 8.0, 0.004, FdOrder::Fourth).unwrap();
    let mut gaps = Vec::new();
    for alpha in [0.5, 1.0, 2.0] {
        let c = single_mode_cat_calibration(alpha, &spec).unwrap();
        gaps.push((alpha, c.relative_gap()));
    }
    let elapsed = start.elapsed();
    let pass = gaps.iter().all(|&(_, g)| g < 0.01) && within(elapsed, 60.0);
    finish(4, "cat-state calibration", pass, format!("relative gaps {gaps:?} (tol 1e-2), {:.2}s", elapsed.as_secs_f64()));
}

#[test]
fn criterion_05_fig2_trends() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let rows = figure_dataset(FigureId::Fig2).unwrap();
    let cold = series(&rows, |r| r.nbar == 0.0);
    let hot = series(&rows, |r| r.nbar == 10.0);
    let increasing = |s: &[&SweepRow]| s.windows(2).all(|w| w[1].i_value > w[0].i_value);
    let dominates = cold.iter().zip(&hot).all(|(c, h)| c.n_particles == h.n_particles && c.i_value > h.i_value);
    let comparison: Vec<String> = cold
        .iter()
        .filter(|r| r.n_particles <= 5)
        .map(|r| format!("N={} I={:.4} n_ph={:.4} I>n_ph={}", r.n_particles, r.i_value, r.n_ph, r.i_value > r.n_ph))
        .collect();
    let elapsed = start.elapsed();
    let pass = cold.len() == 8 && increasing(&cold) && increasing(&hot) && dominates && within(elapsed, 1.0);
    finish(
        5,
        "fig2 trends",
        pass,
        format!(
            "increasing nbar=0 {}, nbar=10 {}, nbar=0 dominates {dominates}, {:.3}s; report-only [{}]",
            increasing(&cold),
            increasing(&hot),
            elapsed.as_secs_f64(),
            comparison.join("; ")
        ),
    );
}

#[test]
fn criterion_06_fig3_trend() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let rows = figure_dataset(FigureId::Fig3).unwrap();
    let weak = series(&rows, |r| r.gamma == 1.0);
    let strong = series(&rows, |r| r.gamma == 10.0);
    let ok = weak.len() == 8
        && weak.iter().zip(&strong).all(|(w, s)| w.n_particles == s.n_particles && s.i_value > w.i_value);
    let elapsed = start.elapsed();
    let pass = ok && within(elapsed, 1.0);
    finish(6, "fig3 trend", pass, format!("gamma=10 above gamma=1 for N=1..8: {ok}, {:.3}s", elapsed.as_secs_f64()));
}

#[test]
fn criterion_07_fig4_trend() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let spec = SweepSpec::new(
        vec![
            SweepAxis::new(ParamName::Gamma, [1.0, 10.0]),
            SweepAxis::new(ParamName::Nbar, [0.0, 0.5, 1.0, 2.0, 5.0, 10.0]),
        ],
        [(ParamName::NParticles, 5.0), (ParamName::DFactor, 0.0)],
    );
    let rows = run_sweep(&spec).unwrap();
    let weak = series(&rows, |r| r.gamma == 1.0);
    let strong = series(&rows, |r| r.gamma == 10.0);
    let nonincreasing = |s: &[&SweepRow]| s.windows(2).all(|w| w[1].i_value <= w[0].i_value);
    let phonons_up = |s: &[&SweepRow]| s.windows(2).all(|w| w[1].n_ph >= w[0].n_ph);
    let larger_gamma_wins = weak.iter().zip(&strong).all(|(w, s)| s.i_value > w.i_value);
    let elapsed = start.elapsed();
    let checks = [
        nonincreasing(&weak),
        nonincreasing(&strong),
        larger_gamma_wins,
        phonons_up(&weak),
        phonons_up(&strong),
    ];
    let pass = checks.iter().all(|&c| c) && within(elapsed, 1.0);
    finish(
        7,
        "fig4 trend",
        pass,
        format!(
            "I nonincreasing (gamma 1, 10) {:?}, gamma=10 above gamma=1 {}, n_ph nondecreasing {:?}, {:.3}s",
            &checks[0..2],
            checks[2],
            &checks[3..5],
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_08_fig5_crossover() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let rows = figure_dataset(FigureId::Fig5).unwrap();
    let by_gamma = |g: f64| series(&rows, move |r| r.gamma == g);
    let mut monotone = Vec::new();
    let mut vanishing = Vec::new();
    for g in [1.0, 2.0, 10.0] {
        let s = by_gamma(g);
        monotone.push(s.len() == 31 && s.windows(2).all(|w| w[1].i_value <= w[0].i_value));
        let (first, last) = (s[0].i_value, s[s.len() - 1].i_value);
        vanishing.push((last / first, last < 0.05 * first));
    }
    let (weak, strong) = (by_gamma(1.0), by_gamma(10.0));
    let crossover = weak
        .iter()
        .zip(&strong)
        .find(|(w, s)| s.i_value < w.i_value)
        .map(|(w, _)| w.d_factor);
    let at_end = (weak[30].i_value, strong[30].i_value);
    let elapsed = start.elapsed();
    let pass = monotone.iter().all(|&m| m)
        && vanishing.iter().all(|&(_, v)| v)
        && crossover.is_some()
        && within(elapsed, 5.0);
    finish(
        8,
        "fig5 crossover",
        pass,
        format!(
            "nonincreasing {monotone:?}, I(1.5)/I(0) {:?} (tol < 0.05), crossover d* {crossover:?}, \
             at d=1.5 gamma=1 {:.4e} vs gamma=10 {:.4e}, {:.3}s",
            vanishing.iter().map(|v| v.0).collect::<Vec<_>>(),
            at_end.0,
            at_end.1,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_09_large_gamma_asymptote() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let gammas = [3.0f64, 5.0, 8.0, 10.0];
    let ratios: Vec<f64> = gammas
        .iter()
        .map(|&g| {
            let p = make_params(1, g, 0.0, 0.0).unwrap();
            macroscopicity(&p).unwrap().value / phonon_number(&p)
        })
        .collect();
    let limit = ratios[3];
    let dev: Vec<f64> = ratios[..3].iter().map(|r| (r - limit).abs()).collect();
    // successive deviations must fall at least as fast as exp(−γ²/4)
    let rate = 0.25;
    let shrinking = (0..2).all(|k| {
        let allowed = (-rate * (gammas[k + 1].powi(2) - gammas[k].powi(2))).exp();
        dev[k + 1] <= allowed * dev[k]
    });
    let elapsed = start.elapsed();
    let pass = shrinking && within(elapsed, 1.0);
    finish(
        9,
        "large-gamma asymptote",
        pass,
        format!(
            "I/n_ph at gamma {gammas:?} = {ratios:?}; deviations from gamma=10 {dev:?}; \
             limit {limit:.12} vs 2 (gap {:.6}), {:.3}s",
            (limit - 2.0).abs(),
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_10_stability_stress() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut details = Vec::new();
    let mut pass = true;
    for (n, nbar, limit) in [(10, 10.0, 1.0), (60, 0.0, 60.0)] {
        let start = Instant::now();
        let p = make_params(n, 10.0, nbar, 0.0).unwrap();
        let m = macroscopicity(&p).unwrap();
        let values = [m.raw_value, m.value, phonon_number(&p), normalization(&p)];
        let elapsed = start.elapsed();
        let ok = values.iter().all(|v| v.is_finite()) && within(elapsed, limit);
        pass &= ok;
        details.push(format!("{p}: [i_raw, i_value, n_ph, z] = {values:?} in {:.3}s (< {limit}s)", elapsed.as_secs_f64()));
    }
    finish(10, "stability stress", pass, details.join("; "));
}

#[test]
fn criterion_11_determinism() {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_optomech-macro"))
            .args(["--threads", "1", "--quiet", "figure", "fig5", "--out"])
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(&path).unwrap()
    };
    let (a, b) = (run("a.csv"), run("b.csv"));
    let pass = !a.is_empty() && a == b;
    finish(11, "determinism", pass, format!("two fig5 runs at 1 worker, {} and {} bytes, identical {}", a.len(), b.len(), a == b));
}
