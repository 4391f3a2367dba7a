//! Acceptance criteria 1–8. Run with `cargo test --test acceptance`.
//!
//! Prints one `[PASS]`/`[FAIL]` line per criterion and exits nonzero if any
//! criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qstrack::admm::{e_update, AdmmParams, AdmmState};
use qstrack::harness::run::{simulate_truth, step_inputs, track, Setup};
use qstrack::harness::verdict::{
    active_projection_sums, crossover, envelope_series, first_reach, smoothing_width, tail_mean,
};
use qstrack::harness::{run_experiment, simulate, ExperimentConfig, Mode};
use qstrack::kalman::{gain_residual, kalman_gain, kf_descend, KfState};
use qstrack::linalg::{c, project_to_density, simplex_project, CMatrix, DensityMatrix, Pauli};
use qstrack::metrics::{fit_order, Algorithm, StepLog};
use qstrack::sim::{
    evolve, make_kraus, random_pure_state, stream_rng, DynamicsConfig, MeasurementWindow, Stream,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cfg(pairs: &[(&str, &str)]) -> ExperimentConfig {
    ExperimentConfig::from_pairs(pairs).expect("valid acceptance config")
}

fn two_qubit(steps: usize, algorithms: &str) -> ExperimentConfig {
    let steps = steps.to_string();
    cfg(&[
        ("n", "2"),
        ("l", "40"),
        ("T", &steps),
        ("noise_std", "1e-3"),
        ("mode", "oracle"),
        ("algorithms", algorithms),
    ])
}

fn logs_for(cfg: &ExperimentConfig, algorithm: Algorithm) -> Vec<StepLog> {
    let mut setup = Setup::new(cfg).unwrap();
    let truth = simulate_truth(cfg, &setup).unwrap();
    let inputs = step_inputs(cfg, &mut setup, &truth).unwrap();
    track(algorithm, &inputs, &setup.params).unwrap()
}

fn criterion_1() -> Outcome {
    let dynamics = DynamicsConfig::new(4, 1);
    let ks = make_kraus(&dynamics).unwrap();
    let completeness = ks.completeness_defect();
    let mut rho =
        random_pure_state(dynamics.dim(), &mut stream_rng(1, Stream::InitialState)).unwrap();
    let mut worst_trace = 0.0f64;
    for _ in 0..1000 {
        rho = evolve(&rho, &ks).unwrap();
        worst_trace = worst_trace.max((rho.trace().re - 1.0).abs());
    }
    outcome(
        completeness <= 1e-10 && worst_trace <= 1e-11,
        format!("‖ΣA†A − I‖_F = {completeness:.2e} (≤ 1e-10), max |tr ρ_k − 1| = {worst_trace:.2e} (≤ 1e-11)"),
    )
}

/// Minimizes `|h − r/2|` over a spherical grid of the unit Bloch ball with
/// radius and angle steps of 1e-3, coarse to fine. The grid contains the
/// sphere itself, where most of the minimizers lie.
fn bloch_grid_oracle(h: [f64; 3]) -> [f64; 3] {
    const STEP: f64 = 1e-3;
    let radii = 1000i64;
    let thetas = (std::f64::consts::PI / STEP).round() as i64;
    let phis = (2.0 * std::f64::consts::PI / STEP).round() as i64;
    let theta = |j: i64| std::f64::consts::PI * j as f64 / thetas as f64;
    let phi = |j: i64| 2.0 * std::f64::consts::PI * j.rem_euclid(phis) as f64 / phis as f64;
    let (sin_t, cos_t): (Vec<f64>, Vec<f64>) = (0..=thetas).map(|j| theta(j).sin_cos()).unzip();
    let (sin_p, cos_p): (Vec<f64>, Vec<f64>) = (0..phis).map(|j| phi(j).sin_cos()).unzip();
    let point = |i: i64, j: i64, k: i64| {
        let s = i as f64 / radii as f64;
        let (j, k) = (j as usize, k.rem_euclid(phis) as usize);
        [
            s * sin_t[j] * cos_p[k],
            s * sin_t[j] * sin_p[k],
            s * cos_t[j],
        ]
    };
    let cost = |r: [f64; 3]| (0..3).map(|a| (h[a] - r[a] / 2.0).powi(2)).sum::<f64>();
    let search = |is: Vec<i64>, js: Vec<i64>, ks: Vec<i64>| {
        let mut best = (f64::INFINITY, (0, 0, 0));
        for &i in &is {
            for &j in &js {
                for &k in &ks {
                    let c = cost(point(i, j, k));
                    if c < best.0 {
                        best = (c, (i, j, k));
                    }
                }
            }
        }
        best.1
    };
    let coarse = 20;
    let (i0, j0, k0) = search(
        (0..=radii).step_by(coarse as usize).collect(),
        (0..=thetas)
            .step_by(coarse as usize)
            .chain([thetas])
            .collect(),
        (0..phis).step_by(coarse as usize).collect(),
    );
    let span = 3 * coarse;
    let (i, j, k) = search(
        ((i0 - span).max(0)..=(i0 + span).min(radii)).collect(),
        ((j0 - span).max(0)..=(j0 + span).min(thetas)).collect(),
        (k0 - span..=k0 + span).collect(),
    );
    point(i, j, k)
}

/// Exact QP solution by enumerating every support set of the KKT system.
fn simplex_qp_oracle(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let shift = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; n];
        for &i in &support {
            x[i] = v[i] - shift;
        }
        if x.iter().any(|&xi| xi < 0.0) {
            continue;
        }
        let cost: f64 = x.iter().zip(v).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().is_none_or(|(c0, _)| cost < *c0) {
            best = Some((cost, x));
        }
    }
    best.expect("some support is feasible").1
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let paulis = [Pauli::X.matrix(), Pauli::Y.matrix(), Pauli::Z.matrix()];
    let mut worst_bloch = 0.0f64;
    for _ in 0..200 {
        let (a, d) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let off = c(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let h = CMatrix::from_row_slice(2, 2, &[c(a, 0.0), off, off.conj(), c(d, 0.0)]);
        let coords = [0, 1, 2].map(|i| qstrack::linalg::hs_inner(&paulis[i], &h).re / 2.0);
        let r = bloch_grid_oracle(coords);
        let mut oracle = CMatrix::identity(2, 2) * c(0.5, 0.0);
        for i in 0..3 {
            oracle += &paulis[i] * c(r[i] / 2.0, 0.0);
        }
        let ours = project_to_density(&h).unwrap();
        worst_bloch = worst_bloch.max((ours.matrix() - oracle).norm());
    }
    let mut worst_simplex = 0.0f64;
    for _ in 0..1000 {
        let len = rng.random_range(1..=5);
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-3.0..3.0)).collect();
        let ours = simplex_project(&v).unwrap();
        let oracle = simplex_qp_oracle(&v);
        let err = ours
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst_simplex = worst_simplex.max(err);
    }
    outcome(
        worst_bloch <= 2e-3 && worst_simplex <= 1e-8,
        format!("Bloch grid max ‖Δ‖_F = {worst_bloch:.2e} (≤ 2e-3), simplex QP max |Δ| = {worst_simplex:.2e} (≤ 1e-8)"),
    )
}

/// Golden-section minimization of a unimodal function on `[lo, hi]`, driven
/// by `less(x, y) = f(x) < f(y)`.
fn golden_min(less: impl Fn(f64, f64) -> bool, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    for _ in 0..200 {
        if less(x1, x2) {
            hi = x2;
            x2 = x1;
            x1 = hi - g * (hi - lo);
        } else {
            lo = x1;
            x1 = x2;
            x2 = lo + g * (hi - lo);
        }
    }
    (lo + hi) / 2.0
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_closed_form = 0.0f64;
    for trial in 0..50 {
        let rows = rng.random_range(1..=6);
        let a = CMatrix::from_fn(rows, 4, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let params = AdmmParams::derive(
            100 + trial,
            &a,
            rng.random_range(0.5..2.0),
            rng.random_range(0.1..3.0),
        )
        .unwrap();
        let window = MeasurementWindow {
            sampling_matrix: std::sync::Arc::new(a),
            record: DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0)),
            window_length: rows,
            time: 1,
        };
        let state = AdmmState {
            lambda: DVector::from_fn(rows, |_, _| rng.random_range(-1.0..1.0)),
            e: DVector::zeros(rows),
            ..AdmmState::new(&DensityMatrix::maximally_mixed(2))
        };
        let p_new = DensityMatrix::maximally_mixed(2).vectorized();
        let e = e_update(&p_new, &state, &window, &params).unwrap();
        let ap = window.apply(&p_new).unwrap();
        for j in 0..rows {
            let (alpha, gamma) = (params.alpha, params.gamma);
            let target = window.record[j] + state.lambda[j] / alpha - ap[j];
            // f(x) = x²/2γ + (α/2)(x − t)²; f(x) − f(y) in factored form keeps
            // the comparison accurate near the minimum.
            let less = |x: f64, y: f64| {
                (x - y) * ((x + y) / (2.0 * gamma) + alpha / 2.0 * (x + y - 2.0 * target)) < 0.0
            };
            let numeric = golden_min(less, -10.0, 10.0);
            worst_closed_form = worst_closed_form.max((numeric - e[j]).abs());
        }
    }

    let config = two_qubit(500, "opg");
    let logs = logs_for(&config, Algorithm::Opg);
    let worst_coupling = logs
        .iter()
        .map(|log| {
            let (e, lambda) = (log.e.as_ref().unwrap(), log.lambda.as_ref().unwrap());
            (e - lambda * config.gamma).amax()
        })
        .fold(0.0, f64::max);
    outcome(
        worst_closed_form <= 1e-8 && worst_coupling <= 1e-9 && logs.len() == 500,
        format!(
            "closed-form vs numeric max |Δe| = {worst_closed_form:.2e} (≤ 1e-8), \
             max |e_k − γλ_k| over 500 steps = {worst_coupling:.2e} (≤ 1e-9)"
        ),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_gain = 0.0f64;
    for _ in 0..100 {
        let a = CMatrix::from_fn(40, 256, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let k = kalman_gain(&a).unwrap();
        worst_gain = worst_gain.max(gain_residual(&a, &k) / a.norm());
    }

    let config = two_qubit(500, "kf");
    let mut setup = Setup::new(&config).unwrap();
    let truth = simulate_truth(&config, &setup).unwrap();
    let inputs = step_inputs(&config, &mut setup, &truth).unwrap();
    let mut state = KfState::new(&DensityMatrix::maximally_mixed(4));
    let mut violations = 0;
    let mut worst_ratio = 0.0f64;
    for input in &inputs {
        let w = &input.window;
        let b = w.record.map(|y| c(y, 0.0));
        let before = (&*w.sampling_matrix * &state.p - &b).norm();
        let p_hat = kf_descend(&state, w).unwrap();
        let after = (&*w.sampling_matrix * &p_hat - &b).norm();
        if after > before * (1.0 + 1e-12) + 1e-15 {
            violations += 1;
        }
        if before > 0.0 {
            worst_ratio = worst_ratio.max(after / before);
        }
        state = qstrack::kalman::step(&state, w).unwrap();
    }
    outcome(
        worst_gain <= 1e-10 && violations == 0,
        format!(
            "max ‖(I + AA†)K† − A‖_F/‖A‖_F = {worst_gain:.2e} (≤ 1e-10), \
             innovation expansions = {violations} of 500 (max ratio {worst_ratio:.3})"
        ),
    )
}

fn criterion_5() -> Outcome {
    let config = two_qubit(2000, "opg");
    let reports = simulate(&config).unwrap();
    let opg = &reports[0];
    let r2 = fit_order(&opg.series(|r| r.r2), 0.5).unwrap();
    let d = fit_order(&envelope_series(opg), 0.5).unwrap();
    let ok = |f: &qstrack::OrderFit| f.slope <= -0.3 && f.r_squared >= 0.7;
    outcome(
        ok(&r2) && ok(&d),
        format!(
            "R₂ slope {:.3} (R² {:.3}), running-max-normalized D slope {:.3} (R² {:.3}); need slope ≤ −0.3, R² ≥ 0.7",
            r2.slope, r2.r_squared, d.slope, d.r_squared
        ),
    )
}

fn criterion_6() -> Outcome {
    let short = &simulate(&two_qubit(1000, "kf")).unwrap()[0];
    let long = &simulate(&two_qubit(2000, "kf")).unwrap()[0];
    let l = 40;
    let early: Vec<(f64, f64)> = long
        .rows
        .iter()
        .filter(|r| (l..=5 * l).contains(&r.k))
        .map(|r| (r.k as f64, r.d))
        .collect();
    let early = fit_order(&early, 1.0).unwrap();
    let (floor_short, floor_long) = (
        tail_mean(&short.distances(), 0.2),
        tail_mean(&long.distances(), 0.2),
    );
    let floor_ratio = floor_short.max(floor_long) / floor_short.min(floor_long);
    let raw = (
        short.rows.last().unwrap().sum_e,
        long.rows.last().unwrap().sum_e,
    );
    let active = (
        *active_projection_sums(short).last().unwrap(),
        *active_projection_sums(long).last().unwrap(),
    );
    let growth = active.1 / active.0;
    let early_ok = early.slope <= -0.5;
    let floor_ok = floor_ratio < 2.0;
    let growth_ok = growth >= 1.5;
    outcome(
        early_ok && floor_ok && growth_ok,
        format!(
            "early slope {:.3} (≤ −0.5) {}; late-floor ratio {floor_ratio:.3} (< 2) {}; \
             Σ‖E_k‖ growth {growth:.3} (≥ 1.5) {} [active sums {:.2e} → {:.2e}, raw incl. roundoff {:.2e} → {:.2e}]",
            early.slope,
            if early_ok { "ok" } else { "FAIL" },
            if floor_ok { "ok" } else { "FAIL" },
            if growth_ok { "ok" } else { "FAIL" },
            active.0,
            active.1,
            raw.0,
            raw.1
        ),
    )
}

fn criterion_7() -> Outcome {
    let config = ExperimentConfig::default();
    let reports = simulate(&config).unwrap();
    let kf = reports
        .iter()
        .find(|r| r.algorithm == Algorithm::Kf)
        .unwrap();
    let opg = reports
        .iter()
        .find(|r| r.algorithm == Algorithm::Opg)
        .unwrap();
    let (kf_k, opg_k) = (first_reach(kf, 0.1), first_reach(opg, 0.1));
    let reach_ok = match (kf_k, opg_k) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    };
    let k_star = crossover(kf, opg, smoothing_width(config.steps));
    let (kf_final, opg_final) = (kf.rows.last().unwrap().d, opg.rows.last().unwrap().d);
    outcome(
        reach_ok && k_star.is_some() && opg_final < kf_final,
        format!(
            "(a) first D ≤ 0.1: KF k = {kf_k:?}, OPG k = {opg_k:?}; (b) crossover k* = {k_star:?}; \
             (c) final D: OPG {opg_final:.3e} vs KF {kf_final:.3e}"
        ),
    )
}

fn criterion_8() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let csvs: Vec<Vec<u8>> = dirs
        .iter()
        .map(|dir| {
            let mut config = two_qubit(300, "both");
            config.out_dir = dir.path().to_path_buf();
            let artifacts = run_experiment(&config).unwrap();
            std::fs::read(artifacts.trajectory_csv).unwrap()
        })
        .collect();
    let identical = csvs[0] == csvs[1] && !csvs[0].is_empty();

    let mut config = two_qubit(300, "both");
    config.mode = Mode::Physical;
    let cut = 120;
    let mut setup = Setup::new(&config).unwrap();
    let truth = simulate_truth(&config, &setup).unwrap();
    let inputs = step_inputs(&config, &mut setup, &truth).unwrap();
    let mut permuted = truth.clone();
    permuted.record.values[cut..].reverse();
    let permuted_inputs = step_inputs(&config, &mut setup, &permuted).unwrap();
    let mut causal = permuted_inputs[cut].window.record != inputs[cut].window.record;
    for algorithm in [Algorithm::Kf, Algorithm::Opg] {
        let a = track(algorithm, &inputs, &setup.params).unwrap();
        let b = track(algorithm, &permuted_inputs, &setup.params).unwrap();
        causal &= a[..cut].iter().zip(&b[..cut]).all(|(x, y)| x.p == y.p);
    }
    outcome(
        identical && causal,
        format!(
            "identical CSV bytes: {identical}; estimates at k ≤ {cut} unchanged after permuting later readings: {causal}"
        ),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        (
            1,
            "Kraus completeness and trace preservation",
            Duration::from_secs(5),
            criterion_1,
        ),
        (
            2,
            "projection oracle equivalence",
            Duration::from_secs(30),
            criterion_2,
        ),
        (3, "ADMM closed forms", Duration::from_secs(10), criterion_3),
        (
            4,
            "Kalman gain identity",
            Duration::from_secs(20),
            criterion_4,
        ),
        (
            5,
            "OPG-ADMM empirical order",
            Duration::from_secs(60),
            criterion_5,
        ),
        (
            6,
            "KF-QSE error floor",
            Duration::from_secs(90),
            criterion_6,
        ),
        (
            7,
            "Figure-1 qualitative reproduction",
            Duration::from_secs(300),
            criterion_7,
        ),
        (
            8,
            "determinism and causality",
            Duration::from_secs(30),
            criterion_8,
        ),
    ];
    let mut failures = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let pass = result.pass && elapsed <= budget;
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] criterion {id} ({name}): {} [{:.2} s, budget {} s]",
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
