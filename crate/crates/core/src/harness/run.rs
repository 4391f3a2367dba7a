use std::fs;
use std::path::PathBuf;

use nalgebra::DVector;

use crate::admm::{self, AdmmParams, AdmmState};
use crate::error::{Error, Result};
use crate::kalman::{self, KfState};
use crate::linalg::{square_side, CVector, DensityMatrix};
use crate::metrics::{Algorithm, StepLog, TrajectoryReport};
use crate::sim::{
    evolve, heisenberg_sequence, make_kraus, measure, random_pure_state, stream_rng,
    synth_oracle_record, KrausSet, MeasurementRecord, MeasurementWindow, Stream, WindowBuilder,
};

use super::config::{ExperimentConfig, Mode};
use super::output::{emit_csv, emit_plot, write_report_json};
use super::verdict::{verdict, Verdict};

/// The simulated ground truth: states `ρ_1..ρ_T` and readings `y_1..y_T`.
#[derive(Clone, Debug)]
pub struct Truth {
    pub states: Vec<DensityMatrix>,
    pub record: MeasurementRecord,
}

/// What every estimator sees at time `k`, plus the comparator.
#[derive(Clone, Debug)]
pub struct StepInput {
    pub window: MeasurementWindow,
    pub p_star: CVector,
    pub e_star: DVector<f64>,
}

/// Dynamics, operators and step parameters shared by all estimators of a run.
#[derive(Clone, Debug)]
pub struct Setup {
    pub kraus: KrausSet,
    pub builder: WindowBuilder,
    pub params: AdmmParams,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let kraus = make_kraus(&cfg.dynamics)?;
        let m1 = cfg.dynamics.observable_matrix()?;
        let operators = heisenberg_sequence(&m1, &kraus, cfg.window)?;
        let mut builder = WindowBuilder::new(operators, cfg.window)?;
        let reference = builder.sampling_matrix(cfg.window)?;
        let params = AdmmParams::derive(cfg.steps, &reference, cfg.tau, cfg.gamma)?;
        Ok(Setup {
            kraus,
            builder,
            params,
        })
    }
}

/// Evolves a random pure state for `T` steps and records `y_k = tr(M_1 ρ_k) + ε`.
///
/// The record is drawn in both modes so that the oracle noise stream is
/// untouched by the choice of mode.
pub fn simulate_truth(cfg: &ExperimentConfig, setup: &Setup) -> Result<Truth> {
    let mut init_rng = stream_rng(cfg.seed, Stream::InitialState);
    let mut noise_rng = stream_rng(cfg.seed, Stream::RecordNoise);
    let m1 = &setup.builder.operators()[0];
    let mut rho = random_pure_state(cfg.dynamics.dim(), &mut init_rng)?;
    let mut states = Vec::with_capacity(cfg.steps);
    let mut record = MeasurementRecord::new(cfg.noise_std);
    for k in 1..=cfg.steps {
        if k > 1 {
            rho = evolve(&rho, &setup.kraus).map_err(|e| e.at_step(k))?;
        }
        record.push(measure(&rho, m1, cfg.noise_std, &mut noise_rng).map_err(|e| e.at_step(k))?);
        states.push(rho.clone());
    }
    Ok(Truth { states, record })
}

/// Builds the window sequence for the configured data mode.
///
/// The comparator is `p* = vec(ρ_k)`; `e*` is the injected noise in oracle
/// mode and `b − Re(𝒜p*)` in physical mode.
pub fn step_inputs(
    cfg: &ExperimentConfig,
    setup: &mut Setup,
    truth: &Truth,
) -> Result<Vec<StepInput>> {
    let mut oracle_rng = stream_rng(cfg.seed, Stream::OracleNoise);
    let mut inputs = Vec::with_capacity(truth.states.len());
    for (i, rho) in truth.states.iter().enumerate() {
        let k = i + 1;
        let window = setup
            .builder
            .window(&truth.record, k)
            .map_err(|e| e.at_step(k))?;
        let p_star = rho.vectorized();
        let input = match cfg.mode {
            Mode::Oracle => {
                let (window, e_star) =
                    synth_oracle_record(rho, &window, cfg.noise_std, &mut oracle_rng)
                        .map_err(|e| e.at_step(k))?;
                StepInput {
                    window,
                    p_star,
                    e_star,
                }
            }
            Mode::Physical => {
                let e_star = &window.record - window.apply(&p_star)?;
                StepInput {
                    window,
                    p_star,
                    e_star,
                }
            }
        };
        inputs.push(input);
    }
    Ok(inputs)
}

/// Runs one estimator over the inputs from `I/d`, logging every step.
pub fn track(
    algorithm: Algorithm,
    inputs: &[StepInput],
    params: &AdmmParams,
) -> Result<Vec<StepLog>> {
    let Some(first) = inputs.first() else {
        return Ok(Vec::new());
    };
    let dim = square_side(first.p_star.len())?;
    let initial = DensityMatrix::maximally_mixed(dim);
    let mut logs = Vec::with_capacity(inputs.len());
    match algorithm {
        Algorithm::Opg => {
            let mut state = AdmmState::new(&initial);
            for input in inputs {
                let k = input.window.time;
                let next = admm::step(&state, &input.window, params).map_err(|e| e.at_step(k))?;
                logs.push(log_step(
                    input,
                    state.p,
                    next.p.clone(),
                    Some((&next.e, &next.lambda)),
                    next.projection_residual,
                ));
                state = next;
            }
        }
        Algorithm::Kf => {
            let mut state = KfState::new(&initial);
            for input in inputs {
                let k = input.window.time;
                let next = kalman::step(&state, &input.window).map_err(|e| e.at_step(k))?;
                logs.push(log_step(
                    input,
                    state.p,
                    next.p.clone(),
                    None,
                    next.last_projection_residual,
                ));
                state = next;
            }
        }
    }
    Ok(logs)
}

fn log_step(
    input: &StepInput,
    p_prev: CVector,
    p: CVector,
    dual: Option<(&DVector<f64>, &DVector<f64>)>,
    projection_residual: f64,
) -> StepLog {
    StepLog {
        k: input.window.time,
        p,
        p_prev,
        e: dual.map(|(e, _)| e.clone()),
        lambda: dual.map(|(_, l)| l.clone()),
        p_star: input.p_star.clone(),
        e_star: input.e_star.clone(),
        b: input.window.record.clone(),
        a: input.window.sampling_matrix.clone(),
        projection_residual,
    }
}

/// Runs every configured estimator on one shared measurement realization.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Vec<TrajectoryReport>> {
    let mut setup = Setup::new(cfg)?;
    let truth = simulate_truth(cfg, &setup)?;
    let inputs = step_inputs(cfg, &mut setup, &truth)?;
    let hash = cfg.hash();
    cfg.algorithms
        .iter()
        .map(|&algorithm| {
            let logs = track(algorithm, &inputs, &setup.params)?;
            TrajectoryReport::build(algorithm, &logs, cfg.gamma, cfg.seed, hash.clone())
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RunArtifacts {
    pub trajectory_csv: PathBuf,
    pub report_json: PathBuf,
    pub plot_svg: Option<PathBuf>,
    pub verdict: Verdict,
    pub reports: Vec<TrajectoryReport>,
}

/// [`simulate`], then writes `trajectory.csv`, `report.json` and, when
/// plotting is enabled, `figure1.svg` into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let reports = simulate(cfg)?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let trajectory_csv = cfg.out_dir.join("trajectory.csv");
    emit_csv(&reports, &trajectory_csv)?;
    let plot_svg = if cfg.plot {
        let path = cfg.out_dir.join("figure1.svg");
        emit_plot(&reports, &path)?;
        Some(path)
    } else {
        None
    };
    let verdict = verdict(&reports, cfg);
    let report_json = cfg.out_dir.join("report.json");
    write_report_json(cfg, &verdict, &report_json)?;
    log::info!(
        "wrote {} rows to {}",
        reports.iter().map(|r| r.len()).sum::<usize>(),
        trajectory_csv.display()
    );
    Ok(RunArtifacts {
        trajectory_csv,
        report_json,
        plot_svg,
        verdict,
        reports,
    })
}
