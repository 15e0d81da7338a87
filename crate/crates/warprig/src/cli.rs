//! Batch front-end: configs in, reports out.
//!
//! One command per process. Exit codes: 0 for a completed run (diagnostic
//! findings included), 2 for configuration errors, 3 for numeric or
//! degeneracy errors.

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::geometry::Immersion;
use crate::report::{atomic_write, csv_sidecar, render_report, write_meta, Csv};
use crate::rigidity::{
    assemble_operator, functional_3_16, kernel_spectrum, DeformationBasis, OperatorMode,
};
use crate::search::{run_search_experiment, MinimizeOptions, SearchExperiment};
use crate::verify::surface_report;
use crate::weight::{check_conditions, solve_weight};
use serde_json::json;
use std::path::Path;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Command {
    Ambient,
    Verify,
    Weight,
    Spectrum,
    Pair,
    Search,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Ambient => "ambient",
            Command::Verify => "verify",
            Command::Weight => "weight",
            Command::Spectrum => "spectrum",
            Command::Pair => "pair",
            Command::Search => "search",
        }
    }
}

/// Extra artifacts (CSV tables) produced alongside the JSON report.
pub struct RunOutput {
    pub report: Vec<u8>,
    pub sidecars: Vec<(String, Vec<u8>)>,
}

/// Execute a command against a validated configuration and render the
/// report bytes plus CSV sidecars.
pub fn run(command: Command, config: &RunConfig) -> Result<RunOutput> {
    let mut sidecars = Vec::new();
    let results = match command {
        Command::Ambient => run_ambient(config, &mut sidecars)?,
        Command::Verify => run_verify(config)?,
        Command::Weight => run_weight(config, &mut sidecars)?,
        Command::Spectrum => run_spectrum(config, &mut sidecars)?,
        Command::Pair => run_pair(config)?,
        Command::Search => run_search(config, &mut sidecars)?,
    };
    Ok(RunOutput {
        report: render_report(command.name(), config, results)?,
        sidecars,
    })
}

/// Execute and write to the configured output path (or stdout), with the
/// wall-clock sidecar. Returns the bytes written.
pub fn run_to_output(command: Command, config: &RunConfig) -> Result<Vec<u8>> {
    let out = run(command, config)?;
    match &config.output.path {
        Some(path) => {
            let path = Path::new(path);
            atomic_write(path, &out.report)?;
            write_meta(path)?;
            for (tag, bytes) in &out.sidecars {
                atomic_write(&csv_sidecar(path, tag), bytes)?;
            }
        }
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&out.report)?;
        }
    }
    Ok(out.report)
}

fn run_ambient(
    config: &RunConfig,
    sidecars: &mut Vec<(String, Vec<u8>)>,
) -> Result<serde_json::Value> {
    let space = config.ambient_space()?;
    let [lo, hi] = space.interval();
    const SAMPLES: usize = 512;
    let mut csv = Csv::new(&[
        "r",
        "rho",
        "f",
        "f_r",
        "f_u",
        "f_uu",
        "big_phi",
        "big_phi_u",
        "u",
        "static_residual",
        "ricci_gap",
    ]);
    let mut table = Vec::with_capacity(SAMPLES + 1);
    for k in 0..=SAMPLES {
        let r = lo + (hi - lo) * k as f64 / SAMPLES as f64;
        let d = space.eval_radial(r)?;
        let sres = space.static_residual(r)?;
        let gap = space.ricci_gap(r)?;
        csv.row(&[
            d.r,
            d.rho,
            d.f,
            d.f_r,
            d.f_u,
            d.f_uu,
            d.big_phi,
            d.big_phi_u,
            d.u,
            sres,
            gap,
        ]);
        if k % 64 == 0 {
            table.push(serde_json::to_value(d)?);
        }
    }
    sidecars.push(("radial".to_string(), csv.into_bytes()));
    let summary = space.hypothesis_summary(512);
    Ok(json!({
        "interval": space.interval(),
        "phi_sign": summary.phi_sign,
        "hypothesis_summary": serde_json::to_value(&summary)?,
        "diagnostics_sample": table,
    }))
}

fn run_verify(config: &RunConfig) -> Result<serde_json::Value> {
    let space = config.ambient_space()?;
    let grid = config.grid()?;
    let imm = Immersion::graph(config.surface_spec()?);
    let report = surface_report(&space, &imm, &grid)?;
    Ok(serde_json::to_value(&report)?)
}

fn run_weight(
    config: &RunConfig,
    sidecars: &mut Vec<(String, Vec<u8>)>,
) -> Result<serde_json::Value> {
    let space = config.ambient_space()?;
    let [lo, hi] = space.interval();
    let sol = solve_weight(
        &space,
        lo,
        hi,
        config.weight_ic(),
        config.weight_direction(),
    )?;
    let conditions = check_conditions(&space, &sol)?;
    let mut csv = Csv::new(&["r", "w", "w_u", "w_over_f", "wronskian"]);
    const SAMPLES: usize = 512;
    for k in 0..=SAMPLES {
        let r = lo + (hi - lo) * k as f64 / SAMPLES as f64;
        let (w, wu) = sol.eval(&space, r)?;
        let d = space.eval_radial(r)?;
        csv.row(&[r, w, wu, w / d.f, wu * d.f - w * d.f_u]);
    }
    sidecars.push(("weight".to_string(), csv.into_bytes()));
    Ok(json!({
        "ic_used": { "w0": sol.ic_used.0, "wu0": sol.ic_used.1 },
        "direction": sol.direction,
        "tolerance": sol.tol,
        "conditions": serde_json::to_value(&conditions)?,
    }))
}

fn run_spectrum(
    config: &RunConfig,
    sidecars: &mut Vec<(String, Vec<u8>)>,
) -> Result<serde_json::Value> {
    let space = config.ambient_space()?;
    let grid = config.grid()?;
    let imm = Immersion::graph(config.surface_spec()?);
    let basis = DeformationBasis::new(config.deformation.degree)?;
    let op = assemble_operator(&space, &imm, &basis, &grid, OperatorMode::MeanCurvature)?;
    // Attach the integral-functional values when a weight exists for the
    // ambient (definite Phi sign); skip quietly otherwise.
    let [lo, hi] = space.interval();
    let weight = solve_weight(
        &space,
        lo,
        hi,
        config.weight_ic(),
        config.weight_direction(),
    )
    .ok();
    let report = kernel_spectrum(
        &space,
        &op,
        &basis,
        &grid,
        config.thresholds.kernel_rel,
        config.thresholds.gap_min,
        weight.as_ref(),
    )?;
    let mut csv = Csv::new(&["index", "singular_value"]);
    for (k, s) in report.singular_values.iter().enumerate() {
        csv.row(&[k as f64, *s]);
    }
    sidecars.push(("spectrum".to_string(), csv.into_bytes()));
    let mut value = serde_json::to_value(&report)?;
    if let Some(obj) = value.as_object_mut() {
        obj.insert(
            "basis_labels".to_string(),
            serde_json::to_value(&basis.labels)?,
        );
    }
    Ok(value)
}

fn run_pair(config: &RunConfig) -> Result<serde_json::Value> {
    let space = config.ambient_space()?;
    let grid = config.grid()?;
    let imm_a = Immersion::graph(config.surface_spec()?);
    let imm_b = config.immersion_b()?;
    let [lo, hi] = space.interval();
    let sol = solve_weight(
        &space,
        lo,
        hi,
        config.weight_ic(),
        config.weight_direction(),
    )?;
    let report = functional_3_16(&space, &imm_a, &imm_b, &sol, &grid)?;
    Ok(serde_json::to_value(&report)?)
}

fn run_search(
    config: &RunConfig,
    sidecars: &mut Vec<(String, Vec<u8>)>,
) -> Result<serde_json::Value> {
    let space = config.ambient_space()?;
    let grid = config.grid()?;
    let reference = config.surface_spec()?;
    let experiment: SearchExperiment = run_search_experiment(
        &space,
        &reference,
        config.deformation.degree,
        config.search_mode(),
        &grid,
        config.search.seed,
        config.search.perturbation,
        config.search.restarts,
        MinimizeOptions::default(),
    )?;
    for (k, trace) in experiment.restarts.iter().enumerate() {
        let mut csv = Csv::new(&["iteration", "objective", "grad_norm"]);
        for rec in &trace.iterations {
            csv.row(&[rec.iteration as f64, rec.objective, rec.grad_norm]);
        }
        sidecars.push((format!("trace{k}"), csv.into_bytes()));
    }
    Ok(serde_json::to_value(&experiment)?)
}

/// Map an error to the documented process exit code.
pub fn exit_code_for(err: &Error) -> i32 {
    err.exit_code()
}
