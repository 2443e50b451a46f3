//! Command-line runner.
//!
//! A run is assembled in two layers: command-line flags produce a TOML table,
//! the optional config file is laid over it (file keys win), and the merged
//! document goes through [`parse_and_validate`]. Each run writes one directory
//! `<out>/<name>/` holding `series.csv`, `meta.json` and, where it applies,
//! `predictions.json` or `sigma.csv`.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use toml::{Table, Value};

use freeze_core::classical_echo::{classical_fidelity_series, gaussian_patch_ensemble};
use freeze_core::config::{figure_preset, parse_and_validate, ConfigErrors, Experiment, FigureBundle, RunSpec};
use freeze_core::echo::{linear_grid, log_grid, EchoMode, FidelitySample, FidelitySeries, SeriesMeta};
use freeze_core::io::{write_json, RunDir, RunMetadata};
use freeze_core::semiclassics::{transport_rate_sigma, ClassicalSystem, PredictionSet};

/// What a finished run left behind.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub name: String,
    pub dir: PathBuf,
    pub summary: String,
}

/// Overlay `top` onto `base`, descending into tables.
pub fn merge_tables(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge_tables(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Merge flag-derived settings with a config file and validate the result.
pub fn spec_from_layers(flags: Table, config: Option<&str>) -> std::result::Result<RunSpec, ConfigErrors> {
    let mut merged = flags;
    if let Some(text) = config {
        let file: Table = text.parse().map_err(|e: toml::de::Error| ConfigErrors(vec![format!("config syntax: {}", e.message())]))?;
        merge_tables(&mut merged, file);
    }
    parse_and_validate(&toml::to_string(&merged).expect("tables serialize"))
}

/// Set `section.key = value` in a flag table, creating the section.
pub fn set_flag(table: &mut Table, section: &str, key: &str, value: impl Into<Value>) {
    let target = if section.is_empty() {
        table
    } else {
        table.entry(section).or_insert_with(|| Value::Table(Table::new())).as_table_mut().expect("sections are tables")
    };
    target.insert(key.to_string(), value.into());
}

fn meta_for(spec: &RunSpec) -> RunMetadata {
    RunMetadata::new(spec.name.clone(), spec.to_json(), spec.seed)
}

/// Execute one spec; sweeps and figures fan out to their member runs.
pub fn run_spec(spec: &RunSpec) -> Result<Vec<RunReport>> {
    match spec.experiment {
        Experiment::Sweep => run_parallel(spec.workers, spec.sweep_members()),
        Experiment::Figure => {
            let name = spec.figure.name.ok_or_else(|| anyhow!("figure runs need figure.name"))?;
            let bundle = figure_bundle_for(spec, name, spec.figure.scale)?;
            write_json(&Path::new(&spec.out).join(format!("{name}.json")), &bundle)?;
            run_parallel(spec.workers, bundle.runs)
        }
        _ => Ok(vec![run_single(spec)?]),
    }
}

/// Figure preset carrying the caller's output directory, seed and worker count.
pub fn figure_bundle_for(spec: &RunSpec, name: freeze_core::FigureName, scale: f64) -> Result<FigureBundle> {
    let mut bundle = figure_preset(name, scale)?;
    for run in &mut bundle.runs {
        run.out = spec.out.clone();
        run.seed = spec.seed;
        run.workers = spec.workers;
        run.classical = spec.classical.clone();
        run.sigma = spec.sigma.clone();
    }
    Ok(bundle)
}

/// Run independent specs on a pool of `workers` threads; reports keep input order.
pub fn run_parallel(workers: usize, runs: Vec<RunSpec>) -> Result<Vec<RunReport>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build().context("building worker pool")?;
    pool.install(|| runs.par_iter().map(run_single).collect())
}

/// Execute a single (non-sweep, non-figure) run and write its directory.
pub fn run_single(spec: &RunSpec) -> Result<RunReport> {
    let dir = RunDir::new(Path::new(&spec.out).join(&spec.name));
    let meta = meta_for(spec);
    log::info!("{}: {:?} in {}", spec.name, spec.experiment, dir.root.display());
    let summary = match spec.experiment {
        Experiment::Echo | Experiment::RenormEcho => {
            let model = spec.model.build()?;
            let cfg = spec.echo_config()?;
            let series = freeze_core::echo::fidelity_series(&model, &cfg)?;
            let predictions = PredictionSet::for_model(&model, spec.echo.delta, spec.sigma.value)?;
            dir.write_series(&series, meta)?;
            dir.write_predictions(&predictions)?;
            let last = series.samples.last().map_or(f64::NAN, |s| s.fidelity);
            format!("{} samples up to n = {}, final F = {last:.4e}", series.samples.len(), cfg.n_max)
        }
        Experiment::ClassicalEcho => {
            let c = &spec.classical;
            let width = (spec.model.hbar() / 2.0).sqrt();
            let ensemble = gaussian_patch_ensemble(spec.echo.theta, spec.echo.phi, width, c.trajectories, spec.seed)?;
            let system = ClassicalSystem::from_model(&spec.model.model_kind(), Some(spec.model.j as f64))?;
            let times = linear_grid(c.n_max, 1);
            let result = classical_fidelity_series(&ensemble, &system, spec.echo.delta, &times, c.overlap_estimator())?;
            let mut meta = meta;
            meta.extra.insert("std_errors".into(), serde_json::to_value(&result.std_errors)?);
            meta.extra.insert("patch_width".into(), width.into());
            for w in &result.warnings {
                log::warn!("{}: {w}", spec.name);
            }
            dir.write_series(&result.series, meta)?;
            format!("{} classical samples, {} warning(s)", result.series.samples.len(), result.warnings.len())
        }
        Experiment::Predict => {
            let predictions = spec.predictions()?;
            let n_max = spec.resolved_n_max()?;
            let kind = spec.echo.state.into();
            let samples: Vec<FidelitySample> = log_grid(n_max, spec.echo.per_decade, spec.echo.max_samples)
                .into_iter()
                .map(|n| {
                    let f = predictions.decay(n as f64, kind).fidelity;
                    FidelitySample { n, fidelity: f, amplitude_re: f.sqrt(), amplitude_im: 0.0 }
                })
                .collect();
            let series = FidelitySeries {
                samples,
                meta: SeriesMeta {
                    model: None,
                    delta: spec.echo.delta,
                    mode: EchoMode::Direct,
                    initial: Some(spec.initial_state()),
                    state: None,
                    projected_norm: None,
                    classical: false,
                    prefactor: None,
                    max_norm_drift: None,
                    spectral_residual: None,
                    wall_time_s: 0.0,
                    notes: vec!["predicted long-time decay F_plat·exp(−Γ(n)); valid for n ≥ t2".into()],
                },
            };
            dir.write_series(&series, meta)?;
            dir.write_predictions(&predictions)?;
            format!(
                "F_plat cis {:.6} ris {:.6}, t2 {:.4e}, t_H {:.4e}, {:?}",
                predictions.f_plat_cis, predictions.f_plat_ris, predictions.t2, predictions.t_h, predictions.decay_regime
            )
        }
        Experiment::Sigma => {
            let system = ClassicalSystem::from_model(&spec.model.model_kind(), Some(spec.model.j as f64))?;
            let estimate = transport_rate_sigma(&system, spec.sigma.n_cut, spec.sigma.ensemble, spec.seed)?;
            let mut meta = meta;
            meta.extra.insert("sigma".into(), serde_json::to_value(&estimate)?);
            dir.write_sigma(&estimate)?;
            write_json(&dir.meta(), &meta)?;
            if !estimate.converged {
                log::warn!("{}: σ estimate not converged ({:.4e} vs {:.4e})", spec.name, estimate.sigma, estimate.sigma_late);
            }
            format!("sigma = {:.4e} (late window {:.4e}, converged {})", estimate.sigma, estimate.sigma_late, estimate.converged)
        }
        Experiment::Sweep | Experiment::Figure => return Err(anyhow!("{:?} runs fan out through run_spec", spec.experiment)),
    };
    Ok(RunReport { name: spec.name.clone(), dir: dir.root, summary })
}
