//! Config-driven batch commands: ingest, simulate, fit, diagnose, evaluate.
//!
//! Every command writes into the configured output directory and finishes
//! with a `manifest_<command>.json` listing the config, seed and the SHA-256
//! of every input and output.

mod config;
mod manifest;

pub use config::{ExportConfig, FitConfig, InputConfig, OutputConfig, Overrides, PreprocessConfig, RunConfig, SimulateConfig};
pub use manifest::{sha256_hex, FileRecord, Manifest};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use manifest::{read_input, OutputDir};

use crate::design::{build_design, demean, qq_normalize, DesignTensor, RelationalSeries};
use crate::diagnostics::{
    coefficient_network, convergence_stats, diag_dominance, rmse_surface, summarize_pooled, write_b3_summary_csv,
    write_convergence_csv, write_edges_csv, write_rmse_grid_csv, write_rmse_grids_json, write_summary_csv,
    write_trace_csv, ActorMatrix, MIN_CHAIN_LENGTH,
};
use crate::error::{Error, Result};
use crate::estimation::{
    als_fit, gibbs_fit_chains, predict, read_fit_file, rmse_per_dyad, write_fit_file, CoefficientSet, FitFile,
    FitMeta, FitMethod, FitResult,
};
use crate::ingest::{aggregate, linear_spectral_radius, parse_events, simulate_synthetic, CameoMapping};
use crate::tensor::{read_container, write_container, Labels, Tensor4};

pub const PANEL_FILE: &str = "panel.rtn";
pub const FIT_FILE: &str = "fit.rfit";

/// Files written by one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Outcome {
    pub command: String,
    pub manifest: PathBuf,
    pub outputs: Vec<PathBuf>,
}

/// Preprocessing and variable choice stored with a fit so `evaluate` can rebuild its design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitContext {
    preprocess: PreprocessConfig,
    variables: Vec<String>,
    panel_sha256: String,
}

fn require(path: &Path, what: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} {} does not exist", path.display())))
    }
}

fn load_panel(cfg: &RunConfig, inputs: &mut Vec<FileRecord>) -> Result<(RelationalSeries, String)> {
    let path = cfg.tensor_path();
    require(&path, "panel")?;
    let bytes = read_input(&path, "panel", inputs)?;
    let hash = inputs.last().map(|r| r.sha256.clone()).unwrap_or_default();
    let (tensor, labels) = read_container(bytes.as_slice()).map_err(|e| with_path(e, &path))?;
    Ok((RelationalSeries::from_labeled(tensor, labels)?, hash))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Container { path: None, detail } => Error::Container {
            path: Some(path.to_path_buf()),
            detail,
        },
        other => other,
    }
}

/// Variable selection, then the configured transforms, then the design.
fn prepare_design(series: &RelationalSeries, variables: Option<&[String]>, pre: &PreprocessConfig) -> Result<(RelationalSeries, DesignTensor)> {
    let mut s = match variables {
        Some(v) => series.select_variables(v)?,
        None => series.clone(),
    };
    if pre.qq_normalize {
        s = qq_normalize(&s);
    }
    if pre.demean {
        s = demean(&s);
    }
    let mut design = build_design(&s)?;
    if pre.standardize_transitive {
        design = design.standardize_transitive();
    }
    Ok((s, design))
}

fn container_bytes(series: &RelationalSeries) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_container(&mut buf, series.data(), Some(&series.labels()))?;
    Ok(buf)
}

/// Aggregates the event file into `panel.rtn`, with an ingest report of rejected and dropped rows.
pub fn cmd_ingest(cfg: &RunConfig) -> Result<Outcome> {
    let agg = cfg
        .aggregation
        .as_ref()
        .ok_or_else(|| Error::Config("ingest needs an [aggregation] section".into()))?;
    let events = cfg
        .input
        .events
        .as_ref()
        .map(|p| cfg.resolve(p))
        .ok_or_else(|| Error::Config("ingest needs input.events".into()))?;
    require(&events, "event file")?;
    let mapping_path = cfg.input.cameo_mapping.as_ref().map(|p| cfg.resolve(p));
    if let Some(p) = &mapping_path {
        require(p, "CAMEO mapping")?;
    }

    let mut inputs = Vec::new();
    let bytes = read_input(&events, "events", &mut inputs)?;
    let mapping = match &mapping_path {
        Some(p) => Some(CameoMapping::from_csv(read_input(p, "cameo_mapping", &mut inputs)?.as_slice())?),
        None => None,
    };
    let parsed = parse_events(bytes.as_slice(), mapping.as_ref())?;
    let result = aggregate(&parsed.records, agg)?;
    log::info!(
        "ingest: {} records, {} malformed rows, dims {:?}",
        parsed.records.len(),
        parsed.errors.len(),
        result.series.data().dims()
    );

    let mut out = OutputDir::create(cfg.output_dir())?;
    out.write("panel", PANEL_FILE, &container_bytes(&result.series)?)?;
    out.write_json(
        "ingest_report",
        "ingest_report.json",
        &serde_json::json!({
            "records": parsed.records.len(),
            "row_errors": parsed.errors,
            "dropped": result.dropped,
            "dims": result.series.data().dims(),
        }),
    )?;
    out.finish("ingest", cfg, inputs)
}

fn matrix_rows(m: &crate::tensor::Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn coefficients_json(c: &CoefficientSet) -> serde_json::Value {
    serde_json::json!({
        "b1": matrix_rows(&c.b1),
        "b2": matrix_rows(&c.b2),
        "b3": matrix_rows(&c.b3),
        "sigma2": c.sigma2,
    })
}

/// Simulates a panel from `[simulate]` into `panel.rtn`, with the generating coefficients in `truth.json`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome> {
    let sim = cfg
        .simulate
        .as_ref()
        .ok_or_else(|| Error::Config("simulate needs a [simulate] section".into()))?;
    let truth = sim.coefficients()?;
    let seed = sim.seed.unwrap_or(cfg.model.seed);
    let series = simulate_synthetic(sim.actors, sim.variables, sim.periods, &truth, sim.sigma, seed)?;
    let normalized = crate::estimation::normalize_identifiability(&truth)?;

    let mut out = OutputDir::create(cfg.output_dir())?;
    out.write("panel", PANEL_FILE, &container_bytes(&series)?)?;
    out.write_json(
        "truth",
        "truth.json",
        &serde_json::json!({
            "seed": seed,
            "spectral_radius": linear_spectral_radius(&truth)?,
            "coefficients": coefficients_json(&truth),
            "normalized": coefficients_json(&normalized),
        }),
    )?;
    out.finish("simulate", cfg, Vec::new())
}

/// Fits the panel and writes `fit.rfit` plus parameter summaries.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Outcome> {
    let mut inputs = Vec::new();
    let (series, panel_hash) = load_panel(cfg, &mut inputs)?;
    let (series, design) = prepare_design(&series, cfg.fit.variables.as_deref(), &cfg.preprocess)?;
    log::info!(
        "fit: {:?} on design {:?}, method {:?}, {} chain(s)",
        design.response().dims(),
        design.data().dims(),
        cfg.fit.method,
        cfg.fit.chains
    );
    let chains = match cfg.fit.method {
        FitMethod::Als => vec![als_fit(&design, &cfg.model)?.into_fit_result(&cfg.model)],
        FitMethod::Gibbs => gibbs_fit_chains(&design, &cfg.model, cfg.fit.chains)?,
    };
    let context = FitContext {
        preprocess: cfg.preprocess.clone(),
        variables: series.variables().to_vec(),
        panel_sha256: panel_hash,
    };
    let file = FitFile {
        meta: FitMeta {
            actors: series.actors().to_vec(),
            variables: series.variables().to_vec(),
            context: serde_json::to_value(&context)?,
        },
        chains,
    };

    let mut out = OutputDir::create(cfg.output_dir())?;
    out.write_with("fit", FIT_FILE, |buf| write_fit_file(buf, &file))?;
    let summary = summarize_pooled(&file.chains)?;
    out.write_with("summary", "summary.csv", |buf| write_summary_csv(buf, &summary))?;
    out.write_with("b3_summary", "b3_summary.csv", |buf| {
        write_b3_summary_csv(buf, &summary, &file.meta.variables)
    })?;
    let report: Vec<_> = file
        .chains
        .iter()
        .map(|c| {
            serde_json::json!({
                "seed": c.seed,
                "draws": c.draws.len(),
                "jitter_retries": c.jitter_retries,
                "als": c.als,
            })
        })
        .collect();
    out.write_json(
        "fit_report",
        "fit_report.json",
        &serde_json::json!({ "method": cfg.fit.method, "spec": cfg.model, "chains": report }),
    )?;
    out.finish("fit", cfg, inputs)
}

fn load_fit(cfg: &RunConfig, inputs: &mut Vec<FileRecord>) -> Result<FitFile> {
    let path = cfg.fit_path();
    require(&path, "fit file")?;
    let bytes = read_input(&path, "fit", inputs)?;
    read_fit_file(bytes.as_slice()).map_err(|e| with_path(e, &path))
}

/// Trace, summary, network, dominance and convergence exports for a fit file.
pub fn cmd_diagnose(cfg: &RunConfig) -> Result<Outcome> {
    let mut inputs = Vec::new();
    let file = load_fit(cfg, &mut inputs)?;
    let ex = &cfg.export;
    let (actors, variables) = (&file.meta.actors, &file.meta.variables);
    let mut out = OutputDir::create(cfg.output_dir())?;

    if ex.trace {
        for (k, chain) in file.chains.iter().enumerate() {
            out.write_with("trace", &format!("trace_chain{k}.csv"), |buf| write_trace_csv(buf, chain))?;
        }
    }
    let summary = summarize_pooled(&file.chains)?;
    if ex.summary {
        out.write_with("summary", "summary.csv", |buf| write_summary_csv(buf, &summary))?;
    }
    if ex.b3_summary {
        out.write_with("b3_summary", "b3_summary.csv", |buf| write_b3_summary_csv(buf, &summary, variables))?;
    }
    let mut dominance = serde_json::Map::new();
    for which in [ActorMatrix::B1, ActorMatrix::B2] {
        let tag = which.as_str().to_lowercase();
        if ex.networks {
            let net = coefficient_network(&file.chains, which, ex.network_level)?;
            for (kind, edges) in [("positive", &net.positive), ("negative", &net.negative), ("diagonal", &net.diagonal)] {
                out.write_with("network", &format!("network_{tag}_{kind}.csv"), |buf| {
                    write_edges_csv(buf, edges, actors)
                })?;
            }
        }
        let ratio = diag_dominance(&file.chains, which)?;
        // JSON has no infinity; a null ratio means every off-diagonal mean is zero
        dominance.insert(tag, if ratio.is_finite() { ratio.into() } else { serde_json::Value::Null });
    }
    out.write_json("dominance", "dominance.json", &dominance)?;

    if ex.convergence {
        let len = file.chains[0].draws.len();
        if len >= MIN_CHAIN_LENGTH {
            let stats = convergence_stats(&file.chains)?;
            out.write_with("convergence", "convergence.csv", |buf| write_convergence_csv(buf, &stats))?;
        } else {
            log::warn!("diagnose: chain length {len} below {MIN_CHAIN_LENGTH}, convergence statistics skipped");
        }
    }
    out.finish("diagnose", cfg, inputs)
}

/// Entrywise mean of the draws of all chains.
fn pooled_mean(chains: &[FitResult]) -> Result<CoefficientSet> {
    let first = &chains[0];
    let (m, v) = (first.num_actors(), first.num_variables());
    let mut acc = vec![0.0; 2 * m * m + 3 * v * v + 1];
    let mut n = 0usize;
    for d in chains.iter().flat_map(|c| &c.draws) {
        for (a, x) in acc.iter_mut().zip(d.flatten()) {
            *a += x;
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidInput("fit file holds no draws".into()));
    }
    acc.iter_mut().for_each(|a| *a /= n as f64);
    CoefficientSet::unflatten(m, v, &acc, false)
}

fn write_rmse(
    out: &mut OutputDir,
    observed: &Tensor4,
    predicted: &Tensor4,
    actors: &[String],
    variables: &[String],
    json: bool,
) -> Result<()> {
    let table = rmse_per_dyad(observed, predicted)?;
    let grids = rmse_surface(&table);
    for g in &grids {
        let name = variables.get(g.variable).cloned().unwrap_or_else(|| g.variable.to_string());
        out.write_with("rmse", &format!("rmse_{name}.csv"), |buf| write_rmse_grid_csv(buf, g, actors))?;
    }
    if json {
        out.write_with("rmse", "rmse.json", |buf| write_rmse_grids_json(buf, &grids, actors, variables))?;
    }
    Ok(())
}

/// Per-dyad RMSE grids. With `predicted`, compares that container against the
/// panel directly; otherwise predicts the panel from the fit's pooled posterior mean.
pub fn cmd_evaluate(cfg: &RunConfig, predicted: Option<&Path>) -> Result<Outcome> {
    let mut inputs = Vec::new();
    let (series, panel_hash) = load_panel(cfg, &mut inputs)?;
    let mut out = OutputDir::create(cfg.output_dir())?;
    match predicted {
        Some(p) => {
            require(p, "predicted tensor")?;
            let bytes = read_input(p, "predicted", &mut inputs)?;
            let (pred, _) = read_container(bytes.as_slice()).map_err(|e| with_path(e, p))?;
            write_rmse(&mut out, series.data(), &pred, series.actors(), series.variables(), cfg.export.rmse_json)?;
        }
        None => {
            let file = load_fit(cfg, &mut inputs)?;
            let ctx: FitContext = serde_json::from_value(file.meta.context.clone())
                .map_err(|e| Error::Container {
                    path: Some(cfg.fit_path()),
                    detail: format!("fit context: {e}"),
                })?;
            if ctx.panel_sha256 != panel_hash {
                log::warn!("evaluate: panel differs from the one the fit was made on");
            }
            let (s, design) = prepare_design(&series, Some(&ctx.variables), &ctx.preprocess)?;
            let coef = pooled_mean(&file.chains)?;
            let yhat = predict(&design, &coef)?;
            write_rmse(&mut out, design.response(), &yhat, s.actors(), s.variables(), cfg.export.rmse_json)?;
        }
    }
    out.finish("evaluate", cfg, inputs)
}

/// Writes a tensor container with the given labels; used to hand predictions between runs.
pub fn write_tensor_file(path: &Path, tensor: &Tensor4, labels: Option<&Labels>) -> Result<()> {
    let mut buf = Vec::new();
    write_container(&mut buf, tensor, labels)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
