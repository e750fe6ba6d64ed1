//! CSV and JSON exports. Floats are written with Rust's shortest round-trip
//! formatting, so identical inputs give byte-identical files.

use std::io::Write;

use serde::Serialize;

use super::convergence::ConvergenceStat;
use super::network::Edge;
use super::summary::{ParameterSummary, PosteriorSummary, QUANTILE_LEVELS};
use crate::design::slice_block;
use crate::estimation::{FitResult, RmseTable};
use crate::error::{Error, Result};

fn num(x: f64) -> String {
    format!("{x:?}")
}

/// `names[i]`, or the index itself when no labels are available.
fn label(names: &[String], i: usize) -> String {
    names.get(i).cloned().unwrap_or_else(|| i.to_string())
}

fn quantile_headers() -> Vec<String> {
    QUANTILE_LEVELS.iter().map(|p| format!("q{}", p * 100.0)).collect()
}

fn summary_fields(p: &ParameterSummary) -> Vec<String> {
    let mut row = vec![num(p.mean), num(p.sd)];
    row.extend(p.quantiles.iter().map(|&q| num(q)));
    row.extend([p.flag_90, p.flag_95, p.flag_99].map(|f| f.to_string()));
    row
}

fn summary_headers(lead: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = lead.iter().map(|s| s.to_string()).collect();
    h.extend(["mean".to_string(), "sd".to_string()]);
    h.extend(quantile_headers());
    h.extend(["flag_90", "flag_95", "flag_99"].map(String::from));
    h
}

/// Every parameter: `parameter, mean, sd, quantiles..., flag_90, flag_95, flag_99`.
pub fn write_summary_csv<W: Write>(out: W, summary: &PosteriorSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(summary_headers(&["parameter"]))?;
    for p in &summary.parameters {
        let mut row = vec![p.name.clone()];
        row.extend(summary_fields(p));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io("<summary csv>", e))?;
    Ok(())
}

/// B3 entries with their block and variables:
/// `parameter, response, block, variable, mean, sd, quantiles..., flags...`.
/// `response` is the modelled variable (row), `variable` the lagged one (column).
pub fn write_b3_summary_csv<W: Write>(out: W, summary: &PosteriorSummary, variables: &[String]) -> Result<()> {
    let v = summary.num_variables;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(summary_headers(&["parameter", "response", "block", "variable"]))?;
    for u in 0..v {
        for c in 0..3 * v {
            let p = summary.b3(u, c);
            let (block, var) = slice_block(c, v);
            let mut row = vec![p.name.clone(), label(variables, u), block.to_string(), label(variables, var)];
            row.extend(summary_fields(p));
            w.write_record(row)?;
        }
    }
    w.flush().map_err(|e| Error::io("<b3 csv>", e))?;
    Ok(())
}

/// `source, target, mean, lo, hi` with actor labels.
pub fn write_edges_csv<W: Write>(out: W, edges: &[Edge], actors: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "target", "mean", "lo", "hi"])?;
    for e in edges {
        w.write_record([
            label(actors, e.source),
            label(actors, e.target),
            num(e.mean),
            num(e.lo),
            num(e.hi),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<edge csv>", e))?;
    Ok(())
}

/// `iteration, parameter, value` for B3 and sigma2 over all iterations,
/// burn-in included, numbered from 1.
pub fn write_trace_csv<W: Write>(out: W, fit: &FitResult) -> Result<()> {
    let v = fit.num_variables();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "parameter", "value"])?;
    let states = fit
        .warmup
        .iter()
        .map(|(b3, s2)| (b3, *s2))
        .chain(fit.draws.iter().map(|c| (&c.b3, c.sigma2)));
    for (it, (b3, sigma2)) in states.enumerate() {
        let it = (it + 1).to_string();
        for u in 0..v {
            for c in 0..3 * v {
                w.write_record([it.as_str(), &format!("B3[{u},{c}]"), &num(b3.get(u, c))])?;
            }
        }
        w.write_record([it.as_str(), "sigma2", &num(sigma2)])?;
    }
    w.flush().map_err(|e| Error::io("<trace csv>", e))?;
    Ok(())
}

/// `parameter, rhat, ess, note`.
pub fn write_convergence_csv<W: Write>(out: W, stats: &[ConvergenceStat]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["parameter", "rhat", "ess", "note"])?;
    for s in stats {
        w.write_record([
            s.parameter.as_str(),
            &num(s.rhat),
            &num(s.ess),
            s.note.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<convergence csv>", e))?;
    Ok(())
}

/// Per-dyad RMSE of one variable as an `m × m` grid, rows senders, columns
/// receivers, diagonal empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RmseGrid {
    pub variable: usize,
    pub num_actors: usize,
    pub values: Vec<Vec<Option<f64>>>,
}

impl RmseGrid {
    pub fn get(&self, sender: usize, receiver: usize) -> Option<f64> {
        self.values[sender][receiver]
    }

    pub fn filled(&self) -> usize {
        self.values.iter().flatten().filter(|x| x.is_some()).count()
    }
}

/// One grid per variable.
pub fn rmse_surface(table: &RmseTable) -> Vec<RmseGrid> {
    let m = table.num_actors;
    (0..table.num_variables)
        .map(|w| {
            let mut values = vec![vec![None; m]; m];
            for &(i, j, _, r) in table.for_variable(w) {
                values[i][j] = Some(r);
            }
            RmseGrid {
                variable: w,
                num_actors: m,
                values,
            }
        })
        .collect()
}

/// Header `sender, <receiver labels...>`, one row per sender, empty diagonal cells.
pub fn write_rmse_grid_csv<W: Write>(out: W, grid: &RmseGrid, actors: &[String]) -> Result<()> {
    let m = grid.num_actors;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["sender".to_string()];
    header.extend((0..m).map(|j| label(actors, j)));
    w.write_record(header)?;
    for (i, row) in grid.values.iter().enumerate() {
        let mut rec = vec![label(actors, i)];
        rec.extend(row.iter().map(|x| x.map(num).unwrap_or_default()));
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io("<rmse csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct LabeledGrid<'a> {
    variable: String,
    actors: Vec<String>,
    rmse: &'a [Vec<Option<f64>>],
}

/// JSON form of the grids: `[{variable, actors, rmse: [[...]]}]`, `null` on the diagonal.
pub fn write_rmse_grids_json<W: Write>(out: W, grids: &[RmseGrid], actors: &[String], variables: &[String]) -> Result<()> {
    let labeled: Vec<LabeledGrid> = grids
        .iter()
        .map(|g| LabeledGrid {
            variable: label(variables, g.variable),
            actors: (0..g.num_actors).map(|i| label(actors, i)).collect(),
            rmse: &g.values,
        })
        .collect();
    serde_json::to_writer_pretty(out, &labeled)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::rmse_per_dyad;
    use crate::tensor::Tensor4;

    #[test]
    fn grid_has_empty_diagonal() {
        let obs = Tensor4::from_fn([4, 4, 2, 3], |i, j, w, t| if i == j { 0.0 } else { (i + 2 * j + w + t) as f64 });
        let pred = Tensor4::zeros([4, 4, 2, 3]);
        let grids = rmse_surface(&rmse_per_dyad(&obs, &pred).unwrap());
        assert_eq!(grids.len(), 2);
        for g in &grids {
            assert_eq!(g.filled(), 12);
            assert!((0..4).all(|i| g.get(i, i).is_none()));
        }
        let mut buf = Vec::new();
        write_rmse_grid_csv(&mut buf, &grids[0], &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sender,0,1,2,3");
        assert!(lines[1].starts_with("0,,"));
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn identical_tensors_give_zero_grid() {
        let obs = Tensor4::from_fn([3, 3, 1, 4], |i, j, _, t| if i == j { 0.0 } else { t as f64 });
        let g = &rmse_surface(&rmse_per_dyad(&obs, &obs).unwrap())[0];
        assert!(g.values.iter().flatten().flatten().all(|&x| x == 0.0));
    }
}
