//! Subcommand bodies. Every JSON artifact shares one envelope: schema tag,
//! command, map name and hash, grid resolution, the resolved config and
//! the command's result.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use acim_core::grid_bv::{bv_norm, io as grid_io, lp_norm, mollify};
use acim_core::hypothesis::{check_all, HypothesisOptions};
use acim_core::map_model::REGISTRY;
use acim_core::open_dynamics::{open_comparison_with_field, plateau_exponent, positivity_radius};
use acim_core::spectral::{self, correlation_series, decay_rate_fit, lasota_yorke_check, DecaySeries, SpectralOptions};
use acim_core::transfer_op::{assemble_ulam, io as matrix_io, BoundaryDistanceField};
use acim_core::{Error, GridFunction, HypothesisReport, MapSpec, PiecewiseMap, UlamMatrix, UniformGrid};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{map_hash, RunConfig};
use crate::error::CliError;
use crate::funcs::Observable;
use crate::svg::{self, Panel};

pub const SCHEMA: &str = "acim-lab/1";

/// Everything a subcommand needs about the map and grid.
pub struct Context {
    pub cfg: RunConfig,
    pub spec: MapSpec,
    pub map: PiecewiseMap,
    pub hash: String,
    pub grid: UniformGrid,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let spec = cfg.map_spec()?;
        let map = spec.build()?;
        let grid = UniformGrid::new(map.dimension(), cfg.grid_n)?;
        fs::create_dir_all(&cfg.out_dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", cfg.out_dir.display())))?;
        Ok(Context {
            hash: map_hash(&spec),
            cfg,
            spec,
            map,
            grid,
        })
    }

    fn envelope(&self, command: &str, grid_n: Option<usize>, result: impl Serialize) -> Value {
        json!({
            "schema": SCHEMA,
            "command": command,
            "map": self.spec.name,
            "map_hash": self.hash,
            "dimension": self.grid.dim(),
            "grid_n": grid_n,
            "config": self.cfg,
            "result": result,
        })
    }

    fn write_json(&self, name: &str, command: &str, result: impl Serialize) -> Result<PathBuf, CliError> {
        let value = self.envelope(command, Some(self.grid.n()), result);
        write_value(&self.cfg.output(name), &value)
    }

    fn assemble(&self) -> Result<UlamMatrix, CliError> {
        Ok(assemble_ulam(&self.map, self.grid, self.cfg.assembly())?)
    }

    fn density(&self, a: &UlamMatrix) -> Result<spectral::Acim, CliError> {
        match spectral::acim(a, self.cfg.tol, self.cfg.max_iter) {
            Ok(out) => Ok(out),
            Err(Error::DensityNotConverged { iterations, residual, last }) => {
                // keep the last iterate so the run can be inspected
                write_csv(&self.cfg.output("density.csv"), &last)?;
                self.write_json(
                    "acim.json",
                    "acim",
                    json!({ "converged": false, "iterations": iterations, "residual": residual }),
                )?;
                Err(Error::DensityNotConverged { iterations, residual, last }.into())
            }
            Err(e) => Err(e.into()),
        }
    }

    /// The hypothesis report from `--hypotheses`, or a fresh one.
    fn hypotheses(&self) -> Result<HypothesisReport, CliError> {
        let Some(path) = &self.cfg.hypotheses else {
            return Ok(check_all(&self.map, &self.check_options())?);
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if let Some(hash) = value.get("map_hash").and_then(Value::as_str) {
            if hash != self.hash {
                return Err(CliError::Config(format!(
                    "{} was computed for a different map",
                    path.display()
                )));
            }
        }
        let body = value.get("result").cloned().unwrap_or(value);
        Ok(HypothesisReport::from_json(&body.to_string())?)
    }

    fn check_options(&self) -> HypothesisOptions {
        HypothesisOptions {
            seed: self.cfg.seed,
            samples: self.cfg.check_samples,
            lines: self.cfg.lines,
            ..Default::default()
        }
    }
}

fn write_value(path: &Path, value: &Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

fn write_csv(path: &Path, g: &GridFunction) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    grid_io::write_csv(g, &mut out).map_err(|e| CliError::Failed(e.to_string()))?;
    out.flush()?;
    Ok(())
}

fn read_density(path: &Path, grid: UniformGrid) -> Result<GridFunction, CliError> {
    let file = File::open(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(grid_io::read_csv(grid, BufReader::new(file))?)
}

pub fn maps_list() -> Result<(), CliError> {
    for (name, description) in REGISTRY {
        println!("{name:<14} {description}");
    }
    Ok(())
}

pub fn ulam_build(ctx: &Context) -> Result<(), CliError> {
    let a = ctx.assemble()?;
    let path = ctx.cfg.matrix_out.clone().unwrap_or_else(|| ctx.cfg.output("matrix.bin"));
    let mut out = BufWriter::new(File::create(&path)?);
    matrix_io::write_binary(&a, &mut out).map_err(|e| CliError::Failed(e.to_string()))?;
    out.flush()?;
    if ctx.cfg.coo {
        let mut out = BufWriter::new(File::create(ctx.cfg.output("matrix.csv"))?);
        matrix_io::write_coo(&a, &mut out).map_err(|e| CliError::Failed(e.to_string()))?;
        out.flush()?;
    }
    let escaped = a.escaped().iter().copied().fold(0.0, f64::max);
    ctx.write_json(
        "ulam.json",
        "ulam build",
        json!({
            "cells": a.size(),
            "nnz": a.nnz(),
            "dead_rows": a.dead_rows().len(),
            "max_escaped": escaped,
            "matrix": path,
        }),
    )?;
    Ok(())
}

pub fn acim(ctx: &Context) -> Result<(), CliError> {
    let a = ctx.assemble()?;
    let out = ctx.density(&a)?;
    write_csv(&ctx.cfg.output("density.csv"), &out.density)?;
    ctx.write_json(
        "acim.json",
        "acim",
        json!({
            "converged": true,
            "iterations": out.iterations,
            "residual": out.residual,
            "min": out.density.min(),
            "max": out.density.max(),
            "bv_norm": bv_norm(&out.density),
        }),
    )?;
    Ok(())
}

pub fn spectrum(ctx: &Context) -> Result<(), CliError> {
    let a = ctx.assemble()?;
    let opts = SpectralOptions {
        top: ctx.cfg.top,
        density_tol: ctx.cfg.tol,
        max_iter: ctx.cfg.max_iter,
        ..Default::default()
    };
    let report = spectral::analyze(&a, &opts)?;
    ctx.write_json("spectrum.json", "spectrum", &report)?;
    Ok(())
}

pub fn decay(ctx: &Context) -> Result<(), CliError> {
    let f = Observable::parse(&ctx.cfg.f)?.on_grid(ctx.grid)?;
    let g = Observable::parse(&ctx.cfg.g)?.on_grid(ctx.grid)?;
    let a = ctx.assemble()?;
    let h = ctx.density(&a)?.density;
    let correlations = correlation_series(&a, &f, &g, &h, ctx.cfg.n_max)?;
    let mut csv = String::from("n,c_n\n");
    for (n, c) in &correlations {
        csv.push_str(&format!("{n},{c:e}\n"));
    }
    fs::write(ctx.cfg.output("decay.csv"), csv)?;
    let sigma_hat = decay_rate_fit(&correlations[1..]).ok();
    ctx.write_json("decay.json", "decay", DecaySeries { correlations, sigma_hat })?;
    Ok(())
}

pub fn ly_check(ctx: &Context) -> Result<(), CliError> {
    let a = ctx.assemble()?;
    let sigma = match ctx.cfg.sigma {
        Some(s) => s,
        None => {
            let window = ctx.hypotheses()?.expansion.window_sum;
            if !(window > 0.0 && window < 1.0) {
                return Err(CliError::Config(format!(
                    "measured window sum {window} gives no admissible σ; pass --sigma"
                )));
            }
            window
        }
    };
    let r = lasota_yorke_check(&a, sigma, ctx.cfg.trials, ctx.cfg.n_max, ctx.cfg.seed)?;
    ctx.write_json("ly.json", "ly-check", &r)?;
    Ok(())
}

pub fn check(ctx: &Context) -> Result<(), CliError> {
    let report = check_all(&ctx.map, &ctx.check_options())?;
    let path = ctx.cfg.report.clone().unwrap_or_else(|| ctx.cfg.output("hypotheses.json"));
    // the checks do not depend on the grid
    write_value(&path, &ctx.envelope("check", None, &report))?;
    for (k, v) in report.verdicts.iter().enumerate() {
        println!("hypothesis {k}: {}", v.verdict);
    }
    Ok(())
}

pub fn open(ctx: &Context) -> Result<(), CliError> {
    let f = Observable::parse(&ctx.cfg.f)?.on_grid(ctx.grid)?;
    let nu = match ctx.cfg.nu {
        Some(nu) => nu,
        None => ctx
            .hypotheses()?
            .nu_default
            .ok_or_else(|| CliError::Config("the hypothesis report admits no ν; pass --nu".into()))?,
    };
    if ctx.cfg.eps.is_empty() {
        return Err(CliError::Config("need at least one --eps".into()));
    }
    let a = ctx.assemble()?;
    let field = BoundaryDistanceField::new(&ctx.map, ctx.grid);
    let runs = ctx
        .cfg
        .eps
        .iter()
        .map(|&eps| open_comparison_with_field(&a, &field, &f, eps, nu, ctx.cfg.n_max))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from("n");
    for r in &runs {
        csv.push_str(&format!(",eps={}", r.eps));
    }
    csv.push('\n');
    for k in 0..ctx.cfg.n_max {
        csv.push_str(&(k + 1).to_string());
        for r in &runs {
            csv.push_str(&format!(",{:e}", r.series[k].1));
        }
        csv.push('\n');
    }
    fs::write(ctx.cfg.output("open.csv"), csv)?;
    let exponent = plateau_exponent(&runs).ok();
    ctx.write_json("open.json", "open", json!({ "nu": nu, "runs": runs, "plateau_exponent": exponent }))?;
    Ok(())
}

pub fn positivity(ctx: &Context) -> Result<(), CliError> {
    let hyp = ctx.hypotheses()?;
    let a = ctx.assemble()?;
    let h = ctx.density(&a)?.density;
    let cert = positivity_radius(&a, &ctx.map, &h, &hyp)?;
    ctx.write_json("positivity.json", "positivity", &cert)?;
    Ok(())
}

pub fn regularize(ctx: &Context) -> Result<(), CliError> {
    let h = match &ctx.cfg.density {
        Some(path) => read_density(path, ctx.grid)?,
        None => ctx.density(&ctx.assemble()?)?.density,
    };
    let hd = mollify(&h, ctx.cfg.delta)?;
    write_csv(&ctx.cfg.output("regularized.csv"), &hd)?;
    ctx.write_json(
        "regularize.json",
        "regularize",
        json!({
            "delta": ctx.cfg.delta,
            "min": hd.min(),
            "bv_before": bv_norm(&h),
            "bv_after": bv_norm(&hd),
            "l1_change": lp_norm(&hd.sub(&h)?, 1.0),
        }),
    )?;
    Ok(())
}

/// Collects every artifact in the output directory into `summary.json`,
/// refusing mixtures of maps or grids.
pub fn report(out_dir: &Path, with_svg: bool) -> Result<(), CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(out_dir)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", out_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut artifacts = serde_json::Map::new();
    let mut hash: Option<(String, PathBuf)> = None;
    let mut grid: Option<(u64, PathBuf)> = None;
    let mut map = Value::Null;
    let mut dimension = Value::Null;
    for path in paths {
        let Ok(value) = serde_json::from_str::<Value>(&fs::read_to_string(&path)?) else {
            continue;
        };
        if value.get("schema").and_then(Value::as_str) != Some(SCHEMA) {
            continue;
        }
        let command = value["command"].as_str().unwrap_or_default().to_string();
        if command == "report" {
            continue;
        }
        let h = value["map_hash"].as_str().unwrap_or_default().to_string();
        match &hash {
            Some((seen, from)) if *seen != h => {
                return Err(CliError::Config(format!(
                    "{} and {} describe different maps",
                    from.display(),
                    path.display()
                )))
            }
            None => hash = Some((h, path.clone())),
            _ => {}
        }
        if let Some(n) = value["grid_n"].as_u64() {
            match &grid {
                Some((seen, from)) if *seen != n => {
                    return Err(CliError::Config(format!(
                        "{} uses N = {seen} but {} uses N = {n}",
                        from.display(),
                        path.display()
                    )))
                }
                None => grid = Some((n, path.clone())),
                _ => {}
            }
        }
        map = value["map"].clone();
        dimension = value["dimension"].clone();
        artifacts.insert(command, value["result"].clone());
    }
    let Some((hash, _)) = hash else {
        return Err(CliError::Config(format!("no artifacts in {}", out_dir.display())));
    };
    let grid_n = grid.as_ref().map(|g| g.0);
    let summary = json!({
        "schema": SCHEMA,
        "command": "report",
        "map": map,
        "map_hash": hash,
        "dimension": dimension,
        "grid_n": grid_n,
        "artifacts": artifacts,
    });
    write_value(&out_dir.join("summary.json"), &summary)?;

    if with_svg {
        let density = match (grid_n, dimension.as_u64()) {
            (Some(n), Some(d)) if out_dir.join("density.csv").is_file() => {
                let grid = UniformGrid::new(d as usize, n as usize)?;
                Some(read_density(&out_dir.join("density.csv"), grid)?)
            }
            _ => None,
        };
        let mut panels = Vec::new();
        if let Some(h) = &density {
            panels.push(Panel::Density {
                dim: h.grid().dim(),
                n: h.grid().n(),
                values: h.values(),
            });
        }
        if let Some(series) = artifacts.get("decay").and_then(|d| d["correlations"].as_array()) {
            let points = series
                .iter()
                .filter_map(|p| Some((p[0].as_f64()?, p[1].as_f64()?.abs())))
                .filter(|p| p.1 > 0.0)
                .map(|(n, c)| (n, c.log10()))
                .collect();
            panels.push(Panel::Series { title: "log10 |C_n|", points });
        }
        fs::write(out_dir.join("report.svg"), svg::render(&panels))?;
    }
    Ok(())
}
