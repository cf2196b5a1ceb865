use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use wismc::artifact::{read_matrix_csv, read_returns_csv, read_synthetic_csv, write_matrix_csv};
use wismc::market_data::ReturnSeries;
use wismc::statistics::{
    acf_distance, acf_returns, acf_squared, corr_matrix, render_table, reproduction_ratio, AcfReport,
    CrossCorrMatrix, RatioReport,
};

use super::{Options, SimulateManifest};
use crate::config::RunConfig;
use crate::error::{CliError, CliResult, Context};
use crate::layout::{open, read_json, write_file, Layout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfSummary {
    pub symbol: String,
    pub acf_squared_distance: f64,
    pub real_acf_squared_lag1: f64,
    pub synth_acf_squared_lag1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeSummary {
    pub acf: Vec<AcfSummary>,
    /// Present with two or more symbols.
    pub ratios: Option<RatioReport>,
}

/// Element-wise mean of ACF reports over replications.
fn mean_acf(reports: &[AcfReport]) -> AcfReport {
    let mut values = vec![0.0; reports[0].values.len()];
    for r in reports {
        for (a, b) in values.iter_mut().zip(&r.values) {
            *a += b / reports.len() as f64;
        }
    }
    AcfReport {
        lags: reports[0].lags.clone(),
        values,
        n_obs: reports[0].n_obs,
    }
}

fn write_acf(path: &Path, real: &AcfReport, synth: &AcfReport) -> CliResult<()> {
    write_file(path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| CliError::io(path, std::io::Error::other(e));
        wr.write_record(["lag", "real", "synth"]).map_err(io)?;
        for ((lag, r), s) in real.lags.iter().zip(&real.values).zip(&synth.values) {
            wr.write_record([lag.to_string(), r.to_string(), s.to_string()]).map_err(io)?;
        }
        wr.flush().map_err(|e| CliError::io(path, e))
    })
}

/// Text rendering of a ratio report.
pub fn render_comparison(real: &CrossCorrMatrix, synth: &CrossCorrMatrix, report: &RatioReport) -> String {
    let mut out = String::new();
    out.push_str("Real cross-correlation (x100)\n");
    out.push_str(&render_table(real));
    out.push_str("\nSynthetic cross-correlation (x100)\n");
    out.push_str(&render_table(synth));
    out.push_str(&format!("\nReproduction ratio synth/real (|real| >= {})\n", report.noise_floor));
    for p in &report.pairs {
        let ratio = p.ratio.map_or("-".to_string(), |r| format!("{r:.2}"));
        out.push_str(&format!(
            "{}-{}  real {:.2}  synth {:.2}  ratio {ratio}\n",
            p.symbol_a, p.symbol_b, p.real, p.synth
        ));
    }
    match report.median {
        Some(m) => out.push_str(&format!("median ratio {m:.2}\n")),
        None => out.push_str("median ratio -\n"),
    }
    out
}

/// Writes `comparison.csv` and `comparison.txt` into `dir` and returns the
/// text rendering.
pub fn write_comparison(
    dir: &Path,
    real: &CrossCorrMatrix,
    synth: &CrossCorrMatrix,
    report: &RatioReport,
) -> CliResult<String> {
    let csv_path = dir.join("comparison.csv");
    write_file(&csv_path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| CliError::io(&csv_path, std::io::Error::other(e));
        wr.write_record(["symbol_a", "symbol_b", "real", "synth", "ratio"]).map_err(io)?;
        for p in &report.pairs {
            wr.write_record([
                p.symbol_a.clone(),
                p.symbol_b.clone(),
                p.real.to_string(),
                p.synth.to_string(),
                p.ratio.map_or(String::new(), |r| r.to_string()),
            ])
            .map_err(io)?;
        }
        wr.flush().map_err(|e| CliError::io(&csv_path, e))
    })?;
    let text = render_comparison(real, synth, report);
    let txt_path = dir.join("comparison.txt");
    write_file(&txt_path, |w| w.write_all(text.as_bytes()).map_err(|e| CliError::io(&txt_path, e)))?;
    Ok(text)
}

/// Compares two correlation matrices from CSV files.
pub fn compare(real: &Path, synth: &Path, out_dir: Option<&Path>) -> CliResult<String> {
    let r = read_matrix_csv(open(real)?).context(|| real.display().to_string())?;
    let s = read_matrix_csv(open(synth)?).context(|| synth.display().to_string())?;
    let report = reproduction_ratio(&r, &s).context(|| "comparing matrices".into())?;
    match out_dir {
        Some(dir) => write_comparison(dir, &r, &s, &report),
        None => Ok(render_comparison(&r, &s, &report)),
    }
}

fn write_matrix(path: &Path, m: &CrossCorrMatrix) -> CliResult<()> {
    write_file(path, |w| write_matrix_csv(w, m).context(|| path.display().to_string()))
}

/// ACF reports per symbol and the real-vs-synthetic correlation comparison.
pub fn analyze(cfg: &RunConfig, opts: &Options) -> CliResult<AnalyzeSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let manifest: SimulateManifest = read_json(&layout.simulate_manifest())?;
    opts.check_hash("synthetic series", &manifest.config_hash, &cfg.config_hash())?;
    let names = cfg.symbol_names();
    let pool = opts.pool()?;

    let real: Vec<ReturnSeries> = pool.install(|| {
        names
            .par_iter()
            .map(|n| {
                let file = layout.returns(n);
                read_returns_csv(open(&file)?).context(|| file.display().to_string())
            })
            .collect::<CliResult<_>>()
    })?;
    // synth[rep][symbol]
    let synth: Vec<Vec<ReturnSeries>> = pool.install(|| {
        (0..manifest.replications)
            .into_par_iter()
            .map(|rep| {
                names
                    .iter()
                    .map(|n| {
                        let file = layout.synthetic(rep, n);
                        read_synthetic_csv(open(&file)?, cfg.states)
                            .map(|(_, r)| r)
                            .context(|| file.display().to_string())
                    })
                    .collect::<CliResult<Vec<_>>>()
            })
            .collect::<CliResult<_>>()
    })?;

    let mut acf = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let lag = cfg.max_lag;
        let real_sq = acf_squared(&real[k], lag).context(|| format!("ACF of {name}"))?;
        let real_r = acf_returns(&real[k], lag).context(|| format!("ACF of {name}"))?;
        let mut synth_sq = Vec::new();
        let mut synth_r = Vec::new();
        for rep in &synth {
            synth_sq.push(acf_squared(&rep[k], lag).context(|| format!("synthetic ACF of {name}"))?);
            synth_r.push(acf_returns(&rep[k], lag).context(|| format!("synthetic ACF of {name}"))?);
        }
        let synth_sq = mean_acf(&synth_sq);
        let synth_r = mean_acf(&synth_r);
        write_acf(&layout.report(&format!("acf_squared_{name}.csv")), &real_sq, &synth_sq)?;
        write_acf(&layout.report(&format!("acf_returns_{name}.csv")), &real_r, &synth_r)?;
        acf.push(AcfSummary {
            symbol: name.clone(),
            acf_squared_distance: acf_distance(&real_sq, &synth_sq, lag).context(|| name.clone())?,
            real_acf_squared_lag1: real_sq.values[1],
            synth_acf_squared_lag1: synth_sq.values[1],
        });
    }
    let acf_path = layout.report("acf_summary.csv");
    write_file(&acf_path, |w| {
        let mut wr = csv::Writer::from_writer(w);
        let io = |e: csv::Error| CliError::io(&acf_path, std::io::Error::other(e));
        for row in &acf {
            wr.serialize(row).map_err(io)?;
        }
        wr.flush().map_err(|e| CliError::io(&acf_path, e))
    })?;

    let ratios = if names.len() >= 2 {
        let labelled = |series: &[ReturnSeries]| -> Vec<(String, ReturnSeries)> {
            names.iter().cloned().zip(series.iter().cloned()).collect()
        };
        let real_m = corr_matrix(&labelled(&real)).context(|| "real cross-correlations".into())?;
        let mut synth_values = vec![0.0; real_m.values.len()];
        for (rep, series) in synth.iter().enumerate() {
            let m = corr_matrix(&labelled(series)).context(|| format!("synthetic cross-correlations, replication {rep}"))?;
            for (a, b) in synth_values.iter_mut().zip(&m.values) {
                *a += b / synth.len() as f64;
            }
        }
        let synth_m = CrossCorrMatrix::new(names.clone(), synth_values).context(|| "synthetic matrix".into())?;
        write_matrix(&layout.report("corr_real.csv"), &real_m)?;
        write_matrix(&layout.report("corr_synth.csv"), &synth_m)?;
        let report = reproduction_ratio(&real_m, &synth_m).context(|| "reproduction ratio".into())?;
        write_comparison(&layout.root().join("reports"), &real_m, &synth_m, &report)?;
        Some(report)
    } else {
        None
    };
    Ok(AnalyzeSummary { acf, ratios })
}
