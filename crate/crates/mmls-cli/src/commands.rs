//! Subcommand implementations: dataset generation, fitting, projection and
//! the experiment drivers, all writing deterministic CSV/JSON artifacts.

use crate::config::KeyValues;
use crate::CliError;
use mmls::approximator::{approximate_batch, batch_config, project_batch, SampleSet};
use mmls::datasets::{gen_helix, gen_klein, gen_sphere_grid, NoiseModel, SigmaField};
use mmls::error::MmlsError;
use mmls::harness::{
    run_convergence, run_helix_demo, run_klein_with, run_loo_cv, run_scaling, BenchReport,
    ConvergenceReport, HelixSetup, ScalingReport,
};
use mmls::io::{
    fmt_f64, read_queries_csv, read_samples_csv, write_predictions_csv, write_queries_csv,
    write_samples_csv,
};
use mmls::nalgebra::DVector;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

fn numerical(e: MmlsError) -> CliError {
    CliError::Numerical(e.to_string())
}

fn io_err(context: &str, e: std::io::Error) -> CliError {
    CliError::Numerical(format!("{context}: {e}"))
}

fn open_samples(path: &str) -> Result<SampleSet, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot open samples file '{path}': {e}")))?;
    read_samples_csv(BufReader::new(file)).map_err(|e| CliError::Parse(format!("{path}: {e}")))
}

fn open_queries(path: &str) -> Result<Vec<DVector<f64>>, CliError> {
    let file = File::open(path)
        .map_err(|e| CliError::Usage(format!("cannot open queries file '{path}': {e}")))?;
    read_queries_csv(BufReader::new(file)).map_err(|e| CliError::Parse(format!("{path}: {e}")))
}

fn out_dir(kv: &KeyValues) -> Result<PathBuf, CliError> {
    Ok(PathBuf::from(kv.require("out")?))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| io_err(&format!("cannot create '{}'", path.display()), e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)
        .map_err(|e| CliError::Numerical(format!("cannot serialize report: {e}")))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gen
// ---------------------------------------------------------------------------

pub fn cmd_gen(dataset: &str, kv: &KeyValues) -> Result<(), CliError> {
    let out = kv.require("out")?;
    let seed = kv.seed()?;
    let samples = match dataset {
        "helix" => {
            let n = kv.usize("n")?.unwrap_or(1000);
            let t_min = kv.f64("t-min")?.unwrap_or(-2.0 * std::f64::consts::PI);
            let t_max = kv.f64("t-max")?.unwrap_or(2.0 * std::f64::consts::PI);
            let sigma_domain = match kv.get("sigma-domain") {
                None => SigmaField::Constant(0.0),
                Some("z") => SigmaField::ZScaled { base: 8.0 },
                Some(v) => SigmaField::Constant(v.parse::<f64>().map_err(|_| {
                    CliError::Usage(format!(
                        "option --sigma-domain: '{v}' is not a number or 'z'"
                    ))
                })?),
            };
            let noise = NoiseModel {
                sigma_domain,
                sigma_target: kv.f64("sigma-target")?.unwrap_or(0.0),
                seed,
            };
            gen_helix(n, (t_min, t_max), &noise).map_err(numerical)?
        }
        "sphere" => {
            let g = kv.usize("g")?.unwrap_or(20);
            let noise = NoiseModel {
                sigma_domain: SigmaField::Constant(kv.f64("sigma-domain")?.unwrap_or(0.0)),
                sigma_target: kv.f64("sigma-target")?.unwrap_or(0.0),
                seed,
            };
            gen_sphere_grid(g, &noise).map_err(numerical)?
        }
        "klein" => {
            let n = kv.usize("n")?.unwrap_or(1500);
            let sigma_r = kv.f64("sigma-r")?.unwrap_or(0.0);
            let snrdb = match kv.get("snrdb") {
                None | Some("inf") => f64::INFINITY,
                Some(v) => v.parse::<f64>().map_err(|_| {
                    CliError::Usage(format!("option --snrdb: '{v}' is not a number or 'inf'"))
                })?,
            };
            gen_klein(n, sigma_r, snrdb, seed).map_err(numerical)?.0
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown dataset '{other}' (expected helix, sphere or klein)"
            )))
        }
    };
    let file =
        File::create(out).map_err(|e| io_err(&format!("cannot create '{out}'"), e))?;
    write_samples_csv(BufWriter::new(file), &samples)
        .map_err(|e| io_err("cannot write samples", e))?;
    if let Some(parent) = Path::new(out).parent() {
        if !parent.as_os_str().is_empty() {
            kv.write_echo(&format!("gen {dataset}"), parent)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// fit-eval / project
// ---------------------------------------------------------------------------

pub fn cmd_fit_eval(kv: &KeyValues, project: bool) -> Result<(), CliError> {
    let samples = open_samples(kv.require("samples")?)?;
    let queries = open_queries(kv.require("queries")?)?;
    if let Some(q) = queries.first() {
        if q.len() != samples.ambient_dim() {
            return Err(CliError::Parse(format!(
                "queries have dimension {}, samples have {}",
                q.len(),
                samples.ambient_dim()
            )));
        }
    }
    let cfg = kv.approx_config()?;
    let out = kv.require("out")?;

    let results = if project {
        project_batch(&queries, &samples, &cfg)
    } else {
        approximate_batch(&queries, &samples, &cfg)
    };
    let n_out = if project {
        samples.ambient_dim()
    } else {
        samples.value_dim()
    };

    let file = File::create(out).map_err(|e| io_err(&format!("cannot create '{out}'"), e))?;
    write_predictions_csv(BufWriter::new(file), &results, n_out)
        .map_err(|e| io_err("cannot write predictions", e))?;

    if let Some(dump) = kv.get("dump-frames") {
        dump_frames(dump, &queries, &samples, &cfg)?;
    }

    let echo_path = PathBuf::from(format!("{out}.config"));
    std::fs::write(
        &echo_path,
        kv.render(if project { "project" } else { "fit-eval" }),
    )
    .map_err(|e| io_err("cannot write config echo", e))?;
    Ok(())
}

/// Long-format CSV of per-query frame diagnostics: origin, basis columns and
/// the iteration step norms.
fn dump_frames(
    path: &str,
    queries: &[DVector<f64>],
    samples: &SampleSet,
    cfg: &mmls::approximator::ApproxConfig,
) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| io_err(&format!("cannot create '{path}'"), e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "query,kind,index,values").map_err(|e| io_err("frame dump", e))?;
    for (i, q) in queries.iter().enumerate() {
        match mmls::approximator::approximate_detailed(q, samples, &batch_config(cfg, i)) {
            Ok(outcome) => {
                if let Some(sol) = &outcome.frame {
                    let fmt_row = |vals: Vec<String>| vals.join(";");
                    let origin: Vec<String> =
                        sol.frame.origin().iter().map(|&v| fmt_f64(v)).collect();
                    writeln!(w, "{i},origin,0,{}", fmt_row(origin))
                        .map_err(|e| io_err("frame dump", e))?;
                    for c in 0..sol.frame.chart_dim() {
                        let col: Vec<String> = sol
                            .frame
                            .basis()
                            .column(c)
                            .iter()
                            .map(|&v| fmt_f64(v))
                            .collect();
                        writeln!(w, "{i},basis,{c},{}", fmt_row(col))
                            .map_err(|e| io_err("frame dump", e))?;
                    }
                    let steps: Vec<String> =
                        sol.trace.step_norms.iter().map(|&v| fmt_f64(v)).collect();
                    writeln!(w, "{i},trace,0,{}", fmt_row(steps))
                        .map_err(|e| io_err("frame dump", e))?;
                }
            }
            Err(e) => {
                writeln!(w, "{i},error,0,{}", e.to_string().replace(',', ";"))
                    .map_err(|e| io_err("frame dump", e))?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// convergence
// ---------------------------------------------------------------------------

pub fn cmd_convergence(kv: &KeyValues) -> Result<(), CliError> {
    let dir = out_dir(kv)?;
    let m = kv.usize("m")?.unwrap_or(1);
    let sides = kv
        .usize_list("resolutions")?
        .unwrap_or_else(|| vec![20, 30, 40, 50]);
    let query_count = kv.usize("query-count")?.unwrap_or(200);
    let seed = kv.seed()?;
    let report = run_convergence(m, &sides, query_count, seed).map_err(numerical)?;
    kv.write_echo("convergence", &dir)?;
    write_json(&dir.join("report.json"), &report)?;
    write_convergence_csv(&dir.join("report.csv"), &report)?;
    Ok(())
}

fn write_convergence_csv(path: &Path, report: &ConvergenceReport) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| io_err(&format!("cannot create '{}'", path.display()), e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(
            w,
            "# convergence m={} seed={} slope={} stderr={}",
            report.degree,
            report.base_seed,
            fmt_f64(report.slope),
            fmt_f64(report.slope_stderr)
        )?;
        writeln!(w, "grid_side,n,h_proxy,h_est,max_err,status")?;
        for e in &report.entries {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                e.grid_side,
                e.n,
                fmt_f64(e.h_proxy),
                fmt_f64(e.h_est),
                e.max_err.map(fmt_f64).unwrap_or_default(),
                e.failure.clone().unwrap_or_else(|| "ok".into()).replace(',', ";")
            )?;
        }
        writeln!(w, "# pairs")?;
        writeln!(w, "log_h_ratio,log_err_ratio")?;
        for p in &report.pairs {
            writeln!(w, "{},{}", fmt_f64(p.log_h_ratio), fmt_f64(p.log_err_ratio))?;
        }
        Ok(())
    })()
    .map_err(|e| io_err("cannot write convergence report", e))
}

// ---------------------------------------------------------------------------
// klein-bench / loo-cv
// ---------------------------------------------------------------------------

pub fn cmd_klein(kv: &KeyValues) -> Result<(), CliError> {
    let dir = out_dir(kv)?;
    let n = kv.usize("n")?.unwrap_or(1500);
    let snrdb = match kv.get("snrdb") {
        None => 5.0,
        Some("inf") => f64::INFINITY,
        Some(v) => v.parse::<f64>().map_err(|_| {
            CliError::Usage(format!("option --snrdb: '{v}' is not a number or 'inf'"))
        })?,
    };
    let sigma_r = kv.f64("sigma-r")?.unwrap_or(0.0);
    let m = kv.usize("m")?.unwrap_or(1);
    let trials = kv.usize("trials")?.unwrap_or(20);
    let test_count = kv.usize("test-count")?.unwrap_or(500);
    let seed = kv.seed()?;
    let report =
        run_klein_with(n, snrdb, sigma_r, m, trials, seed, test_count).map_err(numerical)?;
    kv.write_echo("klein-bench", &dir)?;
    finish_bench(&dir, &report)
}

pub fn cmd_loo(kv: &KeyValues) -> Result<(), CliError> {
    let dir = out_dir(kv)?;
    let samples = open_samples(kv.require("samples")?)?;
    let cfg = kv.approx_config()?;
    let report = run_loo_cv(&samples, &cfg).map_err(numerical)?;
    kv.write_echo("loo-cv", &dir)?;
    finish_bench(&dir, &report)
}

fn finish_bench(dir: &Path, report: &BenchReport) -> Result<(), CliError> {
    write_json(&dir.join("report.json"), report)?;
    let path = dir.join("report.csv");
    let file = File::create(&path)
        .map_err(|e| io_err(&format!("cannot create '{}'", path.display()), e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(
            w,
            "# {} mean={} std={}",
            report.label,
            fmt_f64(report.mean),
            fmt_f64(report.std)
        )?;
        writeln!(w, "trial,seed,error,skipped")?;
        for (i, t) in report.trials.iter().enumerate() {
            writeln!(w, "{i},{},{},{}", t.seed, fmt_f64(t.error), t.skipped)?;
        }
        Ok(())
    })()
    .map_err(|e| io_err("cannot write bench report", e))?;
    let timing = dir.join("timing.csv");
    std::fs::write(
        timing,
        format!(
            "phase,seconds\ngenerate,{}\nevaluate,{}\ntotal,{}\n",
            report.wall.generate_s, report.wall.evaluate_s, report.wall.total_s
        ),
    )
    .map_err(|e| io_err("cannot write timing", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// scaling
// ---------------------------------------------------------------------------

pub fn cmd_scaling(kv: &KeyValues) -> Result<(), CliError> {
    let dir = out_dir(kv)?;
    let n_list = kv
        .usize_list("n-list")?
        .unwrap_or_else(|| vec![10_000, 20_000]);
    let n_samples = kv.usize("n-samples")?.unwrap_or(2000);
    let d = kv.usize("d")?.unwrap_or(1);
    let m = kv.usize("m")?.unwrap_or(1);
    let query_count = kv.usize("query-count")?.unwrap_or(30);
    let seed = kv.seed()?;
    let report =
        run_scaling(&n_list, n_samples, d, m, query_count, seed).map_err(numerical)?;
    kv.write_echo("scaling", &dir)?;
    write_json(&dir.join("report.json"), &report)?;
    write_scaling_csvs(&dir, &report)
}

fn write_scaling_csvs(dir: &Path, report: &ScalingReport) -> Result<(), CliError> {
    let pred_path = dir.join("predictions.csv");
    let file = File::create(&pred_path)
        .map_err(|e| io_err(&format!("cannot create '{}'", pred_path.display()), e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "n_ambient,query_index,prediction")?;
        for entry in &report.entries {
            for (i, p) in entry.predictions.iter().enumerate() {
                writeln!(w, "{},{},{}", entry.n_ambient, i, fmt_f64(*p))?;
            }
        }
        Ok(())
    })()
    .map_err(|e| io_err("cannot write scaling predictions", e))?;

    let timing = dir.join("timing.csv");
    let mut text = String::from("n_ambient,median_query_s,mean_query_s\n");
    for entry in &report.entries {
        text.push_str(&format!(
            "{},{},{}\n",
            entry.n_ambient, entry.median_query_s, entry.mean_query_s
        ));
    }
    std::fs::write(timing, text).map_err(|e| io_err("cannot write timing", e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// helix-demo
// ---------------------------------------------------------------------------

pub fn cmd_helix_demo(kv: &KeyValues) -> Result<(), CliError> {
    let dir = out_dir(kv)?;
    let seed = kv.seed()?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| io_err(&format!("cannot create '{}'", dir.display()), e))?;
    let report = run_helix_demo(seed).map_err(numerical)?;
    kv.write_echo("helix-demo", &dir)?;

    // Regenerate the training sets so they can be written alongside the
    // predictions (the demo seeds are derived deterministically).
    let t_range = (-2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI);
    let noise_a = NoiseModel {
        sigma_domain: SigmaField::Constant(0.0),
        sigma_target: mmls::harness::HELIX_SIGMA_TARGET,
        seed: mmls::derive_seed(seed, 1),
    };
    let train_a = gen_helix(report.train_count, t_range, &noise_a).map_err(numerical)?;
    let noise_b = NoiseModel {
        sigma_domain: SigmaField::ZScaled { base: 8.0 },
        sigma_target: mmls::harness::HELIX_SIGMA_TARGET,
        seed: mmls::derive_seed(seed, 3),
    };
    let train_b = gen_helix(report.train_count, t_range, &noise_b).map_err(numerical)?;

    write_set(&dir.join("samples_a.csv"), &train_a)?;
    write_set(&dir.join("samples_b.csv"), &train_b)?;
    write_rows(&dir.join("queries_a.csv"), &report.value_noise_only)?;
    write_rows(&dir.join("queries_b.csv"), &report.domain_and_value_noise)?;
    write_setup_predictions(&dir.join("predictions_a.csv"), &report.value_noise_only)?;
    write_setup_predictions(&dir.join("predictions_b.csv"), &report.domain_and_value_noise)?;
    write_projections(&dir.join("projections_b.csv"), &report.domain_and_value_noise)?;
    write_json(&dir.join("summary.json"), &report)?;
    Ok(())
}

fn write_set(path: &Path, set: &SampleSet) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| io_err(&format!("cannot create '{}'", path.display()), e))?;
    write_samples_csv(BufWriter::new(file), set).map_err(|e| io_err("cannot write samples", e))
}

fn write_rows(path: &Path, setup: &HelixSetup) -> Result<(), CliError> {
    let queries: Vec<DVector<f64>> = setup
        .rows
        .iter()
        .map(|r| DVector::from_row_slice(&r.query))
        .collect();
    let file = File::create(path)
        .map_err(|e| io_err(&format!("cannot create '{}'", path.display()), e))?;
    write_queries_csv(BufWriter::new(file), &queries)
        .map_err(|e| io_err("cannot write queries", e))
}

// Mirrors the fit-eval prediction layout exactly, so feeding the demo's
// sample and query files back through fit-eval reproduces this file.
fn write_setup_predictions(path: &Path, setup: &HelixSetup) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| io_err(&format!("cannot create '{}'", path.display()), e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "f1,status")?;
        for row in &setup.rows {
            match row.psi_hat {
                Some(v) => writeln!(w, "{},ok", fmt_f64(v))?,
                None => writeln!(w, ",{}", row.status.replace(',', ";"))?,
            }
        }
        Ok(())
    })()
    .map_err(|e| io_err("cannot write predictions", e))
}

fn write_projections(path: &Path, setup: &HelixSetup) -> Result<(), CliError> {
    let file = File::create(path)
        .map_err(|e| io_err(&format!("cannot create '{}'", path.display()), e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "x1,x2,x3,status")?;
        for row in &setup.rows {
            match &row.projection {
                Some(p) => writeln!(
                    w,
                    "{},{},{},ok",
                    fmt_f64(p[0]),
                    fmt_f64(p[1]),
                    fmt_f64(p[2])
                )?,
                None => writeln!(w, ",,,{}", row.status.replace(',', ";"))?,
            }
        }
        Ok(())
    })()
    .map_err(|e| io_err("cannot write projections", e))
}
