//! Sweep execution and the three result files.

use crate::config::{RunConfig, SweepPoint};
use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use snpd_core::sim::{run_scenario, Metrics, TraceSource};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const CSV_FILE: &str = "results.csv";
pub const JSON_FILE: &str = "summary.json";
pub const REPORT_FILE: &str = "report.txt";
pub const CONFIG_FILE: &str = "config.toml";

#[derive(Debug, Clone, Serialize)]
pub struct PointResult {
    pub point: SweepPoint,
    pub metrics: Metrics,
}

/// Runs every point on the current rayon pool; results come back in point order.
pub fn run_points(points: &[SweepPoint]) -> Result<Vec<PointResult>> {
    points
        .par_iter()
        .map(|p| {
            log::info!("point {} {}", p.index, p.label());
            let metrics =
                run_scenario(&p.config).with_context(|| format!("sweep point {}", p.index))?;
            Ok(PointResult {
                point: p.clone(),
                metrics,
            })
        })
        .collect()
}

/// One CSV row. The column set is fixed whatever the sweep axes are.
#[derive(Serialize)]
struct Row {
    point: usize,
    sweep: String,
    base_seed: u64,
    seed: u64,
    trace: String,
    strategy: String,
    adversary_ratio: f64,
    group_size: usize,
    range: f64,
    eps_p: f64,
    eps_r: f64,
    mismatch_threshold: f64,
    verifier_ratio: f64,
    loss_probability: f64,
    rounds: usize,
    correct_responders: usize,
    adversary_responders: usize,
    correct_faulty: usize,
    correct_unverifiable: usize,
    adversary_verified: usize,
    adversary_unverifiable: usize,
    false_negative_rate: f64,
    false_positive_rate: f64,
    unverifiable_correct_rate: f64,
    unverifiable_adversary_rate: f64,
    degree_mean: f64,
    degree_variance: f64,
}

fn trace_label(t: &TraceSource) -> String {
    match t {
        TraceSource::File(p) => p.display().to_string(),
        TraceSource::Synthetic(s) => format!("synthetic:{}x{}:{}", s.width, s.height, s.nodes),
    }
}

/// CSV with the resolved configuration as leading `#` comment lines.
pub fn render_csv(run: &RunConfig, results: &[PointResult]) -> Result<Vec<u8>> {
    let header: String = run.to_toml().lines().map(|l| format!("# {l}\n")).collect();
    let mut w = csv::Writer::from_writer(header.into_bytes());
    for r in results {
        let (c, m) = (&r.point.config, &r.metrics);
        w.serialize(Row {
            point: r.point.index,
            sweep: r.point.label(),
            base_seed: run.scenario.seed,
            seed: c.seed,
            trace: trace_label(&c.trace),
            strategy: c.adversary.strategy.to_string(),
            adversary_ratio: c.adversary.ratio,
            group_size: c.adversary.group_size,
            range: c.params.range,
            eps_p: c.params.eps_p,
            eps_r: c.params.eps_r,
            mismatch_threshold: c.params.mismatch_threshold,
            verifier_ratio: c.verifier_ratio,
            loss_probability: c.loss_probability,
            rounds: m.rounds,
            correct_responders: m.correct_responders,
            adversary_responders: m.adversary_responders,
            correct_faulty: m.correct_faulty,
            correct_unverifiable: m.correct_unverifiable,
            adversary_verified: m.adversary_verified,
            adversary_unverifiable: m.adversary_unverifiable,
            false_negative_rate: m.false_negative_rate,
            false_positive_rate: m.false_positive_rate,
            unverifiable_correct_rate: m.unverifiable_correct_rate,
            unverifiable_adversary_rate: m.unverifiable_adversary_rate,
            degree_mean: m.degree_mean,
            degree_variance: m.degree_variance,
        })?;
    }
    w.into_inner()
        .map_err(|e| anyhow::anyhow!("flushing CSV: {e}"))
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a RunConfig,
    points: &'a [PointResult],
}

pub fn render_json(run: &RunConfig, results: &[PointResult]) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(&Summary {
        config: run,
        points: results,
    })?;
    out.push(b'\n');
    Ok(out)
}

pub fn render_report(run: &RunConfig, results: &[PointResult]) -> String {
    let mut s = String::new();
    let c = &run.scenario;
    let _ = writeln!(s, "SNPD run report");
    let _ = writeln!(s, "trace      {}", trace_label(&c.trace));
    let _ = writeln!(
        s,
        "adversary  {} ratio {} group {}",
        c.adversary.strategy, c.adversary.ratio, c.adversary.group_size
    );
    let _ = writeln!(
        s,
        "params     R {} m, eps_p {} m, eps_r {} m, delta {}",
        c.params.range, c.params.eps_p, c.params.eps_r, c.params.mismatch_threshold
    );
    let _ = writeln!(
        s,
        "verifiers  {} of nodes per snapshot, loss {}",
        c.verifier_ratio, c.loss_probability
    );
    let _ = writeln!(s, "seed       {}, {} point(s)", c.seed, results.len());
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:>5}  {:>7} {:>7} {:>7} {:>7}  {:>8} {:>8} {:>7}  sweep",
        "point", "FN", "FP", "U_corr", "U_adv", "correct", "adv", "degree"
    );
    for r in results {
        let m = &r.metrics;
        let _ = writeln!(
            s,
            "{:>5}  {:>7.4} {:>7.4} {:>7.4} {:>7.4}  {:>8} {:>8} {:>7.2}  {}",
            r.point.index,
            m.false_negative_rate,
            m.false_positive_rate,
            m.unverifiable_correct_rate,
            m.unverifiable_adversary_rate,
            m.correct_responders,
            m.adversary_responders,
            m.degree_mean,
            r.point.label()
        );
    }
    s
}

/// Writes the CSV, JSON summary, text report and config echo into `dir`.
pub fn write_outputs(dir: &Path, run: &RunConfig, results: &[PointResult]) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let files: [(&str, Vec<u8>); 4] = [
        (CSV_FILE, render_csv(run, results)?),
        (JSON_FILE, render_json(run, results)?),
        (REPORT_FILE, render_report(run, results).into_bytes()),
        (CONFIG_FILE, run.to_toml().into_bytes()),
    ];
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RunConfig {
        RunConfig::from_toml(
            r#"
            verifier_ratio = 0.2
            [trace.synthetic]
            nodes = 30
            width = 600.0
            height = 600.0
            road_spacing = 100.0
            duration = 2.0
            [adversary]
            ratio = 0.1
            [[sweep]]
            parameter = "params.range"
            values = [100.0, 250.0]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn csv_has_header_comment_and_one_row_per_point() {
        let run = tiny();
        let results = run_points(&run.points().unwrap()).unwrap();
        let text = String::from_utf8(render_csv(&run, &results).unwrap()).unwrap();
        let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(data.len(), 3);
        assert!(data[0].starts_with("point,sweep,base_seed,seed,trace,strategy,"));
        assert!(data[0].ends_with("degree_mean,degree_variance"));
        assert!(text.starts_with("# "));
        assert!(data[2].contains("params.range=250"));
    }

    #[test]
    fn outputs_repeat_byte_for_byte() {
        let run = tiny();
        let a = run_points(&run.points().unwrap()).unwrap();
        let b = run_points(&run.points().unwrap()).unwrap();
        assert_eq!(render_csv(&run, &a).unwrap(), render_csv(&run, &b).unwrap());
        assert_eq!(
            render_json(&run, &a).unwrap(),
            render_json(&run, &b).unwrap()
        );
    }

    #[test]
    fn report_lists_every_point() {
        let run = tiny();
        let results = run_points(&run.points().unwrap()).unwrap();
        let report = render_report(&run, &results);
        assert_eq!(report.matches("params.range=").count(), 2);
    }
}
