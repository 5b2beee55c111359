use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{
    calibrate, derive_seed, envelope_check, exec_sim, memory_compare, sample_stats, scaling,
    streams, ExecRow, ExperimentConfig, SampleStats, ScalingRow,
};
use crate::graph::CsrGraph;
use crate::provision::write_comparison_csv;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SampleStats,
    EnvelopeCheck,
    ExecSim,
    MemoryCompare,
    Sweep,
    Calibrate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub command: &'static str,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub master_seed: u64,
    pub graph_seed: u64,
    pub config: ExperimentConfig,
    pub files: Vec<OutputFile>,
}

pub const EXEC_HEADER: &str =
    "strategy,batch,hops,end_to_end,gpu_time,host_time,fraction,launches,syncs,overflows,speedup";
pub const SCALING_HEADER: &str = "strategy,batch,workers,end_to_end,single_end_to_end,speedup";
pub const SAMPLE_HEADER: &str = "iteration,hop,frontier,new_vertices,cumulative_vertices,edges";
pub const HISTOGRAM_HEADER: &str = "bin,lo,hi,count";

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn write_sample_csv<W: Write>(stats: &SampleStats, mut out: W) -> Result<()> {
    writeln!(out, "{SAMPLE_HEADER}")?;
    for (i, m) in stats.metadata.iter().enumerate() {
        for h in 1..=m.hops() {
            writeln!(
                out,
                "{i},{h},{},{},{},{}",
                m.frontier(h),
                m.new_vertices(h),
                m.per_hop_vertex_counts[h - 1],
                m.per_hop_edge_counts[h - 1]
            )?;
        }
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(stats: &SampleStats, mut out: W) -> Result<()> {
    writeln!(out, "{HISTOGRAM_HEADER}")?;
    for (i, b) in stats.histogram.iter().enumerate() {
        writeln!(out, "{i},{:.3},{:.3},{}", b.lo, b.hi, b.count)?;
    }
    Ok(())
}

/// Profile-opaque rows leave `fraction` empty.
pub fn write_exec_csv<W: Write>(rows: &[ExecRow], mut out: W) -> Result<()> {
    writeln!(out, "{EXEC_HEADER}")?;
    for r in rows {
        let m = &r.metrics;
        let fraction = m
            .reported_fraction()
            .map_or(String::new(), |f| format!("{f:.6}"));
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{},{},{},{},{:.6}",
            r.strategy,
            r.batch,
            r.hops,
            m.end_to_end,
            m.gpu_time,
            m.host_time,
            fraction,
            m.launches,
            m.syncs,
            r.overflows,
            r.speedup
        )?;
    }
    Ok(())
}

pub fn write_scaling_csv<W: Write>(rows: &[ScalingRow], mut out: W) -> Result<()> {
    writeln!(out, "{SCALING_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6}",
            r.strategy, r.batch, r.workers, r.end_to_end, r.single_end_to_end, r.speedup
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SampleSummaryFile<'a> {
    batch_size: usize,
    fanouts: &'a [usize],
    seed: u64,
    #[serde(flatten)]
    summary: super::SizeSummary,
}

fn run_one(
    cmd: Command,
    graph: &CsrGraph,
    cfg: &ExperimentConfig,
    dir: &Path,
    files: &mut Vec<OutputFile>,
) -> Result<()> {
    let master = cfg.master_seed;
    let mut record = |file: &str, command: &'static str, seed: u64| {
        files.push(OutputFile {
            file: file.to_string(),
            command,
            seed,
        })
    };
    match cmd {
        Command::SampleStats => {
            let seed = derive_seed(master, streams::SAMPLE_STATS);
            let stats = sample_stats(graph, &cfg.sample_config(seed), cfg.iterations)?;
            let mut out = create(dir, "sample_stats.csv")?;
            write_sample_csv(&stats, &mut out)?;
            out.flush()?;
            let mut out = create(dir, "sample_histogram.csv")?;
            write_histogram_csv(&stats, &mut out)?;
            out.flush()?;
            write_json(
                dir,
                "sample_summary.json",
                &SampleSummaryFile {
                    batch_size: cfg.sample.batch_size,
                    fanouts: &cfg.sample.fanouts,
                    seed,
                    summary: stats.summary,
                },
            )?;
            for f in [
                "sample_stats.csv",
                "sample_histogram.csv",
                "sample_summary.json",
            ] {
                record(f, "sample-stats", seed);
            }
        }
        Command::EnvelopeCheck => {
            let seed = derive_seed(master, streams::ENVELOPE_CHECK);
            let report = envelope_check(
                graph,
                &cfg.sample_config(seed),
                &cfg.envelope,
                cfg.repetitions(),
                cfg.iterations,
            )?;
            write_json(dir, "envelope_check.json", &report)?;
            record("envelope_check.json", "envelope-check", seed);
        }
        Command::ExecSim => {
            let cost = cfg.cost_model()?;
            let seed = derive_seed(master, streams::EXEC_SIM);
            let rows = exec_sim(graph, cfg, &cost, seed)?;
            let mut out = create(dir, "exec_sim.csv")?;
            write_exec_csv(&rows, &mut out)?;
            out.flush()?;
            record("exec_sim.csv", "exec-sim", seed);

            let seed = derive_seed(master, streams::SCALING);
            let rows = scaling(graph, cfg, &cost, seed)?;
            let mut out = create(dir, "exec_scaling.csv")?;
            write_scaling_csv(&rows, &mut out)?;
            out.flush()?;
            record("exec_scaling.csv", "exec-sim", seed);
        }
        Command::MemoryCompare => {
            let seed = derive_seed(master, streams::MEMORY_COMPARE);
            let rows = memory_compare(graph, cfg, seed)?;
            let mut out = create(dir, "memory_compare.csv")?;
            write_comparison_csv(&rows, &mut out)?;
            out.flush()?;
            record("memory_compare.csv", "memory-compare", seed);
        }
        Command::Calibrate => {
            let seed = derive_seed(master, streams::CALIBRATE);
            let base = cfg.cost_model()?;
            let cal = calibrate(graph, cfg, &base, 128, 0.45, seed)?;
            write_json(dir, "calibration.json", &cal.cost_model)?;
            record("calibration.json", "calibrate", seed);
        }
        Command::Sweep => {
            for c in [
                Command::SampleStats,
                Command::EnvelopeCheck,
                Command::ExecSim,
                Command::MemoryCompare,
            ] {
                run_one(c, graph, cfg, dir, files)?;
            }
        }
    }
    Ok(())
}

/// Loads the graph, runs `cmd` and writes its files into `cfg.output`.
/// `sweep` additionally writes `manifest.json`.
pub fn run_command(cmd: Command, cfg: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    cfg.validate()?;
    let dir = cfg.output.as_path();
    fs::create_dir_all(dir)?;
    let graph_seed = cfg
        .graph_seed
        .unwrap_or_else(|| derive_seed(cfg.master_seed, streams::GRAPH));
    let graph = cfg.graph.load(graph_seed)?;
    let mut files = Vec::new();
    run_one(cmd, &graph, cfg, dir, &mut files)?;
    if cmd == Command::Sweep {
        write_json(
            dir,
            "manifest.json",
            &ManifestEntry {
                master_seed: cfg.master_seed,
                graph_seed,
                config: cfg.clone(),
                files: files.clone(),
            },
        )?;
    }
    Ok(files)
}
