use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use surfnoise::bench::{
    estimate_threshold_with, fit_distance_scaling, fit_rounds_curve, improvement_factor, project_qubits,
    read_rows_csv, run_sweep_streaming, ExperimentSpec, FitResult, Projection, ResultRow, RowWriter,
    ThresholdEstimate,
};
use surfnoise::circuit::{parse_circuit, serialize_circuit};
use surfnoise::codegen::{build, resource_count, Basis, CodeSpec, Family};
use surfnoise::noise::{NoiseSource, NoiseSpec};
use surfnoise::sim::{sample_range, write_raw};
use surfnoise::{Error, Result};

#[derive(Parser)]
#[command(name = "surfnoise", version, about = "Surface-code memory experiments under configurable noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a memory-experiment circuit.
    Generate {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        distance: u32,
        /// Defaults to 3 * distance.
        #[arg(long)]
        rounds: Option<u32>,
        #[arg(long, default_value = "z")]
        basis: Basis,
        /// Noise source to inject, e.g. gate or circuit_level.
        #[arg(long, requires = "p")]
        noise: Option<NoiseSource>,
        #[arg(long)]
        p: Option<f64>,
        /// Also add Z flips next to readout and reset flips.
        #[arg(long)]
        strict: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sample detector and observable bits of a circuit file.
    Sample {
        #[arg(long)]
        circuit: PathBuf,
        #[arg(long)]
        shots: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Index of the first shot, for resuming a stream.
        #[arg(long, default_value_t = 0)]
        first_shot: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run a sweep described by a JSON spec and write CSV rows.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the rows, including notes, as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Worker threads; 0 uses one per core.
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Estimate thresholds from sweep CSV, per family and noise source.
    Threshold {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = 200)]
        bootstrap: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit logical rates at one physical rate and project resources.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        p_phys: f64,
        #[arg(long, value_enum, default_value_t = FitMode::Distance)]
        kind: FitMode,
        /// Target per-round logical rate for the distance projection.
        #[arg(long, default_value_t = 1e-9)]
        target: f64,
        /// Restrict a rounds fit to this distance.
        #[arg(long)]
        distance: Option<u32>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Resource or improvement tables from sweep CSV.
    Table {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: TableKind,
        #[arg(long, default_value_t = 1e-3)]
        p_phys: f64,
        #[arg(long, default_value_t = 1e-9)]
        target: f64,
        /// Extra distances projected from the fit in the improvement table.
        #[arg(long, value_delimiter = ',')]
        project: Vec<u32>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMode {
    Distance,
    Rounds,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableKind {
    /// Minimum distance and qubits per noise source.
    Resources,
    /// Improvement over the physical rate per distance.
    Improvement,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    error: Error,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = match error {
            Error::Spec(_) | Error::Parse { .. } | Error::Noise(_) => 2,
            _ => 3,
        };
        Self { code, error }
    }
}

type CliResult = std::result::Result<(), Failure>;

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    read_rows_csv(BufReader::new(File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?))
}

fn group_by_source(rows: Vec<ResultRow>) -> BTreeMap<(Family, NoiseSource), Vec<ResultRow>> {
    let mut groups: BTreeMap<_, Vec<ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.family, r.noise)).or_default().push(r);
    }
    groups
}

fn at_rate(rows: &[ResultRow], p: f64) -> Vec<ResultRow> {
    rows.iter()
        .filter(|r| (r.p_phys - p).abs() <= 1e-9 * p.abs().max(1e-300))
        .cloned()
        .collect()
}

#[derive(Serialize)]
struct ThresholdReport {
    family: Family,
    noise: NoiseSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimate: Option<ThresholdEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

#[derive(Serialize)]
struct FitReport {
    family: Family,
    noise: NoiseSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    fit: Option<FitResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    projection: Option<Projection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn generate(
    family: Family,
    distance: u32,
    rounds: Option<u32>,
    basis: Basis,
    noise: Option<(NoiseSource, f64)>,
    strict: bool,
    output: Option<&Path>,
) -> CliResult {
    let rounds = rounds.unwrap_or(3 * distance);
    let spec = CodeSpec::new(family, distance, rounds)?.with_basis(basis);
    spec.check()?;
    let mut circuit = build(&spec)?;
    if let Some((source, p)) = noise {
        circuit = NoiseSpec { source, p, strict }.apply(&circuit)?;
    }
    let mut out = open_output(output).map_err(Failure::from)?;
    out.write_all(serialize_circuit(&circuit).as_bytes()).map_err(Error::from)?;
    out.flush().map_err(Error::from)?;
    Ok(())
}

fn sweep(spec_path: &Path, output: Option<&Path>, json: Option<&Path>, workers: usize) -> CliResult {
    let text = read_text(spec_path).map_err(|e| Failure { code: 2, error: e })?;
    let spec = ExperimentSpec::from_json(&text)?;
    let mut writer = RowWriter::new(open_output(output)?)?;
    let mut write_error = None;
    let rows = run_sweep_streaming(&spec, workers, |row| {
        if write_error.is_none() {
            write_error = writer.write(row).err();
        }
    })?;
    if let Some(e) = write_error {
        return Err(e.into());
    }
    writer.into_inner()?.flush().map_err(Error::from)?;
    if let Some(path) = json {
        write_json(Some(path), &rows)?;
    }
    let failed: Vec<&ResultRow> = rows.iter().filter(|r| r.is_error()).collect();
    for r in &failed {
        eprintln!(
            "cell {} d={} r={} p={} failed: {}",
            r.family,
            r.distance,
            r.rounds,
            r.p_phys,
            r.note.as_deref().unwrap_or("")
        );
    }
    if let Some(first) = failed.first() {
        return Err(Failure {
            code: 3,
            error: Error::InvalidCircuit(first.note.clone().unwrap_or_default()),
        });
    }
    Ok(())
}

fn threshold(csv: &Path, bootstrap: usize, seed: u64, output: Option<&Path>) -> CliResult {
    let groups = group_by_source(read_rows(csv)?);
    let mut reports = Vec::new();
    let mut any_error = None;
    for ((family, noise), rows) in groups {
        let (estimate, error) = match estimate_threshold_with(&rows, bootstrap, seed) {
            Ok(e) => (Some(e), None),
            Err(e) => {
                let msg = e.to_string();
                any_error.get_or_insert(e);
                (None, Some(msg))
            }
        };
        reports.push(ThresholdReport {
            family,
            noise,
            estimate,
            error,
        });
    }
    write_json(output, &reports)?;
    match any_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn fit(csv: &Path, p_phys: f64, kind: FitMode, target: f64, distance: Option<u32>, output: Option<&Path>) -> CliResult {
    let groups = group_by_source(read_rows(csv)?);
    let mut reports = Vec::new();
    for ((family, noise), rows) in groups {
        let mut rows = at_rate(&rows, p_phys);
        if let Some(d) = distance {
            rows.retain(|r| r.distance == d);
        }
        if rows.is_empty() {
            continue;
        }
        let result = match kind {
            FitMode::Distance => {
                // Default-length experiments only, one per distance.
                let rows: Vec<ResultRow> = rows.into_iter().filter(|r| r.rounds == 3 * r.distance).collect();
                fit_distance_scaling(&rows)
                    .and_then(|f| project_qubits(&f, family, target).map(|p| (f, Some(p))))
            }
            FitMode::Rounds => fit_rounds_curve(&rows).map(|f| (f, None)),
        };
        reports.push(match result {
            Ok((fit, projection)) => FitReport {
                family,
                noise,
                fit: Some(fit),
                projection,
                error: None,
            },
            Err(e) => FitReport {
                family,
                noise,
                fit: None,
                projection: None,
                error: Some(e.to_string()),
            },
        });
    }
    if reports.is_empty() {
        return Err(Error::Insufficient(format!("no rows at p_phys = {p_phys}")).into());
    }
    write_json(output, &reports)?;
    Ok(())
}

fn table(csv: &Path, kind: TableKind, p_phys: f64, target: f64, project: &[u32], output: Option<&Path>) -> CliResult {
    let groups = group_by_source(read_rows(csv)?);
    let mut out = csv::Writer::from_writer(open_output(output)?);
    match kind {
        TableKind::Resources => {
            out.write_record(["family", "noise", "min_distance", "qubits", "note"]).map_err(Error::from)?;
            for ((family, noise), rows) in groups {
                let rows: Vec<ResultRow> =
                    at_rate(&rows, p_phys).into_iter().filter(|r| r.rounds == 3 * r.distance).collect();
                let record = match fit_distance_scaling(&rows).and_then(|f| project_qubits(&f, family, target)) {
                    Ok(p) => [
                        family.to_string(),
                        noise.to_string(),
                        p.distance.to_string(),
                        p.qubits.to_string(),
                        p.note.unwrap_or_default(),
                    ],
                    Err(e) => [family.to_string(), noise.to_string(), String::new(), String::new(), e.to_string()],
                };
                out.write_record(record).map_err(Error::from)?;
            }
        }
        TableKind::Improvement => {
            out.write_record(["family", "noise", "distance", "rounds", "qubits", "gates", "improvement", "source"])
                .map_err(Error::from)?;
            for ((family, noise), rows) in groups {
                let rows: Vec<ResultRow> =
                    at_rate(&rows, p_phys).into_iter().filter(|r| r.rounds == 3 * r.distance).collect();
                let mut lines: Vec<(u32, f64, &str)> = improvement_factor(&rows, p_phys)
                    .into_iter()
                    .map(|i| (i.distance, i.factor, if i.lower_bound { "measured_lower_bound" } else { "measured" }))
                    .collect();
                if !project.is_empty() {
                    let fit = fit_distance_scaling(&rows)?;
                    for &d in project {
                        lines.push((d, p_phys / 10f64.powf(fit.predict(d as f64)), "projected"));
                    }
                }
                for (d, factor, source) in lines {
                    let spec = CodeSpec::new(family, d, 3 * d)?;
                    let res = resource_count(&spec)?;
                    out.write_record([
                        family.to_string(),
                        noise.to_string(),
                        d.to_string(),
                        (3 * d).to_string(),
                        res.qubits.to_string(),
                        res.gates.to_string(),
                        format!("{factor:.4e}"),
                        source.to_string(),
                    ])
                    .map_err(Error::from)?;
                }
            }
        }
    }
    out.flush().map_err(Error::from)?;
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Generate {
            family,
            distance,
            rounds,
            basis,
            noise,
            p,
            strict,
            output,
        } => generate(family, distance, rounds, basis, noise.zip(p), strict, output.as_deref()),
        Command::Sample {
            circuit,
            shots,
            seed,
            first_shot,
            output,
        } => {
            let text = read_text(&circuit).map_err(|e| Failure { code: 2, error: e })?;
            let circuit = parse_circuit(&text)?;
            let batch = sample_range(&circuit, first_shot, shots, seed)?;
            let mut out = open_output(Some(&output))?;
            write_raw(&batch, &mut out)?;
            out.flush().map_err(Error::from)?;
            Ok(())
        }
        Command::Sweep {
            spec,
            output,
            json,
            workers,
        } => sweep(&spec, output.as_deref(), json.as_deref(), workers),
        Command::Threshold {
            csv,
            bootstrap,
            seed,
            output,
        } => threshold(&csv, bootstrap, seed, output.as_deref()),
        Command::Fit {
            csv,
            p_phys,
            kind,
            target,
            distance,
            output,
        } => fit(&csv, p_phys, kind, target, distance, output.as_deref()),
        Command::Table {
            csv,
            kind,
            p_phys,
            target,
            project,
            output,
        } => table(&csv, kind, p_phys, target, &project, output.as_deref()),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.error);
            ExitCode::from(f.code)
        }
    }
}
