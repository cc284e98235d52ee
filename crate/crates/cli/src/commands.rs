use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use pantswalk::families::{build, Family, FamilySpec};
use pantswalk::laminate::laminate_family;
use pantswalk::network::{NetworkJson, VertexId};
use pantswalk::solver::{
    classify, effective_resistance, sweep, Certificate, ClassifyParams, SweepOptions, SweepRow,
    Truncation,
};

use crate::config::ExperimentConfig;
use crate::svg::{line_chart, Chart};
use crate::{Cli, CliError, Command};

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    if let Command::Plot { csv, x, y } = &cli.command {
        let config = g
            .config
            .as_deref()
            .map(ExperimentConfig::load)
            .transpose()?;
        return plot(
            cli,
            config.as_ref(),
            csv.as_deref(),
            x.as_deref(),
            y.as_deref(),
        );
    }
    let path = g
        .config
        .as_deref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let config = ExperimentConfig::load(path)?;
    fs::create_dir_all(&g.out)?;
    match &cli.command {
        Command::Build => cmd_build(cli, &config),
        Command::Sweep => cmd_sweep(cli, &config),
        Command::Certify { series } => cmd_certify(cli, &config, *series),
        Command::Reduce { radius } => cmd_reduce(cli, &config, *radius),
        Command::Lamination { radius } => cmd_lamination(cli, &config, *radius),
        Command::Plot { .. } => unreachable!(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn monte_carlo(cli: &Cli, config: &ExperimentConfig) -> Option<(u64, u64)> {
    config
        .montecarlo
        .map(|m| (m.trials, cli.global.seed.unwrap_or(m.seed)))
}

#[derive(Serialize)]
struct BuiltNetwork<'a> {
    spec_hash: String,
    family: &'a FamilySpec,
    sources: Vec<usize>,
    default_radius: u32,
    network: NetworkJson,
}

fn cmd_build(cli: &Cli, config: &ExperimentConfig) -> Result<(), CliError> {
    let fam = build(&config.family)?;
    let out = BuiltNetwork {
        spec_hash: config.spec_hash(),
        family: &config.family,
        sources: fam.sources.iter().map(|v| v.0).collect(),
        default_radius: fam.default_radius,
        network: fam.network.to_json(),
    };
    write_json(&cli.global.out.join("network.json"), &out)
}

fn radii(config: &ExperimentConfig, fam: &Family) -> Vec<u32> {
    if config.sweep.is_empty() {
        vec![fam.default_radius]
    } else {
        config.sweep.clone()
    }
}

#[derive(Serialize)]
struct CsvRow {
    #[serde(rename = "N")]
    n: u32,
    #[serde(rename = "R_N")]
    r: Option<f64>,
    #[serde(rename = "delta_R")]
    delta: Option<f64>,
    nw_partial_sum: Option<f64>,
    p_hat: Option<f64>,
    stderr: Option<f64>,
    p_predicted: Option<f64>,
    iterations: Option<usize>,
    wall_ms: f64,
    flags: String,
    error: String,
}

impl CsvRow {
    fn new(row: &SweepRow, reproducible: bool) -> Self {
        CsvRow {
            n: row.radius,
            r: row.resistance,
            delta: row.delta,
            nw_partial_sum: row.nash_williams_partial,
            p_hat: row.p_hat,
            stderr: row.stderr,
            p_predicted: row.p_predicted,
            iterations: row.iterations,
            wall_ms: if reproducible { 0.0 } else { row.wall_ms },
            flags: row.flags.join(";"),
            error: row.error.clone().unwrap_or_default(),
        }
    }
}

fn cmd_sweep(cli: &Cli, config: &ExperimentConfig) -> Result<(), CliError> {
    let fam = build(&config.family)?;
    let options = SweepOptions {
        solver: config.solver.options(),
        monte_carlo: monte_carlo(cli, config),
    };
    let rows = sweep(&fam, &radii(config, &fam), &options);
    let path = config.output_path(&cli.global.out, &config.outputs.csv, "sweep.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for row in &rows {
        w.serialize(CsvRow::new(row, cli.global.reproducible))?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    let flagged: Vec<String> = rows
        .iter()
        .filter(|r| !r.flags.is_empty())
        .map(|r| format!("N={} {}", r.radius, r.flags.join(",")))
        .collect();
    if !flagged.is_empty() {
        eprintln!("flagged rows: {}", flagged.join("; "));
    }
    if let Some(bad) = rows.iter().find(|r| r.error.is_some()) {
        return Err(CliError::Solver(format!(
            "N={}: {}",
            bad.radius,
            bad.error.as_deref().unwrap_or("")
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct CertificateFile {
    spec_hash: String,
    certificate: Certificate,
}

fn cmd_certify(
    cli: &Cli,
    config: &ExperimentConfig,
    series: Option<pantswalk::solver::ConvergenceVerdict>,
) -> Result<(), CliError> {
    let series = series
        .or(config.series)
        .ok_or_else(|| CliError::Config("--series divergent|convergent is required".into()))?;
    let fam = build(&config.family)?;
    let params = ClassifyParams {
        radii: radii(config, &fam),
        solver: config.solver.options(),
        monte_carlo: monte_carlo(cli, config),
        ..ClassifyParams::default()
    };
    let certificate = classify(&config.family, &fam, series, &params)?;
    println!("{:?} via {:?}", certificate.verdict, certificate.theorem);
    let path = config.output_path(&cli.global.out, &config.outputs.json, "certificate.json");
    write_json(
        &path,
        &CertificateFile {
            spec_hash: config.spec_hash(),
            certificate,
        },
    )
}

fn plot(
    cli: &Cli,
    config: Option<&ExperimentConfig>,
    input: Option<&Path>,
    x: Option<&str>,
    y: Option<&str>,
) -> Result<(), CliError> {
    let out = &cli.global.out;
    let input: PathBuf = match input {
        Some(p) => p.to_path_buf(),
        None => {
            let name = config
                .and_then(|c| c.outputs.csv.clone())
                .unwrap_or_else(|| "sweep.csv".into());
            out.join(name)
        }
    };
    let mut reader = csv::Reader::from_path(&input)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("{}: no column `{name}`", input.display())))
    };
    if headers.len() < 2 {
        return Err(CliError::Config(format!(
            "{}: need at least two columns",
            input.display()
        )));
    }
    let xi = match x {
        Some(name) => column(name)?,
        None => 0,
    };
    let yi = match y {
        Some(name) => column(name)?,
        None => headers.iter().position(|h| h == "R_N").unwrap_or(1),
    };
    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let (xs, ys) = (cell(xi), cell(yi));
        if ys.is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                CliError::Config(format!(
                    "{} row {}: `{s}` is not a number",
                    input.display(),
                    line + 2
                ))
            })
        };
        points.push((parse(&xs)?, parse(&ys)?));
    }
    if points.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no data rows",
            input.display()
        )));
    }
    let title = match config {
        Some(c) => format!("{} ψ(n) = {}", c.family.kind, c.family.profile),
        None => input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let generated = (!cli.global.reproducible).then(|| {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        format!("unix {secs}")
    });
    let chart = Chart {
        title,
        x_label: headers[xi].clone(),
        y_label: headers[yi].clone(),
        points,
        generated,
    };
    fs::create_dir_all(out)?;
    let name = config
        .and_then(|c| c.outputs.svg.clone())
        .unwrap_or_else(|| "plot.svg".into());
    let path = out.join(name);
    fs::write(&path, line_chart(&chart))?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct ReducedSide {
    vertices: usize,
    edges: usize,
    resistance: f64,
}

#[derive(Serialize)]
struct ReducedFile {
    spec_hash: String,
    radius: u32,
    before: ReducedSide,
    after: ReducedSide,
    root: usize,
    boundary: usize,
    network: NetworkJson,
}

fn cmd_reduce(cli: &Cli, config: &ExperimentConfig, radius: Option<u32>) -> Result<(), CliError> {
    let fam = build(&config.family)?;
    let radius = radius.unwrap_or(fam.default_radius);
    let trunc = fam.truncate(radius)?;
    let boundary = trunc.boundary_or_err()?;
    let options = config.solver.options();
    let before = effective_resistance(&trunc, &options)?.effective_resistance;

    let (mut net, mut root, mut sink) = (trunc.network.drop_loops(), trunc.root, boundary);
    loop {
        let merged = net.parallel_reduce();
        let reduced = merged.series_reduce(&[root, sink]);
        let map = |v: VertexId| reduced.vertex_map[v.0].expect("protected vertices survive");
        let (r, s) = (map(root), map(sink));
        let shrunk = reduced.network.edge_count() < net.edge_count();
        net = reduced.network;
        root = r;
        sink = s;
        if !shrunk {
            break;
        }
    }
    let reduced = Truncation {
        network: net,
        root,
        boundary: Some(sink),
        radius,
        vertex_map: Vec::new(),
        edge_map: Vec::new(),
    };
    let after = effective_resistance(&reduced, &options)?.effective_resistance;
    println!(
        "{} edges -> {} edges, R = {before} -> {after}",
        trunc.network.edge_count(),
        reduced.network.edge_count()
    );
    let file = ReducedFile {
        spec_hash: config.spec_hash(),
        radius,
        before: ReducedSide {
            vertices: trunc.network.vertex_count(),
            edges: trunc.network.edge_count(),
            resistance: before,
        },
        after: ReducedSide {
            vertices: reduced.network.vertex_count(),
            edges: reduced.network.edge_count(),
            resistance: after,
        },
        root: root.0,
        boundary: sink.0,
        network: reduced.network.to_json(),
    };
    write_json(&cli.global.out.join("reduced.json"), &file)
}

fn cmd_lamination(
    cli: &Cli,
    config: &ExperimentConfig,
    radius: Option<u32>,
) -> Result<(), CliError> {
    let fam = build(&config.family)?;
    let radius = radius.unwrap_or(fam.default_radius);
    let lam = laminate_family(&fam, radius, &config.solver.options())?;
    let path = cli.global.out.join("summability.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for row in &lam.report.rows {
        w.serialize(row)?;
    }
    w.flush()?;
    println!("wrote {}", path.display());
    if let Some(track) = &lam.track {
        write_json(&cli.global.out.join("track.json"), track)?;
    }
    let report = &lam.report;
    println!(
        "R = {}, flow energy = {}, functional = {}, 1 + 4C² = {}, margin = {}",
        lam.effective_resistance,
        lam.flow.energy(),
        report.total(),
        report.constant.unwrap_or(f64::NAN),
        report.margin().unwrap_or(f64::NAN)
    );
    if report.bound_holds() == Some(false) {
        return Err(CliError::Hypothesis("summability bound exceeded".into()));
    }
    Ok(())
}
