use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use optpart::dump::{read_dump, write_dump};
use optpart::flatness::{mean_flatness, FlatnessRecord, PointMeasure};
use optpart::frequency::{frequency_profile, FrequencyRecord};
use optpart::pipeline::{
    self, cover_junctions, junction_locations, read_samples, write_artifact, write_cover, OracleRun,
    RadiiSpec, RunConfig, Stage, SINGULAR_FILE,
};
use optpart::singular::{detect, extract_interface};
use optpart::{Error, Point, Result};

#[derive(Parser)]
#[command(name = "optpart", version, about = "Optimal spectral partitions and their singular sets")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for an optimal partition and dump the field.
    Solve(RunArgs),
    /// Frequency records at one point, as CSV.
    Frequency {
        #[arg(long)]
        field: PathBuf,
        /// Comma-separated coordinates.
        #[arg(long)]
        point: String,
        /// Geometric radii `rmin:rmax:count`.
        #[arg(long)]
        radii: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        additive: f64,
        /// CSV file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detect junctions and walls.
    Detect {
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Also write interface_cells.csv.
        #[arg(long)]
        cells_csv: bool,
    },
    /// Mean flatness of a point measure.
    Flatness {
        /// JSON `{"dim": n, "atoms": [{"point": [..], "weight": w}, ..]}`.
        #[arg(long)]
        atoms: PathBuf,
        #[arg(long)]
        center: String,
        /// Comma-separated radii.
        #[arg(long)]
        radius: String,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Frequency-drop covering and tube curves of detected junctions.
    Cover {
        #[arg(long)]
        field: PathBuf,
        /// Detected samples (JSON); defaults to singular.json beside --out.
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        terminal_scale: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Summarize the artifacts in an output directory.
    Report(RunArgs),
    /// Write a homogeneous oracle field dump.
    Oracle {
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long, default_value_t = 0.0)]
        rotation: f64,
        #[arg(long, default_value_t = 1.0 / 128.0)]
        spacing: f64,
        #[arg(long, default_value_t = 1.0)]
        half_width: f64,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Detection, frequency profiles and identities for a dumped field or an oracle.
    Analyze {
        #[command(flatten)]
        run: RunArgs,
        /// Analyze an oracle instead, e.g. `m=3` or `m=4,spacing=0.005`.
        #[arg(long)]
        oracle: Option<String>,
    },
    /// Run every stage listed in the configuration.
    Run(RunArgs),
}

fn parse_point(s: &str) -> Result<Point> {
    let v: Vec<f64> = s
        .split(',')
        .map(|c| c.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::InvalidArgument {
            name: "point",
            reason: format!("`{s}` is not a comma-separated list of numbers"),
        })?;
    if !(1..=3).contains(&v.len()) {
        return Err(Error::InvalidArgument {
            name: "point",
            reason: format!("`{s}` needs 1 to 3 coordinates"),
        });
    }
    Ok(optpart::grid::point(&v))
}

fn parse_oracle(s: &str) -> Result<OracleRun> {
    let mut o = OracleRun::default();
    for part in s.split(',') {
        let bad = || Error::InvalidArgument {
            name: "oracle",
            reason: format!("cannot parse `{part}`"),
        };
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        match k.trim() {
            "m" => o.m = v.trim().parse().map_err(|_| bad())?,
            "rotation" => o.rotation = v.trim().parse().map_err(|_| bad())?,
            "spacing" => o.spacing = v.trim().parse().map_err(|_| bad())?,
            "half_width" => o.half_width = v.trim().parse().map_err(|_| bad())?,
            "dim" => o.dim = v.trim().parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
    }
    Ok(o)
}

fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(o) = &args.out {
        cfg.output = o.clone();
    }
    Ok(cfg)
}

fn write_csv(out: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: out.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source: e,
    })
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Solve(args) => {
            let mut cfg = load_config(&args)?;
            cfg.stages = vec![Stage::Solve];
            Ok(pipeline::run(&cfg)?.exit_code())
        }
        Command::Run(args) => Ok(pipeline::run(&load_config(&args)?)?.exit_code()),
        Command::Analyze { run, oracle } => {
            let mut cfg = load_config(&run)?;
            if let Some(o) = oracle {
                cfg.oracle = Some(parse_oracle(&o)?);
            }
            cfg.stages = vec![Stage::Analyze];
            pipeline::run(&cfg)?;
            Ok(0)
        }
        Command::Report(args) => {
            let mut cfg = load_config(&args)?;
            cfg.stages = vec![Stage::Report];
            let out = pipeline::run(&cfg)?;
            if let Some(s) = out.summary {
                print!("{}", s.to_text());
            }
            Ok(0)
        }
        Command::Oracle {
            m,
            rotation,
            spacing,
            half_width,
            dim,
            out,
        } => {
            let o = OracleRun {
                m,
                rotation,
                spacing,
                half_width,
                dim,
            };
            write_dump(&o.field()?, &out)?;
            Ok(0)
        }
        Command::Frequency {
            field,
            point,
            radii,
            additive,
            out,
        } => {
            let u = read_dump(&field)?;
            let x = parse_point(&point)?;
            let spec = match radii {
                Some(s) => RadiiSpec::parse(&s)?,
                None => RadiiSpec::default(),
            };
            let radii = spec.radii_for(&u, &x);
            let rows: Vec<Vec<String>> = if radii.is_empty() {
                Vec::new()
            } else {
                frequency_profile(&u, &x, &radii, additive)?
                    .records
                    .iter()
                    .map(|r| r.csv_row())
                    .collect()
            };
            write_csv(out.as_deref(), &FrequencyRecord::CSV_HEADER, &rows)?;
            Ok(0)
        }
        Command::Detect {
            field,
            out,
            cells_csv,
        } => {
            let u = read_dump(&field)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            let d = detect(&u, &Default::default())?;
            write_artifact(&out.join(SINGULAR_FILE), &d.samples)?;
            if cells_csv {
                let rows: Vec<Vec<String>> = extract_interface(&u)
                    .iter()
                    .map(|c| {
                        let labels: Vec<String> = c.labels.iter().map(|l| l.to_string()).collect();
                        vec![
                            format!("{:.12e}", c.center[0]),
                            format!("{:.12e}", c.center[1]),
                            format!("{:.12e}", c.center[2]),
                            labels.join(";"),
                        ]
                    })
                    .collect();
                let path = out.join("interface_cells.csv");
                write_csv(Some(&path), &["x", "y", "z", "labels"], &rows)?;
            }
            println!(
                "{} junctions, {} walls, agreement {:.4}",
                d.junctions().count(),
                d.walls().count(),
                d.agreement()
            );
            Ok(0)
        }
        Command::Flatness {
            atoms,
            center,
            radius,
            k,
            out,
        } => {
            let text = std::fs::read_to_string(&atoms).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingArtifact(atoms.clone()),
                _ => Error::Io {
                    path: atoms.clone(),
                    source: e,
                },
            })?;
            let mu: PointMeasure = serde_json::from_str(&text)?;
            let x = parse_point(&center)?;
            let k = k.unwrap_or(mu.dim() - 2);
            let mut rows = Vec::new();
            for r in radius.split(',') {
                let r: f64 = r.trim().parse().map_err(|_| Error::InvalidArgument {
                    name: "radius",
                    reason: format!("`{r}` is not a number"),
                })?;
                rows.push(mean_flatness(&mu, &x, r, k)?.csv_row());
            }
            write_csv(out.as_deref(), &FlatnessRecord::CSV_HEADER, &rows)?;
            Ok(0)
        }
        Command::Cover {
            field,
            points,
            config,
            radius,
            rho,
            delta,
            terminal_scale,
            out,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            let c = &mut cfg.covering;
            if let Some(v) = radius {
                c.radius = v;
            }
            if let Some(v) = rho {
                c.rho = v;
            }
            if let Some(v) = delta {
                c.delta = v;
            }
            if let Some(v) = terminal_scale {
                c.terminal = v;
            }
            let u = read_dump(&field)?;
            let samples = read_samples(&points.unwrap_or_else(|| out.join(SINGULAR_FILE)))?;
            let art = cover_junctions(&u, &junction_locations(&samples), &cfg.covering, &cfg.tubes)?;
            write_cover(&out, &art)?;
            match &art.covering {
                Some(c) => println!("{} balls, packing sum {:.4}", c.balls.len(), c.packing_sum()),
                None => println!("empty set"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot configure {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
