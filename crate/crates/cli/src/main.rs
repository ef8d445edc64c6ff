use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use fdastream_cli::bench::{format_table, run_bench, BenchConfig};
use fdastream_cli::error::{exit, CliError, CliResult};
use fdastream_cli::msplot::write_msplot_csv;
use fdastream_cli::stream::{latency_histogram, load_input, HttpSink};
use fdastream_cli::{fit_file, svg};
use fdastream_core::engine::{Engine, EngineConfig};
use fdastream_core::ingestion::{generate_synthetic, parse_wide_csv, replay, write_wide_csv, Rate, ScenarioSpec};
use fdastream_service::{Hub, HubOptions, LayoutEntry, ServiceConfig};
use serde_json::json;

#[derive(Parser)]
#[command(name = "fdastream", version, about = "Streaming MS-plot outlier monitoring for panels of time series")]
struct Cli {
    /// Machine-readable JSON output (errors too).
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Batch fit a wide CSV panel and write the MS-plot table.
    Fit {
        input: PathBuf,
        /// Output CSV (id,mo,vo,label,approximate); stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Replay a CSV panel or JSON-lines event file into a server or an in-process engine.
    Stream(StreamArgs),
    /// Time initial fit, exact time-point additions, approximate series
    /// admission and full refits.
    Bench {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Time points; repeat for several sizes.
        #[arg(long, default_values_t = [100usize])]
        t: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic scenario panel and its labels.
    Generate {
        #[arg(long, default_value_t = 20)]
        central: usize,
        #[arg(long, default_value_t = 2)]
        magnitude: usize,
        #[arg(long, default_value_t = 2)]
        shape: usize,
        #[arg(long, default_value_t = 100)]
        t: usize,
        #[arg(long, default_value_t = 0.1)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Panel CSV.
        #[arg(long)]
        out: PathBuf,
        /// Labels CSV (id,label); defaults to `<out stem>.labels.csv`.
        #[arg(long)]
        labels: Option<PathBuf>,
    },
    /// Render the MS plot of a CSV panel.
    Export {
        input: PathBuf,
        #[arg(long)]
        svg: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Lower and upper MO band (percent of the MO range) for central series.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    mo_band: Option<Vec<f64>>,
    /// VO cap (percent of the VO range) for central series.
    #[arg(long)]
    vo_cap: Option<f64>,
}

impl EngineArgs {
    fn config(&self) -> EngineConfig {
        let mut c = EngineConfig::default();
        if let Some(b) = &self.mo_band {
            c.bands.mo_band = (b[0], b[1]);
        }
        if let Some(v) = self.vo_cap {
            c.bands.vo_cap = v;
        }
        c
    }
}

#[derive(Args)]
struct StreamArgs {
    input: PathBuf,
    /// Events per second, or `max`.
    #[arg(long, default_value = "max")]
    rate: Rate,
    /// Base URL of a running service.
    #[arg(long, conflicts_with = "inproc", required_unless_present = "inproc")]
    server: Option<String>,
    /// Feed an engine in this process instead.
    #[arg(long)]
    inproc: bool,
    /// CSV input: columns used for the initial in-process fit.
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    /// Connection retries per event.
    #[arg(long, default_value_t = 3)]
    retries: u32,
    /// Write the final MS-plot table here (in-process only).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: IpAddr,
    /// Initial panel.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Service configuration JSON (partial documents are merged over defaults).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sensor layout JSON: [{"id", "row", "col"}, ...].
    #[arg(long)]
    layout: Option<PathBuf>,
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let json = cli.json;
    let code = match run(cli) {
        Ok(()) => exit::OK,
        Err(e) => {
            let code = e.exit_code();
            if json {
                eprintln!("{}", json!({ "error": e.to_string(), "exit_code": code }));
            } else {
                eprintln!("fdastream: {e}");
            }
            code
        }
    };
    std::process::exit(code);
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> CliResult<()> {
    let json = cli.json;
    match cli.command {
        Command::Fit { input, out, engine } => {
            let snap = fit_file(&input, engine.config())?;
            match (out, json) {
                (Some(path), _) => write_msplot_csv(&snap, create(&path)?)?,
                (None, true) => println!("{}", serde_json::to_string(&snap).expect("snapshot serializes")),
                (None, false) => write_msplot_csv(&snap, std::io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Stream(args) => stream(args, json),
        Command::Bench { n, t, runs, seed } => {
            if runs == 0 {
                return Err(CliError::Usage("--runs must be >= 1".into()));
            }
            let reports =
                t.iter().map(|&t| run_bench(&BenchConfig { n, t, runs, seed })).collect::<Result<Vec<_>, _>>()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&reports).expect("reports serialize"));
            } else {
                print!("{}", format_table(&reports));
            }
            Ok(())
        }
        Command::Generate { central, magnitude, shape, t, noise_sd, seed, out, labels } => {
            let spec = ScenarioSpec::new(central, magnitude, shape, t, noise_sd, seed);
            let scenario = generate_synthetic(&spec)?;
            let labels = labels.unwrap_or_else(|| {
                let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
                out.with_file_name(format!("{stem}.labels.csv"))
            });
            write_wide_csv(&scenario.panel, create(&out)?)?;
            scenario.write_labels(create(&labels)?)?;
            if json {
                println!("{}", json!({ "panel": out, "labels": labels, "spec": spec }));
            } else {
                println!("wrote {} series x {} points to {}", spec.total(), t, out.display());
                println!("wrote labels to {}", labels.display());
            }
            Ok(())
        }
        Command::Export { input, svg: path, engine } => {
            let snap = fit_file(&input, engine.config())?;
            let doc = svg::msplot_svg(&snap)?;
            let mut w = create(&path)?;
            w.write_all(doc.as_bytes())?;
            w.flush()?;
            if json {
                println!("{}", json!({ "svg": path, "points": snap.points.len() }));
            }
            Ok(())
        }
        Command::Serve(args) => serve(args),
    }
}

fn stream(args: StreamArgs, json: bool) -> CliResult<()> {
    let input = load_input(&args.input, if args.inproc { args.warmup } else { 0 })?;
    let mut engine = None;
    let report = if args.inproc {
        let mut e = match input.seed {
            Some(panel) => Engine::with_panel(panel, EngineConfig::default())?,
            None => Engine::new(EngineConfig::default())?,
        };
        let report = replay(input.events, args.rate, &mut e);
        engine = Some(e);
        report
    } else {
        let server = args.server.as_deref().expect("clap enforces --server or --inproc");
        let mut sink = HttpSink::new(server, args.retries, Duration::from_millis(200))?;
        replay(input.events, args.rate, &mut sink)
    };
    let histogram = latency_histogram(&report.samples_s);
    if json {
        println!("{}", json!({ "report": report, "latency_histogram": histogram }));
    } else {
        println!("delivered {} events in {:.3} s", report.delivered, report.elapsed_s);
        let l = &report.latency;
        println!(
            "latency p50 {:.3e} s  p90 {:.3e} s  p99 {:.3e} s  max {:.3e} s",
            l.p50_s, l.p90_s, l.p99_s, l.max_s
        );
        for (bucket, count) in &histogram {
            println!("  {bucket:>7} {count}");
        }
    }
    if let (Some(path), Some(e)) = (&args.out, &engine) {
        if let Some(snap) = e.snapshot() {
            write_msplot_csv(&snap, create(path)?)?;
        }
    }
    match report.aborted {
        None => Ok(()),
        // the event itself was refused
        Some((i, msg)) if engine.is_some() || msg.contains("server rejected event") => {
            Err(CliError::Data(format!("event {i}: {msg}")))
        }
        Some((i, msg)) => Err(CliError::Runtime(format!("event {i}: {msg}"))),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn serve(args: ServeArgs) -> CliResult<()> {
    let config = match &args.config {
        Some(p) => ServiceConfig::default().merged(read_json(p)?)?,
        None => ServiceConfig::default(),
    };
    let panel = args.input.as_deref().map(parse_wide_csv).transpose()?;
    let layout: Option<Vec<LayoutEntry>> = args.layout.as_deref().map(read_json).transpose()?;
    let hub = Hub::new(config, panel, HubOptions { layout, ..Default::default() })?;
    let port = fdastream_service::resolve_port(args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let (listener, addr) = fdastream_service::bind(SocketAddr::new(args.host, port)).await?;
        eprintln!("fdastream listening on http://{addr}");
        fdastream_service::serve(listener, hub).await
    })?;
    Ok(())
}
