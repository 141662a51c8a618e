use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use thermotwin::client::metrics::{trace_metrics, StepMetrics};
use thermotwin::client::{plot, ClientError, Session};
use thermotwin::control::{ControlMode, Level};
use thermotwin::device::{
    run_scenario, service, ConfigError, DeviceConfig, Scenario, ScenarioError,
};
use thermotwin::protocol::{vectors, Command, Telemetry};
use thermotwin::trace::{self, TraceError, TraceFormat, TraceRecord};

const EXIT_CONNECTION: u8 = 2;
const EXIT_RANGE: u8 = 3;
const EXIT_BAD_TRACE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "thermotwin",
    version,
    about = "Emulated Peltier thermal-feedback device and host tools"
)]
struct Cli {
    /// Device service address.
    #[arg(long, global = true, default_value = "127.0.0.1:7453")]
    addr: String,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone)]
struct SimArgs {
    /// TOML config file; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pace the simulation to the wall clock.
    #[arg(long, conflicts_with = "fast")]
    realtime: bool,
    /// Run as fast as possible.
    #[arg(long)]
    fast: bool,
    /// Sensor noise seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OutArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: TraceFormat,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the emulator service (TCP and WebSocket).
    Serve {
        #[command(flatten)]
        sim: SimArgs,
        #[arg(long)]
        tcp_port: Option<u16>,
        #[arg(long)]
        ws_port: Option<u16>,
    },
    /// Connect and print the device identity and state.
    Connect,
    /// Set a level from very-hot to very-cold in the active mode.
    SetLevel {
        level: Level,
    },
    /// Heat-flow setpoint in W; positive cools the skin.
    SetHeat {
        #[arg(allow_hyphen_values = true)]
        watts: f64,
    },
    /// Contact temperature setpoint in degrees C.
    SetTemp {
        celsius: f64,
    },
    /// Switch control mode: off, heat_flow or temperature.
    SetMode {
        mode: ControlMode,
    },
    SetPid {
        #[arg(long)]
        kp: f64,
        #[arg(long)]
        ki: f64,
        #[arg(long, default_value_t = 0.0)]
        kd: f64,
        #[arg(long)]
        i_limit: f64,
    },
    On,
    Off,
    Status,
    /// Record live telemetry.
    Record {
        /// Seconds of wall time.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a scenario offline and write its full-rate trace.
    Scenario {
        /// Built-in name: charac-heat, charac-temp, user-study, saturation.
        #[arg(long, conflicts_with = "script")]
        scenario: Option<String>,
        /// TOML script of [[hold]] tables.
        #[arg(long)]
        script: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Step-response metrics of a trace file.
    Metrics {
        trace: PathBuf,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// One SVG per channel.
    Plot {
        trace: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Stream a trace file back out, optionally at its recorded pace.
    Replay {
        trace: PathBuf,
        #[arg(long)]
        realtime: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write the protocol test vectors as JSON.
    ExportVectors {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Metrics(#[from] thermotwin::client::metrics::MetricsError),
    #[error(transparent)]
    Plot(#[from] plot::PlotError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Client(e) if e.is_range_violation() => EXIT_RANGE,
            CliError::Client(_) => EXIT_CONNECTION,
            CliError::Trace(_) | CliError::Metrics(_) => EXIT_BAD_TRACE,
            _ => 1,
        }
    }
}

fn load_config(sim: &SimArgs, default_realtime: bool) -> Result<DeviceConfig, CliError> {
    let mut config = match &sim.config {
        Some(path) => DeviceConfig::load(path)?,
        None => DeviceConfig::default(),
    };
    config.sim.realtime = if sim.fast {
        false
    } else {
        sim.realtime || default_realtime
    };
    if let Some(seed) = sim.seed {
        config.sim.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn write_records(out: &OutArgs, records: &[TraceRecord]) -> Result<(), CliError> {
    match &out.out {
        Some(path) => trace::write_trace_file(path, records, out.format)?,
        None => trace::write_trace(std::io::stdout().lock(), records, out.format)?,
    }
    Ok(())
}

fn print_status(t: &Telemetry) {
    let v = t.values();
    println!(
        "t={:.2}s mode={} setpoint={} enabled={} t_abs={:.2}C t_emit={:.2}C t_contact={:.2}C current={:.3}A heat={:.3}W battery={}% flags={:#04x}",
        v.time_s,
        v.mode.as_str(),
        v.setpoint,
        t.enabled(),
        v.t_abs_c,
        v.t_emit_c,
        v.t_contact_c,
        v.current_a,
        v.heat_w,
        v.battery_pct,
        v.flags,
    );
}

fn print_metrics(metrics: &[StepMetrics]) {
    println!(
        "time_s,mode,setpoint,initial,response_time_s,slew_per_s,steady_state_error,overshoot_pct"
    );
    for m in metrics {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        println!(
            "{:.2},{},{},{:.4},{},{},{:.4},{:.2}",
            m.time_s,
            m.mode.as_str(),
            m.setpoint,
            m.initial,
            opt(m.response_time_s),
            opt(m.slew_per_s),
            m.steady_state_error,
            m.overshoot_pct
        );
    }
}

fn send(addr: &str, cmd: Command) -> Result<(), CliError> {
    let mut session = Session::connect(addr)?;
    let applied = session.command(cmd)?;
    println!(
        "ack {}",
        serde_json::to_string(&applied).expect("commands serialize")
    );
    Ok(())
}

async fn serve(config: DeviceConfig) -> Result<(), CliError> {
    let handle = service::start(config)
        .await
        .map_err(|source| CliError::Io {
            path: PathBuf::from("<listen>"),
            source,
        })?;
    println!("tcp {} ws ws://{}/ws", handle.tcp_addr(), handle.ws_addr());
    tokio::select! {
        _ = tokio::signal::ctrl_c() => handle.shutdown().await,
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("trace")
        .to_string()
}

fn run(cli: Cli) -> Result<(), CliError> {
    let addr = cli.addr.as_str();
    match cli.command {
        Cmd::Serve {
            sim,
            tcp_port,
            ws_port,
        } => {
            let mut config = load_config(&sim, true)?;
            if let Some(p) = tcp_port {
                config.service.tcp_port = p;
            }
            if let Some(p) = ws_port {
                config.service.ws_port = p;
            }
            let runtime = tokio::runtime::Runtime::new().map_err(|source| CliError::Io {
                path: PathBuf::from("<runtime>"),
                source,
            })?;
            runtime.block_on(serve(config))
        }
        Cmd::Connect => {
            let mut session = Session::connect(addr)?;
            println!("connected to {}", session.info().label());
            print_status(&session.status()?);
            Ok(())
        }
        Cmd::SetLevel { level } => send(addr, Command::SetLevel { level }),
        Cmd::SetHeat { watts } => send(addr, Command::set_heat(watts).map_err(ClientError::from)?),
        Cmd::SetTemp { celsius } => {
            send(addr, Command::set_temp(celsius).map_err(ClientError::from)?)
        }
        Cmd::SetMode { mode } => send(addr, Command::SetMode { mode }),
        Cmd::SetPid {
            kp,
            ki,
            kd,
            i_limit,
        } => send(
            addr,
            Command::set_pid(kp, ki, kd, i_limit).map_err(ClientError::from)?,
        ),
        Cmd::On => send(addr, Command::Enable { on: true }),
        Cmd::Off => send(addr, Command::Enable { on: false }),
        Cmd::Status => {
            let mut session = Session::connect(addr)?;
            print_status(&session.status()?);
            Ok(())
        }
        Cmd::Record { duration, out } => {
            if !(duration > 0.0 && duration.is_finite()) {
                return Err(CliError::Usage(format!(
                    "--duration must be positive, got {duration}"
                )));
            }
            let mut session = Session::connect(addr)?;
            let records = session.record(Duration::from_secs_f64(duration))?;
            write_records(&out, &records)?;
            eprintln!("recorded {} rows", records.len());
            Ok(())
        }
        Cmd::Scenario {
            scenario,
            script,
            sim,
            out,
        } => {
            let config = load_config(&sim, false)?;
            let scenario = match (scenario, script) {
                (Some(name), _) => Scenario::builtin(&name)?,
                (None, Some(path)) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|source| CliError::Io { path, source })?;
                    Scenario::from_toml(&text)?
                }
                (None, None) => {
                    return Err(CliError::Usage(
                        "give --scenario NAME or --script FILE".into(),
                    ))
                }
            };
            let records = run_scenario(&config, &scenario)?;
            write_records(&out, &records)?;
            Ok(())
        }
        Cmd::Metrics { trace: path, json } => {
            let records = trace::read_trace_file(&path)?;
            let metrics = trace_metrics(&records)?;
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&metrics).expect("metrics serialize")
                );
            } else {
                print_metrics(&metrics);
            }
            Ok(())
        }
        Cmd::Plot { trace: path, out } => {
            let records = trace::read_trace_file(&path)?;
            std::fs::create_dir_all(&out).map_err(|source| CliError::Io {
                path: out.clone(),
                source,
            })?;
            for written in plot::plot_trace(&records, &out, &stem(&path))? {
                println!("{}", written.display());
            }
            Ok(())
        }
        Cmd::Replay {
            trace: path,
            realtime,
            out,
        } => {
            let records = trace::read_trace_file(&path)?;
            if realtime {
                let start = std::time::Instant::now();
                let t0 = records.first().map(|r| r.time_s).unwrap_or(0.0);
                for r in &records {
                    let due = Duration::from_secs_f64((r.time_s - t0).max(0.0));
                    if let Some(wait) = due.checked_sub(start.elapsed()) {
                        std::thread::sleep(wait);
                    }
                }
            }
            write_records(&out, &records)?;
            let metrics = trace_metrics(&records)?;
            eprintln!("{} rows, {} steps", records.len(), metrics.len());
            Ok(())
        }
        Cmd::ExportVectors { out } => {
            let text = serde_json::to_string_pretty(&vectors::reference_vectors())
                .expect("vectors serialize");
            match out {
                Some(path) => std::fs::write(&path, text + "\n")
                    .map_err(|source| CliError::Io { path, source })?,
                None => println!("{text}"),
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
