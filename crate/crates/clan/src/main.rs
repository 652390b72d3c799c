//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 run error, 2 configuration error,
//! 3 acceptance failure (a `reproduce` study check did not hold).

use std::net::TcpListener;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clan::cluster::{run_agent_loop, run_dcs, run_dda, run_dds, run_serial, Topology};
use clan::error::RunError;
use clan::env::EvalMode;
use clan::experiment::{
    run_experiment, run_socket_cluster, run_studies, write_artifacts, ExperimentConfig,
    Study, TransportMode,
};
use clan::transport::socket::{AgentSocket, CenterHub};

#[derive(Parser)]
#[command(name = "clan", version, about = "Distributed neuroevolution engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config in TOML; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the topology (serial, dcs, dds, dda).
    #[arg(long)]
    topology: Option<String>,
    /// Override the agent count.
    #[arg(long)]
    agents: Option<u16>,
    /// Override the clan count.
    #[arg(long)]
    clans: Option<u16>,
    /// Override the evaluation mode (multi, single).
    #[arg(long)]
    mode: Option<String>,
    /// Override the transport (sim, socket).
    #[arg(long)]
    transport: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for artifacts.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run the comparison studies (cost breakdown, communication
    /// ordering, clan accuracy, scaling fit).
    Reproduce {
        /// Which study to run: cost_breakdown, comm_ordering,
        /// clan_accuracy, scaling, or all.
        #[arg(default_value = "all")]
        study: String,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for study tables.
        #[arg(long, default_value = "studies")]
        out: PathBuf,
    },
    /// Parse and validate a config, reporting the first problem found.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the center of a socket cluster; waits for all agents to
    /// connect, drives the run, then writes artifacts.
    Center {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Listen port; falls back to the CLAN_PORT environment variable.
        #[arg(long)]
        port: Option<u16>,
    },
    /// Run one agent process, connecting to a center.
    Agent {
        /// This agent's address (1-based).
        #[arg(long)]
        id: u16,
        /// Center host; the port comes from --port or CLAN_PORT.
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        port: Option<u16>,
    },
}

fn parse_topology(s: &str) -> Result<Topology, RunError> {
    match s {
        "serial" => Ok(Topology::Serial),
        "dcs" => Ok(Topology::Dcs),
        "dds" => Ok(Topology::Dds),
        "dda" => Ok(Topology::Dda),
        other => Err(RunError::Config(format!(
            "unknown topology '{other}' (expected serial, dcs, dds or dda)"
        ))),
    }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, RunError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(topology) = &args.topology {
        config.run.topology = parse_topology(topology)?;
    }
    if let Some(agents) = args.agents {
        config.transport.agents = agents;
    }
    if let Some(clans) = args.clans {
        config.transport.clans = clans;
    }
    if let Some(mode) = &args.mode {
        config.env.eval_mode = match mode.as_str() {
            "multi" => EvalMode::MultiStep,
            "single" => EvalMode::SingleStep,
            other => {
                return Err(RunError::Config(format!(
                    "unknown eval mode '{other}' (expected multi or single)"
                )))
            }
        };
    }
    if let Some(transport) = &args.transport {
        config.transport.mode = match transport.as_str() {
            "sim" => TransportMode::Sim,
            "socket" => TransportMode::Socket,
            other => {
                return Err(RunError::Config(format!(
                    "unknown transport '{other}' (expected sim or socket)"
                )))
            }
        };
    }
    config.validate()?;
    Ok(config)
}

fn env_port(cli: Option<u16>) -> Result<u16, RunError> {
    if let Some(p) = cli {
        return Ok(p);
    }
    match std::env::var("CLAN_PORT") {
        Ok(v) => v
            .parse()
            .map_err(|_| RunError::Config(format!("CLAN_PORT is not a valid port: '{v}'"))),
        Err(_) => Err(RunError::Config(
            "no port given: pass --port or set CLAN_PORT".into(),
        )),
    }
}

fn cmd_run(args: &ConfigArgs, out: &PathBuf) -> Result<(), RunError> {
    let config = load_config(args)?;
    let result = match config.transport.mode {
        TransportMode::Sim => run_experiment(&config)?,
        TransportMode::Socket => {
            let port = std::env::var("CLAN_PORT")
                .ok()
                .map(|v| {
                    v.parse().map_err(|_| {
                        RunError::Config(format!("CLAN_PORT is not a valid port: '{v}'"))
                    })
                })
                .transpose()?
                .unwrap_or(0);
            run_socket_cluster(&config, port)?
        }
    };
    write_artifacts(out, &config, &result)?;
    println!(
        "{}: {} generations, best fitness {:.4}, solved = {}, artifacts in {}",
        result.topology,
        result.generations_run,
        result.best_genome.fitness.unwrap_or(f64::NEG_INFINITY),
        result.solved,
        out.display()
    );
    Ok(())
}

fn cmd_center(args: &ConfigArgs, out: &PathBuf, port: Option<u16>) -> Result<(), RunError> {
    let config = load_config(args)?;
    let params = config.run_params()?;
    let port = env_port(port)?;
    let result = if config.run.topology == Topology::Serial {
        run_serial(&params)?
    } else {
        let listener =
            TcpListener::bind(("0.0.0.0", port)).map_err(transport_io)?;
        let agents: Vec<u16> = (1..=config.effective_agents()).collect();
        eprintln!(
            "center listening on port {}, waiting for {} agents",
            listener.local_addr().map_err(transport_io)?.port(),
            agents.len()
        );
        let mut hub =
            CenterHub::accept(&listener, &agents).map_err(RunError::Transport)?;
        match config.run.topology {
            Topology::Serial => unreachable!(),
            Topology::Dcs => run_dcs(&mut hub, &agents, &params)?,
            Topology::Dds => run_dds(&mut hub, &agents, &params)?,
            Topology::Dda => run_dda(&mut hub, &agents, &params)?,
        }
    };
    write_artifacts(out, &config, &result)?;
    println!(
        "{}: {} generations, best fitness {:.4}, solved = {}, artifacts in {}",
        result.topology,
        result.generations_run,
        result.best_genome.fitness.unwrap_or(f64::NEG_INFINITY),
        result.solved,
        out.display()
    );
    Ok(())
}

fn cmd_agent(id: u16, host: &str, port: Option<u16>) -> Result<(), RunError> {
    if id == 0 {
        return Err(RunError::Config("agent id 0 is reserved for the center".into()));
    }
    let port = env_port(port)?;
    // The center may not be listening yet; retry for a bounded window so
    // agent and center processes can start in either order.
    let deadline = std::time::Instant::now() + std::time::Duration::from_secs(10);
    let mut socket = loop {
        match AgentSocket::connect((host, port), id) {
            Ok(s) => break s,
            Err(_) if std::time::Instant::now() < deadline => {
                std::thread::sleep(std::time::Duration::from_millis(100));
            }
            Err(e) => return Err(RunError::Transport(e)),
        }
    };
    run_agent_loop(&mut socket, id)
}

// Socket setup failures should map to the transport exit code, not the
// generic i/o one.
fn transport_io(e: std::io::Error) -> RunError {
    RunError::Transport(e.into())
}

fn exit_code(e: &RunError) -> u8 {
    match e {
        RunError::Config(_) => 2,
        RunError::Acceptance(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config, out } => cmd_run(config, out),
        Command::Reproduce { study, config, out } => Study::from_name(study)
            .and_then(|studies| {
                let c = load_config(config)?;
                run_studies(&c, out, &studies)
            }),
        Command::ValidateConfig { config } => {
            ExperimentConfig::load(config).map(|_| println!("ok"))
        }
        Command::Center { config, out, port } => cmd_center(config, out, *port),
        Command::Agent { id, host, port } => cmd_agent(*id, host, *port),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
