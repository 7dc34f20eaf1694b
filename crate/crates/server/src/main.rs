use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use tutorlink_core::net_harness::load_script;
use tutorlink_core::protocol::{Sender, DEFAULT_SEND_RATE_HZ};
use tutorlink_core::session_state::ReducerContext;
use tutorlink_server::bot::{cmd_bot, BotOptions};
use tutorlink_server::config::{ConfigError, Overrides, ServeConfig};
use tutorlink_server::serve::cmd_serve;
use tutorlink_server::{cmd_export, cmd_replay, init_logging, ExitCode, ExportKind};

#[derive(Parser)]
#[command(name = "tutorlink", version, about = "Shared-environment anatomy tutoring host and tools")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BotRole {
    Student,
    Console,
}

#[derive(Subcommand)]
enum Command {
    /// Host a session until interrupted.
    Serve {
        #[arg(long)]
        config: PathBuf,
        /// Native TCP port.
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        ws_port: Option<u16>,
        /// Session log file.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Play a scripted timeline against a running host.
    Bot {
        /// host:port of the native endpoint.
        address: String,
        #[arg(long)]
        script: PathBuf,
        /// Multiplier applied to script times.
        #[arg(long, default_value_t = 1.0)]
        time_scale: f64,
        /// Treat host rejections as expected.
        #[arg(long)]
        expect_rejects: bool,
        #[arg(long, value_enum, default_value = "student")]
        role: BotRole,
        /// Serve config whose scene the bot's replica should use.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SEND_RATE_HZ)]
        send_rate: f64,
    },
    /// Replay a session log and print its digest.
    Replay { log: PathBuf },
    /// Export annotations or the student trajectory from a session log.
    Export {
        log: PathBuf,
        #[arg(long, value_enum)]
        what: ExportKind,
    },
}

fn config_error(e: ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::Config
}

fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Serve {
            config,
            port,
            ws_port,
            log,
        } => match ServeConfig::load(&config, &Overrides { port, ws_port, log }) {
            Ok(c) => cmd_serve(&c),
            Err(e) => config_error(e),
        },
        Command::Bot {
            address,
            script,
            time_scale,
            expect_rejects,
            role,
            config,
            send_rate,
        } => {
            if !(time_scale.is_finite() && time_scale >= 0.0) || !(send_rate.is_finite() && send_rate > 0.0) {
                eprintln!("error: --time-scale must be non-negative and --send-rate positive");
                return ExitCode::Config;
            }
            let timeline = match load_script(&script) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: {}: {e}", script.display());
                    return ExitCode::Config;
                }
            };
            let mut opts = BotOptions {
                role: match role {
                    BotRole::Student => Sender::StudentClient,
                    BotRole::Console => Sender::Console,
                },
                time_scale,
                expect_rejects,
                send_rate_hz: send_rate,
                settle_timeout: Duration::from_secs(10),
                ..BotOptions::default()
            };
            if let Some(path) = config {
                let serve = match ServeConfig::load(&path, &Overrides::default()) {
                    Ok(c) => c,
                    Err(e) => return config_error(e),
                };
                match serve.scene.load(std::path::Path::new(".")) {
                    Ok(scene) => opts.context = ReducerContext::new(Arc::new(scene), serve.nav),
                    Err(e) => {
                        eprintln!("error: scene: {e}");
                        return ExitCode::Config;
                    }
                }
            }
            cmd_bot(&address, timeline, &opts)
        }
        Command::Replay { log } => cmd_replay(&log),
        Command::Export { log, what } => cmd_export(&log, what),
    }
}

fn main() -> std::process::ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::Config.into()
            } else {
                ExitCode::Ok.into()
            };
        }
    };
    run(cli).into()
}
