//! Scenario runner front end. Exit codes: 0 success, 2 config error,
//! 3 solver error.

use clap::{Parser, Subcommand};
use rcpt::scenario::{
    find_preset, load_scenario, parse_config, resolve_out_dir, run_scenario, validate,
    ScenarioError, EXIT_CONFIG, PRESETS,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rcpt", about = "Reaction-coordinate polaron-transform scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config (TOML, or a manifest JSON to re-run)
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<String>,
    },
    /// Run a named preset study
    Preset {
        name: String,
        #[arg(long)]
        out: Option<String>,
    },
    /// List the available presets
    ListPresets,
    /// Check a config against the model schema without running it
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), ScenarioError> {
    match cli.command {
        Command::Run { config, out } => {
            let scenario = load_scenario(&config)?;
            let out_dir = resolve_out_dir(out.as_deref(), &scenario);
            let artifacts = run_scenario(&scenario, &out_dir, None, Vec::new())?;
            report(&artifacts.manifest_path, artifacts.csv_paths.len());
            Ok(())
        }
        Command::Preset { name, out } => {
            let preset = find_preset(&name).ok_or_else(|| ScenarioError::Schema {
                key: name.clone(),
                message: format!(
                    "unknown preset (available: {})",
                    PRESETS
                        .iter()
                        .map(|p| p.name)
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            })?;
            let config = parse_config(preset.config)?;
            let scenario = validate(&config, preset.config)?;
            let out_dir = out
                .map(PathBuf::from)
                .unwrap_or_else(|| resolve_out_dir(None, &scenario).join(preset.name));
            let artifacts = run_scenario(&scenario, &out_dir, Some(preset.name), Vec::new())?;
            report(&artifacts.manifest_path, artifacts.csv_paths.len());
            Ok(())
        }
        Command::ListPresets => {
            for preset in PRESETS {
                println!("{:<26} {}", preset.name, preset.description);
            }
            Ok(())
        }
        Command::Validate { config } => match load_scenario(&config) {
            Ok(scenario) => {
                println!(
                    "ok: model={} representations={} points={}",
                    match scenario.model {
                        rcpt::scenario::ModelKind::Gsb => "gsb",
                        rcpt::scenario::ModelKind::Nesb => "nesb",
                        rcpt::scenario::ModelKind::Qar => "qar",
                        rcpt::scenario::ModelKind::Dqd => "dqd",
                        rcpt::scenario::ModelKind::Chain => "chain",
                    },
                    scenario.representations.len(),
                    scenario.sweeps.iter().map(|(_, g)| g.len()).product::<usize>()
                );
                Ok(())
            }
            Err(e) => {
                // Validation failures always map to the config exit code.
                eprintln!("invalid: {e}");
                std::process::exit(EXIT_CONFIG);
            }
        },
    }
}

fn report(manifest: &std::path::Path, csv_count: usize) {
    println!("wrote {csv_count} CSV file(s); manifest at {}", manifest.display());
}
