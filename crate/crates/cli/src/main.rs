mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dsearch_core::profiler::ColumnType;
use dsearch_core::search::RelatedMode;

/// Dataset search engine: ingest, profile, search and augment tabular data.
#[derive(Debug, Parser)]
#[command(name = "engine", version)]
pub struct Cli {
    /// Engine configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Discover, profile and index datasets from the configured plugins.
    Ingest(IngestArgs),
    /// Profile a CSV file.
    Profile(ProfileArgs),
    /// Query the index.
    Search(SearchArgs),
    /// Join or union a CSV with an indexed dataset.
    Augment(AugmentArgs),
    /// Show index statistics.
    Stats,
    /// Run a bundled end-to-end scenario.
    Demo {
        #[command(subcommand)]
        demo: Demo,
    },
    /// Start the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Only run the plugin with this name.
    #[arg(long)]
    pub plugin: Option<String>,
    /// Maximum datasets to fetch per plugin.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Also ingest CSV files from this directory (as plugin "local").
    #[arg(long, value_name = "DIR")]
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    pub csv: PathBuf,
    /// Force a column type, e.g. `--type date=temporal`.
    #[arg(long = "type", value_name = "COLUMN=TYPE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    #[arg(long, num_args = 1..)]
    pub keywords: Vec<String>,
    /// Start of the temporal filter (date, datetime or year).
    #[arg(long)]
    pub after: Option<String>,
    /// End of the temporal filter.
    #[arg(long)]
    pub before: Option<String>,
    /// Bounding box as `lat_min,lon_min,lat_max,lon_max`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "area")]
    pub bbox: Option<String>,
    /// Named area from the gazetteer.
    #[arg(long)]
    pub area: Option<String>,
    #[arg(long)]
    pub source: Vec<String>,
    /// Required column type (repeatable; all must be present).
    #[arg(long = "type")]
    pub types: Vec<ColumnType>,
    /// CSV whose joinable or unionable datasets to find.
    #[arg(long, value_name = "CSV")]
    pub related: Option<PathBuf>,
    #[arg(long, default_value = "join")]
    pub mode: RelatedMode,
    /// Read the whole query as JSON from this file instead.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["keywords", "after", "before", "bbox", "area", "source", "types"])]
    pub query: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub offset: usize,
    #[arg(long, default_value_t = 20)]
    pub limit: usize,
    /// Print each result's score breakdown.
    #[arg(long)]
    pub explain: bool,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Left-hand CSV file.
    #[arg(long, value_name = "CSV", required_unless_present = "left_id")]
    pub left: Option<PathBuf>,
    /// Left-hand dataset from the index.
    #[arg(long, conflicts_with = "left")]
    pub left_id: Option<String>,
    #[arg(long)]
    pub right_id: String,
    /// AugmentationSpec JSON; when omitted the spec is derived by search.
    #[arg(long, value_name = "JSON")]
    pub spec: Option<PathBuf>,
    /// Output CSV; provenance goes to `<out>.provenance.json`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Demo {
    /// Bike trips explained by temperature, then more months, then weather.
    Bicycle {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Run seeds `seed .. seed + runs`.
        #[arg(long, default_value_t = 1)]
        runs: u64,
    },
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Overrides the configured listen address.
    #[arg(long)]
    pub listen: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({"error": {"code": e.code(), "message": e.to_string()}})
                );
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
