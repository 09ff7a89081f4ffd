use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use vlp_core::Profile;

#[derive(Parser, Debug)]
#[command(name = "vlp", version, about = "Synthesize visual classification programs from a few labeled images")]
pub struct Cli {
    /// Log level filter (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ground, perceive, synthesize and evaluate for every seed.
    Run(RunArgs),
    /// Ask the model for the task's object, property and action vocabulary.
    Ground(StageArgs),
    /// Extract scenes for every image given a grounding.
    Perceive(PerceiveArgs),
    /// Build the grammar and search for the best program.
    Synthesize(SynthesizeArgs),
    /// Score a program on the task's query images.
    Eval(EvalArgs),
    /// Create, edit and inspect DSL configurations.
    #[command(subcommand)]
    Dsl(DslCommand),
    /// Inspect a response cache.
    #[command(subcommand)]
    Cache(CacheCommand),
    /// Generate a synthetic task with a known rule and replayable model responses.
    Fixture(FixtureArgs),
}

/// Model endpoint and backend selection.
#[derive(Args, Debug, Clone)]
pub struct EndpointArgs {
    /// Base URL of an OpenAI-compatible chat completions API.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    /// Greedy decoding (temperature 0).
    #[arg(long, conflicts_with = "temperature")]
    pub greedy: bool,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Replay responses from a fixture directory instead of calling a model.
    #[arg(long, value_name = "FIXTURE_DIR", conflicts_with = "offline")]
    pub mock_backend: Option<PathBuf>,
    /// Refuse all model calls; every answer must already be cached.
    #[arg(long)]
    pub offline: bool,
    /// Directory of `<name>.txt` files overriding the built-in prompt templates.
    #[arg(long)]
    pub prompts_dir: Option<PathBuf>,
    /// Response cache directory; in memory when omitted.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

/// Which DSL a command works with.
#[derive(Args, Debug, Clone)]
pub struct DslArgs {
    /// Overrides the profile named in the task file.
    #[arg(long)]
    pub profile: Option<Profile>,
    /// DSL configuration file (TOML); defaults to the profile's DSL.
    #[arg(long)]
    pub dsl: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    #[arg(long)]
    pub budget_secs: Option<f64>,
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Stop after this many enumerated programs.
    #[arg(long)]
    pub max_programs: Option<u64>,
    /// Give every production of a nonterminal the same probability.
    #[arg(long)]
    pub uniform_weights: bool,
    /// Stop at the first program that fits every few-shot example.
    #[arg(long)]
    pub early_stop: bool,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    /// Run seeds concurrently, each with its own cache namespace.
    #[arg(long)]
    pub parallel_seeds: bool,
    #[command(flatten)]
    pub dsl: DslArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct StageArgs {
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Decode seed for the model calls; matches the seed of the same number in `run`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub dsl: DslArgs,
    #[command(flatten)]
    pub endpoint: EndpointArgs,
}

#[derive(Args, Debug)]
pub struct PerceiveArgs {
    #[command(flatten)]
    pub stage: StageArgs,
    /// Grounding file; defaults to `<out>/grounding.json`.
    #[arg(long)]
    pub grounding: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthesizeArgs {
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Defaults to `<out>/grounding.json`.
    #[arg(long)]
    pub grounding: Option<PathBuf>,
    /// Defaults to `<out>/scenes.json`.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    #[command(flatten)]
    pub dsl: DslArgs,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub task: PathBuf,
    #[arg(long)]
    pub scenes: PathBuf,
    /// Program in s-expression form.
    #[arg(long, conflicts_with = "result", required_unless_present = "result")]
    pub program: Option<String>,
    /// A `result.json` written by `synthesize` or `run`.
    #[arg(long)]
    pub result: Option<PathBuf>,
    /// Where to write the report; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum DslCommand {
    /// Write a profile's default DSL configuration.
    Init {
        #[arg(long)]
        profile: Profile,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply add/remove directives to a configuration and print the grammar diff.
    Edit(DslEditArgs),
    /// Print the grammar a configuration yields.
    Show {
        #[arg(long)]
        config: PathBuf,
        /// Symbols to fill the grammar with; placeholders when omitted.
        #[arg(long)]
        grounding: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct DslEditArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub add_primitives: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub remove_primitives: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub remove_symbols: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub restore_symbols: Vec<String>,
    /// Enable the four model-answered size predicates.
    #[arg(long, conflicts_with = "remove_size_predicates")]
    pub add_size_predicates: bool,
    #[arg(long)]
    pub remove_size_predicates: bool,
    /// Grounding whose symbols the edit is checked against and the diff is built from.
    #[arg(long)]
    pub grounding: Option<PathBuf>,
    /// Print the diff without writing the configuration.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Subcommand, Debug)]
pub enum CacheCommand {
    /// Entry counts by request kind and parse outcome.
    Stats {
        #[arg(long)]
        cache_dir: PathBuf,
    },
    /// Print cached entries as JSON lines.
    Show {
        #[arg(long)]
        cache_dir: PathBuf,
        /// Only entries of this request kind, e.g. `scene_objects`.
        #[arg(long)]
        kind: Option<String>,
        /// Only entries whose key starts with this prefix.
        #[arg(long)]
        key: Option<String>,
    },
}

#[derive(Args, Debug)]
pub struct FixtureArgs {
    /// Ground-truth rule in s-expression form.
    #[arg(long)]
    pub rule: String,
    #[arg(long)]
    pub profile: Profile,
    #[arg(long, value_delimiter = ',', required = true)]
    pub objects: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub properties: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub actions: Vec<String>,
    #[arg(long, default_value_t = 6)]
    pub n_pos: usize,
    #[arg(long, default_value_t = 6)]
    pub n_neg: usize,
    #[arg(long, default_value_t = 4)]
    pub n_query: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Task id; defaults to the output directory name.
    #[arg(long)]
    pub task_id: Option<String>,
    /// Resample few-shot images until no more probable program also fits them.
    #[arg(long)]
    pub guard: bool,
    /// Also record responses for these DSL configurations (e.g. with removed symbols).
    #[arg(long)]
    pub dsl: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}
