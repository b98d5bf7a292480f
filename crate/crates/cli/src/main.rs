//! `kgraph`: import, split, train, evaluate and inspect link-prediction models.

mod commands;
mod error;
mod model;
mod output;
mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::error::CliError;
use crate::output::{Manifest, Staging, MANIFEST};
use crate::settings::{Settings, Spec};

struct Sub {
    name: &'static str,
    about: &'static str,
    specs: &'static [Spec],
    /// Settings naming files or directories the command reads.
    inputs: &'static [&'static str],
    out_required: bool,
}

const SUBCOMMANDS: &[Sub] = &[
    Sub { name: "import", about: "Read a TSV or N-Triples file into a binary graph", specs: settings::IMPORT, inputs: &["input"], out_required: true },
    Sub { name: "split", about: "Partition a graph into train/valid/test", specs: settings::SPLIT, inputs: &["data"], out_required: true },
    Sub { name: "train", about: "Fit a model", specs: settings::TRAIN, inputs: &["data"], out_required: true },
    Sub { name: "evaluate", about: "Rank held-out triples and compute metrics", specs: settings::EVALUATE, inputs: &["model", "data"], out_required: true },
    Sub { name: "predict", about: "Top completions of `s,r,?` or `?,r,o`", specs: settings::PREDICT, inputs: &["model"], out_required: false },
    Sub { name: "rules", about: "Dump weighted PRA rules", specs: settings::RULES, inputs: &["model"], out_required: false },
    Sub {
        name: "export-embeddings",
        about: "Write entity and relation embeddings as TSV",
        specs: settings::EXPORT,
        inputs: &["model"],
        out_required: true,
    },
];

fn cli() -> Command {
    let mut cmd = Command::new("kgraph")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Link prediction for knowledge graphs")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for s in SUBCOMMANDS {
        cmd = cmd.subcommand(settings::command(s.name, s.about, s.specs, s.out_required));
    }
    cmd.subcommand(
        Command::new("replay")
            .about("Re-run a recorded command from its manifest")
            .arg(Arg::new("manifest").long("manifest").value_name("FILE").required(true).help("manifest.json or a run directory"))
            .arg(Arg::new("out").long("out").value_name("DIR").required(true).help("output directory"))
            .arg(Arg::new("force").long("force").action(ArgAction::SetTrue).help("replace an existing output directory")),
    )
}

fn find(name: &str) -> Result<&'static Sub, CliError> {
    SUBCOMMANDS.iter().find(|s| s.name == name).ok_or_else(|| CliError::Usage(format!("unknown command `{name}`")))
}

/// Run `name` with fully resolved settings, staging output into `out`.
fn execute(name: &str, settings: &Settings, out: Option<&Path>, force: bool) -> Result<Option<PathBuf>, CliError> {
    let sub = find(name)?;
    settings::validate(sub.specs, settings)?;
    let threads = if settings.flag("deterministic")? { 1 } else { settings.get::<usize>("threads")? };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| {
        let manifest = Manifest::new(name, settings, sub.inputs)?;
        let staging = out.map(|p| Staging::new(p, force)).transpose()?;
        let need = || staging.as_ref().ok_or_else(|| CliError::Usage("--out is required".into()));
        match name {
            "import" => commands::import(settings, need()?)?,
            "split" => commands::split(settings, need()?)?,
            "train" => commands::train(settings, need()?)?,
            "evaluate" => commands::evaluate_cmd(settings, need()?)?,
            "predict" => commands::predict(settings, staging.as_ref())?,
            "rules" => commands::rules(settings, staging.as_ref())?,
            "export-embeddings" => commands::export_embeddings(settings, need()?)?,
            other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
        }
        staging.map(|s| s.commit(manifest)).transpose()
    })
}

fn replay(m: &ArgMatches) -> Result<Option<PathBuf>, CliError> {
    let mut path = PathBuf::from(m.get_one::<String>("manifest").expect("required"));
    if path.is_dir() {
        path.push(MANIFEST);
    }
    let manifest = Manifest::read(&path)?;
    manifest.verify_inputs()?;
    let out = Path::new(m.get_one::<String>("out").expect("required"));
    execute(&manifest.command, &Settings(manifest.settings.clone()), Some(out), m.get_flag("force"))
}

fn run(matches: &ArgMatches) -> Result<Option<PathBuf>, CliError> {
    let (name, sub) = matches.subcommand().expect("subcommand required");
    if name == "replay" {
        return replay(sub);
    }
    let spec = find(name)?;
    let settings = settings::resolve(spec.specs, sub)?;
    let out = sub.get_one::<String>("out").map(Path::new);
    execute(name, &settings, out, sub.get_flag("force"))
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&matches) {
        Ok(Some(dir)) => {
            eprintln!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
