//! Flat `key = value` settings: defaults, then a config file, then flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::error::CliError;

/// One recognised setting of a subcommand.
pub struct Spec {
    pub key: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn opt(key: &'static str, default: &'static str, help: &'static str) -> Spec {
    Spec { key, default: Some(default), help }
}

const fn req(key: &'static str, help: &'static str) -> Spec {
    Spec { key, default: None, help }
}

/// Settings every subcommand understands and records.
pub const COMMON: &[Spec] = &[
    opt("threads", "0", "worker threads for parallel sections (0 = all cores)"),
    opt("deterministic", "false", "force sequential execution"),
];

pub const IMPORT: &[Spec] = &[req("input", "TSV or N-Triples file")];

pub const SPLIT: &[Spec] = &[
    req("data", "graph: an import directory, a .kgb snapshot or a triple file"),
    opt("ratios", "0.8,0.1,0.1", "train,valid,test fractions"),
    opt("seed", "0", "split seed"),
];

pub const TRAIN: &[Spec] = &[
    req("data", "split directory, import directory, .kgb snapshot or triple file"),
    opt("model", "transe", "rescal, e-mlp, er-mlp, ntn, se, transe, rescal-als, pra, are or stacked"),
    opt("seed", "0", "global seed"),
    opt("dim", "10", "entity embedding size"),
    opt("relation-dim", "0", "ER-MLP relation embedding size (0 = dim)"),
    opt("hidden-a", "0", "E-MLP/NTN/SE hidden size (0 = dim)"),
    opt("hidden-b", "0", "NTN bilinear slices (0 = dim)"),
    opt("hidden-c", "0", "ER-MLP hidden size (0 = dim)"),
    opt("nonlinearity", "tanh", "tanh or identity"),
    opt("distance", "squared-euclidean", "TransE distance: squared-euclidean or l1"),
    opt("loss", "log", "log, squared or margin-ranking"),
    opt("learning-rate", "0.05", "SGD step size"),
    opt("epochs", "100", "SGD epochs (0 keeps the initialisation)"),
    opt("l2", "1e-4", "L2 strength on touched rows"),
    opt("margin", "1", "ranking-loss margin"),
    opt("regime", "perturbation", "negatives: perturbation, lcwa or cwa"),
    opt("als-iters", "50", "RESCAL-ALS sweeps"),
    opt("lambda-entity", "0.01", "RESCAL-ALS penalty on entity embeddings"),
    opt("lambda-relation", "0.01", "RESCAL-ALS penalty on relation matrices"),
    opt("pra-max-len", "2", "longest PRA path"),
    opt("pra-budget", "200", "PRA path types kept per relation"),
    opt("pra-l1", "1e-3", "PRA L1 strength"),
    opt("negatives-per-side", "1", "perturbation negatives per side for PRA, ARE and stacking"),
    opt("are-rounds", "50", "ARE alternation rounds"),
    opt("bases", "rescal,pra", "stacked base models, comma separated"),
    opt("stack-l2", "1e-3", "L2 strength of the fusion layer"),
];

pub const EVALUATE: &[Spec] = &[
    req("model", "trained model directory"),
    req("data", "split directory or triple file with the evaluation triples"),
    opt("part", "test", "split part to rank: test or valid"),
    opt("filtered", "true", "drop known positives from the candidates"),
    opt("both-sides", "true", "rank subjects as well as objects"),
    opt("type-constraints", "false", "rank only among entities observed in the slot"),
    opt("negatives-per-side", "1", "perturbation negatives per side for AUC"),
    opt("seed", "0", "negative sampling seed"),
];

pub const PREDICT: &[Spec] = &[
    req("model", "trained model directory"),
    req("query", "`subject,relation,?` or `?,relation,object`"),
    opt("top", "10", "number of completions"),
    opt("exclude-known", "false", "skip completions already in the training graph"),
];

pub const RULES: &[Spec] = &[req("model", "model directory with a PRA component")];

pub const EXPORT: &[Spec] = &[req("model", "trained latent model directory")];

/// Resolved settings of one run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Settings(pub BTreeMap<String, String>);

impl Settings {
    pub fn raw(&self, key: &str) -> Result<&str, CliError> {
        self.0.get(key).map(String::as_str).ok_or_else(|| CliError::Usage(format!("missing required setting `{key}`")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key)?;
        raw.trim().parse().map_err(|e| CliError::Usage(format!("setting `{key}` = `{raw}`: {e}")))
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key)? {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(CliError::Usage(format!("setting `{key}` expects true or false, got `{other}`"))),
        }
    }

    /// A size where 0 stands for `fallback`.
    pub fn size_or(&self, key: &str, fallback: usize) -> Result<usize, CliError> {
        Ok(match self.get::<usize>(key)? {
            0 => fallback,
            v => v,
        })
    }

    pub fn list(&self, key: &str) -> Result<Vec<String>, CliError> {
        Ok(self.raw(key)?.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    }
}

/// Clap arguments for `specs` plus the options every command shares.
pub fn args(specs: &[Spec], out_required: bool) -> Vec<Arg> {
    let mut v: Vec<Arg> = COMMON
        .iter()
        .chain(specs)
        .map(|s| {
            let arg = Arg::new(s.key).long(s.key).help(s.help);
            if s.key == "deterministic" {
                arg.action(ArgAction::SetTrue)
            } else {
                arg.value_name("VALUE")
            }
        })
        .collect();
    v.push(Arg::new("config").long("config").value_name("FILE").help("flat `key = value` settings file"));
    v.push(Arg::new("out").long("out").value_name("DIR").required(out_required).help("output directory"));
    v.push(Arg::new("force").long("force").action(ArgAction::SetTrue).help("replace an existing output directory"));
    v
}

pub fn command(name: &'static str, about: &'static str, specs: &[Spec], out_required: bool) -> Command {
    Command::new(name).about(about).args(args(specs, out_required))
}

/// Parse a config file body. Blank lines and `#` comments are skipped.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Defaults, overlaid by the config file, overlaid by flags given on the command line.
pub fn resolve(specs: &[Spec], matches: &ArgMatches) -> Result<Settings, CliError> {
    let known = |k: &str| COMMON.iter().chain(specs).any(|s| s.key == k);
    let mut map: BTreeMap<String, String> =
        COMMON.iter().chain(specs).filter_map(|s| s.default.map(|d| (s.key.to_string(), d.to_string()))).collect();
    if let Some(path) = matches.get_one::<String>("config") {
        let text = std::fs::read_to_string(Path::new(path)).map_err(|e| CliError::Usage(format!("config `{path}`: {e}")))?;
        for (k, v) in parse_config(&text)? {
            if !known(&k) {
                return Err(CliError::Usage(format!("unknown setting `{k}` in `{path}`")));
            }
            map.insert(k, v);
        }
    }
    for s in COMMON.iter().chain(specs) {
        if matches.value_source(s.key) != Some(ValueSource::CommandLine) {
            continue;
        }
        let v = if s.key == "deterministic" { "true".to_string() } else { matches.get_one::<String>(s.key).expect("value").clone() };
        map.insert(s.key.to_string(), v);
    }
    for s in specs.iter().filter(|s| s.default.is_none()) {
        if !map.contains_key(s.key) {
            return Err(CliError::Usage(format!("missing required setting `--{}`", s.key)));
        }
    }
    Ok(Settings(map))
}

/// Check a recorded settings map against the command's table.
pub fn validate(specs: &[Spec], settings: &Settings) -> Result<(), CliError> {
    for k in settings.0.keys() {
        if !COMMON.iter().chain(specs).any(|s| s.key == k) {
            return Err(CliError::Usage(format!("unknown setting `{k}`")));
        }
    }
    for s in specs.iter().filter(|s| s.default.is_none()) {
        settings.raw(s.key)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(argv: &[&str], config: Option<&str>) -> Result<Settings, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let mut full: Vec<String> = vec!["t".into()];
        full.extend(argv.iter().map(|s| s.to_string()));
        if let Some(body) = config {
            let p = dir.path().join("c.conf");
            std::fs::write(&p, body).unwrap();
            full.extend(["--config".into(), p.display().to_string()]);
        }
        let m = command("t", "", TRAIN, false).try_get_matches_from(full).unwrap();
        resolve(TRAIN, &m)
    }

    #[test]
    fn flags_beat_config_beats_defaults() {
        let s = run(&["--data", "x", "--dim", "4"], Some("dim = 7\nepochs = 3\n# note\n")).unwrap();
        assert_eq!(s.raw("dim").unwrap(), "4");
        assert_eq!(s.get::<usize>("epochs").unwrap(), 3);
        assert_eq!(s.raw("loss").unwrap(), "log");
    }

    #[test]
    fn unknown_keys_and_missing_requirements_are_usage_errors() {
        assert!(matches!(run(&["--data", "x"], Some("colour = red")), Err(CliError::Usage(_))));
        assert!(matches!(run(&[], None), Err(CliError::Usage(_))));
        assert!(run(&[], Some("data = y")).is_ok());
    }
}
