//! Subcommand implementations. Each writes into a [`Staging`] directory that the
//! caller commits together with the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use kgraph_core::fusion::{fit_are, fit_stacker, stack_inputs, AreConfig};
use kgraph_core::graph::Slot;
use kgraph_core::graphfeat::{enumerate_path_types, fit_pra, pra_rules, PraConfig, PraModel};
use kgraph_core::io::{read_binary_kg, read_split, read_triple_file, read_triple_lines, write_binary_kg, write_split};
use kgraph_core::latent::{fit_rescal_als, AlsConfig, Distance, RescalParams};
use kgraph_core::sampling::{perturb_negatives, perturbation_set, LabeledTripleSet, NegativeRegime};
use kgraph_core::train::{auc_roc, evaluate, sgd_train, write_metrics_json, write_metrics_tsv, write_trace_csv, EvalOptions};
use kgraph_core::{
    holdout_split, infer_type_constraints, seed, EntityId, KnowledgeGraph, LatentModel, LossKind, ModelConfig, ModelKind,
    Nonlinearity, SplitRatios, TrainConfig, Triple, TripleScorer, TypeConstraints,
};

use crate::error::CliError;
use crate::model::{self, Component, ComponentKind, LoadedModel, ModelIndex, Scorer};
use crate::output::Staging;
use crate::settings::Settings;

fn data_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("`{}`: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    Ok(BufWriter::new(fs::File::create(path)?))
}

fn write_metrics<T: Serialize>(out: &Staging, json: &T, rows: &[(&str, Option<f64>)]) -> Result<(), CliError> {
    let mut w = create(&out.file("metrics.json"))?;
    write_metrics_json(&mut w, json)?;
    w.flush()?;
    let mut w = create(&out.file("metrics.tsv"))?;
    write_metrics_tsv(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

fn write_trace(out: &Staging, trace: &[f64]) -> Result<(), CliError> {
    let mut w = create(&out.file("trace.csv"))?;
    write_trace_csv(&mut w, trace)?;
    w.flush()?;
    Ok(())
}

/// A graph from an import directory, a split directory (union of its parts), a
/// `.kgb` snapshot or a triple file.
pub fn load_graph(path: &Path) -> Result<KnowledgeGraph, CliError> {
    if path.is_dir() {
        if path.join("split.json").is_file() {
            return Ok(read_split(path)?.0);
        }
        return load_graph(&path.join(model::GRAPH));
    }
    if !path.is_file() {
        return Err(data_err(path, "no such file or directory"));
    }
    if path.extension().is_some_and(|e| e == "kgb") {
        let f = fs::File::open(path).map_err(|e| data_err(path, e))?;
        return Ok(read_binary_kg(BufReader::new(f))?);
    }
    Ok(read_triple_file(path)?)
}

/// Known positives plus the triples to train on (and validate with, for splits).
struct TrainData {
    full: KnowledgeGraph,
    train: Vec<Triple>,
    valid: Vec<Triple>,
}

fn load_train_data(path: &Path) -> Result<TrainData, CliError> {
    if path.is_dir() && path.join("split.json").is_file() {
        let (full, split, _) = read_split(path)?;
        return Ok(TrainData { full, train: split.train, valid: split.valid });
    }
    let full = load_graph(path)?;
    let train = full.triples().to_vec();
    Ok(TrainData { full, train, valid: Vec::new() })
}

pub fn import(s: &Settings, out: &Staging) -> Result<(), CliError> {
    let input = Path::new(s.raw("input")?);
    let kg = read_triple_file(input).map_err(|e| match e {
        kgraph_core::Error::Io(io) => data_err(input, io),
        other => other.into(),
    })?;
    let mut w = create(&out.file(model::GRAPH))?;
    write_binary_kg(&kg, &mut w)?;
    w.flush()?;
    let counts = BTreeMap::from([("entities", kg.num_entities()), ("relations", kg.num_relations()), ("triples", kg.len())]);
    let rows: Vec<(&str, Option<f64>)> = counts.iter().map(|(k, &v)| (*k, Some(v as f64))).collect();
    write_metrics(out, &counts, &rows)?;
    eprintln!("imported {} triples over {} entities and {} relations", kg.len(), kg.num_entities(), kg.num_relations());
    Ok(())
}

fn parse_ratios(raw: &str) -> Result<SplitRatios, CliError> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("ratios `{raw}`: {e}")))?;
    match parts.as_slice() {
        &[a, b, c] => Ok(SplitRatios::new(a, b, c)),
        _ => Err(CliError::Usage(format!("ratios `{raw}`: expected train,valid,test"))),
    }
}

pub fn split(s: &Settings, out: &Staging) -> Result<(), CliError> {
    let kg = load_graph(Path::new(s.raw("data")?))?;
    let ratios = parse_ratios(s.raw("ratios")?)?;
    let seed: u64 = s.get("seed")?;
    let parts = holdout_split(&kg, ratios, seed).map_err(|e| match e {
        kgraph_core::Error::InvalidSplit(m) => CliError::Usage(m),
        other => other.into(),
    })?;
    let manifest = write_split(&kg, &parts, ratios, seed, out.path())?;
    let counts = BTreeMap::from([("train", manifest.counts[0]), ("valid", manifest.counts[1]), ("test", manifest.counts[2])]);
    let rows: Vec<(&str, Option<f64>)> = counts.iter().map(|(k, &v)| (*k, Some(v as f64))).collect();
    write_metrics(out, &counts, &rows)?;
    eprintln!("split {} triples into {:?}", kg.len(), manifest.counts);
    Ok(())
}

fn model_config(s: &Settings, kind: ModelKind) -> Result<ModelConfig, CliError> {
    let dim: usize = s.get("dim")?;
    let cfg = ModelConfig {
        relation_dim: s.size_or("relation-dim", dim)?,
        hidden_a: s.size_or("hidden-a", dim)?,
        hidden_b: s.size_or("hidden-b", dim)?,
        hidden_c: s.size_or("hidden-c", dim)?,
        nonlinearity: s.get::<Nonlinearity>("nonlinearity")?,
        distance: s.get::<Distance>("distance")?,
        ..ModelConfig::new(kind, dim)
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn train_config(s: &Settings, seed: u64) -> Result<TrainConfig, CliError> {
    Ok(TrainConfig {
        loss: s.get::<LossKind>("loss")?,
        learning_rate: s.get("learning-rate")?,
        epochs: s.get::<usize>("epochs")?.max(1),
        l2: s.get("l2")?,
        margin: s.get("margin")?,
        regime: s.get::<NegativeRegime>("regime")?,
        seed,
    })
}

/// Summary of one fitted component for the metrics file.
#[derive(Serialize)]
struct FitSummary {
    component: String,
    final_loss: Option<f64>,
    steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

fn train_latent(
    s: &Settings,
    kind: ModelKind,
    graph: &KnowledgeGraph,
    train: &[Triple],
    seed: u64,
) -> Result<(LatentModel, Vec<f64>, FitSummary), CliError> {
    let cfg = model_config(s, kind)?;
    let mut model = LatentModel::init(&cfg, graph.num_entities(), graph.num_relations(), seed)?;
    let tcfg = train_config(s, seed)?;
    tcfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if s.get::<usize>("epochs")? == 0 {
        let summary = FitSummary { component: kind.as_str().into(), final_loss: None, steps: 0, note: Some("initialisation only".into()) };
        return Ok((model, Vec::new(), summary));
    }
    let tc = infer_type_constraints(graph);
    let report = sgd_train(&mut model, train, graph, &tc, &tcfg)?;
    let note = (report.skipped + report.clamped > 0).then(|| format!("{} skipped, {} clamped", report.skipped, report.clamped));
    let summary = FitSummary { component: kind.as_str().into(), final_loss: report.trace.last().copied(), steps: report.trace.len(), note };
    Ok((model, report.trace, summary))
}

fn train_als(s: &Settings, graph: &KnowledgeGraph, seed: u64) -> Result<(LatentModel, Vec<f64>, FitSummary), CliError> {
    let cfg = AlsConfig {
        dim: s.get("dim")?,
        lambda_entity: s.get("lambda-entity")?,
        lambda_relation: s.get("lambda-relation")?,
        iters: s.get("als-iters")?,
        tol: 0.0,
        seed,
    };
    let (params, report) = fit_rescal_als(graph, &cfg)?;
    let trace: Vec<f64> = std::iter::once(report.initial_loss).chain(report.trace.iter().map(|st| st.loss)).collect();
    let note = report.used_pinv().then(|| "pseudo-inverse fallback used".to_string());
    let summary = FitSummary { component: "rescal-als".into(), final_loss: Some(report.final_loss()), steps: report.trace.len(), note };
    Ok((LatentModel::Rescal(params), trace, summary))
}

fn pra_config(s: &Settings) -> Result<PraConfig, CliError> {
    Ok(PraConfig { max_len: s.get("pra-max-len")?, budget: s.get("pra-budget")?, l1: s.get("pra-l1")?, ..PraConfig::default() })
}

/// One PRA model per relation; relations without usable examples get none.
fn train_pra(s: &Settings, graph: &KnowledgeGraph, train: &[Triple], seed: u64) -> Result<(Vec<Option<PraModel>>, FitSummary), CliError> {
    let cfg = pra_config(s)?;
    let per_side: usize = s.get("negatives-per-side")?;
    let tc = infer_type_constraints(graph);
    let mut models = Vec::with_capacity(graph.num_relations());
    let mut objective = 0.0;
    for k in 0..graph.num_relations() as u32 {
        let k = kgraph_core::RelationId(k);
        let positives: Vec<Triple> = train.iter().filter(|t| t.relation == k).copied().collect();
        if positives.is_empty() {
            models.push(None);
            continue;
        }
        let negatives: Vec<Triple> =
            positives.iter().flat_map(|&t| perturb_negatives(graph, t, per_side, &tc, seed)).map(|n| n.triple).collect();
        if negatives.is_empty() {
            models.push(None);
            continue;
        }
        let paths = enumerate_path_types(graph, k, cfg.max_len, cfg.budget, seed::derive_seed(seed, "pra-paths"))?;
        let (m, fit) = fit_pra(graph, k, &paths, &positives, &negatives, &cfg)?;
        objective += fit.trace.last().copied().unwrap_or(0.0);
        models.push(Some(m));
    }
    let fitted = models.iter().flatten().count();
    let summary = FitSummary {
        component: "pra".into(),
        final_loss: Some(objective),
        steps: fitted,
        note: Some(format!("{fitted} of {} relations fitted", graph.num_relations())),
    };
    Ok((models, summary))
}

fn base_scorer(
    s: &Settings,
    name: &str,
    graph: &KnowledgeGraph,
    train: &[Triple],
    seed: u64,
    out: &Staging,
    file_stem: &str,
) -> Result<(Component, Scorer, Vec<f64>, FitSummary), CliError> {
    let latent = |m: LatentModel, trace, summary| -> Result<_, CliError> {
        let file = format!("{file_stem}.bin");
        model::save_latent(out.path(), &file, &m, seed)?;
        Ok((Component { role: name.into(), kind: ComponentKind::Latent, file }, Scorer::Latent(m), trace, summary))
    };
    match name {
        "rescal-als" => {
            let (m, trace, summary) = train_als(s, graph, seed)?;
            latent(m, trace, summary)
        }
        "pra" => {
            let (models, summary) = train_pra(s, graph, train, seed)?;
            let file = format!("{file_stem}.pra.json");
            model::save_pra(out.path(), &file, graph, &models)?;
            let scorer = Scorer::Pra(kgraph_core::graphfeat::PraScorer::new(graph.clone(), models));
            Ok((Component { role: name.into(), kind: ComponentKind::Pra, file }, scorer, Vec::new(), summary))
        }
        other => {
            let kind: ModelKind = other.parse().map_err(|_| CliError::Usage(format!("unknown model `{other}`")))?;
            let (m, trace, summary) = train_latent(s, kind, graph, train, seed)?;
            latent(m, trace, summary)
        }
    }
}

pub fn train(s: &Settings, out: &Staging) -> Result<(), CliError> {
    let data = load_train_data(Path::new(s.raw("data")?))?;
    let graph = data.full.restrict(&data.train)?;
    let seed: u64 = s.get("seed")?;
    let kind = s.raw("model")?.to_string();
    model::save_graph(out.path(), &graph)?;
    let (index, trace, summaries) = match kind.as_str() {
        "are" => train_are(s, &graph, &data.train, seed, out)?,
        "stacked" => train_stacked(s, &data, &graph, seed, out)?,
        name => {
            let (mut c, _, trace, summary) = base_scorer(s, name, &graph, &data.train, seed, out, "model")?;
            c.role = "model".into();
            (ModelIndex::new(name, vec![c], None), trace, vec![summary])
        }
    };
    model::save_index(out.path(), &index)?;
    write_trace(out, &trace)?;
    let rows: Vec<(String, Option<f64>)> = summaries
        .iter()
        .flat_map(|m| [(format!("{}.final_loss", m.component), m.final_loss), (format!("{}.steps", m.component), Some(m.steps as f64))])
        .collect();
    let rows: Vec<(&str, Option<f64>)> = rows.iter().map(|(k, v)| (k.as_str(), *v)).collect();
    write_metrics(out, &summaries, &rows)?;
    eprintln!("trained `{kind}` on {} triples", data.train.len());
    Ok(())
}

type Trained = (ModelIndex, Vec<f64>, Vec<FitSummary>);

fn train_are(s: &Settings, graph: &KnowledgeGraph, train: &[Triple], seed: u64, out: &Staging) -> Result<Trained, CliError> {
    let tc = infer_type_constraints(graph);
    let examples = perturbation_set(graph, train, s.get("negatives-per-side")?, &tc, seed::derive_seed(seed, "are-negatives"));
    let cfg = AreConfig {
        dim: s.get("dim")?,
        use_paths: true,
        pra: pra_config(s)?,
        learning_rate: s.get("learning-rate")?,
        l2: s.get("l2")?,
        max_rounds: s.get("are-rounds")?,
        seed,
        ..AreConfig::default()
    };
    let (m, report) = fit_are(graph, &examples, &cfg)?;
    let mut components = Vec::new();
    if cfg.dim > 0 {
        model::save_latent(out.path(), "latent.bin", &LatentModel::Rescal(m.rescal.clone()), seed)?;
        components.push(Component { role: "latent".into(), kind: ComponentKind::Latent, file: "latent.bin".into() });
    }
    model::save_pra(out.path(), "pra.json", graph, &m.pra)?;
    components.push(Component { role: "pra".into(), kind: ComponentKind::Pra, file: "pra.json".into() });
    let note = Some(format!("{} rejected epochs, {} relations without PRA", report.rejected_epochs, report.missing_relations.len()));
    let summary = FitSummary { component: "are".into(), final_loss: report.trace.last().copied(), steps: report.trace.len(), note };
    Ok((ModelIndex::new("are", components, None), report.trace, vec![summary]))
}

fn train_stacked(s: &Settings, data: &TrainData, graph: &KnowledgeGraph, seed: u64, out: &Staging) -> Result<Trained, CliError> {
    if data.valid.is_empty() {
        return Err(CliError::Usage("stacked training needs a split with a non-empty validation part".into()));
    }
    let names = s.list("bases")?;
    if names.is_empty() || names.iter().any(|n| n == "are" || n == "stacked") {
        return Err(CliError::Usage("`bases` must list one or more of the single models".into()));
    }
    let mut components = Vec::new();
    let mut scorers = Vec::new();
    let mut summaries = Vec::new();
    for (n, name) in names.iter().enumerate() {
        let base_seed = seed::derive_seed(seed, &format!("base{n}"));
        let (c, scorer, _, summary) = base_scorer(s, name, graph, &data.train, base_seed, out, &format!("base{n}"))?;
        components.push(c);
        scorers.push(scorer);
        summaries.push(summary);
    }
    // Fusion weights are fitted on held-out validation triples.
    let tc = infer_type_constraints(&data.full);
    let held_out: LabeledTripleSet =
        perturbation_set(&data.full, &data.valid, s.get("negatives-per-side")?, &tc, seed::derive_seed(seed, "stack-negatives"));
    let triples = held_out.triples();
    let labels = held_out.labels();
    let refs: Vec<&dyn TripleScorer> = scorers.iter().map(|b| b as &dyn TripleScorer).collect();
    let inputs = stack_inputs(&refs, None, &triples);
    let fusion = fit_stacker(&inputs, &labels, 0, s.get("stack-l2")?)?;
    model::save_fusion(out.path(), "fusion.json", &fusion)?;
    let fused: Vec<f64> = (0..inputs.rows()).map(|r| fusion.logit(inputs.row(r)).expect("arity")).collect();
    summaries.push(FitSummary {
        component: "stacked".into(),
        final_loss: None,
        steps: triples.len(),
        note: Some(format!("validation AUC-ROC {:.4}", auc_roc(&fused, &labels)?)),
    });
    Ok((ModelIndex::new("stacked", components, Some("fusion.json".into())), Vec::new(), summaries))
}

/// Map named triples into the model's id space.
fn resolve_in(model: &KnowledgeGraph, from: &KnowledgeGraph, triples: &[Triple]) -> Result<Vec<Triple>, CliError> {
    triples
        .iter()
        .map(|t| Ok(model.lookup(from.entity_name(t.subject), from.relation_name(t.relation), from.entity_name(t.object))?))
        .collect()
}

pub fn evaluate_cmd(s: &Settings, out: &Staging) -> Result<(), CliError> {
    let loaded = model::load(Path::new(s.raw("model")?))?;
    let data_path = Path::new(s.raw("data")?);
    let (test, extra) = if data_path.is_dir() {
        let (kg, parts, _) = read_split(data_path)?;
        let test = match s.raw("part")? {
            "test" => &parts.test,
            "valid" => &parts.valid,
            other => return Err(CliError::Usage(format!("unknown part `{other}`"))),
        };
        (resolve_in(&loaded.graph, &kg, test)?, resolve_in(&loaded.graph, &kg, kg.triples())?)
    } else {
        let f = fs::File::open(data_path).map_err(|e| data_err(data_path, e))?;
        let lines = read_triple_lines(f)?;
        let test = kgraph_core::io::resolve_triples(&loaded.graph, &lines)?;
        (test.clone(), test)
    };
    let known_triples: Vec<Triple> = loaded.graph.triples().iter().chain(&extra).copied().collect();
    let known = KnowledgeGraph::from_parts(loaded.graph.entities().clone(), loaded.graph.relations().clone(), known_triples)?;
    let tc = if s.flag("type-constraints")? { Some(infer_type_constraints(&known)) } else { None };
    let open = TypeConstraints::unconstrained(known.num_entities(), known.num_relations());
    let per_side: usize = s.get("negatives-per-side")?;
    let seed: u64 = s.get("seed")?;
    let negatives: Vec<Triple> =
        test.iter().flat_map(|&t| perturb_negatives(&known, t, per_side, tc.as_ref().unwrap_or(&open), seed)).map(|n| n.triple).collect();
    let opts = EvalOptions { filtered: s.flag("filtered")?, both_sides: s.flag("both-sides")? };
    let report = evaluate(&loaded.scorer, &known, tc.as_ref(), &test, &negatives, &opts)?;
    let rows = [
        ("mrr", Some(report.mrr)),
        ("hits_at_1", Some(report.hits_at_1)),
        ("hits_at_10", Some(report.hits_at_10)),
        ("auc_roc", report.auc_roc),
        ("auc_pr", report.auc_pr),
        ("triples", Some(test.len() as f64)),
    ];
    write_metrics(out, &report, &rows)?;
    eprintln!("mrr {:.4}  hits@10 {:.4}  auc-pr {}", report.mrr, report.hits_at_10, report.auc_pr.map_or("NA".into(), |v| format!("{v:.4}")));
    Ok(())
}

/// `(slot to fill, known triple with a placeholder in that slot)`.
fn parse_query(loaded: &LoadedModel, raw: &str) -> Result<(Slot, Triple), CliError> {
    let sep = if raw.contains('\t') { '\t' } else { ',' };
    let parts: Vec<&str> = raw.split(sep).map(str::trim).collect();
    let [s, r, o] = parts.as_slice() else {
        return Err(CliError::Usage(format!("query `{raw}`: expected `subject,relation,?` or `?,relation,object`")));
    };
    let g = &loaded.graph;
    let k = g.relation(r)?;
    match (*s, *o) {
        (s, "?") if s != "?" => Ok((Slot::Object, Triple { subject: g.entity(s)?, relation: k, object: EntityId(0) })),
        ("?", o) if o != "?" => Ok((Slot::Subject, Triple { subject: EntityId(0), relation: k, object: g.entity(o)? })),
        _ => Err(CliError::Usage(format!("query `{raw}`: exactly one of subject and object must be `?`"))),
    }
}

/// Top completions as `(entity name, score)`, best first; ties go to the lower id.
pub fn completions(loaded: &LoadedModel, query: &str, top: usize, exclude_known: bool) -> Result<Vec<(String, f64)>, CliError> {
    let (slot, q) = parse_query(loaded, query)?;
    let mut scored: Vec<(EntityId, f64)> = (0..loaded.graph.num_entities() as u32)
        .map(EntityId)
        .map(|e| (e, slot.replace(q, e)))
        .filter(|(_, t)| !(exclude_known && loaded.graph.contains(t)))
        .map(|(e, t)| (e, loaded.scorer.score_triple(t)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored.into_iter().take(top).map(|(e, v)| (loaded.graph.entity_name(e).to_string(), v)).collect())
}

pub fn predict(s: &Settings, out: Option<&Staging>) -> Result<(), CliError> {
    let loaded = model::load(Path::new(s.raw("model")?))?;
    let top = completions(&loaded, s.raw("query")?, s.get("top")?, s.flag("exclude-known")?)?;
    let mut text = format!("# kgraph-predictions {}\nrank\tentity\tscore\n", kgraph_core::FORMAT_VERSION);
    for (n, (name, v)) in top.iter().enumerate() {
        text.push_str(&format!("{}\t{name}\t{v}\n", n + 1));
    }
    print!("{text}");
    if let Some(out) = out {
        fs::write(out.file("predictions.tsv"), &text)?;
    }
    Ok(())
}

fn pra_models(scorer: &Scorer) -> Vec<(&KnowledgeGraph, &[Option<PraModel>])> {
    match scorer {
        Scorer::Pra(p) => vec![(&p.graph, p.models.as_slice())],
        Scorer::Are(m) => vec![(&m.graph, m.pra.as_slice())],
        Scorer::Stacked(bases, _) => bases.iter().flat_map(pra_models).collect(),
        Scorer::Latent(_) => Vec::new(),
    }
}

pub fn rules(s: &Settings, out: Option<&Staging>) -> Result<(), CliError> {
    let loaded = model::load(Path::new(s.raw("model")?))?;
    let sets = pra_models(&loaded.scorer);
    if sets.is_empty() {
        return Err(CliError::Usage(format!("model `{}` has no PRA component", loaded.index.kind)));
    }
    let mut text = format!("# kgraph-rules {}\n", kgraph_core::FORMAT_VERSION);
    for (graph, models) in sets {
        for m in models.iter().flatten() {
            text.push_str(&format!("# relation {} bias {}\n", graph.relation_name(m.relation), m.bias));
            for (w, rule) in pra_rules(m, graph) {
                text.push_str(&format!("{w}\t{rule}\n"));
            }
        }
    }
    print!("{text}");
    if let Some(out) = out {
        fs::write(out.file("rules.txt"), &text)?;
    }
    Ok(())
}

fn write_rows<'a>(path: &Path, header: &str, rows: impl Iterator<Item = (&'a str, Vec<f64>)>) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "{header}")?;
    for (name, values) in rows {
        write!(w, "{name}")?;
        for v in values {
            write!(w, "\t{v}")?;
        }
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn rescal_rows(r: &RescalParams) -> Vec<Vec<f64>> {
    r.relation.iter().map(|w| w.as_slice().to_vec()).collect()
}

pub fn export_embeddings(s: &Settings, out: &Staging) -> Result<(), CliError> {
    let loaded = model::load(Path::new(s.raw("model")?))?;
    let g = &loaded.graph;
    let (entity, relation) = match &loaded.scorer {
        Scorer::Latent(m) => {
            let relation = match (m, m.relation_embeddings()) {
                (_, Some(r)) => Some((0..r.rows()).map(|k| r.row(k).to_vec()).collect()),
                (LatentModel::Rescal(p), None) => Some(rescal_rows(p)),
                _ => None,
            };
            (m.entity_embeddings().clone(), relation)
        }
        Scorer::Are(m) => (m.rescal.entity.clone(), Some(rescal_rows(&m.rescal))),
        _ => return Err(CliError::Usage(format!("model `{}` has no embeddings", loaded.index.kind))),
    };
    let v = kgraph_core::FORMAT_VERSION;
    write_rows(
        &out.file("entities.tsv"),
        &format!("# kgraph-embeddings {v} entities dim={}", entity.cols()),
        (0..entity.rows()).map(|i| (g.entity_name(EntityId(i as u32)), entity.row(i).to_vec())),
    )?;
    if let Some(rows) = relation {
        let dim = rows.first().map_or(0, Vec::len);
        write_rows(
            &out.file("relations.tsv"),
            &format!("# kgraph-embeddings {v} relations dim={dim}"),
            rows.into_iter().enumerate().map(|(k, r)| (g.relation_name(kgraph_core::RelationId(k as u32)), r)),
        )?;
    }
    Ok(())
}
