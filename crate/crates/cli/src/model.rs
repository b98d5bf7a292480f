//! Model directories: `model.json` naming the kind and its component files, the
//! training graph `graph.kgb`, and the components themselves.

use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use kgraph_core::fusion::{AreModel, StackedModel};
use kgraph_core::graphfeat::{PraModel, PraModelFile, PraScorer};
use kgraph_core::io::{read_binary_kg, write_binary_kg};
use kgraph_core::latent::{read_model, write_model, RescalParams};
use kgraph_core::{KnowledgeGraph, LatentModel, Triple, TripleScorer, FORMAT_VERSION};

use crate::error::CliError;

pub const INDEX: &str = "model.json";
pub const GRAPH: &str = "graph.kgb";
const MODEL_FORMAT: &str = "kgraph-model";
const PRA_FORMAT: &str = "kgraph-pra";
const STACK_FORMAT: &str = "kgraph-stack";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentKind {
    Latent,
    Pra,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub role: String,
    pub kind: ComponentKind,
    pub file: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelIndex {
    pub format: String,
    pub version: u32,
    /// The `--model` value the directory was trained with.
    pub kind: String,
    pub graph: String,
    pub components: Vec<Component>,
    /// Fusion layer of a stacked model.
    pub fusion: Option<String>,
}

impl ModelIndex {
    pub fn new(kind: &str, components: Vec<Component>, fusion: Option<String>) -> Self {
        Self { format: MODEL_FORMAT.into(), version: FORMAT_VERSION, kind: kind.into(), graph: GRAPH.into(), components, fusion }
    }
}

#[derive(Serialize, Deserialize)]
struct PraFile {
    format: String,
    version: u32,
    relations: Vec<Option<PraModelFile>>,
}

#[derive(Serialize, Deserialize)]
struct FusionFile {
    format: String,
    version: u32,
    model: StackedModel,
}

pub enum Scorer {
    Latent(LatentModel),
    Pra(PraScorer),
    Are(AreModel),
    Stacked(Vec<Scorer>, StackedModel),
}

impl TripleScorer for Scorer {
    fn score_triple(&self, t: Triple) -> f64 {
        match self {
            Scorer::Latent(m) => m.score_triple(t),
            Scorer::Pra(m) => m.score_triple(t),
            Scorer::Are(m) => m.score_triple(t),
            Scorer::Stacked(bases, fusion) => {
                let row: Vec<f64> = bases.iter().map(|b| b.score_triple(t)).collect();
                fusion.logit(&row).expect("arity checked on load")
            }
        }
    }
}

pub struct LoadedModel {
    pub index: ModelIndex,
    /// Training graph; its dictionaries define the model's id space.
    pub graph: KnowledgeGraph,
    pub scorer: Scorer,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

pub fn save_index(dir: &Path, index: &ModelIndex) -> Result<(), CliError> {
    write_json(&dir.join(INDEX), index)
}

pub fn save_graph(dir: &Path, kg: &KnowledgeGraph) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(dir.join(GRAPH))?);
    write_binary_kg(kg, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn save_latent(dir: &Path, file: &str, model: &LatentModel, seed: u64) -> Result<(), CliError> {
    let mut w = BufWriter::new(fs::File::create(dir.join(file))?);
    write_model(&mut w, model, seed)?;
    w.flush()?;
    Ok(())
}

pub fn save_pra(dir: &Path, file: &str, kg: &KnowledgeGraph, models: &[Option<PraModel>]) -> Result<(), CliError> {
    let f = PraFile {
        format: PRA_FORMAT.into(),
        version: FORMAT_VERSION,
        relations: models.iter().map(|m| m.as_ref().map(|m| m.to_file(kg))).collect(),
    };
    write_json(&dir.join(file), &f)
}

pub fn save_fusion(dir: &Path, file: &str, model: &StackedModel) -> Result<(), CliError> {
    write_json(&dir.join(file), &FusionFile { format: STACK_FORMAT.into(), version: FORMAT_VERSION, model: model.clone() })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Data(format!("`{}`: {e}", path.display())))?;
    serde_json::from_slice(&bytes).map_err(|e| CliError::Data(format!("`{}`: {e}", path.display())))
}

fn load_latent(path: &Path, kg: &KnowledgeGraph) -> Result<LatentModel, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::Data(format!("`{}`: {e}", path.display())))?;
    let (_, m) = read_model(BufReader::new(f))?;
    if m.num_entities() != kg.num_entities() || m.num_relations() != kg.num_relations() {
        return Err(CliError::Data(format!(
            "`{}` has {}×{} entities×relations but the model graph has {}×{}",
            path.display(),
            m.num_entities(),
            m.num_relations(),
            kg.num_entities(),
            kg.num_relations()
        )));
    }
    Ok(m)
}

fn load_pra(path: &Path, kg: &KnowledgeGraph) -> Result<Vec<Option<PraModel>>, CliError> {
    let f: PraFile = read_json(path)?;
    if f.format != PRA_FORMAT || f.version != FORMAT_VERSION {
        return Err(CliError::Data(format!("`{}` is not a version {FORMAT_VERSION} PRA file", path.display())));
    }
    if f.relations.len() != kg.num_relations() {
        return Err(CliError::Data(format!("`{}` covers {} relations, the graph has {}", path.display(), f.relations.len(), kg.num_relations())));
    }
    Ok(f.relations.iter().map(|m| m.as_ref().map(|m| PraModel::from_file(m, kg)).transpose()).collect::<Result<_, _>>()?)
}

fn load_component(dir: &Path, c: &Component, kg: &KnowledgeGraph) -> Result<Scorer, CliError> {
    let path = dir.join(&c.file);
    Ok(match c.kind {
        ComponentKind::Latent => Scorer::Latent(load_latent(&path, kg)?),
        ComponentKind::Pra => Scorer::Pra(PraScorer::new(kg.clone(), load_pra(&path, kg)?)),
    })
}

pub fn load(dir: &Path) -> Result<LoadedModel, CliError> {
    let index: ModelIndex = read_json(&dir.join(INDEX))?;
    if index.format != MODEL_FORMAT || index.version != FORMAT_VERSION {
        return Err(CliError::Data(format!("`{}` is not a version {FORMAT_VERSION} model directory", dir.display())));
    }
    let graph_path = dir.join(&index.graph);
    let f = fs::File::open(&graph_path).map_err(|e| CliError::Data(format!("`{}`: {e}", graph_path.display())))?;
    let graph = read_binary_kg(BufReader::new(f))?;
    let scorer = match index.kind.as_str() {
        "are" => {
            let mut rescal = RescalParams::zeros(graph.num_entities(), graph.num_relations(), 0);
            let mut pra = vec![None; graph.num_relations()];
            for c in &index.components {
                match (c.role.as_str(), load_component(dir, c, &graph)?) {
                    ("latent", Scorer::Latent(LatentModel::Rescal(r))) => rescal = r,
                    ("pra", Scorer::Pra(p)) => pra = p.models,
                    _ => return Err(CliError::Data(format!("unexpected ARE component `{}`", c.role))),
                }
            }
            Scorer::Are(AreModel { rescal, pra, graph: graph.clone() })
        }
        "stacked" => {
            let bases = index.components.iter().map(|c| load_component(dir, c, &graph)).collect::<Result<Vec<_>, _>>()?;
            let name = index.fusion.as_deref().ok_or_else(|| CliError::Data("stacked model without a fusion file".into()))?;
            let f: FusionFile = read_json(&dir.join(name))?;
            if f.format != STACK_FORMAT || f.version != FORMAT_VERSION || f.model.arity() != bases.len() {
                return Err(CliError::Data(format!("fusion file `{name}` does not match {} base models", bases.len())));
            }
            Scorer::Stacked(bases, f.model)
        }
        _ => match index.components.as_slice() {
            [c] => load_component(dir, c, &graph)?,
            _ => return Err(CliError::Data(format!("model `{}` must have exactly one component", index.kind))),
        },
    };
    Ok(LoadedModel { index, graph, scorer })
}
