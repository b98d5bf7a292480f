//! File formats: triple files (TSV and an N-Triples subset), the binary graph
//! snapshot, split manifests and labeled negative exports.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{ingest_triples, KnowledgeGraph, Split, SplitRatios, Triple, Vocab};
use crate::sampling::LabeledTriple;
use crate::FORMAT_VERSION;

const KG_MAGIC: &[u8; 8] = b"KGRAPHv1";

/// Parse one line of a triple file.
///
/// Returns `None` for blank and `#` comment lines. Tab-separated lines must have
/// exactly three fields; other lines are read as `<s> <p> <o> .` N-Triples, with the
/// IRI text between the angle brackets used as the name.
pub fn parse_triple_line(line: &str, line_no: usize) -> Option<Result<(String, String, String)>> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.trim().is_empty() || line.starts_with('#') {
        return None;
    }
    let err = |message: String| Some(Err(Error::Parse { line: line_no, message }));
    if line.contains('\t') {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return err(format!("expected 3 tab-separated fields, found {}", fields.len()));
        }
        if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
            return err(format!("field {} is empty", pos + 1));
        }
        return Some(Ok((fields[0].to_owned(), fields[1].to_owned(), fields[2].to_owned())));
    }
    match parse_ntriple(line.trim()) {
        Ok(t) => Some(Ok(t)),
        Err(message) => err(message),
    }
}

fn parse_ntriple(line: &str) -> std::result::Result<(String, String, String), String> {
    let body = line
        .strip_suffix('.')
        .ok_or_else(|| "expected a tab-separated triple or an N-Triples statement ending in `.`".to_string())?
        .trim_end();
    let mut rest = body;
    let mut terms = Vec::with_capacity(3);
    while !rest.is_empty() {
        rest = rest.trim_start();
        if rest.is_empty() {
            break;
        }
        let (term, tail) = if let Some(r) = rest.strip_prefix('<') {
            let end = r.find('>').ok_or("unterminated IRI")?;
            (&r[..end], &r[end + 1..])
        } else if rest.starts_with("_:") {
            let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            (&rest[..end], &rest[end..])
        } else if rest.starts_with('"') {
            return Err("literal objects are not supported".into());
        } else {
            return Err(format!("unexpected term starting at `{}`", rest.chars().take(16).collect::<String>()));
        };
        if term.is_empty() {
            return Err("empty IRI".into());
        }
        terms.push(term.to_owned());
        rest = tail;
    }
    match <[String; 3]>::try_from(terms) {
        Ok([s, p, o]) => Ok((s, p, o)),
        Err(v) => Err(format!("expected 3 terms, found {}", v.len())),
    }
}

/// Read all triples from a reader, reporting 1-based line numbers on error.
pub fn read_triple_lines<R: Read>(reader: R) -> Result<Vec<(String, String, String)>> {
    let mut out = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        if let Some(t) = parse_triple_line(&line, n + 1) {
            out.push(t?);
        }
    }
    Ok(out)
}

pub fn read_triple_file(path: &Path) -> Result<KnowledgeGraph> {
    let lines = read_triple_lines(fs::File::open(path)?)?;
    ingest_triples(lines)
}

/// Write triples as `subject<TAB>predicate<TAB>object` lines.
pub fn write_triples<W: Write>(kg: &KnowledgeGraph, triples: &[Triple], mut w: W) -> Result<()> {
    for t in triples {
        writeln!(w, "{}\t{}\t{}", kg.entity_name(t.subject), kg.relation_name(t.relation), kg.entity_name(t.object))?;
    }
    Ok(())
}

pub fn to_tsv(kg: &KnowledgeGraph) -> String {
    let mut buf = Vec::new();
    write_triples(kg, kg.triples(), &mut buf).expect("in-memory write");
    String::from_utf8(buf).expect("names are utf-8")
}

/// Resolve named triples against an existing graph's dictionaries.
pub fn resolve_triples(kg: &KnowledgeGraph, lines: &[(String, String, String)]) -> Result<Vec<Triple>> {
    lines.iter().map(|(s, p, o)| kg.lookup(s, p, o)).collect()
}

/// Write labeled triples with `label` and `provenance` as fourth and fifth columns.
pub fn write_labeled<W: Write>(kg: &KnowledgeGraph, items: &[LabeledTriple], mut w: W) -> Result<()> {
    for it in items {
        let t = it.triple;
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            kg.entity_name(t.subject),
            kg.relation_name(t.relation),
            kg.entity_name(t.object),
            it.label(),
            it.provenance.as_str()
        )?;
    }
    Ok(())
}

/// Binary snapshot of a graph: magic, version, dictionaries, then `u32` id triples.
pub fn write_binary_kg<W: Write>(kg: &KnowledgeGraph, mut w: W) -> Result<()> {
    w.write_all(KG_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for vocab in [kg.entities(), kg.relations()] {
        w.write_all(&(vocab.len() as u64).to_le_bytes())?;
        for name in vocab.names() {
            w.write_all(&(name.len() as u64).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
        }
    }
    w.write_all(&(kg.len() as u64).to_le_bytes())?;
    for t in kg.triples() {
        for x in [t.subject.0, t.relation.0, t.object.0] {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_binary_kg<R: Read>(mut r: R) -> Result<KnowledgeGraph> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != KG_MAGIC {
        return Err(Error::Format("not a binary knowledge graph file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported graph file version {version}")));
    }
    let mut vocabs = Vec::with_capacity(2);
    for _ in 0..2 {
        let n = read_u64(&mut r)? as usize;
        let mut names = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            let len = read_u64(&mut r)? as usize;
            let mut buf = vec![0u8; len];
            r.read_exact(&mut buf)?;
            names.push(String::from_utf8(buf).map_err(|_| Error::Format("name is not utf-8".into()))?);
        }
        vocabs.push(Vocab::from_names(names)?);
    }
    let relations = vocabs.pop().expect("two vocabs");
    let entities = vocabs.pop().expect("two vocabs");
    let n = read_u64(&mut r)? as usize;
    let mut triples = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        let s = read_u32(&mut r)?;
        let p = read_u32(&mut r)?;
        let o = read_u32(&mut r)?;
        triples.push(Triple::new(s, p, o));
    }
    KnowledgeGraph::from_parts(entities, relations, triples)
}

/// JSON sidecar describing how a split was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub version: u32,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub train: String,
    pub valid: String,
    pub test: String,
    pub counts: [usize; 3],
}

/// Write `train.tsv`, `valid.tsv`, `test.tsv` and `split.json` into `dir`.
pub fn write_split(kg: &KnowledgeGraph, split: &Split, ratios: SplitRatios, seed: u64, dir: &Path) -> Result<SplitManifest> {
    fs::create_dir_all(dir)?;
    let manifest = SplitManifest {
        version: FORMAT_VERSION,
        seed,
        ratios,
        train: "train.tsv".into(),
        valid: "valid.tsv".into(),
        test: "test.tsv".into(),
        counts: [split.train.len(), split.valid.len(), split.test.len()],
    };
    for (name, part) in [(&manifest.train, &split.train), (&manifest.valid, &split.valid), (&manifest.test, &split.test)] {
        let mut f = std::io::BufWriter::new(fs::File::create(dir.join(name))?);
        writeln!(f, "# kgraph-triples {FORMAT_VERSION}")?;
        write_triples(kg, part, &mut f)?;
        f.flush()?;
    }
    fs::write(dir.join("split.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Load a split directory. The returned graph holds the union of all three parts,
/// with dictionaries in train, valid, test order of appearance.
pub fn read_split(dir: &Path) -> Result<(KnowledgeGraph, Split, SplitManifest)> {
    let manifest: SplitManifest = serde_json::from_slice(&fs::read(dir.join("split.json"))?)?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported split manifest version {}", manifest.version)));
    }
    let mut parts = Vec::with_capacity(3);
    for name in [&manifest.train, &manifest.valid, &manifest.test] {
        parts.push(read_triple_lines(fs::File::open(dir.join(name))?)?);
    }
    let all: Vec<_> = parts.iter().flatten().cloned().collect();
    let kg = ingest_triples(all)?;
    let split = Split {
        train: resolve_triples(&kg, &parts[0])?,
        valid: resolve_triples(&kg, &parts[1])?,
        test: resolve_triples(&kg, &parts[2])?,
    };
    let counts = [split.train.len(), split.valid.len(), split.test.len()];
    if counts != manifest.counts {
        return Err(Error::Format(format!("split counts {counts:?} disagree with manifest {:?}", manifest.counts)));
    }
    Ok((kg, split, manifest))
}
