use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kgraph_core::io::{read_binary_kg, to_tsv};
use kgraph_core::{synth, LatentModel, ModelConfig, ModelKind};

fn kgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kgraph")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = kgraph(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    kgraph(args).status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_fixture(dir: &Path, name: &str, tsv: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, tsv).unwrap();
    path
}

fn metrics(dir: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(dir.join("metrics.json")).unwrap()).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

fn parse_rows(text: &str) -> Vec<(String, Vec<f64>)> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| {
            let mut it = l.split('\t');
            let name = it.next().unwrap().to_string();
            (name, it.map(|v| v.parse().unwrap()).collect())
        })
        .collect()
}

#[test]
fn export_after_zero_epochs_is_the_seeded_initialisation() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "nimoy.tsv", &to_tsv(&synth::nimoy_facts()));
    let (imp, model, emb) = (tmp.path().join("imp"), tmp.path().join("m"), tmp.path().join("emb"));
    ok(&["import", "--input", p(&input), "--out", p(&imp)]);
    ok(&["train", "--data", p(&imp), "--model", "transe", "--dim", "4", "--epochs", "0", "--seed", "17", "--out", p(&model)]);
    ok(&["export-embeddings", "--model", p(&model), "--out", p(&emb)]);

    let kg = read_binary_kg(fs::File::open(imp.join("graph.kgb")).unwrap()).unwrap();
    let init = LatentModel::init(&ModelConfig::new(ModelKind::Transe, 4), kg.num_entities(), kg.num_relations(), 17).unwrap();
    let rows = parse_rows(&fs::read_to_string(emb.join("entities.tsv")).unwrap());
    assert_eq!(rows.len(), kg.num_entities());
    for (i, (name, values)) in rows.iter().enumerate() {
        assert_eq!(name, kg.entity_name(kgraph_core::EntityId(i as u32)));
        assert_eq!(values.as_slice(), init.entity_embeddings().row(i));
    }
    let rel = parse_rows(&fs::read_to_string(emb.join("relations.tsv")).unwrap());
    for (k, (_, values)) in rel.iter().enumerate() {
        assert_eq!(values.as_slice(), init.relation_embeddings().unwrap().row(k));
    }
}

#[test]
fn rescal_als_recovers_the_planted_low_rank_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    let (kg, _) = synth::planted_blocks(30, 5, 4, 0.4, 31);
    let input = write_fixture(tmp.path(), "planted.tsv", &to_tsv(&kg));
    let d = |n: &str| tmp.path().join(n);
    ok(&["import", "--input", p(&input), "--out", p(&d("imp"))]);
    ok(&["split", "--data", p(&d("imp")), "--seed", "3", "--out", p(&d("split"))]);
    ok(&["train", "--data", p(&d("split")), "--model", "rescal-als", "--dim", "4", "--lambda-entity", "0.1", "--lambda-relation", "0.1", "--out", p(&d("als"))]);
    ok(&["evaluate", "--model", p(&d("als")), "--data", p(&d("split")), "--out", p(&d("eval"))]);
    let auc_pr = metrics(&d("eval"))["auc_pr"].as_f64().unwrap();
    assert!(auc_pr >= 0.95, "AUC-PR {auc_pr}");
}

#[test]
fn trained_models_rank_the_film_above_the_genre() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "films.tsv", &to_tsv(&synth::sample_graph()));
    for model in ["transe", "pra"] {
        for seed in ["0", "1", "2"] {
            let dir = tmp.path().join(format!("{model}{seed}"));
            ok(&["train", "--data", p(&input), "--model", model, "--seed", seed, "--epochs", "200", "--dim", "4", "--out", p(&dir)]);
            let text = ok(&["predict", "--model", p(&dir), "--query", "LeonardNimoy,starredIn,?", "--top", "7"]);
            let order: Vec<&str> = text.lines().skip(2).map(|l| l.split('\t').nth(1).unwrap()).collect();
            let pos = |n: &str| order.iter().position(|&e| e == n).unwrap();
            assert!(pos("StarTrek") < pos("ScienceFiction"), "{model} seed {seed}: {order:?}");
        }
    }
}

#[test]
fn pipeline_replays_byte_identically() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "grid.tsv", &to_tsv(&synth::translation_grid(6, 6)));
    let d = |n: &str| tmp.path().join(n);
    let det = "--deterministic";
    ok(&["import", "--input", p(&input), "--out", p(&d("imp")), det]);
    ok(&["split", "--data", p(&d("imp")), "--seed", "5", "--out", p(&d("split")), det]);
    ok(&["train", "--data", p(&d("split")), "--model", "transe", "--dim", "3", "--epochs", "30", "--distance", "l1", "--out", p(&d("model")), det]);
    ok(&["evaluate", "--model", p(&d("model")), "--data", p(&d("split")), "--out", p(&d("eval")), det]);
    for step in ["imp", "split", "model", "eval"] {
        let again = d(&format!("{step}-replay"));
        ok(&["replay", "--manifest", p(&d(step)), "--out", p(&again)]);
        assert_eq!(files(&d(step)), files(&again), "{step} differs on replay");
    }
    // Without --deterministic only the recorded setting in the manifest differs.
    ok(&["train", "--data", p(&d("split")), "--model", "transe", "--dim", "3", "--epochs", "30", "--distance", "l1", "--out", p(&d("model2")), "--threads", "4"]);
    let strip = |v: Vec<(String, Vec<u8>)>| v.into_iter().filter(|(n, _)| n != "manifest.json").collect::<Vec<_>>();
    assert_eq!(strip(files(&d("model"))), strip(files(&d("model2"))));
}

#[test]
fn replay_refuses_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "n.tsv", &to_tsv(&synth::nimoy_facts()));
    let imp = tmp.path().join("imp");
    ok(&["import", "--input", p(&input), "--out", p(&imp)]);
    fs::write(&input, "a\tb\tc\n").unwrap();
    assert_eq!(code(&["replay", "--manifest", p(&imp), "--out", p(&tmp.path().join("again"))]), 3);
    assert!(!tmp.path().join("again").exists());
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "n.tsv", &to_tsv(&synth::nimoy_facts()));
    let conf = write_fixture(tmp.path(), "run.conf", "# settings\nmodel = rescal\ndim = 5\nepochs = 3\n");
    let out = tmp.path().join("m");
    ok(&["train", "--config", p(&conf), "--data", p(&input), "--dim", "2", "--out", p(&out)]);
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["settings"]["dim"], "2");
    assert_eq!(manifest["settings"]["epochs"], "3");
    assert_eq!(manifest["settings"]["model"], "rescal");
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("# kgraph-trace 1\nepoch,loss\n"));
    assert_eq!(trace.lines().count(), 2 + 3);
}

#[test]
fn exit_codes_and_no_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_fixture(tmp.path(), "n.tsv", &to_tsv(&synth::nimoy_facts()));
    let bad = write_fixture(tmp.path(), "bad.tsv", "a\tb\n");
    let out = tmp.path().join("out");
    let o = p(&out);
    assert_eq!(code(&["train", "--no-such-flag", "--out", o]), 2);
    assert_eq!(code(&["train", "--data", p(&good), "--dim", "many", "--out", o]), 2);
    assert_eq!(code(&["train", "--data", p(&good), "--model", "nope", "--out", o]), 2);
    assert_eq!(code(&["import", "--out", o]), 2);
    assert_eq!(code(&["import", "--input", p(&tmp.path().join("missing.tsv")), "--out", o]), 3);
    assert_eq!(code(&["import", "--input", p(&bad), "--out", o]), 3);
    assert_eq!(
        code(&["train", "--data", p(&good), "--model", "rescal", "--loss", "squared", "--learning-rate", "1e300", "--l2", "0", "--out", o]),
        4
    );
    assert!(!out.exists());
    let leftovers: Vec<_> = fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers.len(), 2, "{leftovers:?}");
    ok(&["import", "--input", p(&good), "--out", o]);
    assert_eq!(code(&["import", "--input", p(&good), "--out", o]), 2);
    ok(&["import", "--input", p(&good), "--out", o, "--force"]);
}

#[test]
fn fused_models_train_evaluate_and_dump_rules() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "g.tsv", &to_tsv(&synth::mixed_symmetric_block(24, 4, 0.6, 2)));
    let d = |n: &str| tmp.path().join(n);
    ok(&["split", "--data", p(&input), "--ratios", "0.7,0.15,0.15", "--out", p(&d("split"))]);
    for model in ["are", "stacked"] {
        let dir = d(model);
        ok(&["train", "--data", p(&d("split")), "--model", model, "--dim", "4", "--epochs", "5", "--are-rounds", "3", "--bases", "rescal,pra", "--out", p(&dir)]);
        let index: serde_json::Value = serde_json::from_slice(&fs::read(dir.join("model.json")).unwrap()).unwrap();
        assert_eq!(index["kind"], model);
        let eval = d(&format!("{model}-eval"));
        ok(&["evaluate", "--model", p(&dir), "--data", p(&d("split")), "--out", p(&eval)]);
        let mrr = metrics(&eval)["mrr"].as_f64().unwrap();
        assert!(mrr > 0.0 && mrr <= 1.0);
        let rules = ok(&["rules", "--model", p(&dir)]);
        assert!(rules.starts_with("# kgraph-rules 1\n"));
    }
    assert_eq!(code(&["rules", "--model", p(&d("stacked")), "--out", p(&d("rules"))]), 0);
    assert!(d("rules").join("rules.txt").is_file() && d("rules").join("manifest.json").is_file());
}

#[test]
fn pra_rules_name_the_planted_path() {
    let tmp = tempfile::tempdir().unwrap();
    let input = write_fixture(tmp.path(), "rule.tsv", &to_tsv(&synth::planted_rule_graph(60, 6, 4, 3)));
    let dir = tmp.path().join("pra");
    ok(&["train", "--data", p(&input), "--model", "pra", "--out", p(&dir)]);
    let text = ok(&["rules", "--model", p(&dir)]);
    let section: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("# relation livesIn "))
        .skip(1)
        .take_while(|l| !l.starts_with('#'))
        .collect();
    assert!(section[0].ends_with("(x, livesIn, y) ← (x, worksFor, z1) ∧ (z1, locatedIn, y)"), "{section:?}");
}
