use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    DatasetSplits, EntityId, KnowledgeGraph, LabeledTriple, RelationId, SplitKind, SymbolTable, Triple, Vocabulary,
};
use crate::error::{Error, Result};

/// On-disk dataset layouts.
///
/// * `Tsv`: a directory holding `train.tsv`, `valid.tsv` and `test.tsv`, one
///   `head<TAB>relation<TAB>tail[<TAB>label]` row per line, label in `{0,1}`
///   and defaulting to `1`.
/// * `Json`: a single file `{entities, relations, train, valid, test}` where
///   each split is a list of `{head, relation, tail, label?}` objects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Tsv,
    Json,
}

const SPLITS: [SplitKind; 3] = [SplitKind::Train, SplitKind::Valid, SplitKind::Test];

pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<(DatasetSplits, KnowledgeGraph)> {
    let splits = match format {
        DatasetFormat::Tsv => load_tsv(path)?,
        DatasetFormat::Json => load_json(path)?,
    };
    splits.validate()?;
    let graph = KnowledgeGraph::from_splits(&splits);
    Ok((splits, graph))
}

pub fn save_dataset(splits: &DatasetSplits, path: &Path, format: DatasetFormat) -> Result<()> {
    match format {
        DatasetFormat::Tsv => {
            fs::create_dir_all(path).map_err(|e| Error::io(path, e))?;
            for kind in SPLITS {
                let file = path.join(format!("{}.tsv", kind.name()));
                let mut out = String::new();
                for lt in splits.split(kind) {
                    let v = &splits.vocab;
                    out.push_str(v.entity_name(lt.triple.head));
                    out.push('\t');
                    out.push_str(v.relation_name(lt.triple.relation));
                    out.push('\t');
                    out.push_str(v.entity_name(lt.triple.tail));
                    if !lt.label {
                        out.push_str("\t0");
                    }
                    out.push('\n');
                }
                fs::write(&file, out).map_err(|e| Error::io(&file, e))?;
            }
            Ok(())
        }
        DatasetFormat::Json => {
            let doc = JsonDataset::from_splits(splits);
            let text = serde_json::to_string_pretty(&doc)?;
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
            }
            fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
        }
    }
}

struct RawRow {
    line: usize,
    head: String,
    relation: String,
    tail: String,
    label: bool,
}

fn parse_tsv(text: &str, file: &str) -> Result<Vec<RawRow>> {
    let mut rows = Vec::new();
    for (i, line) in text.split('\n').enumerate() {
        let line_no = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let err = |message: String| Error::Parse { file: file.to_string(), line: line_no, message };
        if cols.len() != 3 && cols.len() != 4 {
            return Err(err(format!("expected 3 or 4 tab-separated columns, found {}", cols.len())));
        }
        if cols[..3].iter().any(|c| c.is_empty()) {
            return Err(err("empty symbol".into()));
        }
        let label = match cols.get(3) {
            None => true,
            Some(&"1") => true,
            Some(&"0") => false,
            Some(other) => return Err(err(format!("label must be 0 or 1, found `{other}`"))),
        };
        rows.push(RawRow {
            line: line_no,
            head: cols[0].to_string(),
            relation: cols[1].to_string(),
            tail: cols[2].to_string(),
            label,
        });
    }
    Ok(rows)
}

fn load_tsv(dir: &Path) -> Result<DatasetSplits> {
    let mut vocab = Vocabulary::default();
    let mut lists: Vec<Vec<LabeledTriple>> = Vec::new();
    for kind in SPLITS {
        let file = dir.join(format!("{}.tsv", kind.name()));
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let file_name = file.display().to_string();
        let rows = parse_tsv(&text, &file_name)?;
        let mut list = Vec::with_capacity(rows.len());
        let mut seen: HashMap<Triple, bool> = HashMap::new();
        for row in rows {
            let triple = if kind == SplitKind::Train {
                Triple::new(
                    EntityId(vocab.entities.intern(&row.head)),
                    RelationId(vocab.relations.intern(&row.relation)),
                    EntityId(vocab.entities.intern(&row.tail)),
                )
            } else {
                resolve(&vocab, kind, &row.head, &row.relation, &row.tail)?
            };
            match seen.get(&triple) {
                Some(&label) if label == row.label => continue,
                Some(_) => {
                    return Err(Error::Parse {
                        file: file_name,
                        line: row.line,
                        message: "conflicting label for a repeated triple".into(),
                    })
                }
                None => {
                    seen.insert(triple, row.label);
                    list.push(LabeledTriple { triple, label: row.label });
                }
            }
        }
        lists.push(list);
    }
    let test = lists.pop().unwrap_or_default();
    let valid = lists.pop().unwrap_or_default();
    let train = lists.pop().unwrap_or_default();
    Ok(DatasetSplits { vocab: Arc::new(vocab), train, valid, test })
}

fn resolve(vocab: &Vocabulary, kind: SplitKind, h: &str, r: &str, t: &str) -> Result<Triple> {
    let unknown = |k: &'static str, symbol: &str| Error::UnknownSymbol {
        split: kind.name(),
        kind: k,
        symbol: symbol.to_string(),
        triple: format!("({h}, {r}, {t})"),
    };
    let head = vocab.entities.get(h).ok_or_else(|| unknown("entity", h))?;
    let rel = vocab.relations.get(r).ok_or_else(|| unknown("relation", r))?;
    let tail = vocab.entities.get(t).ok_or_else(|| unknown("entity", t))?;
    Ok(Triple::new(EntityId(head), RelationId(rel), EntityId(tail)))
}

fn default_true() -> bool {
    true
}

fn is_true(b: &bool) -> bool {
    *b
}

#[derive(Serialize, Deserialize)]
struct JsonTriple {
    head: String,
    relation: String,
    tail: String,
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    label: bool,
}

#[derive(Serialize, Deserialize)]
struct JsonDataset {
    entities: Vec<String>,
    relations: Vec<String>,
    train: Vec<JsonTriple>,
    #[serde(default)]
    valid: Vec<JsonTriple>,
    #[serde(default)]
    test: Vec<JsonTriple>,
}

impl JsonDataset {
    fn from_splits(s: &DatasetSplits) -> Self {
        let conv = |list: &[LabeledTriple]| {
            list.iter()
                .map(|lt| JsonTriple {
                    head: s.vocab.entity_name(lt.triple.head).to_string(),
                    relation: s.vocab.relation_name(lt.triple.relation).to_string(),
                    tail: s.vocab.entity_name(lt.triple.tail).to_string(),
                    label: lt.label,
                })
                .collect()
        };
        JsonDataset {
            entities: s.vocab.entities.names().to_vec(),
            relations: s.vocab.relations.names().to_vec(),
            train: conv(&s.train),
            valid: conv(&s.valid),
            test: conv(&s.test),
        }
    }
}

fn load_json(path: &Path) -> Result<DatasetSplits> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: JsonDataset = serde_json::from_str(&text)?;
    let mut vocab = Vocabulary { entities: SymbolTable::new(), relations: SymbolTable::new() };
    for (kind, list) in [("entity", &doc.entities), ("relation", &doc.relations)] {
        for (i, name) in list.iter().enumerate() {
            let table = if kind == "entity" { &mut vocab.entities } else { &mut vocab.relations };
            if name.is_empty() || table.get(name).is_some() {
                return Err(Error::Parse {
                    file: path.display().to_string(),
                    line: i + 1,
                    message: format!("{kind} names must be non-empty and unique: `{name}`"),
                });
            }
            table.intern(name);
        }
    }
    let mut lists = Vec::new();
    for (kind, raw) in [(SplitKind::Train, &doc.train), (SplitKind::Valid, &doc.valid), (SplitKind::Test, &doc.test)] {
        let mut seen: HashMap<Triple, bool> = HashMap::new();
        let mut list = Vec::new();
        for (i, jt) in raw.iter().enumerate() {
            let triple = resolve(&vocab, kind, &jt.head, &jt.relation, &jt.tail)?;
            match seen.get(&triple) {
                Some(&l) if l == jt.label => {}
                Some(_) => {
                    return Err(Error::Parse {
                        file: path.display().to_string(),
                        line: i + 1,
                        message: format!("conflicting label in {} split", kind.name()),
                    })
                }
                None => {
                    seen.insert(triple, jt.label);
                    list.push(LabeledTriple { triple, label: jt.label });
                }
            }
        }
        lists.push(list);
    }
    let test = lists.pop().unwrap_or_default();
    let valid = lists.pop().unwrap_or_default();
    let train = lists.pop().unwrap_or_default();
    Ok(DatasetSplits { vocab: Arc::new(vocab), train, valid, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_splits(dir: &Path, train: &str, valid: &str, test: &str) {
        fs::write(dir.join("train.tsv"), train).unwrap();
        fs::write(dir.join("valid.tsv"), valid).unwrap();
        fs::write(dir.join("test.tsv"), test).unwrap();
    }

    #[test]
    fn exact_repeats_are_deduplicated() {
        let dir = tempfile::tempdir().unwrap();
        write_splits(dir.path(), "cup\thasAction\tfill\ncup\tobjInRoom\tkitchen\ncup\thasAction\tfill\n", "", "");
        let (splits, graph) = load_dataset(dir.path(), DatasetFormat::Tsv).unwrap();
        assert_eq!(splits.train.len(), 2);
        assert_eq!(graph.facts().len(), 2);
        assert_eq!(splits.vocab.entities.names(), &["cup", "fill", "kitchen"]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        write_splits(dir.path(), "cup\thasAction\tfill\ncup\thasAction\n", "", "");
        let err = load_dataset(dir.path(), DatasetFormat::Tsv).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unknown_symbol_in_test_reports_triple() {
        let dir = tempfile::tempdir().unwrap();
        write_splits(dir.path(), "cup\thasAction\tfill\n", "", "mug\thasAction\tfill\n");
        let err = load_dataset(dir.path(), DatasetFormat::Tsv).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mug"), "{msg}");
        assert!(matches!(err, Error::UnknownSymbol { split: "test", .. }));
    }

    #[test]
    fn label_column_parsed() {
        let dir = tempfile::tempdir().unwrap();
        write_splits(dir.path(), "a\tr\tb\na\tr\tc\t0\n", "a\tr\tc\t1\n", "");
        let (splits, graph) = load_dataset(dir.path(), DatasetFormat::Tsv).unwrap();
        assert!(splits.train[0].label);
        assert!(!splits.train[1].label);
        assert_eq!(graph.facts().len(), 1);
        assert!(splits.valid[0].label);
    }

    #[test]
    fn tsv_and_json_round_trip_bytes() {
        let dir = tempfile::tempdir().unwrap();
        write_splits(dir.path(), "b\tr\ta\na\ts\tc\nc\tr\tc\t0\n", "a\tr\tb\n", "c\ts\ta\n");
        let (splits, _) = load_dataset(dir.path(), DatasetFormat::Tsv).unwrap();
        for format in [DatasetFormat::Tsv, DatasetFormat::Json] {
            let out1 = dir.path().join(format!("{format:?}-1"));
            let out2 = dir.path().join(format!("{format:?}-2"));
            let p1 = if format == DatasetFormat::Json { out1.join("d.json") } else { out1.clone() };
            let p2 = if format == DatasetFormat::Json { out2.join("d.json") } else { out2.clone() };
            save_dataset(&splits, &p1, format).unwrap();
            let (again, _) = load_dataset(&p1, format).unwrap();
            assert_eq!(again, splits);
            save_dataset(&again, &p2, format).unwrap();
            for name in ["train.tsv", "valid.tsv", "test.tsv", "d.json"] {
                let (a, b) = (out1.join(name), out2.join(name));
                if a.exists() {
                    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
                }
            }
        }
    }
}
