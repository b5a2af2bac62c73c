use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{Triple, Vocabulary};
use crate::sfe::Direction;

const HOUSEHOLD: &str = include_str!("../../templates/household.toml");

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phrases {
    pub opening: String,
    pub additional: String,
    pub conclusion_true: String,
    pub conclusion_false: String,
    pub fallback_true: String,
    pub fallback_false: String,
}

impl Default for Phrases {
    fn default() -> Self {
        Phrases {
            opening: "I know that".into(),
            additional: "I also know that".into(),
            conclusion_true: "Therefore, it is possible that".into(),
            conclusion_false: "Therefore, it is unlikely that".into(),
            fallback_true: "I could not find a chain of facts behind this, but I believe it is possible that".into(),
            fallback_false: "I could not find a chain of facts behind this, but I believe it is unlikely that".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationTemplate {
    pub forward: String,
    pub inverse: String,
}

#[derive(Deserialize)]
struct TemplateFile {
    version: String,
    #[serde(default)]
    phrases: Phrases,
    #[serde(default)]
    names: BTreeMap<String, String>,
    relations: BTreeMap<String, RelationTemplate>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Head,
    Tail,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Piece {
    Text(String),
    Entity { slot: Slot, article: bool },
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Compiled {
    forward: Vec<Piece>,
    inverse: Vec<Piece>,
}

/// Parse `"{h:a} is used to {t}"` into pieces. Slots are `h` or `t`,
/// optionally with `:a` for an indefinite article.
fn compile(src: &str) -> Result<Vec<Piece>> {
    let mut out = Vec::new();
    let mut rest = src;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            out.push(Piece::Text(rest[..open].to_string()));
        }
        let close = rest[open..]
            .find('}')
            .map(|c| open + c)
            .ok_or_else(|| Error::Template(format!("unclosed slot in {src:?}")))?;
        let (slot, article) = match &rest[open + 1..close] {
            "h" => (Slot::Head, false),
            "t" => (Slot::Tail, false),
            "h:a" => (Slot::Head, true),
            "t:a" => (Slot::Tail, true),
            other => return Err(Error::Template(format!("unknown slot {{{other}}} in {src:?}"))),
        };
        out.push(Piece::Entity { slot, article });
        rest = &rest[close + 1..];
    }
    if rest.contains('}') {
        return Err(Error::Template(format!("stray '}}' in {src:?}")));
    }
    if !rest.is_empty() {
        out.push(Piece::Text(rest.to_string()));
    }
    Ok(out)
}

/// "a" or "an" by the leading letter.
pub fn indefinite_article(phrase: &str) -> &'static str {
    match phrase.chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// Per-relation sentence templates plus the connecting phrases of an
/// explanation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TemplateSet {
    pub version: String,
    pub phrases: Phrases,
    names: BTreeMap<String, String>,
    relations: BTreeMap<String, Compiled>,
}

impl TemplateSet {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TemplateFile = toml::from_str(text).map_err(|e| Error::Template(e.to_string()))?;
        let relations = file
            .relations
            .into_iter()
            .map(|(r, t)| Ok((r, Compiled { forward: compile(&t.forward)?, inverse: compile(&t.inverse)? })))
            .collect::<Result<_>>()?;
        Ok(TemplateSet { version: file.version, phrases: file.phrases, names: file.names, relations })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Templates for the synthetic household relations.
    pub fn household() -> Self {
        Self::from_toml_str(HOUSEHOLD).expect("bundled templates parse")
    }

    /// Plain `head relation tail` sentences for every relation of `vocab`.
    pub fn generic(vocab: &Vocabulary) -> Self {
        let relations = vocab
            .relation_ids()
            .map(|r| {
                let name = vocab.relation_name(r);
                let words = name.replace('_', " ");
                let c = Compiled {
                    forward: compile(&format!("{{h}} {words} {{t}}")).expect("static template"),
                    inverse: compile(&format!("{{t}} is the {words} of {{h}}")).expect("static template"),
                };
                (name.to_string(), c)
            })
            .collect();
        TemplateSet { version: "generic-1".into(), phrases: Phrases::default(), names: BTreeMap::new(), relations }
    }

    /// The household set when it covers `vocab`, otherwise [`generic`](Self::generic).
    pub fn covering(vocab: &Vocabulary) -> Self {
        let h = Self::household();
        if h.check_covers(vocab).is_ok() {
            h
        } else {
            Self::generic(vocab)
        }
    }

    /// Fails on the first relation of `vocab` without templates.
    pub fn check_covers(&self, vocab: &Vocabulary) -> Result<()> {
        for r in vocab.relation_ids() {
            let name = vocab.relation_name(r);
            if !self.relations.contains_key(name) {
                return Err(Error::MissingTemplate(name.to_string()));
            }
        }
        Ok(())
    }

    /// Surface form of an entity identifier.
    pub fn entity_phrase(&self, name: &str) -> String {
        self.names.get(name).cloned().unwrap_or_else(|| name.replace('_', " "))
    }

    pub fn render_fact(&self, t: &Triple, direction: Direction, vocab: &Vocabulary) -> Result<String> {
        let rel = vocab.relation_name(t.relation);
        let c = self.relations.get(rel).ok_or_else(|| Error::MissingTemplate(rel.to_string()))?;
        let pieces = match direction {
            Direction::Forward => &c.forward,
            Direction::Inverse => &c.inverse,
        };
        let mut s = String::new();
        for p in pieces {
            match p {
                Piece::Text(x) => s.push_str(x),
                Piece::Entity { slot, article } => {
                    let e = match slot {
                        Slot::Head => t.head,
                        Slot::Tail => t.tail,
                    };
                    let phrase = self.entity_phrase(vocab.entity_name(e));
                    if *article {
                        s.push_str(indefinite_article(&phrase));
                        s.push(' ');
                    }
                    s.push_str(&phrase);
                }
            }
        }
        Ok(s)
    }
}

/// Free-function form of [`TemplateSet::render_fact`].
pub fn render_fact(t: &Triple, direction: Direction, templates: &TemplateSet, vocab: &Vocabulary) -> Result<String> {
    templates.render_fact(t, direction, vocab)
}

/// "x", "x and y", "x, y, and z".
pub fn join_clauses(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [a] => a.clone(),
        [a, b] => format!("{a} and {b}"),
        [init @ .., last] => format!("{}, and {last}", init.join(", ")),
    }
}
