//! Seeded synthetic corpora of small Java-like methods.
//!
//! The generator mimics the features the toolkit cares about: camelCase
//! identifiers, many projects of uneven size, near-identical methods that
//! reappear across projects (so retrieval sometimes finds the exact answer),
//! paraphrased comments, and a few tool-generated comments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{read_corpus, Corpus, PreprocessConfig, RawRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub projects: usize,
    /// Samples per project are drawn uniformly from this inclusive range.
    pub min_samples: usize,
    pub max_samples: usize,
    /// Chance that a sample copies an earlier method from another project.
    pub duplicate_rate: f64,
    /// Chance that a comment is replaced by a tool-generated one.
    pub auto_generated_rate: f64,
    /// Emit a token sequence in the `ast` field.
    pub with_ast: bool,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            projects: 12,
            min_samples: 6,
            max_samples: 30,
            duplicate_rate: 0.3,
            auto_generated_rate: 0.03,
            with_ast: false,
            seed: 0,
        }
    }
}

const SUBJECTS: &[&str] = &[
    "user", "account", "file", "buffer", "session", "order", "item", "node", "graph", "cache", "queue", "stream",
    "socket", "message", "header", "request", "response", "task", "timer", "widget", "window", "record", "table",
    "column", "query", "token", "parser", "image", "layer", "point",
];

const ATTRIBUTES: &[&str] = &[
    "name", "size", "count", "path", "index", "value", "id", "type", "state", "owner", "label", "title", "width",
    "height", "color", "date", "price", "limit", "offset", "status",
];

const TYPES: &[&str] = &["int", "String", "long", "double", "Object", "List<String>", "boolean"];

struct Template {
    code: &'static str,
    comments: &'static [&'static str],
    ast: &'static str,
}

// {S}/{s}: subject capitalized/lowercase, {A}/{a}: attribute, {T}: type.
const TEMPLATES: &[Template] = &[
    Template {
        code: "public {T} get{S}{A}() { return this.{s}{A}; }",
        comments: &["Returns the {s} {a}.", "Gets the {a} of the {s}.", "Return the current {s} {a}"],
        ast: "MethodDeclaration ReturnStatement FieldAccess",
    },
    Template {
        code: "public void set{S}{A}({T} {a}) { this.{s}{A} = {a}; }",
        comments: &["Sets the {s} {a}.", "Updates the {a} of the {s}.", "@param {a} the new {s} {a}"],
        ast: "MethodDeclaration Parameter Assignment FieldAccess",
    },
    Template {
        code: "public boolean has{S}{A}() { return {s}{A} != null && !{s}{A}.isEmpty(); }",
        comments: &["Checks whether the {s} has a {a}.", "Returns true if the {s} {a} is set."],
        ast: "MethodDeclaration ReturnStatement BinaryExpression MethodCall",
    },
    Template {
        code: "public void add{S}({T} {s}) { if ({s} == null) throw new IllegalArgumentException(); {s}List.add({s}); }",
        comments: &["Adds a {s} to the list.", "Appends the given {s}.", "Add a new {s} entry"],
        ast: "MethodDeclaration IfStatement ThrowStatement MethodCall",
    },
    Template {
        code: "public boolean remove{S}({T} {s}) { return {s}List.remove({s}); }",
        comments: &["Removes the given {s}.", "Deletes a {s} from the list."],
        ast: "MethodDeclaration ReturnStatement MethodCall",
    },
    Template {
        code: "public void load{S}{A}(String path) throws IOException { this.{s}{A} = reader.read{A}(path); }",
        comments: &["Loads the {s} {a} from a file.", "Reads the {a} of the {s} from disk."],
        ast: "MethodDeclaration Parameter Assignment MethodCall",
    },
    Template {
        code: "public {T} compute{S}{A}(int offset) { int total = 0; for (int i = offset; i < {s}Count; i++) { total += {s}s[i].get{A}(); } return total; }",
        comments: &["Computes the total {a} of all {s}s.", "Sums the {s} {a} starting at the offset."],
        ast: "MethodDeclaration ForStatement CompoundAssignment ReturnStatement",
    },
    Template {
        code: "public void reset{S}() { {s}{A} = DEFAULT_{A}; {s}Dirty = false; }",
        comments: &["Resets the {s} to its default {a}.", "Restores the default {s} {a}."],
        ast: "MethodDeclaration Assignment Assignment",
    },
    Template {
        code: "public String format{S}{A}() { return String.format(\"%s_%d\", {s}{A}, {s}Id); }",
        comments: &["Formats the {s} {a} as a string.", "Returns a printable {a} for the {s}."],
        ast: "MethodDeclaration ReturnStatement MethodCall",
    },
    Template {
        code: "public int compareTo({S} other) { return Integer.compare(this.{s}{A}, other.{s}{A}); }",
        comments: &["Compares two {s}s by {a}.", "Orders {s}s by their {a}."],
        ast: "MethodDeclaration Parameter ReturnStatement MethodCall",
    },
];

const AUTO_COMMENTS: &[&str] = &[
    "Auto generated method stub",
    "Generated by the model compiler, do not edit.",
    "TODO Auto-generated setter",
];

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn fill(pattern: &str, subject: &str, attribute: &str, ty: &str) -> String {
    pattern
        .replace("{S}", &capitalize(subject))
        .replace("{s}", subject)
        .replace("{A}", &capitalize(attribute))
        .replace("{a}", attribute)
        .replace("{T}", ty)
}

/// Generates raw corpus records. Ids are `p{project}_{n}`, zero padded so
/// lexical order follows generation order.
pub fn generate(cfg: &SyntheticConfig) -> Vec<RawRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out: Vec<RawRecord> = Vec::new();
    for p in 0..cfg.projects {
        let project = format!("project{p:03}");
        let n = rng.gen_range(cfg.min_samples..=cfg.max_samples.max(cfg.min_samples));
        // Each project works in a small domain.
        let subjects: Vec<&str> = SUBJECTS.choose_multiple(&mut rng, 3).copied().collect();
        for k in 0..n {
            let id = format!("p{p:03}_{k:04}");
            let foreign: Vec<&RawRecord> = out.iter().filter(|r| r.project != project).collect();
            let mut rec = if !foreign.is_empty() && rng.gen_bool(cfg.duplicate_rate) {
                let src = foreign[rng.gen_range(0..foreign.len())];
                RawRecord { id, project: project.clone(), split: None, ..src.clone() }
            } else {
                let t = &TEMPLATES[rng.gen_range(0..TEMPLATES.len())];
                let s = subjects[rng.gen_range(0..subjects.len())];
                let a = ATTRIBUTES[rng.gen_range(0..ATTRIBUTES.len())];
                let ty = TYPES[rng.gen_range(0..TYPES.len())];
                let comment = t.comments[rng.gen_range(0..t.comments.len())];
                RawRecord {
                    id,
                    project: project.clone(),
                    code: fill(t.code, s, a, ty),
                    ast: cfg.with_ast.then(|| t.ast.to_string()),
                    comment: fill(comment, s, a, ty),
                    split: None,
                }
            };
            if rng.gen_bool(cfg.auto_generated_rate) {
                rec.comment = AUTO_COMMENTS[rng.gen_range(0..AUTO_COMMENTS.len())].to_string();
            }
            out.push(rec);
        }
    }
    out
}

/// Generates and preprocesses a corpus (unsplit, auto-generated comments kept).
pub fn synthetic_corpus(cfg: &SyntheticConfig, pre: &PreprocessConfig) -> Corpus {
    let mut buf = Vec::new();
    crate::corpus::write_records(&generate(cfg), &mut buf).expect("write to memory");
    read_corpus(buf.as_slice(), pre).expect("synthetic records are well formed")
}
