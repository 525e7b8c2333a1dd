//! Labeled corpora: manifest loading, deterministic splits and the synthetic
//! minimal-pair generator.

mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use synth::{
    synth_documents, synth_generate, write_fixtures, GuardKind, SynthDocument, SYNTH_MANIFEST_NAME,
};

use crate::ast::{parse_ast_json, AstTree};
use crate::error::{AstError, CorpusError};
use crate::label::Label;

pub const DEFAULT_TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Synthetic,
    External,
}

#[derive(Debug, Clone)]
pub struct LabeledContract {
    pub path: PathBuf,
    pub tree: AstTree,
    pub label: Label,
    pub provenance: Provenance,
    /// Solidity source the spans point into, when it is available.
    pub source: Option<String>,
}

/// Anything [`split`] can stratify.
pub trait Labeled {
    fn label(&self) -> Label;
}

impl Labeled for LabeledContract {
    fn label(&self) -> Label {
        self.label
    }
}

impl Labeled for Label {
    fn label(&self) -> Label {
        *self
    }
}

impl<T> Labeled for (T, Label) {
    fn label(&self) -> Label {
        self.1
    }
}

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub ast_path: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

/// A record whose AST could not be parsed.
#[derive(Debug)]
pub struct RecordFailure {
    pub line: usize,
    pub path: PathBuf,
    pub error: AstError,
}

#[derive(Debug, Default)]
pub struct CorpusLoad {
    pub contracts: Vec<LabeledContract>,
    pub failures: Vec<RecordFailure>,
}

/// Reads a JSON-lines manifest of `{ast_path, label}` records. Paths are
/// resolved against the manifest's directory. Missing files and bad labels
/// abort the load; AST parse failures are collected per record.
pub fn load_corpus(manifest: &Path) -> Result<CorpusLoad, CorpusError> {
    let text = fs::read_to_string(manifest).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile(manifest.to_path_buf()),
        _ => CorpusError::Io(e),
    })?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut out = CorpusLoad::default();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(line).map_err(|e| CorpusError::BadRecord {
                path: manifest.to_path_buf(),
                line: line_no,
                reason: e.to_string(),
            })?;
        let label: Label = record.label.parse().map_err(|_| CorpusError::BadLabel {
            path: manifest.to_path_buf(),
            line: line_no,
            label: record.label.clone(),
        })?;
        let ast_path = base.join(&record.ast_path);
        if !ast_path.is_file() {
            return Err(CorpusError::MissingFile(ast_path));
        }
        let source = match &record.source_path {
            Some(p) => {
                let p = base.join(p);
                Some(fs::read_to_string(&p).map_err(|_| CorpusError::MissingFile(p))?)
            }
            None => None,
        };
        match parse_ast_json(&fs::read_to_string(&ast_path)?) {
            Ok(tree) => out.contracts.push(LabeledContract {
                path: ast_path,
                tree,
                label,
                provenance: record.provenance.unwrap_or(Provenance::External),
                source,
            }),
            Err(error) => out.failures.push(RecordFailure {
                line: line_no,
                path: ast_path,
                error,
            }),
        }
    }
    Ok(out)
}

/// Train/test index sets for `labels`: a seeded shuffle followed by a prefix
/// split within each class. The training size is `round(fraction · N)`
/// clamped so both sides are non-empty, and is shared between classes by
/// largest remainder.
pub fn split_indices(
    labels: &[Label],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), CorpusError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(CorpusError::InvalidArgument(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let n = labels.len();
    if n < 2 {
        return Err(CorpusError::TooSmall(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let classes = [Label::Defective, Label::Clean];
    let counts = classes.map(|c| labels.iter().filter(|&&l| l == c).count());
    let exact = counts.map(|c| n_train as f64 * c as f64 / n as f64);
    let mut quota = exact.map(|x| x.floor() as usize);
    let mut remaining = n_train - quota.iter().sum::<usize>();
    let mut by_remainder = [0usize, 1];
    by_remainder.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &k in by_remainder.iter().cycle().take(4) {
        if remaining == 0 {
            break;
        }
        if quota[k] < counts[k] {
            quota[k] += 1;
            remaining -= 1;
        }
    }

    let mut taken = [0usize; 2];
    let (mut train, mut test) = (Vec::with_capacity(n_train), Vec::new());
    for i in order {
        let k = classes
            .iter()
            .position(|&c| c == labels[i])
            .expect("binary label");
        if taken[k] < quota[k] {
            taken[k] += 1;
            train.push(i);
        } else {
            test.push(i);
        }
    }
    Ok((train, test))
}

/// Partitions `items` into `(train, test)`; see [`split_indices`].
pub fn split<T: Labeled>(
    items: Vec<T>,
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<T>, Vec<T>), CorpusError> {
    let labels: Vec<Label> = items.iter().map(Labeled::label).collect();
    let (train_idx, _) = split_indices(&labels, train_fraction, seed)?;
    let mut in_train = vec![false; items.len()];
    for &i in &train_idx {
        in_train[i] = true;
    }
    // Keep the shuffled order on the training side.
    let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
    let train = train_idx
        .iter()
        .map(|&i| slots[i].take().expect("index used once"))
        .collect();
    let test = slots.into_iter().flatten().collect();
    Ok((train, test))
}
