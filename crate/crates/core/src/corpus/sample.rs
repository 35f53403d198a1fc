//! Turning logging statements into completion samples.
//!
//! Every removable logging statement becomes one sample: the statement is
//! cut out of its method (sibling logs stay), the insertion line after
//! renumbering is recorded as ground truth, and the whole method set is
//! split 8:2 into train and test with a seeded shuffle. Methods are
//! partitioned, not samples, so two logs of one method never straddle the
//! split.

use super::{CorpusError, LoggingStatement, MethodRecord, ProjectIndex};
use crate::jast;
use crate::level::Level;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One logging-completion task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    /// `<project>::<method id>@L<original line>`; unique and stable.
    pub sample_id: String,
    pub project: String,
    pub method_id: String,
    /// Method source with the target statement removed, siblings retained.
    pub method_source: String,
    /// 1-based insertion line in `method_source` after renumbering.
    pub gt_line: u32,
    /// The removed statement exactly as written (may span lines).
    pub gt_statement: String,
    pub gt_level: Level,
    pub gt_variables: Vec<String>,
    pub gt_text: String,
    pub split: Split,
}

/// Train/test method partition produced alongside the samples.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SplitSet {
    pub train_methods: BTreeSet<String>,
    pub test_methods: BTreeSet<String>,
}

#[derive(Debug, Clone, Default)]
pub struct SampleBuild {
    pub samples: Vec<Sample>,
    pub split: SplitSet,
    pub skipped_nonremovable: u32,
    pub skipped_duplicate_text: u32,
}

/// Builds samples from every removable logging statement in the index.
///
/// Identical `(index, seed)` inputs produce identical sample ids and split
/// assignments: logged-method ids are sorted, shuffled with a seeded RNG,
/// and the first 80% (at least one each side when possible) become train.
pub fn build_samples(index: &ProjectIndex, seed: u64) -> SampleBuild {
    let mut logged_ids: Vec<&str> = index
        .methods
        .iter()
        .filter(|m| !m.logging_statements.is_empty())
        .map(|m| m.id.as_str())
        .collect();
    logged_ids.sort_unstable();

    let mut shuffled = logged_ids.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let n = shuffled.len();
    let n_train = match n {
        0 => 0,
        1 => 1,
        _ => (((n as f64) * 0.8).round() as usize).clamp(1, n - 1),
    };
    let train: BTreeSet<String> = shuffled[..n_train].iter().map(|s| s.to_string()).collect();

    let mut build = SampleBuild::default();
    for id in &logged_ids {
        if train.contains(*id) {
            build.split.train_methods.insert(id.to_string());
        } else {
            build.split.test_methods.insert(id.to_string());
        }
    }

    for id in logged_ids {
        let method = index.method(id).expect("logged id came from the index");
        let split = if train.contains(id) {
            Split::Train
        } else {
            Split::Test
        };
        for statement in &method.logging_statements {
            match carve_sample(index, method, statement, split) {
                Ok(sample) => build.samples.push(sample),
                Err(SkipReason::NotRemovable) => build.skipped_nonremovable += 1,
                Err(SkipReason::DuplicateText) => build.skipped_duplicate_text += 1,
            }
        }
    }
    build
}

enum SkipReason {
    NotRemovable,
    DuplicateText,
}

fn carve_sample(
    index: &ProjectIndex,
    method: &MethodRecord,
    statement: &LoggingStatement,
    split: Split,
) -> Result<Sample, SkipReason> {
    if !statement.removable {
        return Err(SkipReason::NotRemovable);
    }
    let Some(modified) = remove_statement(&method.source_text, statement) else {
        return Err(SkipReason::NotRemovable);
    };
    // A leftover occurrence means the method held two byte-identical logs;
    // such samples would leak their own answer, so they are skipped.
    if modified.contains(statement.raw_text.trim()) {
        return Err(SkipReason::DuplicateText);
    }
    // Safety net: the modified method must still parse on its own.
    let wrapped = jast::wrap_in_class(&modified);
    match jast::parse(&wrapped) {
        Some(tree) if !tree.root_node().has_error() => {}
        _ => return Err(SkipReason::NotRemovable),
    }
    Ok(Sample {
        sample_id: format!("{}::{}@L{}", index.project, method.id, statement.line),
        project: index.project.clone(),
        method_id: method.id.clone(),
        method_source: modified,
        gt_line: statement.line,
        gt_statement: statement.raw_text.clone(),
        gt_level: statement.level,
        gt_variables: statement.variable_exprs.clone(),
        gt_text: statement.text(),
        split,
    })
}

/// Cuts the statement's byte span out of the method source. Lines the
/// statement occupied alone disappear; a line shared with other code keeps
/// its remainder. Returns `None` when the recorded span does not line up
/// with the source (never expected for indexer-produced statements).
fn remove_statement(source: &str, statement: &LoggingStatement) -> Option<String> {
    let lines: Vec<&str> = source.split('\n').collect();
    let first = statement.line as usize - 1;
    let last = statement.end_line as usize - 1;
    if last >= lines.len() {
        return None;
    }
    let first_line = lines[first];
    let last_line = lines[last];
    let col = statement.col as usize;
    let end_col = statement.end_col as usize;
    if col > first_line.len() || end_col > last_line.len() {
        return None;
    }
    let merged = format!("{}{}", &first_line[..col], &last_line[end_col..]);

    let mut out: Vec<&str> = Vec::with_capacity(lines.len());
    out.extend(&lines[..first]);
    if !merged.trim().is_empty() {
        out.push(&merged);
        let mut rebuilt = out.join("\n");
        rebuilt.push('\n');
        rebuilt.push_str(&lines[last + 1..].join("\n"));
        return Some(rebuilt);
    }
    out.extend(&lines[last + 1..]);
    Some(out.join("\n"))
}

/// Reinserts the ground-truth statement as its own line before `gt_line`.
/// Modulo whitespace, the result matches the original method text; tests
/// hold the construction to that.
pub fn reinserted_method(sample: &Sample) -> String {
    let lines: Vec<&str> = sample.method_source.split('\n').collect();
    let at = (sample.gt_line as usize - 1).min(lines.len());
    let mut out: Vec<&str> = Vec::with_capacity(lines.len() + 1);
    out.extend(&lines[..at]);
    out.push(&sample.gt_statement);
    out.extend(&lines[at..]);
    out.join("\n")
}

/// Sidecar metadata written next to a dataset so later stages can rescan
/// the same corpus deterministically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub project: String,
    /// Absolute corpus root at ingest time.
    pub root: PathBuf,
    pub exclude: Vec<String>,
    pub seed: u64,
    pub n_files: usize,
    pub n_methods: usize,
    pub n_logged_methods: usize,
    pub n_samples: usize,
    pub n_train_samples: usize,
    pub n_test_samples: usize,
}

pub fn meta_path(dataset: &Path) -> PathBuf {
    dataset.with_extension("meta.json")
}

pub fn write_dataset(
    path: &Path,
    samples: &[Sample],
    meta: &DatasetMeta,
) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    for sample in samples {
        let line = serde_json::to_string(sample).expect("samples serialize");
        writeln!(file, "{line}").map_err(io_err)?;
    }
    file.flush().map_err(io_err)?;
    let meta_file = meta_path(path);
    let body = serde_json::to_string_pretty(meta).expect("meta serializes");
    std::fs::write(&meta_file, body).map_err(|source| CorpusError::Io {
        path: meta_file,
        source,
    })?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<Sample>, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut samples = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let sample = serde_json::from_str(&line)
            .map_err(|source| CorpusError::BadDatasetLine { line: i + 1, source })?;
        samples.push(sample);
    }
    Ok(samples)
}

pub fn read_meta(dataset: &Path) -> Result<DatasetMeta, CorpusError> {
    let path = meta_path(dataset);
    let raw = std::fs::read_to_string(&path).map_err(|source| CorpusError::Io {
        path: path.clone(),
        source,
    })?;
    serde_json::from_str(&raw).map_err(|source| CorpusError::BadMeta { path, source })
}

/// Whitespace-insensitive equality form used by the reinsertion check.
pub fn normalize_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}
