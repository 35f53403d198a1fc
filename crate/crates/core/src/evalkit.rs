//! Scoring of generated logging statements against the carved ground truth.
//!
//! Position is scored on every sample; level, variable, and text metrics
//! count only where the position was right, since comparing the content of
//! a statement that landed in the wrong place says nothing useful.

use crate::corpus::Sample;
use crate::jast;
use crate::level::Level;
use crate::modelgw::{normalize_expr, GeneratedLog};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no samples to evaluate")]
    EmptyInput,
    #[error("failed to write per-sample rows: {0}")]
    Csv(#[from] csv::Error),
}

/// 1 when the predicted line lands within one line of the target and both
/// lines sit in the same innermost brace block of the method; 0 otherwise.
/// Lines are 1-based within `method_source`.
pub fn position_accuracy(pred_line: u32, gt_line: u32, method_source: &str) -> u8 {
    if pred_line.abs_diff(gt_line) > 1 {
        return 0;
    }
    if pred_line == gt_line {
        return 1;
    }
    let same_block = match block_spans(method_source) {
        Some(spans) => innermost(&spans, pred_line) == innermost(&spans, gt_line),
        // An unparseable method has no block structure to distinguish.
        None => true,
    };
    u8::from(same_block)
}

/// Brace-block line spans of a bare method, 1-based and end-inclusive.
/// The span of a block includes both brace lines.
fn block_spans(method_source: &str) -> Option<Vec<(u32, u32)>> {
    let wrapped = jast::wrap_in_class(method_source);
    let tree = jast::parse(&wrapped)?;
    let mut spans = Vec::new();
    let mut stack = vec![tree.root_node()];
    while let Some(node) = stack.pop() {
        if matches!(node.kind(), "block" | "switch_block" | "constructor_body") {
            // The wrapper adds one line above the payload, so parse row n
            // (0-based) is payload line n (1-based).
            spans.push((node.start_position().row as u32, node.end_position().row as u32));
        }
        stack.extend(jast::children(node));
    }
    Some(spans)
}

fn innermost(spans: &[(u32, u32)], line: u32) -> Option<(u32, u32)> {
    spans
        .iter()
        .filter(|(start, end)| *start <= line && line <= *end)
        .max_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)))
        .copied()
}

/// Score in [0,1] for how close a predicted level sits to the actual one
/// on the ordinal scale: 1 for exact, 0 for the farthest possible miss.
pub fn aod_term(actual: Level, predicted: Level) -> f64 {
    let a = actual.index() as f64;
    let p = predicted.index() as f64;
    let max_dis = a.max(5.0 - a);
    1.0 - (a - p).abs() / max_dis
}

/// Exact-match accuracy and mean ordinal closeness over (actual, predicted)
/// level pairs.
pub fn level_metrics(pairs: &[(Level, Level)]) -> Result<(f64, f64), EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = pairs.len() as f64;
    let exact = pairs.iter().filter(|(a, p)| a == p).count() as f64;
    let closeness: f64 = pairs.iter().map(|(a, p)| aod_term(*a, *p)).sum();
    Ok((exact / n, closeness / n))
}

/// Precision, recall, and F1 of predicted against actual logged-variable
/// expressions. Matching is exact on the normalized expression text, so
/// `service.getState()` and `service.getServiceState()` do not match even
/// though they share a base variable.
///
/// Empty-set conventions: both empty scores (1, 1, 1); an empty prediction
/// against a non-empty truth scores (0, 0, 0); a non-empty prediction
/// against an empty truth gets recall 1 (nothing was missed).
pub fn variable_metrics(s_p: &BTreeSet<String>, s_g: &BTreeSet<String>) -> (f64, f64, f64) {
    let hit = s_p.intersection(s_g).count() as f64;
    let precision = if s_p.is_empty() {
        if s_g.is_empty() {
            1.0
        } else {
            0.0
        }
    } else {
        hit / s_p.len() as f64
    };
    let recall = if s_g.is_empty() {
        1.0
    } else {
        hit / s_g.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Splits logged text into comparison tokens: alphanumeric runs and
/// individual punctuation marks, except that a `{}` placeholder stays one
/// token. Whitespace separates and is dropped.
pub fn tokenize_text(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            tokens.push(chars[start..i].iter().collect());
        } else if c == '{' && chars.get(i + 1) == Some(&'}') {
            tokens.push("{}".to_string());
            i += 2;
        } else {
            tokens.push(c.to_string());
            i += 1;
        }
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> std::collections::BTreeMap<&[String], usize> {
    let mut counts = std::collections::BTreeMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// BLEU-K of the prediction against a single reference, with a brevity
/// penalty and add-one smoothing on every order above unigrams. Short
/// logging texts make unsmoothed higher orders collapse to zero, so these
/// scores compare only against scores from this same implementation.
fn bleu(pred: &[String], gt: &[String], k: usize) -> f64 {
    let mut log_sum = 0.0;
    for n in 1..=k {
        let pred_grams = ngram_counts(pred, n);
        let gt_grams = ngram_counts(gt, n);
        let total: usize = pred_grams.values().sum();
        let matched: usize = pred_grams
            .iter()
            .map(|(gram, count)| (*count).min(gt_grams.get(gram).copied().unwrap_or(0)))
            .sum();
        let p = if n == 1 {
            if total == 0 {
                return 0.0;
            }
            matched as f64 / total as f64
        } else {
            (matched + 1) as f64 / (total + 1) as f64
        };
        if p == 0.0 {
            return 0.0;
        }
        log_sum += p.ln();
    }
    let c = pred.len() as f64;
    let r = gt.len() as f64;
    let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
    brevity * (log_sum / k as f64).exp()
}

fn f_measure(overlap: f64, pred_len: usize, gt_len: usize) -> f64 {
    if pred_len == 0 || gt_len == 0 {
        return 0.0;
    }
    let p = overlap / pred_len as f64;
    let r = overlap / gt_len as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for ai in a {
        let mut prev_diag = 0;
        for (j, bj) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if ai == bj {
                prev_diag + 1
            } else {
                up.max(row[j])
            };
            prev_diag = up;
        }
    }
    row[b.len()]
}

/// (BLEU-1, BLEU-4, ROUGE-1, ROUGE-L) of predicted against actual logged
/// text. Two empty texts agree perfectly by convention; one empty text
/// scores zero across the board.
pub fn text_metrics(pred_text: &str, gt_text: &str) -> (f64, f64, f64, f64) {
    let pred = tokenize_text(pred_text);
    let gt = tokenize_text(gt_text);
    if pred.is_empty() && gt.is_empty() {
        return (1.0, 1.0, 1.0, 1.0);
    }
    if pred.is_empty() || gt.is_empty() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let bleu1 = bleu(&pred, &gt, 1);
    let bleu4 = bleu(&pred, &gt, 4);
    let pred_uni = ngram_counts(&pred, 1);
    let gt_uni = ngram_counts(&gt, 1);
    let overlap: usize = pred_uni
        .iter()
        .map(|(gram, count)| (*count).min(gt_uni.get(gram).copied().unwrap_or(0)))
        .sum();
    let rouge1 = f_measure(overlap as f64, pred.len(), gt.len());
    let rouge_l = f_measure(lcs_len(&pred, &gt) as f64, pred.len(), gt.len());
    (bleu1, bleu4, rouge1, rouge_l)
}

/// Every per-sample score, one row of the evaluation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEval {
    pub sample_id: String,
    /// Absent when the response never parsed into a prediction.
    pub pred_line: Option<u32>,
    pub gt_line: u32,
    pub pa: u8,
    pub level_correct: u8,
    pub aod_term: f64,
    pub var_precision: f64,
    pub var_recall: f64,
    pub var_f1: f64,
    pub bleu1: f64,
    pub bleu4: f64,
    pub rouge1: f64,
    pub rouge_l: f64,
    /// True exactly when `pa == 1`; rows where it is false contribute
    /// nothing beyond position to the aggregates.
    pub what_to_log_counted: bool,
}

/// Scores one sample. `pred` is `None` when the model response failed to
/// parse, which counts as a position miss.
pub fn evaluate_sample(sample: &Sample, pred: Option<&GeneratedLog>) -> SampleEval {
    let pa = pred
        .map(|p| position_accuracy(p.line, sample.gt_line, &sample.method_source))
        .unwrap_or(0);
    let (level_correct, aod) = match pred.and_then(|p| p.level) {
        Some(level) => (
            u8::from(level == sample.gt_level),
            aod_term(sample.gt_level, level),
        ),
        // Off-scale or missing level: worst ordinal distance is the honest
        // floor, matching how an always-wrong classifier would score.
        None => (0, 0.0),
    };
    let s_g: BTreeSet<String> = sample.gt_variables.iter().map(|v| normalize_expr(v)).collect();
    let s_p: BTreeSet<String> = pred
        .map(|p| p.variable_exprs.iter().map(|v| normalize_expr(v)).collect())
        .unwrap_or_default();
    let (var_precision, var_recall, var_f1) = variable_metrics(&s_p, &s_g);
    let pred_text = pred.map(|p| p.text.as_str()).unwrap_or("");
    let (bleu1, bleu4, rouge1, rouge_l) = text_metrics(pred_text, &sample.gt_text);
    SampleEval {
        sample_id: sample.sample_id.clone(),
        pred_line: pred.map(|p| p.line),
        gt_line: sample.gt_line,
        pa,
        level_correct,
        aod_term: aod,
        var_precision,
        var_recall,
        var_f1,
        bleu1,
        bleu4,
        rouge1,
        rouge_l,
        what_to_log_counted: pa == 1,
    }
}

/// Run identity attached to a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMeta {
    pub project: String,
    pub ablations: Vec<String>,
    pub backend: String,
    pub seed: u64,
}

/// Aggregate scores for one run. Serializes with the conventional metric
/// names as keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub project: String,
    pub n_samples: usize,
    /// Rows with the position right; the denominator for everything except
    /// position accuracy itself.
    pub n_counted: usize,
    #[serde(rename = "PA")]
    pub pa: f64,
    #[serde(rename = "L-ACC")]
    pub l_acc: f64,
    #[serde(rename = "AOD")]
    pub aod: f64,
    #[serde(rename = "Precision")]
    pub precision: f64,
    #[serde(rename = "Recall")]
    pub recall: f64,
    #[serde(rename = "F1")]
    pub f1: f64,
    #[serde(rename = "BLEU-1")]
    pub bleu1: f64,
    #[serde(rename = "BLEU-4")]
    pub bleu4: f64,
    #[serde(rename = "ROUGE-1")]
    pub rouge1: f64,
    #[serde(rename = "ROUGE-L")]
    pub rouge_l: f64,
    pub ablations: Vec<String>,
    pub backend: String,
    pub seed: u64,
}

/// Folds per-sample rows into one report. Position accuracy averages over
/// all rows; every other aggregate averages over the rows that got the
/// position right, and reads 0 when no row did.
pub fn aggregate_report(evals: &[SampleEval], meta: &ReportMeta) -> Result<EvalReport, EvalError> {
    if evals.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = evals.len();
    let counted: Vec<&SampleEval> = evals.iter().filter(|e| e.what_to_log_counted).collect();
    let mean = |f: &dyn Fn(&SampleEval) -> f64| -> f64 {
        if counted.is_empty() {
            0.0
        } else {
            counted.iter().map(|e| f(e)).sum::<f64>() / counted.len() as f64
        }
    };
    Ok(EvalReport {
        project: meta.project.clone(),
        n_samples: n,
        n_counted: counted.len(),
        pa: evals.iter().map(|e| e.pa as f64).sum::<f64>() / n as f64,
        l_acc: mean(&|e| e.level_correct as f64),
        aod: mean(&|e| e.aod_term),
        precision: mean(&|e| e.var_precision),
        recall: mean(&|e| e.var_recall),
        f1: mean(&|e| e.var_f1),
        bleu1: mean(&|e| e.bleu1),
        bleu4: mean(&|e| e.bleu4),
        rouge1: mean(&|e| e.rouge1),
        rouge_l: mean(&|e| e.rouge_l),
        ablations: meta.ablations.clone(),
        backend: meta.backend.clone(),
        seed: meta.seed,
    })
}

/// Writes the rows as CSV with a header, one line per sample.
pub fn write_csv<W: Write>(evals: &[SampleEval], out: W) -> Result<(), EvalError> {
    let mut writer = csv::Writer::from_writer(out);
    for eval in evals {
        writer.serialize(eval)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::modelgw::Stage;
    use proptest::prelude::*;

    const METHOD: &str = "void move(int n) {\n    int a = n;\n    if (n > 0) {\n        a++;\n    }\n    int b = a;\n}\n";
    // Lines: 1 signature, 2 `int a`, 3 `if {`, 4 `a++`, 5 `}`, 6 `int b`, 7 `}`.

    #[test]
    fn position_exact_and_adjacent_same_block_score_one() {
        assert_eq!(position_accuracy(12, 12, METHOD), 1);
        assert_eq!(position_accuracy(2, 2, METHOD), 1);
        // 2 and 6 are both directly in the method block but too far apart.
        assert_eq!(position_accuracy(6, 2, METHOD), 0);
        // 1 and 2: signature line sits in the method block, like line 2.
        assert_eq!(position_accuracy(1, 2, METHOD), 1);
    }

    #[test]
    fn position_block_boundary_between_adjacent_lines_scores_zero() {
        // 5 closes the if block; 6 is back in the method block.
        assert_eq!(position_accuracy(6, 5, METHOD), 0);
        assert_eq!(position_accuracy(5, 6, METHOD), 0);
        // 4 and 5 are both in the if block.
        assert_eq!(position_accuracy(4, 5, METHOD), 1);
        // 3 opens the if block, so 3 and 4 share it.
        assert_eq!(position_accuracy(4, 3, METHOD), 1);
    }

    #[test]
    fn position_line_outside_the_method_never_matches() {
        assert_eq!(position_accuracy(8, 7, METHOD), 0);
        assert_eq!(position_accuracy(40, 2, METHOD), 0);
    }

    #[test]
    fn level_hand_values() {
        let exact = vec![(Level::Info, Level::Info), (Level::Warn, Level::Warn)];
        assert_eq!(level_metrics(&exact).unwrap(), (1.0, 1.0));

        // error is index 4: farthest level is trace at distance 4; warn is
        // one step away, so closeness is 1 - 1/4.
        let (lacc, aod) = level_metrics(&[(Level::Error, Level::Warn)]).unwrap();
        assert_eq!(lacc, 0.0);
        assert!((aod - 0.75).abs() < 1e-12);

        // trace to fatal is the full width of the scale.
        let (_, worst) = level_metrics(&[(Level::Trace, Level::Fatal)]).unwrap();
        assert_eq!(worst, 0.0);

        assert!(matches!(level_metrics(&[]), Err(EvalError::EmptyInput)));
    }

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn variable_hand_values() {
        let (p, r, f1) = variable_metrics(
            &set(&["service.getName()"]),
            &set(&["service.getName()", "service.getServiceState()"]),
        );
        assert_eq!((p, r), (1.0, 0.5));
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);

        let same = set(&["a", "b.c()"]);
        assert_eq!(variable_metrics(&same, &same), (1.0, 1.0, 1.0));

        // Same base variable, different member usage: no credit.
        assert_eq!(
            variable_metrics(&set(&["service.getState()"]), &set(&["service.getServiceState()"])),
            (0.0, 0.0, 0.0)
        );

        assert_eq!(variable_metrics(&set(&[]), &set(&[])), (1.0, 1.0, 1.0));
        assert_eq!(variable_metrics(&set(&[]), &set(&["x"])), (0.0, 0.0, 0.0));
        let (p, r, f1) = variable_metrics(&set(&["x"]), &set(&[]));
        assert_eq!((p, r, f1), (0.0, 1.0, 0.0));
    }

    #[test]
    fn text_tokenizer_keeps_placeholders_whole() {
        assert_eq!(tokenize_text("start doing mkdir"), ["start", "doing", "mkdir"]);
        assert_eq!(tokenize_text("count: {} of {}."), ["count", ":", "{}", "of", "{}", "."]);
        assert_eq!(tokenize_text("  "), Vec::<String>::new());
    }

    #[test]
    fn text_hand_values() {
        let same = text_metrics("Entry to state  for ", "Entry to state  for ");
        assert_eq!(same, (1.0, 1.0, 1.0, 1.0));

        // Three tokens each, two shared in order. Unigram precision and
        // recall are both 2/3. BLEU-4 orders: p1 = 2/3, p2 = (1+1)/(2+1),
        // p3 = (0+1)/(1+1), p4 = (0+1)/(0+1); geometric mean of
        // {2/3, 2/3, 1/2, 1} is (2/9)^(1/4).
        let (b1, b4, r1, rl) = text_metrics("start doing mkdir", "start doing delete");
        assert!((b1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((b4 - (2.0f64 / 9.0).powf(0.25)).abs() < 1e-12);
        assert!((r1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((rl - 2.0 / 3.0).abs() < 1e-12);

        let disjoint = text_metrics("alpha beta", "gamma delta");
        assert!(disjoint.0 <= 0.01 && disjoint.1 <= 0.01);
        assert!(disjoint.2 <= 0.01 && disjoint.3 <= 0.01);

        assert_eq!(text_metrics("", ""), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(text_metrics("", "something"), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(text_metrics("something", ""), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn rouge_l_respects_order_where_rouge_1_does_not() {
        // Same bag of words, different order: unigram overlap is full but
        // the longest common subsequence drops to 3 of 4.
        let (_, _, r1, rl) = text_metrics("a b c d", "a c b d");
        assert!((r1 - 1.0).abs() < 1e-12);
        assert!((rl - 0.75).abs() < 1e-12);
    }

    fn eval_row(id: &str, pa: u8, value: f64) -> SampleEval {
        SampleEval {
            sample_id: id.to_string(),
            pred_line: Some(3),
            gt_line: 3,
            pa,
            level_correct: pa,
            aod_term: value,
            var_precision: value,
            var_recall: value,
            var_f1: value,
            bleu1: value,
            bleu4: value,
            rouge1: value,
            rouge_l: value,
            what_to_log_counted: pa == 1,
        }
    }

    fn meta() -> ReportMeta {
        ReportMeta {
            project: "demo".to_string(),
            ablations: vec![],
            backend: "mock-echo".to_string(),
            seed: 7,
        }
    }

    #[test]
    fn aggregate_uses_position_hits_as_denominator() {
        let evals = vec![
            eval_row("a", 1, 1.0),
            eval_row("b", 1, 0.5),
            eval_row("c", 0, 0.9),
            eval_row("d", 0, 0.9),
        ];
        let report = aggregate_report(&evals, &meta()).unwrap();
        assert_eq!(report.n_samples, 4);
        assert_eq!(report.n_counted, 2);
        assert_eq!(report.pa, 0.5);
        // Means over the two counted rows only: (1.0 + 0.5) / 2.
        assert_eq!(report.aod, 0.75);
        assert_eq!(report.f1, 0.75);
        assert_eq!(report.rouge_l, 0.75);
        assert_eq!(report.l_acc, 1.0);
    }

    #[test]
    fn position_misses_never_move_content_aggregates() {
        let base = vec![eval_row("a", 1, 0.625)];
        let with_miss = vec![eval_row("a", 1, 0.625), eval_row("z", 0, 0.1)];
        let before = aggregate_report(&base, &meta()).unwrap();
        let after = aggregate_report(&with_miss, &meta()).unwrap();
        assert_eq!(before.aod, after.aod);
        assert_eq!(before.f1, after.f1);
        assert_eq!(before.bleu4, after.bleu4);
        assert_eq!(before.rouge1, after.rouge1);
        assert_ne!(before.pa, after.pa);
    }

    #[test]
    fn aggregate_edge_cases() {
        assert!(matches!(
            aggregate_report(&[], &meta()),
            Err(EvalError::EmptyInput)
        ));
        let all_missed = vec![eval_row("a", 0, 0.9), eval_row("b", 0, 0.9)];
        let report = aggregate_report(&all_missed, &meta()).unwrap();
        assert_eq!(report.pa, 0.0);
        assert_eq!(report.n_counted, 0);
        assert_eq!(report.aod, 0.0);
        assert_eq!(report.bleu1, 0.0);
    }

    #[test]
    fn report_serializes_with_conventional_metric_names() {
        let report = aggregate_report(&[eval_row("a", 1, 1.0)], &meta()).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for key in [
            "PA", "L-ACC", "AOD", "Precision", "Recall", "F1", "BLEU-1", "BLEU-4", "ROUGE-1",
            "ROUGE-L",
        ] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
        let back: EvalReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }

    fn sample_fixture() -> Sample {
        Sample {
            sample_id: "demo::d.C#m()@L3".to_string(),
            project: "demo".to_string(),
            method_id: "d.C#m()".to_string(),
            method_source: METHOD.to_string(),
            gt_line: 2,
            gt_statement: "LOG.info(\"moved \" + n);".to_string(),
            gt_level: Level::Info,
            gt_variables: vec!["n".to_string()],
            gt_text: "moved ".to_string(),
            split: Split::Test,
        }
    }

    fn generated(line: u32, statement: &str) -> GeneratedLog {
        let parsed = crate::modelgw::ParsedGeneration {
            line,
            statement: statement.to_string(),
        };
        GeneratedLog::from_parsed("demo::d.C#m()@L3", Stage::Tentative, &parsed)
    }

    #[test]
    fn echoed_ground_truth_scores_perfectly() {
        let sample = sample_fixture();
        let pred = generated(2, "LOG.info(\"moved \" + n);");
        let eval = evaluate_sample(&sample, Some(&pred));
        assert_eq!(eval.pa, 1);
        assert_eq!(eval.level_correct, 1);
        assert_eq!(eval.aod_term, 1.0);
        assert_eq!((eval.var_precision, eval.var_recall, eval.var_f1), (1.0, 1.0, 1.0));
        assert_eq!((eval.bleu1, eval.bleu4), (1.0, 1.0));
        assert_eq!((eval.rouge1, eval.rouge_l), (1.0, 1.0));
        assert!(eval.what_to_log_counted);
    }

    #[test]
    fn parse_failure_scores_zero_position_and_is_not_counted() {
        let sample = sample_fixture();
        let eval = evaluate_sample(&sample, None);
        assert_eq!(eval.pa, 0);
        assert_eq!(eval.pred_line, None);
        assert!(!eval.what_to_log_counted);
        let report = aggregate_report(&[eval], &meta()).unwrap();
        assert_eq!(report.pa, 0.0);
    }

    #[test]
    fn off_scale_level_scores_zero_closeness() {
        let sample = sample_fixture();
        let pred = generated(2, "LOG.notice(\"moved \" + n);");
        let eval = evaluate_sample(&sample, Some(&pred));
        assert_eq!(eval.level_correct, 0);
        assert_eq!(eval.aod_term, 0.0);
        // Position and text still score on their own merits.
        assert_eq!(eval.pa, 1);
        assert_eq!(eval.rouge1, 1.0);
    }

    #[test]
    fn csv_rows_cover_every_sample_once() {
        let evals = vec![eval_row("a,with,commas", 1, 0.5), eval_row("b", 0, 0.25)];
        let mut buf = Vec::new();
        write_csv(&evals, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("sample_id,pred_line,gt_line,pa,"));
        assert_eq!(lines.clone().count(), 2);
        assert!(lines.next().unwrap().starts_with("\"a,with,commas\""));
    }

    fn arb_level() -> impl Strategy<Value = Level> {
        prop::sample::select(Level::ALL.to_vec())
    }

    proptest! {
        #[test]
        fn ordinal_closeness_dominates_exact_accuracy(
            pairs in prop::collection::vec((arb_level(), arb_level()), 1..32)
        ) {
            let (lacc, aod) = level_metrics(&pairs).unwrap();
            prop_assert!((0.0..=1.0).contains(&lacc));
            prop_assert!((0.0..=1.0).contains(&aod));
            prop_assert!(aod >= lacc - 1e-12);
            // Perfect on one scale is perfect on the other.
            prop_assert_eq!(lacc == 1.0, aod == 1.0);
        }

        #[test]
        fn unigram_overlap_is_symmetric(
            a in prop::collection::vec("[a-d]{1,3}", 0..8),
            b in prop::collection::vec("[a-d]{1,3}", 0..8),
        ) {
            let left = text_metrics(&a.join(" "), &b.join(" "));
            let right = text_metrics(&b.join(" "), &a.join(" "));
            prop_assert!((left.2 - right.2).abs() < 1e-12);
            for v in [left.0, left.1, left.2, left.3] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn f1_boundaries_match_set_relations(
            p in prop::collection::btree_set("[a-c]{1,2}", 0..5),
            g in prop::collection::btree_set("[a-c]{1,2}", 0..5),
        ) {
            let (prec, rec, f1) = variable_metrics(&p, &g);
            for v in [prec, rec, f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if p.is_empty() && g.is_empty() {
                prop_assert_eq!(f1, 1.0);
            } else {
                prop_assert_eq!(f1 == 0.0, p.intersection(&g).count() == 0);
                prop_assert_eq!(f1 == 1.0, p == g);
            }
        }
    }
}
