//! Per-class recall and precision, macro averages and the two tabular report
//! shapes (per-class counts, and per-class accuracy by classifier).
//!
//! Percentages are kept at full precision and rounded to one decimal, half up,
//! only when rendered. Zero denominators render as `n/a`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const COUNTS_HEADER: &str = "Event,Total,Correct,False,Miss,Precision,Recall";
pub const COMPARISON_HEADER: &str = "Event,TrainN,TestN,ANN,KNN,SVM";
pub const AVERAGE_ROW: &str = "macro-average";
const NA: &str = "n/a";

/// Confusion counts for one class. `total` is the number of samples assigned
/// to the class, `correct + false_pos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCounts {
    pub total: usize,
    pub correct: usize,
    #[serde(rename = "false")]
    pub false_pos: usize,
    pub miss: usize,
}

impl ClassCounts {
    pub fn new(correct: usize, false_pos: usize, miss: usize) -> ClassCounts {
        ClassCounts { total: correct + false_pos, correct, false_pos, miss }
    }

    pub fn scaled(&self, factor: usize) -> ClassCounts {
        ClassCounts::new(self.correct * factor, self.false_pos * factor, self.miss * factor)
    }
}

/// `100 t_p / (t_p + f_n)`, `None` when nothing of the class was present.
pub fn recall(c: &ClassCounts) -> Option<f64> {
    percent(c.correct, c.correct + c.miss)
}

/// `100 t_p / (t_p + f_p)`, `None` when nothing was assigned to the class.
pub fn precision(c: &ClassCounts) -> Option<f64> {
    percent(c.correct, c.correct + c.false_pos)
}

fn percent(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| 100.0 * num as f64 / den as f64)
}

/// Per-class counts in vocabulary order.
pub fn confusion_counts(predictions: &[String], truths: &[String], vocabulary: &[String]) -> Result<Vec<ClassCounts>> {
    if predictions.len() != truths.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} ground-truth labels",
            predictions.len(),
            truths.len()
        )));
    }
    let index: HashMap<&str, usize> = vocabulary.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let lookup = |l: &String| {
        index.get(l.as_str()).copied().ok_or_else(|| Error::InvalidParam(format!("label {l:?} not in vocabulary")))
    };
    let mut out = vec![ClassCounts::default(); vocabulary.len()];
    for (p, t) in predictions.iter().zip(truths) {
        let (p, t) = (lookup(p)?, lookup(t)?);
        if p == t {
            out[p].correct += 1;
        } else {
            out[p].false_pos += 1;
            out[t].miss += 1;
        }
    }
    for c in &mut out {
        c.total = c.correct + c.false_pos;
    }
    Ok(out)
}

/// Unweighted mean of the defined values.
pub fn macro_average(values: &[Option<f64>]) -> Result<f64> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::Empty("no class has a defined metric".into()));
    }
    Ok(defined.iter().sum::<f64>() / defined.len() as f64)
}

/// Rounds to `decimals` places, half away from zero. The tiny nudge absorbs
/// binary representation error in values like `x.x5`.
pub fn round_half_up(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s + 0.5 + 1e-9).floor() / s
}

/// One-decimal percentage, trailing `.0` dropped (`96.5%`, `100%`).
pub fn format_percent(v: Option<f64>) -> String {
    format_places(v, 1)
}

fn format_places(v: Option<f64>, decimals: i32) -> String {
    let Some(v) = v else { return NA.to_string() };
    let s = format!("{:.*}", decimals as usize, round_half_up(v, decimals));
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    format!("{s}%")
}

fn parse_percent(field: &str, line: usize) -> Result<Option<f64>> {
    if field == NA {
        return Ok(None);
    }
    let v: f64 = field
        .strip_suffix('%')
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Format(format!("line {line}: bad percentage {field:?}")))?;
    if !(0.0..=100.0).contains(&v) {
        return Err(Error::Format(format!("line {line}: percentage {v} outside [0, 100]")));
    }
    Ok(Some(v))
}

fn parse_count(field: &str, line: usize) -> Result<usize> {
    field.parse().map_err(|_| Error::Format(format!("line {line}: bad count {field:?}")))
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label == AVERAGE_ROW || label.contains([',', '"', '\n', '\r']) {
        return Err(Error::InvalidParam(format!("label {label:?} cannot be written as a report row")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Result<ReportFormat> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::InvalidParam(format!("unknown report format {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    #[serde(flatten)]
    pub counts: ClassCounts,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Per-class counts with precision, recall and their macro averages.
///
/// Macro averages are taken over the one-decimal per-class values, the figures
/// a reader of the table sees. Classes with an undefined metric are left out
/// and counted in `undefined_precision` / `undefined_recall`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classifier: String,
    pub samples: usize,
    pub classes: Vec<ClassMetrics>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub undefined_precision: usize,
    pub undefined_recall: usize,
}

impl MetricsReport {
    pub fn new(classifier: &str, labels: &[String], counts: &[ClassCounts]) -> Result<MetricsReport> {
        if labels.len() != counts.len() {
            return Err(Error::Dimension(format!("{} labels for {} count rows", labels.len(), counts.len())));
        }
        let mut classes = Vec::with_capacity(labels.len());
        for (label, c) in labels.iter().zip(counts) {
            check_label(label)?;
            let c = ClassCounts::new(c.correct, c.false_pos, c.miss);
            classes.push(ClassMetrics { label: label.clone(), counts: c, precision: precision(&c), recall: recall(&c) });
        }
        let shown = |f: fn(&ClassMetrics) -> Option<f64>| -> Vec<Option<f64>> {
            classes.iter().map(|c| f(c).map(|v| round_half_up(v, 1))).collect()
        };
        let ps = shown(|c| c.precision);
        let rs = shown(|c| c.recall);
        Ok(MetricsReport {
            classifier: classifier.to_string(),
            samples: classes.iter().map(|c| c.counts.correct + c.counts.miss).sum(),
            macro_precision: macro_average(&ps).ok(),
            macro_recall: macro_average(&rs).ok(),
            undefined_precision: ps.iter().filter(|v| v.is_none()).count(),
            undefined_recall: rs.iter().filter(|v| v.is_none()).count(),
            classes,
        })
    }

    pub fn from_predictions(
        classifier: &str,
        predictions: &[String],
        truths: &[String],
        vocabulary: &[String],
    ) -> Result<MetricsReport> {
        MetricsReport::new(classifier, vocabulary, &confusion_counts(predictions, truths, vocabulary)?)
    }

    pub fn labels(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.label.clone()).collect()
    }

    pub fn counts(&self) -> Vec<ClassCounts> {
        self.classes.iter().map(|c| c.counts).collect()
    }

    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.label == label)
    }

    /// Fraction of samples classified correctly, in percent.
    pub fn accuracy(&self) -> Option<f64> {
        percent(self.classes.iter().map(|c| c.counts.correct).sum(), self.samples)
    }

    pub fn emit(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }

    /// Rows in class order, then a macro-average row (two decimals) when there
    /// is at least one class.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{COUNTS_HEADER}\n");
        for c in &self.classes {
            let n = c.counts;
            out += &format!(
                "{},{},{},{},{},{},{}\n",
                c.label,
                n.total,
                n.correct,
                n.false_pos,
                n.miss,
                format_percent(c.precision),
                format_percent(c.recall)
            );
        }
        if !self.classes.is_empty() {
            out += &format!(
                "{AVERAGE_ROW},,,,,{},{}\n",
                format_places(self.macro_precision, 2),
                format_places(self.macro_recall, 2)
            );
        }
        out
    }

    /// Rebuilds a report from its CSV form. The classifier name is not part of
    /// the CSV and comes back empty. Printed percentages must agree with the
    /// counts.
    pub fn parse_csv(text: &str) -> Result<MetricsReport> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == COUNTS_HEADER => {}
            _ => return Err(Error::Format(format!("expected header {COUNTS_HEADER:?}"))),
        }
        let mut labels = Vec::new();
        let mut counts = Vec::new();
        let mut average = None;
        for (i, line) in lines {
            let line_no = i + 1;
            if average.is_some() {
                return Err(Error::Format(format!("line {line_no}: rows after the average row")));
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(Error::Format(format!("line {line_no}: expected 7 fields, got {}", fields.len())));
            }
            if fields[0] == AVERAGE_ROW {
                average = Some((parse_percent(fields[5], line_no)?, parse_percent(fields[6], line_no)?, line_no));
                continue;
            }
            let total = parse_count(fields[1], line_no)?;
            let c = ClassCounts::new(
                parse_count(fields[2], line_no)?,
                parse_count(fields[3], line_no)?,
                parse_count(fields[4], line_no)?,
            );
            if c.total != total {
                return Err(Error::Format(format!("line {line_no}: total {total} != correct + false")));
            }
            if format_percent(precision(&c)) != fields[5] || format_percent(recall(&c)) != fields[6] {
                return Err(Error::Format(format!("line {line_no}: percentages disagree with counts")));
            }
            check_label(fields[0]).map_err(|e| Error::Format(format!("line {line_no}: {e}")))?;
            labels.push(fields[0].to_string());
            counts.push(c);
        }
        let report = MetricsReport::new("", &labels, &counts)?;
        match average {
            None if !labels.is_empty() => return Err(Error::Format("missing average row".into())),
            Some((p, r, line_no))
                if format_places(p, 2) != format_places(report.macro_precision, 2)
                    || format_places(r, 2) != format_places(report.macro_recall, 2) =>
            {
                return Err(Error::Format(format!("line {line_no}: averages disagree with counts")));
            }
            _ => {}
        }
        Ok(report)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<MetricsReport> {
        let r: MetricsReport = serde_json::from_str(text)?;
        let rebuilt = MetricsReport::new(&r.classifier, &r.labels(), &r.counts())?;
        if rebuilt.to_json() != r.to_json() {
            return Err(Error::Format("report fields disagree with its counts".into()));
        }
        Ok(r)
    }
}

/// One class of the classifier comparison: sample counts and per-class
/// accuracy (recall) for each classifier kind that was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub train_n: usize,
    pub test_n: usize,
    pub ann: Option<f64>,
    pub knn: Option<f64>,
    pub svm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// Builds rows for `labels`. `reports` holds `(kind, report)` pairs with
    /// kind one of `ann`, `knn`, `svm`; missing kinds stay `n/a`.
    pub fn new(labels: &[String], train_counts: &[usize], reports: &[(&str, &MetricsReport)]) -> Result<ComparisonReport> {
        if labels.len() != train_counts.len() {
            return Err(Error::Dimension("one training count per label required".into()));
        }
        let mut rows: Vec<ComparisonRow> = labels
            .iter()
            .zip(train_counts)
            .map(|(l, &n)| {
                check_label(l)?;
                Ok(ComparisonRow { label: l.clone(), train_n: n, test_n: 0, ann: None, knn: None, svm: None })
            })
            .collect::<Result<_>>()?;
        for &(kind, report) in reports {
            for row in &mut rows {
                let Some(c) = report.classes.iter().find(|c| c.label == row.label) else { continue };
                row.test_n = c.counts.correct + c.counts.miss;
                let slot = match kind {
                    "ann" => &mut row.ann,
                    "knn" => &mut row.knn,
                    "svm" => &mut row.svm,
                    other => return Err(Error::InvalidParam(format!("unknown classifier kind {other:?}"))),
                };
                *slot = c.recall;
            }
        }
        Ok(ComparisonReport { rows })
    }

    pub fn emit(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Json => self.to_json(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{COMPARISON_HEADER}\n");
        for r in &self.rows {
            out += &format!(
                "{},{},{},{},{},{}\n",
                r.label,
                r.train_n,
                r.test_n,
                format_percent(r.ann),
                format_percent(r.knn),
                format_percent(r.svm)
            );
        }
        out
    }

    /// Percentages come back at display precision.
    pub fn parse_csv(text: &str) -> Result<ComparisonReport> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h == COMPARISON_HEADER => {}
            _ => return Err(Error::Format(format!("expected header {COMPARISON_HEADER:?}"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let n = i + 1;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(Error::Format(format!("line {n}: expected 6 fields, got {}", f.len())));
            }
            check_label(f[0]).map_err(|e| Error::Format(format!("line {n}: {e}")))?;
            rows.push(ComparisonRow {
                label: f[0].to_string(),
                train_n: parse_count(f[1], n)?,
                test_n: parse_count(f[2], n)?,
                ann: parse_percent(f[3], n)?.map(|v| round_half_up(v, 1)),
                knn: parse_percent(f[4], n)?.map(|v| round_half_up(v, 1)),
                svm: parse_percent(f[5], n)?.map(|v| round_half_up(v, 1)),
            });
        }
        Ok(ComparisonReport { rows })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<ComparisonReport> {
        let r: ComparisonReport = serde_json::from_str(text)?;
        for row in &r.rows {
            check_label(&row.label).map_err(|e| Error::Format(e.to_string()))?;
            if [row.ann, row.knn, row.svm].iter().flatten().any(|v| !(0.0..=100.0).contains(v)) {
                return Err(Error::Format(format!("{}: percentage outside [0, 100]", row.label)));
            }
        }
        Ok(r)
    }
}
