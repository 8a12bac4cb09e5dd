//! Averaged metric tables over observability levels.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{score_record, MetricsError, METRICS};
use crate::aml::{ApiDatabase, Program};
use crate::labels::{subsample_label, Label};
use crate::model::train::rng_for;

/// A test record: the full label and the program it was extracted from.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalItem {
    pub label: Label,
    pub program: Program,
}

/// Mean M1..M5 per observability fraction: rows are metrics, columns are
/// fractions.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub title: String,
    pub fractions: Vec<f64>,
    /// `values[m][f]`: mean of metric `m` at fraction `f`.
    pub values: Vec<Vec<f64>>,
    pub records: usize,
    pub seed: u64,
}

impl Report {
    fn header(&self) -> Vec<String> {
        std::iter::once("metric".to_string())
            .chain(self.fractions.iter().map(|f| format!("{:.0}%", f * 100.0)))
            .collect()
    }

    pub fn metric(&self, name: &str) -> Option<&[f64]> {
        METRICS.iter().position(|m| *m == name).map(|i| self.values[i].as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.header()).expect("in-memory write");
        for (name, row) in METRICS.iter().zip(&self.values) {
            let mut rec = vec![name.to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} ({} records, seed {})", self.title, self.records, self.seed);
        let header = self.header();
        let _ = writeln!(s, "{:<8}{}", header[0], header[1..].iter().map(|h| format!("{h:>10}")).collect::<String>());
        for (name, row) in METRICS.iter().zip(&self.values) {
            let _ = writeln!(s, "{:<8}{}", name, row.iter().map(|v| format!("{v:>10.3}")).collect::<String>());
        }
        s
    }
}

/// Scores `predict` on every item at every fraction. Labels are revealed
/// partially with a seeded subsample per (item, fraction); `predict`
/// receives the subsampled label and a seed for its own randomness.
pub fn evaluate<F>(
    title: &str,
    items: &[EvalItem],
    fractions: &[f64],
    seed: u64,
    db: &ApiDatabase,
    predict: F,
) -> Result<Report, MetricsError>
where
    F: Fn(&Label, u64) -> Vec<Program> + Sync,
{
    let jobs: Vec<(usize, usize)> = (0..items.len()).flat_map(|i| (0..fractions.len()).map(move |f| (i, f))).collect();
    let scores: Vec<Result<[f64; 5], MetricsError>> = jobs
        .par_iter()
        .map(|&(i, f)| {
            let stream = ((i as u64) << 16) | f as u64;
            let x = subsample_label(&items[i].label, fractions[f], &mut rng_for(seed, stream));
            let predicted = predict(&x, seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            Ok(score_record(&items[i].program, &predicted, db)?.scores)
        })
        .collect();
    let mut values = vec![vec![0.0; fractions.len()]; METRICS.len()];
    for (&(_, f), s) in jobs.iter().zip(scores) {
        let s = s?;
        for m in 0..METRICS.len() {
            values[m][f] += s[m];
        }
    }
    if !items.is_empty() {
        values.iter_mut().flatten().for_each(|v| *v /= items.len() as f64);
    }
    Ok(Report { title: title.into(), fractions: fractions.to_vec(), values, records: items.len(), seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aml::parse_program;

    fn db() -> ApiDatabase {
        ApiDatabase::builder().types(&["A"]).method("A", "m", &[], None).build().unwrap()
    }

    #[test]
    fn perfect_predictor_row() {
        let p = parse_program("call $A.m()").unwrap();
        let items = vec![EvalItem { label: Label::default(), program: p.clone() }];
        let r = evaluate("t", &items, &[1.0], 0, &db(), |_, _| vec![p.clone()]).unwrap();
        assert_eq!(r.values, vec![vec![1.0], vec![0.0], vec![0.0], vec![0.0], vec![0.0]]);
        assert_eq!(r.to_csv().lines().next(), Some("metric,100%"));
        assert!(r.to_text().contains("M1"));
    }

    #[test]
    fn columns_follow_fractions() {
        let p = parse_program("call $A.m()").unwrap();
        let items = vec![EvalItem { label: Label::default(), program: p }];
        let r = evaluate("t", &items, &[1.0, 0.5, 0.25], 1, &db(), |_, _| vec![]).unwrap();
        assert_eq!(r.values[0], vec![0.0; 3]);
        assert_eq!(r.to_csv().lines().next(), Some("metric,100%,50%,25%"));
    }
}
