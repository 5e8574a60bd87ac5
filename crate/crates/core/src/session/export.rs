use crate::error::{Error, Result};

use super::RoundRecord;

fn fixed(value: Option<f64>) -> String {
    value.map(|v| format!("{v:.6}")).unwrap_or_default()
}

/// Learning-curve CSV: `round,n_labeled,macro_f1,accuracy,f1_<label>...,minority_fraction`,
/// one row per round with six-decimal values. Absent metrics are empty fields.
pub fn export_history(history: &[RoundRecord], labels: &[String]) -> Result<Vec<u8>> {
    if history.is_empty() {
        return Err(Error::Empty("history"));
    }
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["round".to_string(), "n_labeled".into(), "macro_f1".into(), "accuracy".into()];
    header.extend(labels.iter().map(|l| format!("f1_{l}")));
    header.push("minority_fraction".into());
    writer.write_record(&header).map_err(csv_err)?;
    for r in history {
        let mut row = vec![r.round.to_string(), r.n_labeled.to_string(), fixed(r.macro_f1), fixed(r.accuracy)];
        row.extend(labels.iter().map(|l| fixed(r.per_class_f1.get(l).copied())));
        row.push(fixed(r.minority_fraction));
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn record(round: u32, macro_f1: Option<f64>) -> RoundRecord {
        RoundRecord {
            round,
            n_labeled: 160 + 40 * round as usize,
            macro_f1,
            accuracy: macro_f1,
            per_class_f1: BTreeMap::from([("A".to_string(), 0.5), ("B,C".to_string(), 1.0)]),
            confusion: None,
            queried_ids: vec![],
            minority_fraction: Some(0.25),
            wall_time_ms: 3,
        }
    }

    #[test]
    fn one_round_two_lines() {
        let labels = vec!["A".to_string(), "B,C".to_string()];
        let csv = String::from_utf8(export_history(&[record(0, Some(0.8351))], &labels).unwrap()).unwrap();
        assert_eq!(
            csv,
            "round,n_labeled,macro_f1,accuracy,f1_A,\"f1_B,C\",minority_fraction\n\
             0,160,0.835100,0.835100,0.500000,1.000000,0.250000\n"
        );
    }

    #[test]
    fn absent_metrics_are_blank() {
        let csv = String::from_utf8(export_history(&[record(2, None)], &["Z".to_string()]).unwrap()).unwrap();
        assert_eq!(csv.lines().nth(1).unwrap(), "2,240,,,,0.250000");
    }

    #[test]
    fn empty_history_is_error() {
        assert!(export_history(&[], &[]).is_err());
    }
}
