//! File formats.
//!
//! * Cohorts: CSV with a `# format_version: 1` comment line followed by the
//!   header `id,subject_id,true_score`. LF line endings; scores use the
//!   shortest representation that round-trips (`19`, not `19.0`).
//! * Comparison logs: JSON lines, `{"winner": "<id>", "loser": "<id>"}`.
//! * Labeled pairs: JSON lines, `{"first": id, "second": id, "label": 0|1}`.
//!
//! Blank lines are ignored in JSON-lines input.

use std::io::{BufRead, Read, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Cohort, ComparisonRecord, Item};

pub const COHORT_FORMAT_VERSION: u32 = 1;
pub const COHORT_HEADER: [&str; 3] = ["id", "subject_id", "true_score"];

pub fn read_cohort_csv<R: Read>(reader: R) -> Result<Cohort> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != COHORT_HEADER {
        return Err(Error::Parse {
            line: header.position().map_or(1, |p| p.line()),
            message: format!(
                "expected header `{}`, found `{}`",
                COHORT_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut items = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or_default();
        let score: f64 = field(2).trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid true_score `{}`", field(2)),
        })?;
        if field(0).is_empty() {
            return Err(Error::Parse {
                line,
                message: "empty id".into(),
            });
        }
        items.push(Item::new(field(0), field(1), score));
    }
    Cohort::new(items)
}

pub fn write_cohort_csv<W: Write>(mut writer: W, cohort: &Cohort) -> Result<()> {
    writeln!(writer, "# format_version: {COHORT_FORMAT_VERSION}")?;
    let mut wtr = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(COHORT_HEADER)?;
    for item in cohort.items() {
        let score = item.true_score.to_string();
        wtr.write_record([item.id.as_str(), item.subject_id.as_str(), score.as_str()])?;
    }
    wtr.flush()?;
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize, W: Write>(mut writer: W, rows: &[T]) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut writer, row)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_comparisons_jsonl<R: BufRead>(reader: R) -> Result<Vec<ComparisonRecord>> {
    read_jsonl(reader)
}

pub fn write_comparisons_jsonl<W: Write>(writer: W, records: &[ComparisonRecord]) -> Result<()> {
    write_jsonl(writer, records)
}

pub fn read_pairs_jsonl<R: BufRead>(reader: R) -> Result<Vec<crate::pairs::LabeledPair>> {
    read_jsonl(reader)
}

pub fn write_pairs_jsonl<W: Write>(writer: W, pairs: &[crate::pairs::LabeledPair]) -> Result<()> {
    write_jsonl(writer, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SAMPLE: &str = "# format_version: 1\nid,subject_id,true_score\na,s1,19\nb,s1,40.5\nc,s2,62\n";

    #[test]
    fn cohort_round_trip_is_byte_identical() {
        let cohort = read_cohort_csv(SAMPLE.as_bytes()).unwrap();
        assert_eq!(cohort.len(), 3);
        assert_eq!(cohort.score("b"), Some(40.5));
        let mut out = Vec::new();
        write_cohort_csv(&mut out, &cohort).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), SAMPLE);
    }

    #[test]
    fn cohort_errors_carry_line_numbers() {
        let bad_header = "id,subject,score\na,s,1\n";
        assert!(matches!(
            read_cohort_csv(bad_header.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let bad_score = "id,subject_id,true_score\na,s,1\nb,s,abc\n";
        match read_cohort_csv(bad_score.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let dup = "id,subject_id,true_score\na,s,1\na,s,2\n";
        assert!(matches!(read_cohort_csv(dup.as_bytes()), Err(Error::DuplicateId(_))));
        let nan = "id,subject_id,true_score\na,s,NaN\n";
        assert!(matches!(
            read_cohort_csv(nan.as_bytes()),
            Err(Error::NonFiniteScore { .. })
        ));
        let empty = "id,subject_id,true_score\n";
        assert!(matches!(read_cohort_csv(empty.as_bytes()), Err(Error::EmptyCohort)));
    }

    #[test]
    fn comparisons_jsonl() {
        let text = "{\"winner\": \"a\", \"loser\": \"b\"}\n\n{\"winner\":\"b\",\"loser\":\"c\"}\n";
        let records = read_comparisons_jsonl(text.as_bytes()).unwrap();
        assert_eq!(
            records,
            vec![ComparisonRecord::new("a", "b"), ComparisonRecord::new("b", "c")]
        );
        let mut out = Vec::new();
        write_comparisons_jsonl(&mut out, &records).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "{\"winner\":\"a\",\"loser\":\"b\"}\n{\"winner\":\"b\",\"loser\":\"c\"}\n"
        );
        let broken = "{\"winner\":\"a\",\"loser\":\"b\"}\n{\"winner\":\"a\"}\n";
        assert!(matches!(
            read_comparisons_jsonl(broken.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn canonical_cohort_csv_is_a_fixed_point(
            scores in prop::collection::vec(-1.0e6f64..1.0e6, 1..30),
            quoted in any::<bool>(),
        ) {
            let items: Vec<Item> = scores
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let id = if quoted { format!("id,{i}") } else { format!("id{i}") };
                    Item::new(id, format!("subj \"{}\"", i % 4), *s)
                })
                .collect();
            let cohort = Cohort::new(items).unwrap();
            let mut first = Vec::new();
            write_cohort_csv(&mut first, &cohort).unwrap();
            let parsed = read_cohort_csv(first.as_slice()).unwrap();
            prop_assert_eq!(&parsed, &cohort);
            let mut second = Vec::new();
            write_cohort_csv(&mut second, &parsed).unwrap();
            prop_assert_eq!(first, second);
        }
    }
}
