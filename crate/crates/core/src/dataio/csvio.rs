use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, FeatureSchema, PatientRecord, TreatmentSet};
use crate::error::{Error, Result};

const META_COLUMNS: [&str; 4] = ["patient_id", "study", "treatment", "remission"];

fn header(schema: &FeatureSchema) -> Vec<String> {
    META_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain(schema.names().map(str::to_string))
        .collect()
}

pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    read_csv(File::open(path)?, schema, &TreatmentSet::standard())
}

/// Parses a dataset table. Lines starting with `#` are ignored.
pub fn read_csv<R: Read>(
    reader: R,
    schema: &FeatureSchema,
    treatments: &TreatmentSet,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let expected = header(schema);
    let mut rows = rdr.records();

    let head = match rows.next() {
        Some(r) => r?,
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "empty file".into(),
            })
        }
    };
    if head
        .iter()
        .map(str::trim)
        .ne(expected.iter().map(String::as_str))
    {
        return Err(Error::Parse {
            line: 1,
            msg: format!("header must be `{}`", expected.join(",")),
        });
    }

    let mut records = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let fail = |msg: String| Error::Parse { line, msg };
        if row.len() != expected.len() {
            return Err(fail(format!(
                "expected {} fields, found {}",
                expected.len(),
                row.len()
            )));
        }
        let treatment = treatments
            .index_of(row[2].trim())
            .ok_or_else(|| fail(format!("unknown treatment `{}`", &row[2])))?;
        let remission = match row[3].trim() {
            "0" => false,
            "1" => true,
            other => return Err(fail(format!("remission must be 0 or 1, got `{other}`"))),
        };
        let mut features = Vec::with_capacity(schema.len());
        for (desc, raw) in schema.features().iter().zip(row.iter().skip(4)) {
            let raw = raw.trim();
            if raw.is_empty() {
                features.push(None);
                continue;
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| fail(format!("{}: `{raw}` is not a number", desc.name)))?;
            if !desc.accepts(v) {
                return Err(fail(format!(
                    "{} = {v} outside valid range {:?}",
                    desc.name, desc.range
                )));
            }
            features.push(Some(v));
        }
        records.push(PatientRecord {
            patient_id: row[0].trim().to_string(),
            study: row[1].trim().to_string(),
            treatment,
            remission,
            features,
        });
    }
    Ok(Dataset {
        schema: schema.clone(),
        treatments: treatments.clone(),
        records,
    })
}

pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(&ds.schema))?;
    for r in &ds.records {
        let mut row = vec![
            r.patient_id.clone(),
            r.study.clone(),
            ds.treatments.name(r.treatment).to_string(),
            if r.remission { "1" } else { "0" }.to_string(),
        ];
        row.extend(
            r.features
                .iter()
                .map(|v| v.map(|x| x.to_string()).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_csv(ds, File::create(path)?)
}

/// `patient_id,cluster` table.
pub fn write_labels<W: Write>(ids: &[String], labels: &[usize], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["patient_id", "cluster"])?;
    for (id, c) in ids.iter().zip(labels) {
        w.write_record([id.as_str(), &c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_labels<R: Read>(reader: R) -> Result<Vec<(String, usize)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: "expected `patient_id,cluster`".into(),
            });
        }
        let c = row[1].trim().parse().map_err(|_| Error::Parse {
            line,
            msg: format!("bad cluster id `{}`", &row[1]),
        })?;
        out.push((row[0].trim().to_string(), c));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> String {
        let schema = FeatureSchema::standard();
        let mut s = header(&schema).join(",");
        s.push('\n');
        s.push_str("p1,STARD,citalopram,1,2.5,1,0.5,1,0,0,1,2,2,1,1,1,0,0,1,0,45,1,0\n");
        s.push_str("p2,SUND,mirtazapine,0,1.25,,0,0,0,0,0,1,1,0,0,0,1,0,0,1,30,0,1\n");
        s.push_str("p3,COMED,bupropion+escitalopram,0,3,3,3,3,3,3,3,3,3,3,1,1,1,1,1,1,93,1,3\n");
        s
    }

    #[test]
    fn reads_fixture_and_round_trips() {
        let schema = FeatureSchema::standard();
        let ds = read_csv(fixture().as_bytes(), &schema, &TreatmentSet::standard()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records[1].features[1], None);
        assert_eq!(ds.records[2].treatment, 7);
        assert!(ds.records[0].remission);

        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), fixture());
        let again = read_csv(buf.as_slice(), &schema, &TreatmentSet::standard()).unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn remission_two_names_line() {
        let bad = fixture().replacen("p2,SUND,mirtazapine,0", "p2,SUND,mirtazapine,2", 1);
        let err = read_csv(
            bad.as_bytes(),
            &FeatureSchema::standard(),
            &TreatmentSet::standard(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn unknown_treatment_and_range() {
        let schema = FeatureSchema::standard();
        let ts = TreatmentSet::standard();
        let bad = fixture().replacen("citalopram", "placebo", 1);
        assert!(matches!(
            read_csv(bad.as_bytes(), &schema, &ts),
            Err(Error::Parse { line: 2, .. })
        ));
        let bad = fixture().replacen(",93,", ",94,", 1);
        assert!(matches!(
            read_csv(bad.as_bytes(), &schema, &ts),
            Err(Error::Parse { line: 4, .. })
        ));
        let bad = fixture().replacen(",45,1,0\n", ",45,1\n", 1);
        assert!(matches!(
            read_csv(bad.as_bytes(), &schema, &ts),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn header_mismatch() {
        let bad = fixture().replacen("fatigue", "tiredness", 1);
        assert!(matches!(
            read_csv(
                bad.as_bytes(),
                &FeatureSchema::standard(),
                &TreatmentSet::standard()
            ),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn labels_round_trip() {
        let ids = vec!["a".to_string(), "b".to_string()];
        let mut buf = Vec::new();
        write_labels(&ids, &[2, 0], &mut buf).unwrap();
        assert_eq!(
            read_labels(buf.as_slice()).unwrap(),
            vec![("a".into(), 2), ("b".into(), 0)]
        );
    }
}
