//! Feature-table CSV and quantizer JSON persistence.
//!
//! Table layout: `subject,gesture,repetition,synthetic,f1,...,fd`, one row per
//! feature vector, values written so they parse back exactly.

use std::fs;
use std::path::Path;

use crate::dataset::format_real;
use crate::features::FeatureVector;
use crate::quantizer::QuantizerModel;
use crate::{Error, Gesture, Result};

const META_COLUMNS: [&str; 4] = ["subject", "gesture", "repetition", "synthetic"];

pub fn write_feature_table(path: &Path, rows: &[FeatureVector<f64>]) -> Result<()> {
    let d = rows.first().map_or(0, |r| r.dimension());
    let mut out = String::new();
    let mut header: Vec<String> = META_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((1..=d).map(|j| format!("f{j}")));
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        if r.dimension() != d {
            return Err(Error::data("feature vectors have mixed dimensions"));
        }
        let mut cells = vec![
            r.subject_id.to_string(),
            r.label.gesture().name().to_string(),
            r.repetition_index.to_string(),
            r.synthetic.to_string(),
        ];
        cells.extend(r.values.iter().map(|&v| format_real(v)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_feature_table(path: &Path) -> Result<Vec<FeatureVector<f64>>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    })?;
    let header = reader
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .clone();
    if header.len() < META_COLUMNS.len() + 1
        || header.iter().take(4).ne(META_COLUMNS.iter().copied())
    {
        return Err(Error::format(
            path,
            "header must start with subject,gesture,repetition,synthetic followed by features",
        ));
    }
    let d = header.len() - META_COLUMNS.len();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        let row = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            row,
            message,
        };
        let subject_id = record[0]
            .parse()
            .map_err(|_| parse_err(format!("bad subject {:?}", &record[0])))?;
        let gesture: Gesture = record[1]
            .parse()
            .map_err(|_| parse_err(format!("bad gesture {:?}", &record[1])))?;
        let repetition_index = record[2]
            .parse()
            .map_err(|_| parse_err(format!("bad repetition {:?}", &record[2])))?;
        let synthetic = record[3]
            .parse()
            .map_err(|_| parse_err(format!("bad synthetic flag {:?}", &record[3])))?;
        let values = (0..d)
            .map(|j| {
                let cell = &record[4 + j];
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("bad value {cell:?} in column f{}", j + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(FeatureVector {
            values,
            label: gesture.into(),
            subject_id,
            repetition_index,
            synthetic,
        });
    }
    Ok(rows)
}

pub fn write_quantizer(path: &Path, model: &QuantizerModel<f64>) -> Result<()> {
    write_json(path, model)
}

pub fn read_quantizer(path: &Path) -> Result<QuantizerModel<f64>> {
    let q: QuantizerModel<f64> = read_json(path)?;
    if q.levels < 2 || q.min.len() != q.max.len() || q.min.iter().zip(&q.max).any(|(a, b)| a > b)
    {
        return Err(Error::format(path, "inconsistent quantizer model"));
    }
    Ok(q)
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn table_round_trip(values in proptest::collection::vec(-1e6f64..1e6, 1..12), subject in 0u32..9, g in 0usize..10, rep in 0u32..40, synthetic: bool) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("t.csv");
            let row = FeatureVector { values: values.clone(), label: Gesture::from_index(g).unwrap().into(), subject_id: subject, repetition_index: rep, synthetic };
            write_feature_table(&p, std::slice::from_ref(&row)).unwrap();
            let back = read_feature_table(&p).unwrap();
            prop_assert_eq!(back.len(), 1);
            prop_assert_eq!(back[0].key(), row.key());
            prop_assert_eq!(back[0].synthetic, synthetic);
            prop_assert_eq!(&back[0].values, &values);
            // rewriting the parsed table reproduces the file byte for byte
            let p2 = dir.path().join("t2.csv");
            write_feature_table(&p2, &back).unwrap();
            prop_assert_eq!(fs::read(&p).unwrap(), fs::read(&p2).unwrap());
        }

        #[test]
        fn quantizer_json_is_exact(lo in proptest::collection::vec(-1e3f64..0.0, 1..8), span in 1e-9f64..1e3) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("q.json");
            let q = QuantizerModel { levels: 20, max: lo.iter().map(|v| v + span).collect(), min: lo };
            write_quantizer(&p, &q).unwrap();
            prop_assert_eq!(read_quantizer(&p).unwrap(), q);
        }
    }

    #[test]
    fn header_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let row = FeatureVector {
            values: vec![1.0; 3],
            label: Gesture::Key.into(),
            subject_id: 1,
            repetition_index: 2,
            synthetic: false,
        };
        write_feature_table(&p, &[row]).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("subject,gesture,repetition,synthetic,f1,f2,f3\n1,Key,2,false,"));
    }

    #[test]
    fn quantizer_json_layout() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.json");
        let q = QuantizerModel {
            levels: 20,
            min: vec![0.0, -1.0],
            max: vec![10.0, 1.0],
        };
        write_quantizer(&p, &q).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(v["levels"], 20);
        assert_eq!(v["min"][1], -1.0);
        assert_eq!(read_quantizer(&p).unwrap(), q);
    }
}
