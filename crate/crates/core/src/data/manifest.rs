use std::path::Path;

use super::{Dataset, Sample, Taxonomy};
use crate::error::{Error, Result};

/// Reads a manifest CSV.
///
/// The header is `id,make,model` followed either by `feature_path` (one
/// flat little-endian `f64` vector file per row, resolved relative to the
/// manifest's directory) or by inline feature columns `f0..f{d-1}`. An
/// optional `year` column makes `(model, year)` the fine label.
pub fn load_manifest(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);

    let missing: Vec<String> = ["id", "make", "model"]
        .into_iter()
        .filter(|n| col(n).is_none())
        .map(String::from)
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema { missing });
    }
    let (id_col, make_col, model_col) = (col("id").unwrap(), col("make").unwrap(), col("model").unwrap());
    let year_col = col("year");
    let path_col = col("feature_path");
    let inline_cols: Vec<usize> = (0..)
        .map_while(|i| col(&format!("f{i}")))
        .collect();
    if path_col.is_none() && inline_cols.is_empty() {
        return Err(Error::Schema {
            missing: vec!["feature_path | f0..".into()],
        });
    }

    let records: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
    let fine_label = |r: &csv::StringRecord| match year_col {
        Some(y) if !r[y].is_empty() => format!("{} ({})", &r[model_col], &r[y]),
        _ => r[model_col].to_string(),
    };
    let fine: Vec<String> = records.iter().map(fine_label).collect();
    let taxonomy = Taxonomy::from_pairs(fine.iter().zip(&records).map(|(m, r)| (m.as_str(), &r[make_col])))?;

    let mut samples = Vec::with_capacity(records.len());
    for (r, model) in records.iter().zip(&fine) {
        let features = match path_col {
            Some(pc) => read_vector_file(&base.join(&r[pc]))?,
            None => inline_cols
                .iter()
                .map(|&c| {
                    r[c].parse::<f64>().map_err(|e| {
                        Error::Data(format!("row {}: bad feature {:?}: {e}", &r[id_col], &r[c]))
                    })
                })
                .collect::<Result<_>>()?,
        };
        let model_label = taxonomy.model_index(model).expect("model indexed during induction");
        samples.push(Sample {
            id: r[id_col].to_string(),
            features,
            model_label,
            make_label: taxonomy.parent(model_label),
        });
    }
    Dataset::new(taxonomy, samples)
}

fn read_vector_file(path: &Path) -> Result<Vec<f64>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 8 != 0 {
        return Err(Error::Data(format!(
            "{} is {} bytes, not a whole number of f64 values",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn write_vector_file(path: &Path, values: &[f64]) -> Result<()> {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes the inline-features manifest variant.
pub fn write_manifest_inline(path: &Path, dataset: &Dataset) -> Result<()> {
    let width = dataset.feature_dim().unwrap_or(0);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string(), "make".into(), "model".into()];
    header.extend((0..width).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    let tax = &dataset.taxonomy;
    for s in &dataset.samples {
        let mut row = vec![
            s.id.clone(),
            tax.makes()[s.make_label].clone(),
            tax.models()[s.model_label].clone(),
        ];
        row.extend(s.features.iter().map(|v| format!("{v:?}")));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
