use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Make (coarse) → model (fine) hierarchy: every model has exactly one
/// parent make and every make has at least one model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    makes: Vec<String>,
    models: Vec<String>,
    parent: Vec<usize>,
}

impl Taxonomy {
    pub fn new(makes: Vec<String>, models: Vec<String>, parent: Vec<usize>) -> Result<Self> {
        if makes.is_empty() || models.is_empty() {
            return Err(Error::InvalidTaxonomy("taxonomy needs at least one make and one model".into()));
        }
        if parent.len() != models.len() {
            return Err(Error::InvalidTaxonomy(format!(
                "{} models but {} parent entries",
                models.len(),
                parent.len()
            )));
        }
        let mut children = vec![0usize; makes.len()];
        for (m, &p) in parent.iter().enumerate() {
            let slot = children.get_mut(p).ok_or_else(|| {
                Error::InvalidTaxonomy(format!("model {:?} has unknown parent index {p}", models[m]))
            })?;
            *slot += 1;
        }
        if let Some(empty) = children.iter().position(|&c| c == 0) {
            return Err(Error::InvalidTaxonomy(format!("make {:?} has no models", makes[empty])));
        }
        Ok(Self { makes, models, parent })
    }

    /// Induces a taxonomy from `(model, make)` pairs, indexing makes and
    /// models by first appearance. Repeated identical pairs are fine; a
    /// model seen under two different makes is rejected.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut makes: Vec<String> = Vec::new();
        let mut models: Vec<String> = Vec::new();
        let mut parent: Vec<usize> = Vec::new();
        let mut make_idx: HashMap<&str, usize> = HashMap::new();
        let mut model_idx: HashMap<&str, usize> = HashMap::new();
        for (model, make) in pairs {
            let mk = *make_idx.entry(make).or_insert_with(|| {
                makes.push(make.to_string());
                makes.len() - 1
            });
            match model_idx.get(model) {
                Some(&m) if parent[m] != mk => {
                    return Err(Error::Taxonomy {
                        model: model.to_string(),
                        first: makes[parent[m]].clone(),
                        second: make.to_string(),
                    })
                }
                Some(_) => {}
                None => {
                    model_idx.insert(model, models.len());
                    models.push(model.to_string());
                    parent.push(mk);
                }
            }
        }
        Self::new(makes, models, parent)
    }

    pub fn num_makes(&self) -> usize {
        self.makes.len()
    }

    pub fn num_models(&self) -> usize {
        self.models.len()
    }

    pub fn makes(&self) -> &[String] {
        &self.makes
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn parent(&self, model: usize) -> usize {
        self.parent[model]
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn make_index(&self, name: &str) -> Option<usize> {
        self.makes.iter().position(|m| m == name)
    }

    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.models.iter().position(|m| m == name)
    }

    pub fn children(&self, make: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent
            .iter()
            .enumerate()
            .filter(move |(_, &p)| p == make)
            .map(|(m, _)| m)
    }

    /// First eight bytes of SHA-256 over the `model,make` export.
    pub fn hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_csv_string().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    /// Two-column `model,make` CSV, one row per model.
    pub fn to_csv_string(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["model", "make"]).expect("in-memory write");
        for (m, &p) in self.models.iter().zip(&self.parent) {
            w.write_record([m.as_str(), self.makes[p].as_str()]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let headers = reader.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (Some(mi), Some(ki)) = (col("model"), col("make")) else {
            let missing = ["model", "make"]
                .into_iter()
                .filter(|n| col(n).is_none())
                .map(String::from)
                .collect();
            return Err(Error::Schema { missing });
        };
        let rows: Vec<csv::StringRecord> = reader.records().collect::<std::result::Result<_, _>>()?;
        Self::from_pairs(rows.iter().map(|r| (r[mi].trim(), r[ki].trim())))
    }
}
