use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const DEFAULT_DIM: usize = 50;

/// Frozen word vectors. Unknown words map to the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    skipped: usize,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        Ok(EmbeddingTable {
            dim,
            vectors: HashMap::new(),
            skipped: 0,
        })
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!("vector of {} for dimension {}", vector.len(), self.dim)));
        }
        self.vectors.insert(word.into(), vector);
        Ok(())
    }

    /// Parses `word v1 ... vdim` lines. Lines with the wrong arity or
    /// unparsable numbers are skipped and counted.
    pub fn parse_glove(reader: impl BufRead, dim: usize) -> Result<Self> {
        let mut table = EmbeddingTable::new(dim)?;
        for line in reader.lines() {
            let line = line.map_err(|e| Error::Parse {
                line: 0,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let word = fields.next().unwrap_or_default();
            let values: std::result::Result<Vec<f64>, _> = fields.map(str::parse::<f64>).collect();
            match values {
                Ok(v) if v.len() == dim && v.iter().all(|x| x.is_finite()) => {
                    table.vectors.insert(word.to_string(), v);
                }
                _ => table.skipped += 1,
            }
        }
        if table.vectors.is_empty() {
            return Err(Error::EmptyInput("no valid embedding lines"));
        }
        if table.skipped > 0 {
            log::warn!("skipped {} malformed embedding lines", table.skipped);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Builds the `max_len x dim` input matrix. Rows past the token count
    /// are zero; an empty sequence yields one zero row with valid length 1.
    pub fn embed_and_pad<S: AsRef<str>>(&self, tokens: &[S], max_len: usize) -> Result<(Tensor, usize)> {
        if max_len == 0 {
            return Err(Error::InvalidArgument("max_len must be at least 1".into()));
        }
        let mut data = vec![0.0; max_len * self.dim];
        for (i, t) in tokens.iter().take(max_len).enumerate() {
            if let Some(v) = self.get(t.as_ref()) {
                data[i * self.dim..(i + 1) * self.dim].copy_from_slice(v);
            }
        }
        let valid = tokens.len().clamp(1, max_len);
        Ok((Tensor::matrix(max_len, self.dim, data)?, valid))
    }
}

pub fn load_glove(path: &Path, dim: usize) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    EmbeddingTable::parse_glove(BufReader::new(file), dim)
}
