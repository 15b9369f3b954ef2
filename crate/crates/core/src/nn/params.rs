use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::real::Real;
use super::tape::{Shape, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::fnwm;
use crate::matrix::Matrix;

/// Initial values for a new parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Ones,
    /// Uniform in ±sqrt(6 / (rows + cols)).
    Xavier,
}

/// Named weight matrices in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor<f32>>,
    index: HashMap<String, usize>,
}

/// Tape handles for every parameter of a store.
#[derive(Debug, Clone)]
pub struct ParamVars {
    vars: HashMap<String, Var>,
    order: Vec<Var>,
}

impl ParamVars {
    /// Pairs `names` with already-placed tape handles.
    pub fn from_parts(names: &[String], vars: &[Var]) -> Result<Self> {
        if names.len() != vars.len() {
            return Err(Error::Dimension(format!("{} names for {} vars", names.len(), vars.len())));
        }
        Ok(Self {
            vars: names.iter().cloned().zip(vars.iter().copied()).collect(),
            order: vars.to_vec(),
        })
    }

    pub fn get(&self, name: &str) -> Result<Var> {
        self.vars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("no parameter named `{name}`")))
    }

    pub fn try_get(&self, name: &str) -> Option<Var> {
        self.vars.get(name).copied()
    }

    /// Handles in store order.
    pub fn all(&self) -> &[Var] {
        &self.order
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct IndexEntry {
    offset: u64,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointIndex {
    params: BTreeMap<String, IndexEntry>,
    #[serde(default)]
    config: serde_json::Value,
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Total scalar count.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.values.len()).sum()
    }

    pub fn insert(&mut self, name: &str, t: Tensor<f32>) -> Result<()> {
        if self.index.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter `{name}`")));
        }
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.tensors.push(t);
        Ok(())
    }

    pub fn add(&mut self, name: &str, rows: usize, cols: usize, init: Init, rng: &mut ChaCha8Rng) -> Result<()> {
        let shape = Shape::matrix(rows, cols);
        let values = match init {
            Init::Zeros => vec![0.0; shape.len()],
            Init::Ones => vec![1.0; shape.len()],
            Init::Xavier => {
                let a = (6.0 / (rows + cols) as f64).sqrt();
                (0..shape.len()).map(|_| rng.random_range(-a..a) as f32).collect()
            }
        };
        self.insert(name, Tensor { shape, values })
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<f32>> {
        self.index
            .get(name)
            .map(|i| &self.tensors[*i])
            .ok_or_else(|| Error::Config(format!("no parameter named `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<f32>> {
        match self.index.get(name) {
            Some(i) => Ok(&mut self.tensors[*i]),
            None => Err(Error::Config(format!("no parameter named `{name}`"))),
        }
    }

    pub fn tensors(&self) -> &[Tensor<f32>] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor<f32>] {
        &mut self.tensors
    }

    /// Places every parameter on `tape` as a trainable leaf.
    pub fn load_into<T: Real>(&self, tape: &mut Tape<T>) -> ParamVars {
        let mut vars = HashMap::with_capacity(self.len());
        let mut order = Vec::with_capacity(self.len());
        for (name, t) in self.names.iter().zip(&self.tensors) {
            let cast = Tensor {
                shape: t.shape,
                values: t.values.iter().map(|v| T::from_f64(*v as f64)).collect(),
            };
            let v = tape.param(cast);
            vars.insert(name.clone(), v);
            order.push(v);
        }
        ParamVars { vars, order }
    }

    /// Companion index path of a checkpoint.
    pub fn index_path(path: &Path) -> PathBuf {
        let mut s = path.as_os_str().to_owned();
        s.push(".index.json");
        PathBuf::from(s)
    }

    /// Writes concatenated FNWM blobs to `path` and the offset index, with
    /// `config` embedded, to `<path>.index.json`.
    pub fn save(&self, path: &Path, config: &serde_json::Value) -> Result<()> {
        let mut blob = Vec::new();
        let mut params = BTreeMap::new();
        for (name, t) in self.names.iter().zip(&self.tensors) {
            let rows = t.shape.batch * t.shape.rows;
            params.insert(
                name.clone(),
                IndexEntry {
                    offset: blob.len() as u64,
                    rows,
                    cols: t.shape.cols,
                },
            );
            fnwm::encode_into(&Matrix::from_vec(rows, t.shape.cols, t.values.clone())?, &mut blob);
        }
        fs::write(path, &blob).map_err(|e| Error::io(path, e))?;
        let index = CheckpointIndex {
            params,
            config: config.clone(),
        };
        let ipath = Self::index_path(path);
        let mut text = serde_json::to_string_pretty(&index)?;
        text.push('\n');
        fs::write(&ipath, text).map_err(|e| Error::io(&ipath, e))
    }

    /// Reads a checkpoint written by [`ParamStore::save`]; parameters come
    /// back in name order, with the embedded config.
    pub fn load(path: &Path) -> Result<(Self, serde_json::Value)> {
        let ipath = Self::index_path(path);
        let text = fs::read_to_string(&ipath).map_err(|e| Error::io(&ipath, e))?;
        let index: CheckpointIndex = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", ipath.display())))?;
        let blob = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut store = Self::new();
        for (name, entry) in &index.params {
            let at = usize::try_from(entry.offset)
                .ok()
                .filter(|at| *at <= blob.len())
                .ok_or_else(|| Error::Format(format!("`{name}` offset {} past end of checkpoint", entry.offset)))?;
            let (m, _) = fnwm::decode_prefix(&blob[at..])?;
            if (m.rows(), m.cols()) != (entry.rows, entry.cols) {
                return Err(Error::Format(format!(
                    "`{name}` is {}x{} in the checkpoint but {}x{} in the index",
                    m.rows(),
                    m.cols(),
                    entry.rows,
                    entry.cols
                )));
            }
            store.insert(
                name,
                Tensor {
                    shape: Shape::matrix(entry.rows, entry.cols),
                    values: m.into_vec(),
                },
            )?;
        }
        Ok((store, index.config))
    }

    /// Reorders parameters to follow `names`; every name must be present.
    pub fn reorder(&mut self, names: &[String]) -> Result<()> {
        if names.len() != self.len() {
            return Err(Error::Format(format!("expected {} parameters, found {}", names.len(), self.len())));
        }
        let mut out = Self::new();
        for n in names {
            out.insert(n, self.get(n)?.clone())?;
        }
        *self = out;
        Ok(())
    }
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
