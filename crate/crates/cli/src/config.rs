//! System configuration files: raw matrices or a named model, as JSON.
//!
//! Complex numbers are `[re, im]` pairs. Without a `model` key the file is
//! read as raw matrices `h`, `d` and a state `psi`.

use anyhow::{anyhow, bail, Context, Result};
use arrival_core::absorption::AbsorptiveSystem;
use arrival_core::linops::{c64, ComplexMatrix, ComplexVector, StateVector};
use arrival_core::models::{constant_absorber, ion_effective, two_level, IonScheme};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub type Pair = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixModel {
    pub h: Vec<Vec<Pair>>,
    pub d: Vec<Vec<Pair>>,
    pub psi: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoLevelModel {
    pub omega: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantModel {
    pub h: Vec<Vec<Pair>>,
    pub alpha: f64,
    pub psi: Vec<Pair>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IonModel {
    pub omega12: f64,
    pub omega23: f64,
    pub gamma34: f64,
    #[serde(default = "one")]
    pub q: f64,
}

impl IonModel {
    pub fn scheme(&self) -> IonScheme {
        IonScheme {
            omega12: self.omega12,
            omega23: self.omega23,
            gamma34: self.gamma34,
            q: self.q,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Model {
    Matrix(MatrixModel),
    TwoLevel(TwoLevelModel),
    Constant(ConstantModel),
    Ion(IonModel),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemConfig {
    #[serde(flatten)]
    pub model: Model,
    pub hbar: f64,
}

const MODELS: &str = "matrix, two_level, constant, ion";

fn field<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let path = match (prefix.is_empty(), path.as_str()) {
            (true, _) => path,
            (false, ".") => prefix.to_string(),
            (false, _) => format!("{prefix}.{path}"),
        };
        anyhow!("field `{path}`: {}", e.inner())
    })
}

impl SystemConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| anyhow!("invalid JSON: {e}"))?;
        let Value::Object(mut map) = value else {
            bail!("configuration must be a JSON object");
        };
        let hbar = match map.remove("hbar") {
            Some(v) => field::<f64>(v, "hbar")?,
            None => 1.0,
        };
        let name = match map.remove("model") {
            Some(Value::String(s)) => s,
            Some(other) => bail!("field `model`: expected one of {MODELS}, got {other}"),
            None => "matrix".to_string(),
        };
        let rest = Value::Object(map);
        let model = match name.as_str() {
            "matrix" => Model::Matrix(field(rest, "")?),
            "two_level" => Model::TwoLevel(field(rest, "")?),
            "constant" => Model::Constant(field(rest, "")?),
            "ion" => Model::Ion(field(rest, "")?),
            other => bail!("field `model`: unknown model `{other}`, expected one of {MODELS}"),
        };
        Ok(Self { model, hbar })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Canonical JSON, the input of [`Self::digest`].
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        digest_value(&self.to_value())
    }

    pub fn build(&self) -> Result<(AbsorptiveSystem, StateVector)> {
        let hbar = self.hbar;
        Ok(match &self.model {
            Model::Matrix(m) => {
                let h = matrix(&m.h, "h")?;
                let d = matrix(&m.d, "d")?;
                let psi = state(&m.psi, h.nrows())?;
                (AbsorptiveSystem::new(h, d, hbar)?, psi)
            }
            Model::TwoLevel(m) => two_level(m.omega, m.gamma, hbar)?,
            Model::Constant(m) => {
                let h = matrix(&m.h, "h")?;
                let psi = state(&m.psi, h.nrows())?;
                (constant_absorber(h, m.alpha, hbar)?, psi)
            }
            Model::Ion(m) => ion_effective(&m.scheme(), hbar)?,
        })
    }
}

pub fn digest_value(value: &Value) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    format!("sha256:{:x}", Sha256::digest(bytes))
}

fn matrix(rows: &[Vec<Pair>], name: &str) -> Result<ComplexMatrix> {
    let n = rows.len();
    if n == 0 {
        bail!("field `{name}`: matrix is empty");
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            bail!("field `{name}[{i}]`: row has {} entries, expected {n}", row.len());
        }
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| c64(rows[i][j][0], rows[i][j][1])))
}

fn state(pairs: &[Pair], dim: usize) -> Result<StateVector> {
    if pairs.len() != dim {
        bail!("field `psi`: has {} entries, expected {dim}", pairs.len());
    }
    let v = ComplexVector::from_iterator(dim, pairs.iter().map(|p| c64(p[0], p[1])));
    StateVector::new(v).context("field `psi`")
}
