//! The resolved run configuration: flags first, then a JSON config file
//! laid over them key by key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use acim_core::{AssemblyConfig, MapSpec, SamplingMode};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Registry name or path to a JSON map description.
    pub map: String,
    pub params: BTreeMap<String, f64>,
    pub grid_n: usize,
    pub samples: usize,
    pub sampling: SamplingMode,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub out_dir: PathBuf,

    pub top: usize,
    pub f: String,
    pub g: String,
    pub n_max: usize,
    /// Defaults to the measured window sum of the expansion check.
    pub sigma: Option<f64>,
    pub trials: usize,
    pub eps: Vec<f64>,
    pub nu: Option<f64>,
    pub delta: f64,
    pub hypotheses: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub density: Option<PathBuf>,
    pub matrix_out: Option<PathBuf>,
    pub coo: bool,
    pub svg: bool,
    pub check_samples: usize,
    pub lines: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let assembly = AssemblyConfig::default();
        RunConfig {
            map: "ternary".into(),
            params: BTreeMap::new(),
            grid_n: 243,
            samples: assembly.samples_per_cell,
            sampling: assembly.mode,
            seed: 0,
            tol: 1e-10,
            max_iter: 10_000,
            out_dir: PathBuf::from("."),
            top: 6,
            f: "cos1".into(),
            g: "cos1".into(),
            n_max: 20,
            sigma: None,
            trials: 100,
            eps: vec![0.02, 0.04, 0.08],
            nu: None,
            delta: 0.05,
            hypotheses: None,
            report: None,
            density: None,
            matrix_out: None,
            coo: false,
            svg: false,
            check_samples: 1 << 18,
            lines: 64,
        }
    }
}

impl RunConfig {
    /// Lays the keys of a JSON object over this config. Unknown keys and
    /// ill-typed values are configuration errors.
    pub fn overlay(self, patch: &Value) -> Result<Self, CliError> {
        let Value::Object(patch) = patch else {
            return Err(CliError::Config("config file must hold a JSON object".into()));
        };
        let mut base = serde_json::to_value(&self).expect("config serializes");
        let obj = base.as_object_mut().expect("config is an object");
        for (k, v) in patch {
            if !obj.contains_key(k) {
                return Err(CliError::Config(format!("unknown config key `{k}`")));
            }
            obj.insert(k.clone(), v.clone());
        }
        serde_json::from_value(base).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn overlay_file(self, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let patch: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        self.overlay(&patch)
    }

    /// The map description: read from a file if `map` names one, otherwise
    /// a registry entry with `params`.
    pub fn map_spec(&self) -> Result<MapSpec, CliError> {
        let path = Path::new(&self.map);
        if path.is_file() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let mut spec = MapSpec::from_json(&text)?;
            spec.params.extend(self.params.iter().map(|(k, v)| (k.clone(), *v)));
            return Ok(spec);
        }
        let mut spec = MapSpec::named(&self.map);
        spec.params = self.params.clone();
        Ok(spec)
    }

    pub fn assembly(&self) -> AssemblyConfig {
        AssemblyConfig {
            samples_per_cell: self.samples,
            seed: self.seed,
            mode: self.sampling,
        }
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// SHA-256 of the canonical JSON form of a map description.
pub fn map_hash(spec: &MapSpec) -> String {
    Sha256::digest(spec.to_json().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `key=value` pairs for `--param`.
pub fn parse_param(text: &str) -> Result<(String, f64), String> {
    let (k, v) = text
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{text}`"))?;
    let v: f64 = v.trim().parse().map_err(|e| format!("`{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}
