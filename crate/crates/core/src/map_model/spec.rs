use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    AffineBranch, AffinePieces, Liverani2d, MapDynamics, PiecewiseMap, SqrtBranches, Tent,
    UniformBranches,
};
use crate::error::{Error, Result};

/// Named constructors understood by [`MapSpec::build`].
pub const REGISTRY: &[(&str, &str)] = &[
    ("ternary", "x -> 3x mod 1 (d=1)"),
    ("doubling", "x -> 2x mod 1 (d=1)"),
    ("tent", "x -> 1 - |1 - 2x| (d=1)"),
    ("sqrt1d", "x -> a*sqrt(x) mod 1 (d=1), param a (default 7)"),
    (
        "liverani2d",
        "(x,y) -> (a*sqrt(x), b*y + sqrt(x)) mod 1 (d=2), params a, b > 6 (default 7)",
    ),
    ("identity", "identity on the unit cube, param d (default 1)"),
    ("two-halves", "scaled ternary map on each half of [0,1] (d=1)"),
    ("two-cycle", "halves swapped, scaled ternary within each (d=1)"),
    ("affine-pieces", "user-supplied affine pieces on disjoint boxes"),
];

const DEFAULT_H_CUT: f64 = 1e-6;

/// JSON description of a map: a registry name with parameters, or explicit
/// affine pieces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pieces: Vec<AffinePieceSpec>,
    /// Bypass parameter-range checks.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub force: bool,
    /// Affine pieces whose box misses `[h_cut, 1]^d` are dropped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_cut: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePieceSpec {
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl AffinePieceSpec {
    pub fn new(bounds: Vec<[f64; 2]>, matrix: Vec<Vec<f64>>, offset: Vec<f64>) -> Self {
        AffinePieceSpec {
            bounds,
            matrix,
            offset,
        }
    }

    fn build(&self) -> Result<AffineBranch> {
        let d = self.bounds.len();
        if self.matrix.len() != d || self.matrix.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidMap(format!("matrix must be {d}×{d}")));
        }
        let flat: Vec<f64> = self.matrix.iter().flatten().copied().collect();
        AffineBranch::new(
            self.bounds.clone(),
            DMatrix::from_row_slice(d, d, &flat),
            DVector::from_vec(self.offset.clone()),
        )
    }
}

/// 1-d affine piece `x ↦ slope·x + offset` on `(lo, hi)`.
fn piece_1d(lo: f64, hi: f64, slope: f64, offset: f64) -> AffinePieceSpec {
    AffinePieceSpec::new(vec![[lo, hi]], vec![vec![slope]], vec![offset])
}

impl MapSpec {
    pub fn named(name: &str) -> Self {
        MapSpec {
            name: name.to_string(),
            params: BTreeMap::new(),
            pieces: Vec::new(),
            force: false,
            h_cut: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn affine(pieces: Vec<AffinePieceSpec>) -> Self {
        MapSpec {
            pieces,
            ..MapSpec::named("affine-pieces")
        }
    }

    pub fn liverani2d(a: f64, b: f64) -> Self {
        MapSpec::named("liverani2d")
            .with_param("a", a)
            .with_param("b", b)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidMap(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("map spec serializes")
    }

    fn param(&self, key: &str, default: f64) -> f64 {
        self.params.get(key).copied().unwrap_or(default)
    }

    fn allow_params(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(Error::InvalidMap(format!(
                "map `{}` has no parameter `{k}`",
                self.name
            ))),
            None => Ok(()),
        }
    }

    /// Constructs the map, validating parameters.
    pub fn build(&self) -> Result<PiecewiseMap> {
        let mut params = BTreeMap::new();
        let dynamics: Arc<dyn MapDynamics> = match self.name.as_str() {
            "ternary" => {
                self.allow_params(&[])?;
                Arc::new(UniformBranches::new(3))
            }
            "doubling" => {
                self.allow_params(&[])?;
                Arc::new(UniformBranches::new(2))
            }
            "tent" => {
                self.allow_params(&[])?;
                Arc::new(Tent::default())
            }
            "sqrt1d" => {
                self.allow_params(&["a"])?;
                let a = self.param("a", 7.0);
                if !(a > 2.0 && a.is_finite()) {
                    return Err(Error::InvalidParameter {
                        name: "a".into(),
                        value: a,
                        reason: "sqrt1d needs a > 2 to be expanding".into(),
                    });
                }
                params.insert("a".into(), a);
                Arc::new(SqrtBranches::new(a))
            }
            "liverani2d" => {
                self.allow_params(&["a", "b"])?;
                let a = self.param("a", 7.0);
                let b = self.param("b", 7.0);
                for (name, value) in [("a", a), ("b", b)] {
                    if !value.is_finite() || value <= 1.0 {
                        return Err(Error::InvalidParameter {
                            name: name.into(),
                            value,
                            reason: "must be a finite number above 1".into(),
                        });
                    }
                    if value <= 6.0 && !self.force {
                        return Err(Error::InvalidParameter {
                            name: name.into(),
                            value,
                            reason: "the expansion hypotheses need a, b > 6 (set force to override)"
                                .into(),
                        });
                    }
                }
                params.insert("a".into(), a);
                params.insert("b".into(), b);
                Arc::new(Liverani2d::new(a, b))
            }
            "identity" => {
                self.allow_params(&["d"])?;
                let d = self.param("d", 1.0);
                if d < 1.0 || d.fract() != 0.0 || d > 6.0 {
                    return Err(Error::InvalidParameter {
                        name: "d".into(),
                        value: d,
                        reason: "dimension must be an integer in 1..=6".into(),
                    });
                }
                params.insert("d".into(), d);
                let d = d as usize;
                let identity: Vec<Vec<f64>> = (0..d)
                    .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect();
                affine_dynamics(
                    &[AffinePieceSpec::new(
                        vec![[0.0, 1.0]; d],
                        identity,
                        vec![0.0; d],
                    )],
                    None,
                )?
            }
            "two-halves" => {
                self.allow_params(&[])?;
                let mut pieces = Vec::new();
                for k in 0..3 {
                    let kf = k as f64;
                    pieces.push(piece_1d(kf / 6.0, (kf + 1.0) / 6.0, 3.0, -kf / 2.0));
                }
                for k in 0..3 {
                    let kf = k as f64;
                    let lo = 0.5 + kf / 6.0;
                    pieces.push(piece_1d(lo, lo + 1.0 / 6.0, 3.0, -1.0 - kf / 2.0));
                }
                affine_dynamics(&pieces, None)?
            }
            "two-cycle" => {
                self.allow_params(&[])?;
                let mut pieces = Vec::new();
                for k in 0..3 {
                    let kf = k as f64;
                    pieces.push(piece_1d(kf / 6.0, (kf + 1.0) / 6.0, 3.0, 0.5 - kf / 2.0));
                }
                for k in 0..3 {
                    let kf = k as f64;
                    let lo = 0.5 + kf / 6.0;
                    pieces.push(piece_1d(lo, lo + 1.0 / 6.0, 3.0, -1.5 - kf / 2.0));
                }
                affine_dynamics(&pieces, None)?
            }
            "affine-pieces" => {
                self.allow_params(&[])?;
                affine_dynamics(&self.pieces, Some(self.h_cut.unwrap_or(DEFAULT_H_CUT)))?
            }
            other => {
                return Err(Error::UnknownMap {
                    name: other.to_string(),
                    available: REGISTRY
                        .iter()
                        .map(|(n, _)| *n)
                        .collect::<Vec<_>>()
                        .join(", "),
                })
            }
        };
        Ok(PiecewiseMap::new(self.name.clone(), params, dynamics))
    }
}

fn affine_dynamics(
    pieces: &[AffinePieceSpec],
    h_cut: Option<f64>,
) -> Result<Arc<dyn MapDynamics>> {
    let kept = pieces
        .iter()
        .filter(|p| match h_cut {
            Some(cut) => p.bounds.iter().all(|&[_, hi]| hi > cut),
            None => true,
        })
        .map(AffinePieceSpec::build)
        .collect::<Result<Vec<_>>>()?;
    Ok(Arc::new(AffinePieces::new(kept)?))
}
