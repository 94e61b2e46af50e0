//! Travel distances and times between locations.
//!
//! Both matrices are fully materialized and indexed by location position.
//! Asymmetric matrices are allowed (one-way streets); nothing in the crate
//! assumes the triangle inequality.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Location;

/// Average urban speed used when an instance does not name one (~50 km/h).
pub const DEFAULT_SPEED_MPS: f64 = 13.89;

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("failed to read matrix file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed matrix file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid entry: {0}")]
    Domain(String),
    #[error("location {0:?} has a non-finite coordinate")]
    NonFinite(String),
    #[error("speed must be positive and finite, got {0}")]
    InvalidSpeed(f64),
    #[error("matrix has no entry for location {0:?}")]
    UnknownId(String),
}

/// Where an instance gets its travel matrix from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceSource {
    Euclidean { speed_mps: f64 },
    Matrix { path: String },
}

impl Default for DistanceSource {
    fn default() -> Self {
        DistanceSource::Euclidean {
            speed_mps: DEFAULT_SPEED_MPS,
        }
    }
}

/// Square meter and second matrices over a list of location ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TravelMatrix {
    ids: Vec<String>,
    n: usize,
    dist: Vec<i64>,
    time: Vec<i64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixFile {
    #[serde(default)]
    ids: Vec<String>,
    dist: Vec<Vec<i64>>,
    time: Vec<Vec<i64>>,
}

impl TravelMatrix {
    /// Builds a matrix from row-major rows, checking every invariant.
    pub fn from_rows(
        ids: Vec<String>,
        dist: Vec<Vec<i64>>,
        time: Vec<Vec<i64>>,
    ) -> Result<Self, DistanceError> {
        let n = dist.len();
        if time.len() != n {
            return Err(DistanceError::Shape(format!(
                "dist has {n} rows but time has {}",
                time.len()
            )));
        }
        let ids = if ids.is_empty() {
            (0..n).map(|i| i.to_string()).collect()
        } else {
            ids
        };
        if ids.len() != n {
            return Err(DistanceError::Shape(format!(
                "{} ids for a {n}x{n} matrix",
                ids.len()
            )));
        }
        let mut flat_dist = Vec::with_capacity(n * n);
        let mut flat_time = Vec::with_capacity(n * n);
        for (name, rows, flat) in [("dist", &dist, &mut flat_dist), ("time", &time, &mut flat_time)] {
            for (i, row) in rows.iter().enumerate() {
                if row.len() != n {
                    return Err(DistanceError::Shape(format!(
                        "{name} row {i} has {} entries, expected {n}",
                        row.len()
                    )));
                }
                for (j, &v) in row.iter().enumerate() {
                    if v < 0 {
                        return Err(DistanceError::Domain(format!("{name}[{i}][{j}] = {v} is negative")));
                    }
                    if i == j && v != 0 {
                        return Err(DistanceError::Domain(format!("{name}[{i}][{i}] = {v} must be 0")));
                    }
                }
                flat.extend_from_slice(row);
            }
        }
        Ok(Self {
            ids,
            n,
            dist: flat_dist,
            time: flat_time,
        })
    }

    /// Planar euclidean distances rounded to meters; times are the rounded
    /// distance divided by `speed` (m/s), rounded to seconds.
    pub fn build_euclidean(locations: &[Location], speed: f64) -> Result<Self, DistanceError> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(DistanceError::InvalidSpeed(speed));
        }
        if let Some(bad) = locations.iter().find(|l| !(l.x.is_finite() && l.y.is_finite())) {
            return Err(DistanceError::NonFinite(bad.id.clone()));
        }
        let n = locations.len();
        let mut dist = vec![0; n * n];
        let mut time = vec![0; n * n];
        for (i, a) in locations.iter().enumerate() {
            for (j, b) in locations.iter().enumerate() {
                if i == j {
                    continue;
                }
                let d = (a.x - b.x).hypot(a.y - b.y).round() as i64;
                dist[i * n + j] = d;
                time[i * n + j] = (d as f64 / speed).round() as i64;
            }
        }
        Ok(Self {
            ids: locations.iter().map(|l| l.id.clone()).collect(),
            n,
            dist,
            time,
        })
    }

    pub fn load_matrix(path: impl AsRef<Path>) -> Result<Self, DistanceError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, DistanceError> {
        let file: MatrixFile = serde_json::from_str(text)?;
        Self::from_rows(file.ids, file.dist, file.time)
    }

    pub fn to_json(&self) -> String {
        let rows = |flat: &[i64]| flat.chunks(self.n.max(1)).map(|r| r.to_vec()).collect::<Vec<_>>();
        let file = MatrixFile {
            ids: self.ids.clone(),
            dist: if self.n == 0 { vec![] } else { rows(&self.dist) },
            time: if self.n == 0 { vec![] } else { rows(&self.time) },
        };
        serde_json::to_string(&file).expect("matrix serialization is infallible")
    }

    /// Returns a copy whose rows and columns follow `order`.
    pub fn reindexed(&self, order: &[String]) -> Result<Self, DistanceError> {
        let pos: HashMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let map = order
            .iter()
            .map(|id| pos.get(id.as_str()).copied().ok_or_else(|| DistanceError::UnknownId(id.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let m = order.len();
        let mut dist = vec![0; m * m];
        let mut time = vec![0; m * m];
        for (i, &a) in map.iter().enumerate() {
            for (j, &b) in map.iter().enumerate() {
                dist[i * m + j] = self.dist[a * self.n + b];
                time[i * m + j] = self.time[a * self.n + b];
            }
        }
        Ok(Self {
            ids: order.to_vec(),
            n: m,
            dist,
            time,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Meters from `i` to `j`.
    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> i64 {
        self.dist[i * self.n + j]
    }

    /// Seconds from `i` to `j`.
    #[inline]
    pub fn time(&self, i: usize, j: usize) -> i64 {
        self.time[i * self.n + j]
    }
}
