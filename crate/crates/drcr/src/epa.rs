//! A stand-in for the air-quality data: four positive, correlated pollutant
//! readings and a response that is convex in their logarithms.

use drcr_core::rng::{tag, Stream};

use crate::error::{Error, Result};
use crate::io::Table;

pub const COVARIATES: [&str; 4] = ["co", "no2", "o3", "pm25"];
pub const RESPONSE: &str = "aqi";
pub const DEFAULT_ROWS: usize = 600;

/// Log-scale location and spread of each covariate.
const LOG_MEAN: [f64; 4] = [-0.7, 2.8, -3.4, 2.1];
const LOG_SD: [f64; 4] = [0.6, 0.5, 0.35, 0.7];
/// Loading of each covariate on a shared factor.
const SHARED: f64 = 0.5;
const NOISE: f64 = 0.15;

/// Truth on the standardized log scale.
pub fn convex_truth(z: &[f64]) -> f64 {
    z[0].abs() + 0.75 * z[1].abs() + z[2].max(0.0) + 0.5 * z[3] + 0.5 * (z[0] + z[3]).max(0.0)
}

/// `rows` draws; columns `co, no2, o3, pm25, aqi`.
pub fn generate_epa_like(rows: usize, seed: u64) -> Result<Table> {
    if rows < 2 {
        return Err(Error::invalid("need at least two rows"));
    }
    let mut s = Stream::new(seed, &[tag("epa-like")]);
    let scale = (1.0 + SHARED * SHARED).sqrt();
    let mut out = Vec::with_capacity(rows);
    for _ in 0..rows {
        let common = s.normal();
        let z: Vec<f64> = (0..4).map(|_| (s.normal() + SHARED * common) / scale).collect();
        let mut row: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(k, zk)| (LOG_MEAN[k] + LOG_SD[k] * zk).exp())
            .collect();
        row.push(1.0 + convex_truth(&z) + NOISE * s.normal());
        out.push(row);
    }
    let headers = COVARIATES
        .iter()
        .chain(std::iter::once(&RESPONSE))
        .map(|h| (*h).to_owned())
        .collect();
    Table::new(headers, out)
}
