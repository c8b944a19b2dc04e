//! Synthetic regression data with the convex target `f*(x) = Σ|x_k|`.

use alloc::format;
use alloc::vec::Vec;

use crate::rng::{tag, Stream};
use crate::{Dataset, Error, Result};

/// Degrees of freedom of the heavy-tailed covariate option.
pub const T_DOF: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariateDist {
    Gaussian,
    StudentT10,
}

impl CovariateDist {
    pub fn name(self) -> &'static str {
        match self {
            CovariateDist::Gaussian => "gaussian",
            CovariateDist::StudentT10 => "t10",
        }
    }

    fn draw(self, s: &mut Stream) -> f64 {
        match self {
            CovariateDist::Gaussian => s.normal(),
            CovariateDist::StudentT10 => s.student_t(T_DOF),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub dist: CovariateDist,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(n: usize, d: usize, dist: CovariateDist, seed: u64) -> Self {
        SyntheticSpec { n, d, dist, noise_sigma: 0.2, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.d < 1 {
            return Err(Error::invalid(format!(
                "synthetic data needs n >= 2 and d >= 1, got n={} d={}",
                self.n, self.d
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::invalid("noise sigma must be finite and >= 0"));
        }
        Ok(())
    }
}

pub fn f_star(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Covariates and noise come from separate streams, so changing σ leaves the
/// design points untouched.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut cov = Stream::new(spec.seed, &[tag("covariates")]);
    let mut noise = Stream::new(spec.seed, &[tag("noise")]);
    let xs: Vec<f64> = (0..spec.n * spec.d).map(|_| spec.dist.draw(&mut cov)).collect();
    let ys: Vec<f64> = xs
        .chunks_exact(spec.d)
        .map(|x| {
            let z = noise.normal();
            if spec.noise_sigma == 0.0 {
                f_star(x)
            } else {
                f_star(x) + spec.noise_sigma * z
            }
        })
        .collect();
    let label = format!(
        "synthetic:{}:n={}:d={}:sigma={}:seed={}",
        spec.dist.name(),
        spec.n,
        spec.d,
        spec.noise_sigma,
        spec.seed
    );
    Dataset::from_flat(spec.d, xs, ys, label)
}
