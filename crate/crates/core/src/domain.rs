//! Inner-domain geometry and sampling primitives.

use nalgebra::DVector;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_dim, Error, Result};
use crate::rng::RngKey;

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// Probability simplex `{y >= 0, sum y = 1}` of the given dimension.
    Simplex(usize),
}

/// Convex, bounded feasible set of the inner (maximization) variable.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerDomain {
    geometry: Geometry,
    diameter: f64,
}

impl InnerDomain {
    pub fn new_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        check_dim("box bounds", lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::Config("box must have at least one dimension".into()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l < u)) {
            return Err(Error::Config("box requires lower < upper componentwise".into()));
        }
        let diameter = (&upper - &lower).norm();
        Ok(InnerDomain {
            geometry: Geometry::Box { lower, upper },
            diameter,
        })
    }

    /// Symmetric box `[-half_width, half_width]^dim`.
    pub fn symmetric_box(dim: usize, half_width: f64) -> Result<Self> {
        Self::new_box(
            DVector::from_element(dim, -half_width),
            DVector::from_element(dim, half_width),
        )
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("simplex dimension must be positive".into()));
        }
        Ok(InnerDomain {
            geometry: Geometry::Simplex(dim),
            diameter: std::f64::consts::SQRT_2,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn dim(&self) -> usize {
        match &self.geometry {
            Geometry::Box { lower, .. } => lower.len(),
            Geometry::Simplex(n) => *n,
        }
    }

    /// Box midpoint or the uniform simplex vector.
    pub fn center(&self) -> DVector<f64> {
        match &self.geometry {
            Geometry::Box { lower, upper } => (lower + upper) * 0.5,
            Geometry::Simplex(n) => DVector::from_element(*n, 1.0 / *n as f64),
        }
    }

    /// Euclidean projection onto the domain.
    pub fn project(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("projection", self.dim(), y.len())?;
        Ok(match &self.geometry {
            Geometry::Box { lower, upper } => DVector::from_iterator(
                y.len(),
                y.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(v, (l, u))| v.clamp(*l, *u)),
            ),
            Geometry::Simplex(_) => project_simplex(y),
        })
    }

    /// Membership test with absolute slack `tol`.
    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        if y.len() != self.dim() {
            return false;
        }
        match &self.geometry {
            Geometry::Box { lower, upper } => y
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            Geometry::Simplex(_) => y.iter().all(|v| *v >= -tol) && (y.sum() - 1.0).abs() <= tol.max(1e-12),
        }
    }
}

/// Sort-based exact projection onto the probability simplex.
pub fn project_simplex(v: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = v.iter().copied().collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut out = v.map(|vi| (vi - theta).max(0.0));
    // Renormalize away rounding drift in the threshold.
    let s = out.sum();
    if s > 0.0 {
        out /= s;
    }
    out
}

/// Draws `count` points uniformly from the closed ball `B(center, radius)`.
pub fn uniform_ball_sample(center: &DVector<f64>, radius: f64, count: usize, key: RngKey) -> Result<Vec<DVector<f64>>> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Config(format!("ball radius must be positive, got {radius}")));
    }
    if count == 0 {
        return Err(Error::Config("ball sample count must be at least 1".into()));
    }
    let mut rng = key.rng();
    let n = center.len();
    Ok((0..count)
        .map(|_| uniform_ball_point(center, radius, n, &mut rng))
        .collect())
}

pub(crate) fn uniform_ball_point(
    center: &DVector<f64>,
    radius: f64,
    n: usize,
    rng: &mut crate::rng::Rng,
) -> DVector<f64> {
    loop {
        let dir = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(rng));
        let norm = dir.norm();
        if norm > 0.0 {
            let u: f64 = rng.random();
            let r = radius * u.powf(1.0 / n as f64);
            return center + dir * (r / norm);
        }
    }
}
