use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::sphere::{check_same_dim, UnitVector};

/// An ordered collection of directions of a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionalSample {
    points: Vec<UnitVector>,
    hemisphere_folded: bool,
    source: String,
}

impl DirectionalSample {
    pub fn new(points: Vec<UnitVector>, source: impl Into<String>) -> Result<Self> {
        let first = points.first().ok_or(Error::TooFewPoints {
            needed: 1,
            found: 0,
        })?;
        let d = first.dim();
        for (i, p) in points.iter().enumerate() {
            check_same_dim(d, p.dim()).map_err(|e| e.at(i))?;
        }
        Ok(DirectionalSample {
            points,
            hemisphere_folded: false,
            source: source.into(),
        })
    }

    pub(crate) fn from_parts(points: Vec<UnitVector>, hemisphere_folded: bool, source: String) -> Self {
        DirectionalSample {
            points,
            hemisphere_folded,
            source,
        }
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    pub fn into_points(self) -> Vec<UnitVector> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn hemisphere_folded(&self) -> bool {
        self.hemisphere_folded
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    /// `x_i . mu` for every point.
    pub fn projections(&self, mu: &UnitVector) -> Result<Vec<f64>> {
        check_same_dim(self.dim(), mu.dim())?;
        Ok(self.points.iter().map(|x| x.dot(mu)).collect())
    }

    /// Applies an orthogonal matrix to every point.
    pub fn rotate(&self, rotation: &DMatrix<f64>) -> Result<DirectionalSample> {
        let points = self
            .points
            .iter()
            .map(|p| p.rotate(rotation))
            .collect::<Result<Vec<_>>>()?;
        Ok(DirectionalSample {
            points,
            hemisphere_folded: self.hemisphere_folded,
            source: self.source.clone(),
        })
    }

    /// Subsample keeping the given indices in order.
    pub fn select(&self, indices: &[usize]) -> DirectionalSample {
        DirectionalSample {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            hemisphere_folded: self.hemisphere_folded,
            source: self.source.clone(),
        }
    }
}
