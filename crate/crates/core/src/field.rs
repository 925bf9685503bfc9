//! Nodal fields and their time sequences.

use std::ops::{Deref, DerefMut};

use crate::fractime::TimeGrid;
use crate::{Error, Result};

/// Nodal coefficient vector of a P1 function, one value per mesh node.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Field {
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.values.len() == expected {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected,
                found: self.values.len(),
            })
        }
    }

    pub fn scaled(&self, factor: f64) -> Field {
        Field::from_vec(self.values.iter().map(|v| v * factor).collect())
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: f64, other: &Field) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += factor * b;
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        debug_assert_eq!(self.len(), other.len());
        Field::from_vec(
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Deref for Field {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// One [`Field`] per time level `t_0 .. t_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    grid: TimeGrid,
    frames: Vec<Field>,
}

impl SpaceTimeField {
    pub fn new(grid: TimeGrid, frames: Vec<Field>) -> Result<Self> {
        if frames.len() != grid.steps() + 1 {
            return Err(Error::Dimension {
                expected: grid.steps() + 1,
                found: frames.len(),
            });
        }
        if let Some(first) = frames.first() {
            let len = first.len();
            for f in &frames {
                f.check_len(len)?;
            }
        }
        Ok(Self { grid, frames })
    }

    pub fn zeros(grid: TimeGrid, nodes: usize) -> Self {
        Self {
            grid,
            frames: vec![Field::zeros(nodes); grid.steps() + 1],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn frames(&self) -> &[Field] {
        &self.frames
    }

    pub fn frame(&self, n: usize) -> &Field {
        &self.frames[n]
    }

    pub fn frames_mut(&mut self) -> &mut [Field] {
        &mut self.frames
    }

    pub fn into_frames(self) -> Vec<Field> {
        self.frames
    }

    pub fn node_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.len())
    }

    /// Frames in reverse time order, on the same grid.
    pub fn reversed(&self) -> SpaceTimeField {
        let mut frames = self.frames.clone();
        frames.reverse();
        SpaceTimeField {
            grid: self.grid,
            frames,
        }
    }

    pub fn sub(&self, other: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.grid.check_same(&other.grid)?;
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| a.sub(b))
            .collect();
        Ok(SpaceTimeField {
            grid: self.grid,
            frames,
        })
    }
}
