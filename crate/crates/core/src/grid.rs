//! Functions on `states x grid points`, the point set shared by the Bellman
//! and time-iteration operators.

use serde::{Deserialize, Serialize};

use crate::perov::{VectorDistance, VectorMetric};

/// Real values indexed by (exogenous state, grid point), stored row-major by
/// state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    states: usize,
    points: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn constant(states: usize, points: usize, value: f64) -> Self {
        Self {
            states,
            points,
            values: vec![value; states * points],
        }
    }

    pub fn zeros(states: usize, points: usize) -> Self {
        Self::constant(states, points, 0.0)
    }

    pub fn from_fn(states: usize, points: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(states * points);
        for i in 0..states {
            for k in 0..points {
                values.push(f(i, k));
            }
        }
        Self {
            states,
            points,
            values,
        }
    }

    /// Panics if `values.len() != states * points`.
    pub fn from_values(states: usize, points: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), states * points, "grid function size mismatch");
        Self {
            states,
            points,
            values,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let points = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == points), "ragged rows");
        Self {
            states: rows.len(),
            points,
            values: rows.concat(),
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn points(&self) -> usize {
        self.points
    }

    #[inline]
    pub fn get(&self, state: usize, point: usize) -> f64 {
        self.values[state * self.points + point]
    }

    #[inline]
    pub fn set(&mut self, state: usize, point: usize, value: f64) {
        self.values[state * self.points + point] = value;
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.values[state * self.points..(state + 1) * self.points]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            states: self.states,
            points: self.points,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Adds `c[i]` to every value of state `i`.
    pub fn add_per_state(&self, c: &[f64]) -> Self {
        assert_eq!(c.len(), self.states, "one constant per state");
        Self::from_fn(self.states, self.points, |i, k| self.get(i, k) + c[i])
    }

    /// Entrywise sum; shapes must agree.
    pub fn add(&self, other: &Self) -> Self {
        self.assert_same_shape(other);
        Self {
            states: self.states,
            points: self.points,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    /// The partial order `f <= g` entrywise.
    pub fn le(&self, other: &Self) -> bool {
        self.assert_same_shape(other);
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn assert_same_shape(&self, other: &Self) {
        assert!(
            self.states == other.states && self.points == other.points,
            "grid function shapes differ"
        );
    }
}

/// `d_i(f, g) = max_k |f_i(x_k) - g_i(x_k)|`: one sup distance per state.
#[derive(Debug, Clone, Copy)]
pub struct GridSupMetric {
    pub states: usize,
}

impl VectorMetric<GridFunction> for GridSupMetric {
    fn dim(&self) -> usize {
        self.states
    }

    fn distance(&self, x: &GridFunction, y: &GridFunction) -> VectorDistance {
        x.assert_same_shape(y);
        VectorDistance::new(
            (0..x.states)
                .map(|i| {
                    x.row(i)
                        .iter()
                        .zip(y.row(i))
                        .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs()))
                })
                .collect(),
        )
    }
}
