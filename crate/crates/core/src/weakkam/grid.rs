use crate::error::{Error, Result};

/// Real values on the uniform periodic grid of spacing 1/N over Tⁿ (n = 1 or 2).
///
/// Nodes are stored row-major: node (i, j) has index `i * N + j` and sits at (i/N, j/N).
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    dim: usize,
    n: usize,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(dim: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::config("dim", "grids support dimension 1 or 2"));
        }
        if n < 2 {
            return Err(Error::config("N", "grid needs at least 2 nodes per axis"));
        }
        if values.len() != n.pow(dim as u32) {
            return Err(Error::Dimension {
                expected: n.pow(dim as u32),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("grid function values"));
        }
        Ok(GridFunction { dim, n, values })
    }

    pub fn constant(dim: usize, n: usize, value: f64) -> Result<Self> {
        Self::new(dim, n, vec![value; n.pow(dim as u32)])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn position(&self, idx: usize) -> Vec<f64> {
        node_position(self.dim, self.n, idx)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Shift so that the minimum is zero.
    pub fn normalized(&self) -> Self {
        let m = self.min();
        GridFunction {
            dim: self.dim,
            n: self.n,
            values: self.values.iter().map(|v| v - m).collect(),
        }
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Centered-difference gradient at a node.
    pub fn gradient_at_node(&self, idx: usize) -> Vec<f64> {
        let n = self.n;
        let inv = n as f64 / 2.0;
        match self.dim {
            1 => {
                let (l, r) = ((idx + n - 1) % n, (idx + 1) % n);
                vec![(self.values[r] - self.values[l]) * inv]
            }
            _ => {
                let (i, j) = (idx / n, idx % n);
                let at = |i: usize, j: usize| self.values[i * n + j];
                vec![
                    (at((i + 1) % n, j) - at((i + n - 1) % n, j)) * inv,
                    (at(i, (j + 1) % n) - at(i, (j + n - 1) % n)) * inv,
                ]
            }
        }
    }

    /// Centered-difference gradient at every node.
    pub fn gradient_field(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.gradient_at_node(i)).collect()
    }

    /// Lipschitz estimate: largest Euclidean norm of the nodal gradient.
    pub fn lipschitz_estimate(&self) -> f64 {
        self.gradient_field()
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

pub fn node_position(dim: usize, n: usize, idx: usize) -> Vec<f64> {
    let s = 1.0 / n as f64;
    match dim {
        1 => vec![idx as f64 * s],
        _ => vec![(idx / n) as f64 * s, (idx % n) as f64 * s],
    }
}

/// Linear (1-D) or bilinear (2-D) periodic interpolation of nodal vectors.
pub fn interpolate(dim: usize, n: usize, nodal: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let locate = |xi: f64| {
        let s = crate::torus::wrap(xi) * n as f64;
        let i0 = (s.floor() as usize) % n;
        let t = s - s.floor();
        (i0, (i0 + 1) % n, t)
    };
    match dim {
        1 => {
            let (a, b, t) = locate(x[0]);
            nodal[a]
                .iter()
                .zip(&nodal[b])
                .map(|(u, v)| (1.0 - t) * u + t * v)
                .collect()
        }
        _ => {
            let (i0, i1, s) = locate(x[0]);
            let (j0, j1, t) = locate(x[1]);
            let w = [
                ((1.0 - s) * (1.0 - t), i0 * n + j0),
                ((1.0 - s) * t, i0 * n + j1),
                (s * (1.0 - t), i1 * n + j0),
                (s * t, i1 * n + j1),
            ];
            let k = nodal[0].len();
            (0..k)
                .map(|c| w.iter().map(|(wt, idx)| wt * nodal[*idx][c]).sum())
                .collect()
        }
    }
}

/// Which one-point rule discretizes the action of a single step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quadrature {
    /// h·L(y + d/2, d/h).
    Midpoint,
    /// h·L(y, d/h).
    LeftPoint,
    /// Simpson's rule along the quadratic path y → m → y + d with the
    /// midpoint m chosen to minimize the action (fourth order in h).
    Simpson,
}

/// Discretization of the action: time step, velocity truncation and grid size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscreteActionParams {
    pub h: f64,
    pub vmax: f64,
    pub n: usize,
    pub quadrature: Quadrature,
}

impl DiscreteActionParams {
    pub fn new(h: f64, vmax: f64, n: usize) -> Self {
        DiscreteActionParams {
            h,
            vmax,
            n,
            quadrature: Quadrature::Simpson,
        }
    }

    pub fn with_quadrature(mut self, q: Quadrature) -> Self {
        self.quadrature = q;
        self
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::config("h", "time step must be positive"));
        }
        if !(self.vmax > 0.0) || !self.vmax.is_finite() {
            return Err(Error::config("vmax", "velocity bound must be positive"));
        }
        if self.n < 4 {
            return Err(Error::config("N", "grid needs at least 4 nodes per axis"));
        }
        if self.vmax * self.h < self.spacing() {
            return Err(Error::config(
                "vmax",
                format!(
                    "one-step reach vmax*h = {} is below the grid spacing 1/N = {}",
                    self.vmax * self.h,
                    self.spacing()
                ),
            ));
        }
        Ok(())
    }
}
