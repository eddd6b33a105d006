//! Uniform node-centred mesh on `(-l, l)` and central difference stencils.
//!
//! The no-flux conditions `u_x = u_xxx = 0` are imposed by even reflection
//! about the end nodes (`u_{-j} = u_j`, `u_{N+j} = u_{N-j}`), which makes every
//! odd central difference vanish at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    half_length: f64,
    n_cells: usize,
    spacing: f64,
}

impl Grid1D {
    pub fn new(half_length: f64, n_cells: usize) -> Result<Self> {
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(domain("half_length", format!("must be positive, got {half_length}")));
        }
        if n_cells < MIN_CELLS {
            return Err(domain(
                "n_cells",
                format!("need at least {MIN_CELLS} cells, got {n_cells}"),
            ));
        }
        Ok(Grid1D {
            half_length,
            n_cells,
            spacing: 2.0 * half_length / n_cells as f64,
        })
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_nodes(&self) -> usize {
        self.n_cells + 1
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.half_length
        } else {
            -self.half_length + i as f64 * self.spacing
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.node(i)).collect()
    }

    /// Midpoints `x_{i+1/2}`, `i = 0..N`.
    pub fn faces(&self) -> Vec<f64> {
        (0..self.n_cells)
            .map(|i| -self.half_length + (i as f64 + 0.5) * self.spacing)
            .collect()
    }

    /// Same grid with twice as many cells.
    pub fn refined(&self) -> Self {
        Grid1D::new(self.half_length, 2 * self.n_cells).expect("refining a valid grid")
    }

    pub(crate) fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_nodes() {
            return Err(Error::SizeMismatch {
                expected: self.n_nodes(),
                got: values.len(),
            });
        }
        Ok(())
    }

    /// Trapezoidal weights of the nodes.
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_cells {
            0.5 * self.spacing
        } else {
            self.spacing
        }
    }

    /// Trapezoidal quadrature of nodal values over the domain.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| self.trapezoid_weight(i) * v)
            .sum()
    }
}

/// Film height profile at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilmState {
    pub time: f64,
    pub heights: Vec<f64>,
}

impl FilmState {
    pub fn new(time: f64, heights: Vec<f64>, grid: &Grid1D) -> Result<Self> {
        grid.check_len(&heights)?;
        if let Some(index) = heights.iter().position(|h| !h.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        if !(time.is_finite() && time >= 0.0) {
            return Err(domain("time", format!("must be finite and non-negative, got {time}")));
        }
        Ok(FilmState { time, heights })
    }

    /// Samples `profile` at the grid nodes.
    pub fn from_fn(grid: &Grid1D, time: f64, profile: impl Fn(f64) -> f64) -> Result<Self> {
        FilmState::new(time, grid.nodes().into_iter().map(profile).collect(), grid)
    }

    pub fn constant(grid: &Grid1D, value: f64) -> Result<Self> {
        FilmState::new(0.0, vec![value; grid.n_nodes()], grid)
    }

    pub fn min_height(&self) -> f64 {
        self.heights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Errors on the first height that is not strictly positive.
    pub fn check_positive(&self) -> Result<()> {
        match self.heights.iter().position(|&h| !(h > 0.0)) {
            Some(index) => Err(Error::NonPositiveHeight {
                index,
                value: self.heights[index],
            }),
            None => Ok(()),
        }
    }
}

/// Pads `heights` with `k` ghost values on each side by even reflection.
pub fn extend_even(heights: &[f64], k: usize) -> Vec<f64> {
    let n = heights.len();
    assert!(n > k, "cannot reflect {k} ghosts off {n} values");
    let last = n - 1;
    let mut out = Vec::with_capacity(n + 2 * k);
    out.extend((1..=k).rev().map(|j| heights[j]));
    out.extend_from_slice(heights);
    out.extend((1..=k).map(|j| heights[last - j]));
    out
}

/// Nodal derivative of order 1 to 4 from second-order central stencils on
/// the even extension.
pub fn derivative(heights: &[f64], order: usize, grid: &Grid1D) -> Result<Vec<f64>> {
    grid.check_len(heights)?;
    let h = grid.spacing();
    let n = heights.len();
    let ext = extend_even(heights, 2);
    // ext[i + 2] holds node i
    let at = |i: usize, off: isize| ext[(i as isize + 2 + off) as usize];
    let out = match order {
        1 => (0..n).map(|i| (at(i, 1) - at(i, -1)) / (2.0 * h)).collect(),
        2 => (0..n)
            .map(|i| ((at(i, 1) - at(i, 0)) - (at(i, 0) - at(i, -1))) / (h * h))
            .collect(),
        3 => (0..n)
            .map(|i| {
                ((at(i, 2) - at(i, -2)) - 2.0 * (at(i, 1) - at(i, -1))) / (2.0 * h * h * h)
            })
            .collect(),
        4 => (0..n)
            .map(|i| {
                ((at(i, 2) + at(i, -2)) - 4.0 * (at(i, 1) + at(i, -1)) + 6.0 * at(i, 0))
                    / (h * h * h * h)
            })
            .collect(),
        _ => return Err(domain("order", format!("derivative order must be 1..=4, got {order}"))),
    };
    Ok(out)
}

/// Third derivative at the faces `x_{i+1/2}`, `i = 0..N`, from the
/// four-point stencil `(u_{i+2} - 3u_{i+1} + 3u_i - u_{i-1}) / h^3`.
pub fn face_third_derivative(heights: &[f64], grid: &Grid1D) -> Result<Vec<f64>> {
    grid.check_len(heights)?;
    Ok(face_third_unchecked(heights, grid.spacing()))
}

/// Written as `(u_{i+2} - u_{i-1}) - 3 (u_{i+1} - u_i)` so constants give
/// an exact zero.
pub(crate) fn face_third_unchecked(heights: &[f64], h: f64) -> Vec<f64> {
    let n_cells = heights.len() - 1;
    let h3 = h * h * h;
    let u = |j: isize| -> f64 {
        let j = if j < 0 {
            -j
        } else if j as usize > n_cells {
            2 * n_cells as isize - j
        } else {
            j
        };
        heights[j as usize]
    };
    (0..n_cells as isize)
        .map(|i| ((u(i + 2) - u(i - 1)) - 3.0 * (u(i + 1) - u(i))) / h3)
        .collect()
}
