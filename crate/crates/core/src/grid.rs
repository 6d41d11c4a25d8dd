//! Cell-centred finite-volume meshes.
//!
//! [`RadialGrid`] discretizes a ball of radius `r_max` in `R^n` by spherical
//! shells, so radial functions are integrated against the exact shell
//! measures. In one dimension it represents the symmetric interval
//! `[-r_max, r_max]` folded onto `[0, r_max]`. [`IntervalGrid`] is a plain
//! bounded interval with Dirichlet data on both ends.

use std::f64::consts::PI;
use std::ops::{Deref, DerefMut, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Surface measure of the sphere of radius `r` in `R^n`. For `n = 1` this is
/// the two-point "sphere" `{-r, r}`.
pub fn sphere_area(n: usize, r: f64) -> f64 {
    n as f64 * unit_ball_volume(n) * r.powi(n as i32 - 1)
}

/// Nonnegative grid function at a single time level.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Field(Vec<f64>);

impl Field {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(cells: usize) -> Self {
        Self(vec![0.0; cells])
    }

    pub fn constant(cells: usize, value: f64) -> Self {
        Self(vec![value; cells])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|&v| f(v)).collect())
    }
}

impl From<Vec<f64>> for Field {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Spherical-shell mesh of the ball `{|x| < r_max}` in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    n: usize,
    r_max: f64,
    cells: usize,
    cell_centers: Vec<f64>,
    cell_volumes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64, cells: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension(n));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::InvalidGrid(format!("r_max must be positive, got {r_max}")));
        }
        if cells == 0 {
            return Err(Error::InvalidGrid("need at least one cell".into()));
        }
        let h = r_max / cells as f64;
        let omega = unit_ball_volume(n);
        let cell_centers = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
        let cell_volumes = (0..cells)
            .map(|i| {
                let lo = i as f64 * h;
                let hi = if i + 1 == cells { r_max } else { (i + 1) as f64 * h };
                omega * (hi.powi(n as i32) - lo.powi(n as i32))
            })
            .collect();
        Ok(Self {
            n,
            r_max,
            cells,
            cell_centers,
            cell_volumes,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn spacing(&self) -> f64 {
        self.r_max / self.cells as f64
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn cell_centers(&self) -> &[f64] {
        &self.cell_centers
    }

    pub fn cell_volumes(&self) -> &[f64] {
        &self.cell_volumes
    }

    /// Radius of face `j`, `0 <= j <= cells`.
    pub fn face_radius(&self, j: usize) -> f64 {
        if j == self.cells {
            self.r_max
        } else {
            j as f64 * self.spacing()
        }
    }

    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.n, self.r_max, self.cells * factor)
    }
}

/// Shorthand for [`RadialGrid::new`].
pub fn make_radial(n: usize, r_max: f64, cells: usize) -> Result<RadialGrid> {
    RadialGrid::new(n, r_max, cells)
}

/// Uniform mesh of the bounded interval `[a, b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalGrid {
    a: f64,
    b: f64,
    cells: usize,
    spacing: f64,
}

impl IntervalGrid {
    pub fn new(a: f64, b: f64, cells: usize) -> Result<Self> {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidGrid(format!("need a < b, got [{a}, {b}]")));
        }
        if cells == 0 {
            return Err(Error::InvalidGrid("need at least one cell".into()));
        }
        Ok(Self {
            a,
            b,
            cells,
            spacing: (b - a) / cells as f64,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.a, self.b, self.cells * factor)
    }
}

/// How a face couples cells or imposes data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaceKind {
    /// Between cells `left` and `left + 1`.
    Interior { left: usize },
    /// Dirichlet face next to `cell`; the value of `u^m` on the face is prescribed.
    Dirichlet { cell: usize },
}

/// A face carrying flux. Symmetry faces (the origin of a radial grid) carry
/// no flux and are omitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Face {
    pub kind: FaceKind,
    /// Coordinate of the face (radius for radial meshes).
    pub position: f64,
    /// Face measure divided by the centre-to-centre (or centre-to-face) distance.
    pub transmissibility: f64,
    /// Centre-to-centre (or centre-to-face) distance.
    pub distance: f64,
}

/// Either supported mesh, with a uniform finite-volume interface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Mesh {
    Interval(IntervalGrid),
    Radial(RadialGrid),
}

impl From<IntervalGrid> for Mesh {
    fn from(g: IntervalGrid) -> Self {
        Mesh::Interval(g)
    }
}

impl From<RadialGrid> for Mesh {
    fn from(g: RadialGrid) -> Self {
        Mesh::Radial(g)
    }
}

impl Mesh {
    pub fn cells(&self) -> usize {
        match self {
            Mesh::Interval(g) => g.cells,
            Mesh::Radial(g) => g.cells,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self {
            Mesh::Interval(g) => g.spacing,
            Mesh::Radial(g) => g.spacing(),
        }
    }

    /// Spatial dimension of the underlying physical domain.
    pub fn dimension(&self) -> usize {
        match self {
            Mesh::Interval(_) => 1,
            Mesh::Radial(g) => g.n,
        }
    }

    /// Cell-centre coordinates (radii for radial meshes).
    pub fn centers(&self) -> Vec<f64> {
        match self {
            Mesh::Interval(g) => (0..g.cells)
                .map(|i| g.a + (i as f64 + 0.5) * g.spacing)
                .collect(),
            Mesh::Radial(g) => g.cell_centers.clone(),
        }
    }

    pub fn volumes(&self) -> Vec<f64> {
        match self {
            Mesh::Interval(g) => vec![g.spacing; g.cells],
            Mesh::Radial(g) => g.cell_volumes.clone(),
        }
    }

    /// Measure of the whole domain.
    pub fn measure(&self) -> f64 {
        match self {
            Mesh::Interval(g) => g.b - g.a,
            Mesh::Radial(g) => unit_ball_volume(g.n) * g.r_max.powi(g.n as i32),
        }
    }

    /// Coordinates of the Dirichlet boundary points.
    pub fn boundary_points(&self) -> Vec<f64> {
        match self {
            Mesh::Interval(g) => vec![g.a, g.b],
            Mesh::Radial(g) => vec![g.r_max],
        }
    }

    /// All flux-carrying faces, ordered left to right.
    pub fn faces(&self) -> Vec<Face> {
        match self {
            Mesh::Interval(g) => {
                let h = g.spacing;
                let mut faces = Vec::with_capacity(g.cells + 1);
                faces.push(Face {
                    kind: FaceKind::Dirichlet { cell: 0 },
                    position: g.a,
                    transmissibility: 2.0 / h,
                    distance: 0.5 * h,
                });
                for i in 0..g.cells - 1 {
                    faces.push(Face {
                        kind: FaceKind::Interior { left: i },
                        position: g.a + (i + 1) as f64 * h,
                        transmissibility: 1.0 / h,
                        distance: h,
                    });
                }
                faces.push(Face {
                    kind: FaceKind::Dirichlet { cell: g.cells - 1 },
                    position: g.b,
                    transmissibility: 2.0 / h,
                    distance: 0.5 * h,
                });
                faces
            }
            Mesh::Radial(g) => {
                let h = g.spacing();
                let mut faces = Vec::with_capacity(g.cells);
                for i in 0..g.cells - 1 {
                    let r = g.face_radius(i + 1);
                    faces.push(Face {
                        kind: FaceKind::Interior { left: i },
                        position: r,
                        transmissibility: sphere_area(g.n, r) / h,
                        distance: h,
                    });
                }
                faces.push(Face {
                    kind: FaceKind::Dirichlet { cell: g.cells - 1 },
                    position: g.r_max,
                    transmissibility: sphere_area(g.n, g.r_max) / (0.5 * h),
                    distance: 0.5 * h,
                });
                faces
            }
        }
    }

    /// Discrete `∫ f dx`.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.cells() {
            return Err(Error::DimensionMismatch {
                expected: self.cells(),
                found: f.len(),
            });
        }
        Ok(match self {
            Mesh::Interval(g) => f.iter().sum::<f64>() * g.spacing,
            Mesh::Radial(g) => f.iter().zip(&g.cell_volumes).map(|(a, v)| a * v).sum(),
        })
    }

    /// Discrete Dirichlet energy `∫ |∇w|^2 dx` from face differences.
    /// `boundary` gives the face value of `w` at each Dirichlet face position;
    /// pass `None` to use interior faces only.
    pub fn dirichlet_energy(&self, w: &[f64], boundary: Option<&dyn Fn(f64) -> f64>) -> f64 {
        self.faces()
            .iter()
            .map(|face| match face.kind {
                FaceKind::Interior { left } => {
                    face.transmissibility * (w[left + 1] - w[left]).powi(2)
                }
                FaceKind::Dirichlet { cell } => match boundary {
                    Some(g) => face.transmissibility * (g(face.position) - w[cell]).powi(2),
                    None => 0.0,
                },
            })
            .sum()
    }

    /// Mesh with every cell split into `factor` cells.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Ok(match self {
            Mesh::Interval(g) => Mesh::Interval(g.refined(factor)?),
            Mesh::Radial(g) => Mesh::Radial(g.refined(factor)?),
        })
    }

    /// Sample a function of the cell-centre coordinate.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.centers().into_iter().map(f).collect())
    }
}

/// Discrete `∫ f dx` on a radial grid.
pub fn integrate(g: &RadialGrid, f: &[f64]) -> Result<f64> {
    Mesh::Radial(g.clone()).integrate(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_radial_grid_is_a_folded_interval() {
        let g = make_radial(1, 1.0, 4).unwrap();
        for v in g.cell_volumes() {
            assert_relative_eq!(*v, 0.5, max_relative = 1e-15);
        }
    }

    #[test]
    fn three_dimensional_shells() {
        let g = make_radial(3, 1.0, 2).unwrap();
        let ball = 4.0 * PI / 3.0;
        assert_relative_eq!(g.cell_volumes()[0], ball * 0.125, max_relative = 1e-14);
        assert_relative_eq!(g.cell_volumes()[1], ball * (1.0 - 0.125), max_relative = 1e-14);
    }

    #[test]
    fn single_disk_cell() {
        let g = make_radial(2, 2.0, 1).unwrap();
        assert_relative_eq!(g.cell_volumes()[0], 4.0 * PI, max_relative = 1e-14);
    }

    #[test]
    fn invalid_sizes_are_rejected() {
        assert!(make_radial(1, 0.0, 4).is_err());
        assert!(make_radial(1, 1.0, 0).is_err());
        assert!(make_radial(0, 1.0, 4).is_err());
        assert!(IntervalGrid::new(1.0, 1.0, 4).is_err());
    }

    #[test]
    fn integrate_constants_and_indicators() {
        let g = make_radial(3, 2.0, 64).unwrap();
        let c = 1.7;
        let val = integrate(&g, &vec![c; 64]).unwrap();
        assert_relative_eq!(val, c * 4.0 * PI / 3.0 * 8.0, max_relative = 1e-13);

        let ind: Vec<f64> = (0..64).map(|i| if i < 32 { 1.0 } else { 0.0 }).collect();
        let inner: f64 = g.cell_volumes()[..32].iter().sum();
        assert_eq!(integrate(&g, &ind).unwrap(), inner);
        assert!(matches!(
            integrate(&g, &[1.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn volumes_sum_to_ball() {
        for n in 1..=4 {
            let g = make_radial(n, 1.3, 37).unwrap();
            let total: f64 = g.cell_volumes().iter().sum();
            assert_relative_eq!(total, unit_ball_volume(n) * 1.3f64.powi(n as i32), max_relative = 1e-13);
            assert!(g.cell_volumes().iter().all(|v| *v > 0.0));
            assert!(g.cell_centers().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        // ∫_{R^3} e^{-|x|^2} dx restricted to the ball of radius 6 (tail < 1e-14).
        let exact = PI.powf(1.5);
        let err = |cells| {
            let g = make_radial(3, 6.0, cells).unwrap();
            let f: Vec<f64> = g.cell_centers().iter().map(|r| (-r * r).exp()).collect();
            (integrate(&g, &f).unwrap() - exact).abs()
        };
        let ratio = err(100) / err(200);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn interval_faces_and_measure() {
        let m = Mesh::from(IntervalGrid::new(-1.0, 1.0, 4).unwrap());
        let faces = m.faces();
        assert_eq!(faces.len(), 5);
        assert_eq!(faces[0].transmissibility, 4.0);
        assert_eq!(faces[2].transmissibility, 2.0);
        assert_eq!(m.measure(), 2.0);
        assert_eq!(m.centers(), vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn dirichlet_energy_of_linear_function() {
        // w = x on [0,1], boundary w(0)=0, w(1)=1 -> energy 1 exactly.
        let m = Mesh::from(IntervalGrid::new(0.0, 1.0, 10).unwrap());
        let w: Vec<f64> = m.centers();
        let e = m.dirichlet_energy(&w, Some(&|x| x));
        assert_relative_eq!(e, 1.0, max_relative = 1e-13);
    }

    proptest! {
        #[test]
        fn integrate_is_linear(
            f in proptest::collection::vec(0.0f64..10.0, 16),
            g in proptest::collection::vec(0.0f64..10.0, 16),
            a in -3.0f64..3.0, b in -3.0f64..3.0, n in 1usize..4,
        ) {
            let grid = make_radial(n, 2.0, 16).unwrap();
            let combo: Vec<f64> = f.iter().zip(&g).map(|(x, y)| a * x + b * y).collect();
            let lhs = integrate(&grid, &combo).unwrap();
            let rhs = a * integrate(&grid, &f).unwrap() + b * integrate(&grid, &g).unwrap();
            let scale = 1.0 + lhs.abs().max(rhs.abs()) + integrate(&grid, &f).unwrap() + integrate(&grid, &g).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-13 * scale);
        }
    }
}
