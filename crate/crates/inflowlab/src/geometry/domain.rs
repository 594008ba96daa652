use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// The channel `(0, Lx) x T^2` with a uniform node grid.
///
/// Nodes sit at `x1 = i Lx / Nx` for `i = 0..=Nx`; the periodic directions
/// carry `Ny` and `Nz` nodes without a duplicated seam.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDomain {
    pub lx: f64,
    pub ly: f64,
    pub lz: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

/// One of the two flat boundary components.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// `x1 = 0`, outward normal `-e1`.
    Inflow,
    /// `x1 = Lx`, outward normal `+e1`.
    Outflow,
}

impl Side {
    pub fn normal(self) -> Vec3 {
        match self {
            Side::Inflow => Vec3::new(-1.0, 0.0, 0.0),
            Side::Outflow => Vec3::new(1.0, 0.0, 0.0),
        }
    }

    /// Sign of the outward normal along `e1`.
    pub fn sign(self) -> f64 {
        match self {
            Side::Inflow => -1.0,
            Side::Outflow => 1.0,
        }
    }
}

impl ChannelDomain {
    pub fn new(lx: f64, ly: f64, lz: f64, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        for (name, v) in [("Lx", lx), ("Ly", ly), ("Lz", lz)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if nx < 8 {
            return Err(Error::InvalidInput(format!("Nx must be at least 8, got {nx}")));
        }
        if ny < 4 || nz < 4 {
            return Err(Error::InvalidInput(format!(
                "Ny and Nz must be at least 4, got {ny} and {nz}"
            )));
        }
        Ok(ChannelDomain {
            lx,
            ly,
            lz,
            nx,
            ny,
            nz,
        })
    }

    /// Unit channel with `n` cells in every direction.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(1.0, 1.0, 1.0, n, n, n)
    }

    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    pub fn dz(&self) -> f64 {
        self.lz / self.nz as f64
    }

    /// Largest grid spacing.
    pub fn h(&self) -> f64 {
        self.dx().max(self.dy()).max(self.dz())
    }

    /// Node count along x1.
    pub fn nxp(&self) -> usize {
        self.nx + 1
    }

    pub fn len(&self) -> usize {
        self.nxp() * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn boundary_len(&self) -> usize {
        self.ny * self.nz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nxp() * (j + self.ny * k)
    }

    #[inline]
    pub fn coords(&self, n: usize) -> (usize, usize, usize) {
        let i = n % self.nxp();
        let r = n / self.nxp();
        (i, r % self.ny, r / self.ny)
    }

    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        Vec3::new(
            i as f64 * self.dx(),
            j as f64 * self.dy(),
            k as f64 * self.dz(),
        )
    }

    pub fn node_at(&self, n: usize) -> Vec3 {
        let (i, j, k) = self.coords(n);
        self.node(i, j, k)
    }

    /// Node of a boundary component, indexed `j + Ny k`.
    pub fn boundary_node(&self, side: Side, m: usize) -> Vec3 {
        let (j, k) = (m % self.ny, m / self.ny);
        let i = match side {
            Side::Inflow => 0,
            Side::Outflow => self.nx,
        };
        self.node(i, j, k)
    }

    pub fn volume(&self) -> f64 {
        self.lx * self.ly * self.lz
    }

    pub fn boundary_area(&self) -> f64 {
        self.ly * self.lz
    }

    /// Trapezoid weights along x1 (sum to `Lx`).
    pub fn x_weights(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.nxp())
            .map(|i| if i == 0 || i == self.nx { 0.5 * dx } else { dx })
            .collect()
    }

    /// Quadrature weight of node `n` for volume integrals.
    pub fn node_weight(&self, n: usize) -> f64 {
        let (i, _, _) = self.coords(n);
        let wx = if i == 0 || i == self.nx { 0.5 } else { 1.0 };
        wx * self.dx() * self.dy() * self.dz()
    }

    /// Wraps y and z into the fundamental cell.
    pub fn wrap(&self, x: Vec3) -> Vec3 {
        Vec3::new(x.x, x.y.rem_euclid(self.ly), x.z.rem_euclid(self.lz))
    }

    /// Minimal-image separation between two points.
    pub fn separation(&self, a: Vec3, b: Vec3) -> Vec3 {
        let wrap = |d: f64, l: f64| d - l * (d / l).round();
        Vec3::new(a.x - b.x, wrap(a.y - b.y, self.ly), wrap(a.z - b.z, self.lz))
    }

    /// The same geometry at a different resolution.
    pub fn with_resolution(&self, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        Self::new(self.lx, self.ly, self.lz, nx, ny, nz)
    }

    pub fn contains(&self, x: Vec3, tol: f64) -> bool {
        x.x >= -tol && x.x <= self.lx + tol
    }
}
