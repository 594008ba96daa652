use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::Vec3;

use super::domain::{ChannelDomain, Side};

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(n) => Err(Error::Numeric(format!("{what}: non-finite entry at index {n}"))),
        None => Ok(()),
    }
}

/// Scalar samples on the channel nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    pub domain: ChannelDomain,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn new(domain: ChannelDomain, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                domain.len(),
                values.len()
            )));
        }
        check_finite(&values, "scalar grid")?;
        Ok(ScalarGrid { domain, values })
    }

    pub fn zeros(domain: ChannelDomain) -> Self {
        ScalarGrid {
            domain,
            values: vec![0.0; domain.len()],
        }
    }

    pub fn from_fn(domain: ChannelDomain, exec: Exec, f: impl Fn(Vec3) -> f64 + Sync + Send) -> Self {
        let values = par::map_range(exec, domain.len(), |n| f(domain.node_at(n)));
        ScalarGrid { domain, values }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum of `|f|` over nodes where `keep` holds.
    pub fn max_abs_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        self.values
            .iter()
            .enumerate()
            .filter(|(n, _)| keep(*n))
            .fold(0.0, |m, (_, v)| m.max(v.abs()))
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| v * self.domain.node_weight(n))
            .sum()
    }
}

/// Three-component samples on the channel nodes at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct GridVectorField {
    pub domain: ChannelDomain,
    pub t: f64,
    pub comps: [Vec<f64>; 3],
}

impl GridVectorField {
    pub fn new(domain: ChannelDomain, t: f64, comps: [Vec<f64>; 3]) -> Result<Self> {
        for (c, v) in comps.iter().enumerate() {
            if v.len() != domain.len() {
                return Err(Error::InvalidInput(format!(
                    "component {c}: expected {} samples, got {}",
                    domain.len(),
                    v.len()
                )));
            }
            check_finite(v, "vector grid")?;
        }
        Ok(GridVectorField { domain, t, comps })
    }

    pub fn zeros(domain: ChannelDomain, t: f64) -> Self {
        let z = vec![0.0; domain.len()];
        GridVectorField {
            domain,
            t,
            comps: [z.clone(), z.clone(), z],
        }
    }

    /// Samples a function of the node position.
    pub fn from_fn(
        domain: ChannelDomain,
        t: f64,
        exec: Exec,
        f: impl Fn(Vec3) -> Vec3 + Sync + Send,
    ) -> Self {
        let vals = par::map_range(exec, domain.len(), |n| f(domain.node_at(n)));
        Self::from_vecs(domain, t, &vals)
    }

    /// Fallible sampling; rejects non-finite results.
    pub fn try_from_fn(
        domain: ChannelDomain,
        t: f64,
        exec: Exec,
        f: impl Fn(Vec3) -> Result<Vec3> + Sync + Send,
    ) -> Result<Self> {
        let vals = par::try_map_range(exec, domain.len(), |n| f(domain.node_at(n)))?;
        let g = Self::from_vecs(domain, t, &vals);
        for c in &g.comps {
            check_finite(c, "sampled field")?;
        }
        Ok(g)
    }

    pub fn from_vecs(domain: ChannelDomain, t: f64, vals: &[Vec3]) -> Self {
        let mut g = Self::zeros(domain, t);
        for (n, v) in vals.iter().enumerate() {
            g.set(n, *v);
        }
        g
    }

    #[inline]
    pub fn get(&self, n: usize) -> Vec3 {
        Vec3::new(self.comps[0][n], self.comps[1][n], self.comps[2][n])
    }

    #[inline]
    pub fn set(&mut self, n: usize, v: Vec3) {
        self.comps[0][n] = v.x;
        self.comps[1][n] = v.y;
        self.comps[2][n] = v.z;
    }

    pub fn at(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.get(self.domain.idx(i, j, k))
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Componentwise `self - other`.
    pub fn sub(&self, other: &GridVectorField) -> GridVectorField {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridVectorField) -> GridVectorField {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> GridVectorField {
        let mut out = self.clone();
        for comp in &mut out.comps {
            for v in comp.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    fn zip_with(&self, other: &GridVectorField, f: impl Fn(f64, f64) -> f64) -> GridVectorField {
        let mut out = self.clone();
        for c in 0..3 {
            for (o, b) in out.comps[c].iter_mut().zip(&other.comps[c]) {
                *o = f(*o, *b);
            }
        }
        out
    }

    /// Max over nodes of the Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        (0..self.len()).fold(0.0, |m, n| m.max(self.get(n).norm()))
    }

    /// Max over nodes of the Euclidean norm, restricted by `keep`.
    pub fn max_norm_where(&self, keep: impl Fn(usize) -> bool) -> f64 {
        (0..self.len())
            .filter(|&n| keep(n))
            .fold(0.0, |m, n| m.max(self.get(n).norm()))
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid-rule L2 norm over the channel.
    pub fn l2_norm(&self) -> f64 {
        (0..self.len())
            .map(|n| self.get(n).norm_squared() * self.domain.node_weight(n))
            .sum::<f64>()
            .sqrt()
    }

    /// Volume mean of one component.
    pub fn mean(&self, c: usize) -> f64 {
        self.comps[c]
            .iter()
            .enumerate()
            .map(|(n, v)| v * self.domain.node_weight(n))
            .sum::<f64>()
            / self.domain.volume()
    }

    /// Restriction to a boundary component.
    pub fn trace(&self, side: Side) -> BoundaryVectorField {
        let d = self.domain;
        let i = match side {
            Side::Inflow => 0,
            Side::Outflow => d.nx,
        };
        let mut comps = [
            vec![0.0; d.boundary_len()],
            vec![0.0; d.boundary_len()],
            vec![0.0; d.boundary_len()],
        ];
        for k in 0..d.nz {
            for j in 0..d.ny {
                let n = d.idx(i, j, k);
                for c in 0..3 {
                    comps[c][j + d.ny * k] = self.comps[c][n];
                }
            }
        }
        BoundaryVectorField {
            domain: d,
            side,
            comps,
        }
    }
}

/// Scalar samples on one boundary component, indexed `j + Ny k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryGrid {
    pub domain: ChannelDomain,
    pub side: Side,
    pub values: Vec<f64>,
}

impl BoundaryGrid {
    pub fn from_fn(domain: ChannelDomain, side: Side, f: impl Fn(Vec3) -> f64) -> Self {
        let values = (0..domain.boundary_len())
            .map(|m| f(domain.boundary_node(side, m)))
            .collect();
        BoundaryGrid {
            domain,
            side,
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Trapezoid (spectrally accurate) surface integral.
    pub fn integral(&self) -> f64 {
        let w = self.domain.dy() * self.domain.dz();
        self.values.iter().sum::<f64>() * w
    }
}

/// Vector samples on one boundary component.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryVectorField {
    pub domain: ChannelDomain,
    pub side: Side,
    pub comps: [Vec<f64>; 3],
}

impl BoundaryVectorField {
    pub fn from_fn(domain: ChannelDomain, side: Side, f: impl Fn(Vec3) -> Vec3) -> Self {
        let mut comps = [
            vec![0.0; domain.boundary_len()],
            vec![0.0; domain.boundary_len()],
            vec![0.0; domain.boundary_len()],
        ];
        for m in 0..domain.boundary_len() {
            let v = f(domain.boundary_node(side, m));
            for c in 0..3 {
                comps[c][m] = v[c];
            }
        }
        BoundaryVectorField {
            domain,
            side,
            comps,
        }
    }

    pub fn get(&self, m: usize) -> Vec3 {
        Vec3::new(self.comps[0][m], self.comps[1][m], self.comps[2][m])
    }

    /// Normal component `w . n`.
    pub fn normal_component(&self) -> BoundaryGrid {
        let s = self.side.sign();
        BoundaryGrid {
            domain: self.domain,
            side: self.side,
            values: self.comps[0].iter().map(|v| s * v).collect(),
        }
    }
}
