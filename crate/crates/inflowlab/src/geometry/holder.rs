use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::Vec3;

use super::domain::ChannelDomain;
use super::grid::{GridVectorField, ScalarGrid};

/// Anything with one value per channel node whose differences can be
/// measured.
pub trait NodeSamples {
    fn domain(&self) -> ChannelDomain;
    fn difference(&self, a: usize, b: usize) -> f64;
}

impl NodeSamples for ScalarGrid {
    fn domain(&self) -> ChannelDomain {
        self.domain
    }

    fn difference(&self, a: usize, b: usize) -> f64 {
        (self.values[a] - self.values[b]).abs()
    }
}

impl NodeSamples for GridVectorField {
    fn domain(&self) -> ChannelDomain {
        self.domain
    }

    fn difference(&self, a: usize, b: usize) -> f64 {
        (self.get(a) - self.get(b)).norm()
    }
}

/// Draws the `p`-th node pair. Strategies rotate so that any prefix of the
/// sequence mixes random pairs with axis-aligned and extreme ones.
fn draw_pair(d: &ChannelDomain, rng: &mut ChaCha8Rng, p: usize) -> (usize, usize) {
    let ri = |rng: &mut ChaCha8Rng| rng.gen_range(0..d.nxp());
    let rj = |rng: &mut ChaCha8Rng| rng.gen_range(0..d.ny);
    let rk = |rng: &mut ChaCha8Rng| rng.gen_range(0..d.nz);
    let (i, j, k) = (ri(rng), rj(rng), rk(rng));
    let b = match p % 6 {
        0 => d.idx(0, j, k),
        1 => d.idx(ri(rng), j, k),
        2 => d.idx(i, rj(rng), k),
        3 => d.idx(i, j, rk(rng)),
        4 => {
            let step = |rng: &mut ChaCha8Rng| rng.gen_range(0..3) as i64 - 1;
            let ii = (i as i64 + step(rng)).clamp(0, d.nx as i64) as usize;
            let jj = (j as i64 + step(rng)).rem_euclid(d.ny as i64) as usize;
            let kk = (k as i64 + step(rng)).rem_euclid(d.nz as i64) as usize;
            d.idx(ii, jj, kk)
        }
        _ => d.idx(ri(rng), rj(rng), rk(rng)),
    };
    let a = if p.is_multiple_of(6) { d.idx(d.nx, j, k) } else { d.idx(i, j, k) };
    (a, b)
}

fn check_args(alpha: f64, budget: usize) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("Hoelder exponent must lie in (0, 1], got {alpha}")));
    }
    if budget == 0 {
        return Err(Error::InvalidInput("pair budget must be positive".into()));
    }
    Ok(())
}

/// Sampled lower bound on the `alpha`-Hoelder seminorm of nodal data.
///
/// Distances wrap periodically in y and z. The first `budget` pairs of a
/// seeded sequence are examined, so the estimate is nondecreasing in
/// `budget` for a fixed seed.
pub fn holder_seminorm<F: NodeSamples>(f: &F, alpha: f64, budget: usize, seed: u64) -> Result<f64> {
    check_args(alpha, budget)?;
    let d = f.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for p in 0..budget {
        let (a, b) = draw_pair(&d, &mut rng, p);
        if a == b {
            continue;
        }
        let r = d.separation(d.node_at(a), d.node_at(b)).norm();
        best = best.max(f.difference(a, b) / r.powf(alpha));
    }
    Ok(best)
}

/// Space-time variant over snapshots using the Euclidean metric on `(t, x)`.
pub fn holder_seminorm_spacetime(
    snapshots: &[GridVectorField],
    alpha: f64,
    budget: usize,
    seed: u64,
) -> Result<f64> {
    check_args(alpha, budget)?;
    let Some(first) = snapshots.first() else {
        return Err(Error::InvalidInput("no snapshots".into()));
    };
    let d = first.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for p in 0..budget {
        let (a, b) = draw_pair(&d, &mut rng, p);
        let (sa, sb) = if p % 2 == 0 {
            let s = rng.gen_range(0..snapshots.len());
            (s, s)
        } else {
            (rng.gen_range(0..snapshots.len()), rng.gen_range(0..snapshots.len()))
        };
        let (fa, fb) = (&snapshots[sa], &snapshots[sb]);
        let dx: Vec3 = d.separation(d.node_at(a), d.node_at(b));
        let dt = fa.t - fb.t;
        let r = (dx.norm_squared() + dt * dt).sqrt();
        if r == 0.0 {
            continue;
        }
        best = best.max((fa.get(a) - fb.get(b)).norm() / r.powf(alpha));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::Exec;

    #[test]
    fn constant_has_zero_seminorm() {
        let d = ChannelDomain::unit(8).unwrap();
        let f = ScalarGrid::from_fn(d, Exec::Sequential, |_| 2.5);
        assert_eq!(holder_seminorm(&f, 0.5, 100, 1).unwrap(), 0.0);
    }

    #[test]
    fn linear_profile_attains_one() {
        let d = ChannelDomain::unit(8).unwrap();
        let f = ScalarGrid::from_fn(d, Exec::Sequential, |x| x.x);
        for alpha in [1.0, 0.5] {
            let s = holder_seminorm(&f, alpha, 60, 3).unwrap();
            assert!((s - 1.0).abs() < 1e-12, "alpha {alpha}: {s}");
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let d = ChannelDomain::unit(8).unwrap();
        let f = ScalarGrid::zeros(d);
        assert!(holder_seminorm(&f, 0.5, 0, 1).is_err());
        assert!(holder_seminorm(&f, 0.0, 10, 1).is_err());
        assert!(holder_seminorm(&f, 1.5, 10, 1).is_err());
    }

    #[test]
    fn monotone_in_budget() {
        let d = ChannelDomain::unit(8).unwrap();
        let f = ScalarGrid::from_fn(d, Exec::Sequential, |x| (6.0 * x.y).sin() * x.x * x.x + x.z);
        let mut last = 0.0;
        for b in [1, 5, 20, 100, 400] {
            let s = holder_seminorm(&f, 0.7, b, 9).unwrap();
            assert!(s >= last);
            last = s;
        }
    }
}
