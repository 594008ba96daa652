use std::collections::HashMap;

use inflowlab::config::RunConfig;
use inflowlab::curltools::CurlSolver;
use inflowlab::diagnostics::{gronwall_check, Bump};
use inflowlab::entry::{entry_gradients, EntryOptions};
use inflowlab::flowmap::group_defect;
use inflowlab::geometry::domain::ChannelDomain;
use inflowlab::geometry::dump::Dump;
use inflowlab::geometry::grid::GridVectorField;
use inflowlab::geometry::provider::ExprField;
use inflowlab::par::Exec;
use inflowlab::transport::{lagrangian_solution, solve, EvalOptions, ProblemData, SolveOptions};
use inflowlab::Vec3;
use nalgebra::Vector4;
use proptest::prelude::*;

fn ef(src: [&str; 3]) -> ExprField {
    ExprField::parse(src, &HashMap::new()).unwrap()
}

fn scaled(a: f64, src: [&str; 3]) -> ExprField {
    ef(src.map(|s| format!("{a}*({s})")).each_ref().map(String::as_str))
}

fn sum(a: f64, p: [&str; 3], b: f64, q: [&str; 3]) -> ExprField {
    let c: [String; 3] = std::array::from_fn(|i| format!("{a}*({}) + {b}*({})", p[i], q[i]));
    ef(c.each_ref().map(String::as_str))
}

const U: [&str; 3] = ["1 + 0.2*sin(2*pi*y)", "0.3*x", "0.1*cos(2*pi*y + t)"];
const Y0A: [&str; 3] = ["sin(2*pi*y)", "x", "1"];
const Y0B: [&str; 3] = ["0", "cos(2*pi*z)", "x*y"];
const HA: [&str; 3] = ["1 + t", "0", "sin(2*pi*z)"];
const HB: [&str; 3] = ["0", "t*t", "cos(2*pi*y)"];
const GA: [&str; 3] = ["x", "0", "t"];
const GB: [&str; 3] = ["0", "sin(t)", "0"];

fn problem(y0: ExprField, h: ExprField, g: ExprField) -> ProblemData {
    ProblemData {
        u: ef(U).shared(),
        y0: y0.shared(),
        h: h.shared(),
        g: g.shared(),
        horizon: 1.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solution_is_linear_in_the_data(
        a in -2.0f64..2.0, b in -2.0f64..2.0,
        t in 0.05f64..0.95, x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0,
    ) {
        let d = ChannelDomain::unit(8).unwrap();
        let opts = EvalOptions::new(&d, 0.01).with_band(0.0);
        let p = Vec3::new(x, y, z);
        let da = problem(ef(Y0A), ef(HA), ef(GA));
        let db = problem(ef(Y0B), ef(HB), ef(GB));
        let dc = problem(sum(a, Y0A, b, Y0B), sum(a, HA, b, HB), sum(a, GA, b, GB));
        let ya = lagrangian_solution(&da, t, p, &opts).unwrap();
        let yb = lagrangian_solution(&db, t, p, &opts).unwrap();
        let yc = lagrangian_solution(&dc, t, p, &opts).unwrap();
        let scale = 1.0 + ya.norm() * a.abs() + yb.norm() * b.abs();
        prop_assert!((yc - (ya * a + yb * b)).norm() <= 1e-12 * scale);
    }

    #[test]
    fn flow_map_composes(
        t1 in 0.0f64..1.0, t2 in 0.0f64..1.0, t3 in 0.0f64..1.0,
        x in 0.0f64..1.0, y in 0.0f64..1.0, z in 0.0f64..1.0,
    ) {
        let u = ef(U);
        let e = group_defect(&u, t1, t2, t3, Vec3::new(x, y, z), 1e-3).unwrap();
        prop_assert!(e <= 1e-10, "defect {e}");
    }

    #[test]
    fn uniform_entry_time_gradient(speed in 0.2f64..3.0, t in 0.5f64..1.0, x in 0.0f64..0.1) {
        let d = ChannelDomain::unit(8).unwrap();
        let u = ef([&speed.to_string(), "0", "0"]);
        let (dt, dg) = entry_gradients(&u, t, Vec3::new(x, 0.3, 0.6), &EntryOptions::new(&d, 0.01)).unwrap();
        prop_assert!((dt - Vector4::new(1.0, -1.0 / speed, 0.0, 0.0)).amax() <= 1e-9);
        prop_assert!(dg.row(0).amax() <= 1e-9);
    }

    #[test]
    fn bump_gradient_matches_differences(
        ct in 0.3f64..0.7, cx in 0.3f64..0.7, r in 0.05f64..0.25,
        s in proptest::array::uniform4(-0.9f64..0.9),
    ) {
        let b = Bump { center: [ct, cx, 0.5, 0.5], radius: [r, r, 0.3, 0.4], component: 0 };
        let q = [ct + s[0] * r, cx + s[1] * r, 0.5 + s[2] * 0.3, 0.5 + s[3] * 0.4];
        let (_, g) = b.value_grad(q);
        for k in 0..4 {
            let dl = 1e-6 * b.radius[k];
            let (mut p, mut m) = (q, q);
            p[k] += dl;
            m[k] -= dl;
            let fd = (b.value_grad(p).0 - b.value_grad(m).0) / (2.0 * dl);
            prop_assert!((fd - g[k]).abs() <= 1e-6 * (1.0 + g[k].abs()) / b.radius[k]);
        }
    }

    #[test]
    fn dumps_roundtrip_bitwise(seed in any::<u64>(), t in 0.0f64..10.0) {
        let d = ChannelDomain::new(1.5, 1.0, 2.0, 9, 4, 5).unwrap();
        let f = GridVectorField::from_fn(d, t, Exec::Sequential, |x| {
            let s = (seed as f64) * 1e-19;
            Vec3::new(x.x + s, (x.y * 7.0).sin() - s, x.z * x.x)
        });
        let mut buf = Vec::new();
        Dump::from_field(&f, "Y").write_to(&mut buf).unwrap();
        let back = Dump::read_from(buf.as_slice()).unwrap().into_field().unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn overrides_set_the_grid(nx in 8usize..64, ny in 4usize..32) {
        let c = RunConfig::from_json(
            r#"{"scenario":{"preset":"uniform"}}"#,
            &[format!("domain.Nx={nx}"), format!("domain.Ny={ny}")],
        ).unwrap();
        prop_assert_eq!((c.domain.nx, c.domain.ny), (nx, ny));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn energy_growth_respects_the_gronwall_factor(a in 0.1f64..3.0, k in 1u32..3) {
        let d = ChannelDomain::new(1.0, 1.0, 1.0, 8, 8, 8).unwrap();
        let u = ef(["1", "0.5*x", "0.2*sin(2*pi*y)"]);
        let y0 = scaled(a, [&format!("cos({k}*2*pi*y)"), "x", "sin(2*pi*z)"]);
        let data = ProblemData { y0: y0.shared(), ..ProblemData::zero(u.shared(), 0.8) };
        let f = solve(&data, &[0.0, 0.2, 0.4, 0.6, 0.8], &d, &SolveOptions::new(&d, 0.02)).unwrap();
        let g = gronwall_check(&f, &data, 1e-12, Exec::Parallel).unwrap();
        prop_assert!(g.pass);
        let step = (2.0 * g.lipschitz * 0.2).exp();
        prop_assert!(g.growth_factors.iter().flatten().all(|r| *r <= step * (1.0 + 1e-9)));
    }

    #[test]
    fn biot_savart_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, p in 0.0f64..1.0) {
        let d = ChannelDomain::new(1.0, 1.0, 1.0, 12, 8, 8).unwrap();
        let tau = std::f64::consts::TAU;
        let cs = CurlSolver::new(d);
        let v1 = GridVectorField::from_fn(d, 0.0, Exec::Parallel, |x| {
            Vec3::new(x.x * x.x, (tau * (x.z + p)).sin(), x.x * (tau * x.y).cos())
        });
        let v2 = GridVectorField::from_fn(d, 0.0, Exec::Parallel, |x| {
            Vec3::new((tau * x.y).sin(), x.x * (tau * x.z).cos(), 0.3 + x.x)
        });
        let (w1, w2) = (cs.ops().curl(&v1), cs.ops().curl(&v2));
        let k1 = cs.biot_savart(&w1, Default::default()).unwrap();
        let k2 = cs.biot_savart(&w2, Default::default()).unwrap();
        let kc = cs.biot_savart(&w1.scale(a).add(&w2.scale(b)), Default::default()).unwrap();
        let lin = k1.scale(a).add(&k2.scale(b));
        prop_assert!(kc.sub(&lin).max_abs() <= 1e-9 * (1.0 + lin.max_abs()));
    }
}
