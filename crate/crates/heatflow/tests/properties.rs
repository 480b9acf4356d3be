use heatflow::dynamics::ode_rhs;
use heatflow::measure::{joukowski_pm, log_potential, self_consistency_residual, stieltjes, trace_support, Endpoint, TraceOptions};
use heatflow::polyheat::{contour_eval, eval_log, expand_power, heat_evolve, HeatTime, PolySpec, QuadParams, ScaledCoeffPoly};
use heatflow::relevance::GridOptions;
use heatflow::roots::{find_all_roots, support_bound_check};
use heatflow::verify::rotation_identity;
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn point(r: f64) -> impl Strategy<Value = C> {
    (-r..r, -r..r).prop_map(|(a, b)| c(a, b))
}

/// Up to three zeros at least 0.2 apart with small multiplicities.
fn small_spec(max_n: u32) -> impl Strategy<Value = PolySpec> {
    (prop::collection::vec((point(2.0), 1u32..=2), 1..=3), 1..=max_n).prop_filter_map("zeros too close", |(zs, n)| {
        let (l, a): (Vec<C>, Vec<u32>) = zs.into_iter().unzip();
        let s = PolySpec::new(l, a, n).ok()?;
        (s.d() == 1 || s.delta() > 0.2).then_some(s)
    })
}

fn complex_t() -> impl Strategy<Value = C> {
    (0.1f64..3.0, -3.1f64..3.1).prop_map(|(r, th)| C::from_polar(r, th))
}

/// Dyadic times, so that sums are exact in f64.
fn dyadic_t() -> impl Strategy<Value = C> {
    (-128i32..128, -128i32..128).prop_filter_map("zero time", |(a, b)| {
        let t = c(a as f64 / 64.0, b as f64 / 64.0);
        (t.norm() > 0.05).then_some(t)
    })
}

fn max_rel_diff(a: &ScaledCoeffPoly, b: &ScaledCoeffPoly) -> f64 {
    let norm = a.coeffs().iter().map(|x| x.abs().to_f64()).fold(0.0, f64::max);
    a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x.sub(y).abs().to_f64() / norm).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn heat_flow_is_a_semigroup(s in small_spec(6), t1 in dyadic_t(), t2 in dyadic_t()) {
        let p = expand_power(&s, 160).unwrap();
        let n = s.degree();
        let two = heat_evolve(&heat_evolve(&p, HeatTime::new(t1), n).unwrap(), HeatTime::new(t2), n).unwrap();
        let one = heat_evolve(&p, HeatTime::new(t1 + t2), n).unwrap();
        prop_assert!(max_rel_diff(&one, &two) < 1e-35);
    }

    #[test]
    fn degree_leading_and_root_sum_are_preserved(s in small_spec(6), t in complex_t()) {
        let p = heat_evolve(&expand_power(&s, 192).unwrap(), HeatTime::new(t), s.degree()).unwrap();
        let n = s.degree() as usize;
        prop_assert_eq!(p.degree(), n);
        let q = p.to_c64();
        prop_assert!((q[n] - 1.0).norm() < 1e-15);
        let sum: C = s.lambdas().iter().zip(s.alphas()).map(|(l, &a)| l * (a * s.n()) as f64).sum();
        prop_assert!((q[n - 1] + sum).norm() < 1e-12 * (1.0 + sum.norm()));
        let em = find_all_roots(&p, 1e-30).unwrap();
        prop_assert_eq!(em.len(), n);
        prop_assert!((em.mean() - s.center_of_mass()).norm() < 1e-9);
    }

    #[test]
    fn zeros_stay_in_the_support_bound(s in small_spec(8), t in 0.02f64..3.0) {
        let p = heat_evolve(&expand_power(&s, 192).unwrap(), HeatTime::real(t), s.degree()).unwrap();
        let r = support_bound_check(&find_all_roots(&p, 1e-30).unwrap(), &s, t);
        prop_assert!(r.pass, "{:?}", r);
    }

    #[test]
    fn rotation_identity_holds(s in small_spec(5), t in complex_t(), z in point(2.0)) {
        let r = rotation_identity(&s, t, &[z], 192);
        prop_assert!(r.pass && r.max_residual < 1e-40, "{:?}", r);
    }

    #[test]
    fn ode_field_symmetries(pos in prop::collection::vec(point(2.0), 2..10), shift in point(3.0), scale in point(2.0)) {
        let n = pos.len();
        prop_assume!(scale.norm() > 0.1);
        let Ok(v) = ode_rhs(&pos, n, 1e-6) else { return Ok(()) };
        // pairwise antisymmetry leaves the centre of mass fixed
        let total: C = v.iter().sum();
        let mag: f64 = v.iter().map(|x| x.norm()).sum();
        prop_assert!(total.norm() < 1e-12 * mag.max(1.0));
        let conj: Vec<C> = pos.iter().map(|z| z.conj()).collect();
        let vc = ode_rhs(&conj, n, 1e-6).unwrap();
        let shifted: Vec<C> = pos.iter().map(|z| z + shift).collect();
        let vs = ode_rhs(&shifted, n, 1e-6).unwrap();
        let scaled: Vec<C> = pos.iter().map(|z| z * scale).collect();
        let vk = ode_rhs(&scaled, n, 1e-6 * scale.norm()).unwrap();
        for k in 0..n {
            let tol = 1e-12 * v[k].norm().max(1.0);
            prop_assert!((vc[k] - v[k].conj()).norm() < tol);
            prop_assert!((vs[k] - v[k]).norm() < tol);
            prop_assert!((vk[k] * scale - v[k]).norm() < tol);
        }
    }

    #[test]
    fn joukowski_product_and_sum(z in point(6.0), t in 0.05f64..5.0) {
        let (p, m) = joukowski_pm(z, t).unwrap();
        prop_assert!((p * m - t).norm() < 1e-12 * (1.0 + z.norm_sqr()));
        prop_assert!((p + m - z).norm() < 1e-12 * (1.0 + z.norm()));
        prop_assert!(p.im >= -1e-12 && m.im <= 1e-12 || z.im == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn contour_matches_heat_flow(s in small_spec(3), t in 0.2f64..2.0, z in point(2.5)) {
        let p = heat_evolve(&expand_power(&s, 192).unwrap(), HeatTime::real(t), s.degree()).unwrap();
        let (lm, ph) = eval_log(&p, z);
        prop_assume!(lm > -20.0);
        let q = QuadParams { tol: 1e-12, ..QuadParams::default() };
        let v = contour_eval(&s, t, z, &q).unwrap();
        prop_assert!(v.converged);
        prop_assert!((v.log_modulus - lm).abs() < 1e-9, "{} vs {}", v.log_modulus, lm);
        prop_assert!((v.phase - ph).norm() < 1e-9);
    }

    #[test]
    fn stieltjes_is_twice_the_z_derivative_of_the_potential(t in 0.2f64..2.0, r in 4.5f64..8.0, th in 0.0f64..6.28) {
        let s = PolySpec::new(vec![c(0.0, 1.0), c(0.0, -1.0)], vec![1, 1], 1).unwrap();
        let z = C::from_polar(r, th);
        let g = GridOptions::default();
        let tc = c(t, 0.0);
        let u = |w: C| log_potential(&s, w, tc, &g).unwrap();
        let h = 1e-4;
        let ux = (u(z + h) - u(z - h)) / (2.0 * h);
        let uy = (u(z + c(0.0, h)) - u(z - c(0.0, h))) / (2.0 * h);
        let m = stieltjes(&s, z, tc, &g).unwrap();
        // 2∂_z U = U_x - i U_y
        prop_assert!((m.m - c(ux, -uy)).norm() < 1e-7);
        prop_assert!(self_consistency_residual(&s, z, tc, m.m) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    /// Near a simple branch point the density vanishes like the square root
    /// of the distance.
    #[test]
    fn density_has_square_root_edges(t in 0.3f64..4.0) {
        let s = PolySpec::new(vec![c(0.0, 1.0), c(0.0, -1.0)], vec![1, 1], 1).unwrap();
        let lm = trace_support(&s, c(t, 0.0), &TraceOptions::default()).unwrap();
        let scale = 1.0 + t.sqrt();
        let mut fitted = 0;
        for arc in &lm.arcs {
            for (end, samples) in [(&arc.endpoints[0], arc.samples.clone()), (&arc.endpoints[1], arc.samples.iter().rev().cloned().collect())] {
                let Endpoint::Branch { z: bp, .. } = end else { continue };
                let pts: Vec<(f64, f64)> = samples
                    .iter()
                    .map(|a| ((a.z - bp).norm(), a.rho))
                    .filter(|&(d, rho)| d > 1e-4 * scale && d < 1e-2 * scale && rho > 0.0)
                    .map(|(d, rho)| (d.ln(), rho.ln()))
                    .collect();
                if pts.len() < 4 {
                    continue;
                }
                let n = pts.len() as f64;
                let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
                let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
                prop_assert!((slope - 0.5).abs() < 0.05, "slope {slope} at {bp}");
                fitted += 1;
            }
        }
        prop_assert!(fitted >= 2);
    }
}
