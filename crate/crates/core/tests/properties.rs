use proptest::prelude::*;
use tsgeom::contact::builtin_factor;
use tsgeom::expr::{parse, DiffMode, Expr};
use tsgeom::geom::{exterior_derivative, lie_bracket, sample_points, wedge, KForm, MetricField, VectorField};
use tsgeom::harmonic::{codifferential_in_frame, ddc_function, p_in_frame};
use tsgeom::jet::{Differentiable, Jet1, Jet2, Scalar};
use tsgeom::product::{build_product, structure_report};
use tsgeom::riemann::{covariant_derivative_vector, curvature, curvature_by_definition, values, MetricAt};

const COORDS: [&str; 3] = ["x", "y", "z"];

fn names() -> Vec<String> {
    COORDS.iter().map(|s| s.to_string()).collect()
}

/// Smooth expressions over `x, y, z` that stay finite on `[-1, 1]^3`.
fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(COORDS.to_vec()).prop_map(str::to_string),
        (-2.0f64..2.0).prop_map(|c| format!("{c:.3}")),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} * {b}")),
            inner.clone().prop_map(|a| format!("sin({a})")),
            inner.clone().prop_map(|a| format!("cos({a})")),
            inner.clone().prop_map(|a| format!("exp(sin({a}))")),
            inner.clone().prop_map(|a| format!("({a})^2")),
            inner.clone().prop_map(|a| format!("{a} / (2 + ({a})^2)")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.prop_map(|a| format!("log(2 + sin({a}))")),
        ]
    })
}

fn expr() -> impl Strategy<Value = Expr> {
    smooth_expr().prop_map(|s| parse(&s, &names()).expect("generated expressions parse"))
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3)
}

fn polynomial() -> impl Strategy<Value = Expr> {
    (prop::collection::vec(-1.0f64..1.0, 4), prop::sample::select(vec![0usize, 1, 2]), prop::sample::select(vec![0usize, 1, 2]))
        .prop_map(|(c, i, j)| {
            let (a, b) = (COORDS[i], COORDS[j]);
            parse(
                &format!("{} + {}*{a} + {}*{a}*{b} + {}*{b}*{b}*{a}", c[0], c[1], c[2], c[3]),
                &names(),
            )
            .unwrap()
        })
}

fn jets(es: &[Expr], p: &[f64]) -> Vec<Jet2> {
    es.iter().map(|e| e.jet(p).unwrap()).collect()
}

fn scale(j: &Jet2) -> f64 {
    1.0 + j.grad.iter().chain(&j.hess).fold(j.value.abs(), |m, x| m.max(x.abs()))
}

/// A metric `2δ + small symmetric perturbation`, positive definite on the box.
fn metric() -> impl Strategy<Value = MetricField> {
    prop::collection::vec(expr(), 6).prop_map(|es| {
        let pert = |k: usize| Expr::scale(0.1, Expr::unary(tsgeom::expr::UnaryOp::Sin, es[k].clone()));
        MetricField::symmetric(3, |i, j| {
            let k = match (i.min(j), i.max(j)) {
                (0, 0) => 0,
                (1, 1) => 1,
                (2, 2) => 2,
                (0, 1) => 3,
                (0, 2) => 4,
                _ => 5,
            };
            if i == j {
                Expr::add(Expr::constant(2.0), pert(k))
            } else {
                pert(k)
            }
        })
    })
}

fn field() -> impl Strategy<Value = VectorField> {
    prop::collection::vec(expr(), 3).prop_map(VectorField::new)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jets_match_richardson_differences(e in expr(), p in point()) {
        let j = e.jet(&p).unwrap();
        let f = e.jet_fd(&p, 1e-3).unwrap();
        let s = scale(&j);
        prop_assert!((j.value - f.value).abs() <= 1e-12 * s);
        for (a, b) in j.grad.iter().zip(&f.grad) {
            prop_assert!((a - b).abs() <= 1e-7 * s, "gradient {a} vs {b}");
        }
        for (a, b) in j.hess.iter().zip(&f.hess) {
            prop_assert!((a - b).abs() <= 1e-7 * s, "hessian {a} vs {b}");
        }
    }

    #[test]
    fn render_round_trips(e in expr()) {
        let text = e.render(&names());
        let back = parse(&text, &names()).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.render(&names()), text);
    }

    #[test]
    fn d_squared_vanishes(a in prop::collection::vec(expr(), 3), f in expr(), p in point()) {
        let one = KForm::from_one_form(jets(&a, &p));
        let dd = exterior_derivative(&exterior_derivative(&one).unwrap()).unwrap();
        let s = one.comps.iter().map(scale).fold(1.0, f64::max);
        prop_assert!(max_abs(&dd.comps) <= 1e-12 * s);
        let zero = KForm::scalar(f.jet(&p).unwrap(), 3);
        let dd = exterior_derivative(&exterior_derivative(&zero).unwrap()).unwrap();
        prop_assert!(max_abs(&dd.comps) <= 1e-12 * scale(&zero.comps[0]));
    }

    #[test]
    fn exterior_derivative_is_a_derivation(
        a in prop::collection::vec(expr(), 3),
        b in prop::collection::vec(expr(), 3),
        f in expr(),
        p in point(),
    ) {
        let alpha = KForm::from_one_form(jets(&a, &p));
        let beta = KForm::from_one_form(jets(&b, &p));
        let lhs = exterior_derivative(&wedge(&alpha, &beta).unwrap()).unwrap();
        let rhs = wedge(&exterior_derivative(&alpha).unwrap(), &beta.lower())
            .unwrap()
            .minus(&wedge(&alpha.lower(), &exterior_derivative(&beta).unwrap()).unwrap());
        let diff = lhs.minus(&rhs);
        let s = alpha.comps.iter().chain(&beta.comps).map(scale).fold(1.0, f64::max);
        prop_assert!(diff.comps.iter().all(|c: &Jet1| c.value.abs() <= 1e-8 * s * s));

        let g = KForm::scalar(f.jet(&p).unwrap(), 3);
        let lhs = exterior_derivative(&wedge(&g, &alpha).unwrap()).unwrap();
        let rhs = wedge(&exterior_derivative(&g).unwrap(), &alpha.lower())
            .unwrap()
            .plus(&wedge(&g.lower(), &exterior_derivative(&alpha).unwrap()).unwrap());
        let s = s.max(scale(&g.comps[0]));
        prop_assert!(lhs.minus(&rhs).comps.iter().all(|c| c.value.abs() <= 1e-8 * s * s));
    }

    #[test]
    fn bracket_satisfies_jacobi(
        x in prop::collection::vec(polynomial(), 3),
        y in prop::collection::vec(polynomial(), 3),
        z in prop::collection::vec(polynomial(), 3),
        p in point(),
    ) {
        let (xs, ys, zs) = (jets(&x, &p), jets(&y, &p), jets(&z, &p));
        let low = |v: &[Jet2]| v.iter().map(|c| c.lower()).collect::<Vec<Jet1>>();
        let cyc = |a: &[Jet2], b: &[Jet2], c: &[Jet2]| lie_bracket(&lie_bracket(a, b), &low(c));
        let s1 = cyc(&xs, &ys, &zs);
        let s2 = cyc(&ys, &zs, &xs);
        let s3 = cyc(&zs, &xs, &ys);
        for k in 0..3 {
            prop_assert!((s1[k] + s2[k] + s3[k]).abs() < 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn levi_civita_identities(g in metric(), x in field(), y in field(), z in field(), p in point()) {
        let mode = DiffMode::Jet;
        let m = MetricAt::from_field(&g, &p, mode).unwrap();
        let (xs, ys, zs) = (x.at(&p, mode).unwrap(), y.at(&p, mode).unwrap(), z.at(&p, mode).unwrap());
        let s = [&xs, &ys, &zs].iter().flat_map(|v| v.iter()).map(scale).fold(1.0, f64::max);

        // X g(Y, Z) = g(∇_X Y, Z) + g(Y, ∇_X Z)
        let mut gyz = Jet2::zero(3);
        for i in 0..3 {
            for j in 0..3 {
                gyz = gyz.plus(&m.g[i * 3 + j].times(&ys[i]).times(&zs[j]));
            }
        }
        let xv = values(&xs);
        let lhs: f64 = (0..3).map(|i| xv[i] * gyz.grad[i]).sum();
        let nxy = covariant_derivative_vector(&g, &x, &y, &p, mode).unwrap();
        let nxz = covariant_derivative_vector(&g, &x, &z, &p, mode).unwrap();
        let rhs = m.inner(&nxy, &values(&zs)) + m.inner(&values(&ys), &nxz);
        prop_assert!((lhs - rhs).abs() < 1e-8 * s * s * s);

        // ∇_X Y − ∇_Y X = [X, Y]
        let nyx = covariant_derivative_vector(&g, &y, &x, &p, mode).unwrap();
        let br = tsgeom::geom::lie_bracket_at(&x, &y, &p, mode).unwrap();
        for k in 0..3 {
            prop_assert!((nxy[k] - nyx[k] - br[k]).abs() < 1e-8 * s * s);
        }

        // First Bianchi, and Γ-assembled curvature against the definition.
        let r = |a: &VectorField, b: &VectorField, c: &VectorField| curvature(&g, a, b, c, &p, mode).unwrap();
        let b1 = r(&x, &y, &z);
        let b2 = r(&y, &z, &x);
        let b3 = r(&z, &x, &y);
        let s3 = s * s * s;
        for k in 0..3 {
            prop_assert!((b1[k] + b2[k] + b3[k]).abs() < 1e-7 * s3);
        }
        let def = curvature_by_definition(&g, &x, &y, &z, &p, mode).unwrap();
        for k in 0..3 {
            prop_assert!((b1[k] - def[k]).abs() < 1e-7 * s3, "{} vs {}", b1[k], def[k]);
        }
    }

    #[test]
    fn jet_and_difference_modes_agree_on_curvature(g in metric(), p in point()) {
        let e = |k: usize| VectorField::coordinate(k, 3);
        let fd = DiffMode::FiniteDiff { step: 1e-3 };
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (0, 1, 1)] {
            let a = curvature(&g, &e(i), &e(j), &e(k), &p, DiffMode::Jet).unwrap();
            let b = curvature(&g, &e(i), &e(j), &e(k), &p, fd).unwrap();
            for c in 0..3 {
                prop_assert!((a[c] - b[c]).abs() < 1e-5);
            }
        }
    }
}

const BUILTINS: [&str; 3] = ["sasakian_heisenberg", "kenmotsu_warped", "cosymplectic_flat"];

fn ab() -> impl Strategy<Value = (f64, f64)> {
    (-3.0f64..3.0, prop_oneof![-3.0f64..-0.3, 0.3f64..3.0])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn codifferential_and_p_are_frame_independent(
        i in 0usize..3,
        k in 0usize..3,
        (a, b) in ab(),
        seed in any::<u64>(),
    ) {
        let p = build_product(&builtin_factor(BUILTINS[i]).unwrap(), &builtin_factor(BUILTINS[k]).unwrap(), a, b).unwrap();
        let pt = &sample_points(&p.chart, 1, seed)[0];
        let c = p.at(pt, DiffMode::Jet).unwrap();
        let (f0, f1) = (c.adapted_frame().unwrap(), c.rotated_frame(seed).unwrap());
        let r = c.metric.curvature_tensor();
        let d0 = codifferential_in_frame(&c, &f0);
        let d1 = codifferential_in_frame(&c, &f1);
        let p0 = p_in_frame(&c, &r, &f0);
        let p1 = p_in_frame(&c, &r, &f1);
        let dd: Vec<f64> = d0.iter().zip(&d1).map(|(x, y)| x - y).collect();
        let dp: Vec<f64> = p0.iter().zip(&p1).map(|(x, y)| x - y).collect();
        prop_assert!(c.metric.vector_norm(&dd) < 1e-7);
        prop_assert!(c.metric.endo_norm(&dp) < 1e-7);
    }

    #[test]
    fn product_structure_is_hermitian(i in 0usize..3, k in 0usize..3, (a, b) in ab(), seed in any::<u64>()) {
        let p = build_product(&builtin_factor(BUILTINS[i]).unwrap(), &builtin_factor(BUILTINS[k]).unwrap(), a, b).unwrap();
        let pts = sample_points(&p.chart, 4, seed);
        let r = structure_report(&p, &pts, 1e-9, DiffMode::Jet);
        for name in ["j_squared", "hermitian", "xi2_length", "frame_gram"] {
            let s = r.identity(name).unwrap();
            prop_assert!(s.max < 1e-9, "{name}: {}", s.max);
        }
    }

    #[test]
    fn ddc_of_functions_is_j_invariant(f in expr(), (a, b) in ab(), seed in any::<u64>()) {
        let p = build_product(&builtin_factor("sasakian_heisenberg").unwrap(), &builtin_factor("kenmotsu_warped").unwrap(), a, b)
            .unwrap();
        let f = f.shift_coords(1);
        let pt = &sample_points(&p.chart, 1, seed)[0];
        let (v, conj) = ddc_function(&p, &f, pt, DiffMode::Jet).unwrap();
        let s = 1.0 + v.sup_norm();
        prop_assert!(v.minus(&conj).sup_norm() < 1e-7 * s);
    }

    #[test]
    fn reports_are_deterministic(i in 0usize..3, k in 0usize..3, (a, b) in ab(), seed in any::<u64>()) {
        let p = build_product(&builtin_factor(BUILTINS[i]).unwrap(), &builtin_factor(BUILTINS[k]).unwrap(), a, b).unwrap();
        let pts = sample_points(&p.chart, 6, seed);
        prop_assert_eq!(&pts, &sample_points(&p.chart, 6, seed));
        let r1 = structure_report(&p, &pts, 1e-9, DiffMode::Jet);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let r2 = pool.install(|| structure_report(&p, &pts, 1e-9, DiffMode::Jet));
        prop_assert_eq!(r1, r2);
    }
}
