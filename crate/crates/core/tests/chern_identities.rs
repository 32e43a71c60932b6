//! The structural identities of the Chern connection, checked numerically on
//! sampled bundle points: derivative rules along lifts, bracket formulas of
//! lifted fields, the curvature identity suite, and the connection axioms.

use finslerb_core::chern::{chern_axiom_residuals, LiftAxis, PointGeometry};
use finslerb_core::expr::parse_expr;
use finslerb_core::finsler::{BundlePoint, FinslerModel};
use finslerb_core::gnat::ScalarProfile;
use finslerb_core::sampling;
use nalgebra::DVector;

fn models2() -> Vec<(&'static str, FinslerModel)> {
    vec![
        ("euclidean", FinslerModel::euclidean(2)),
        (
            "conformal",
            FinslerModel::conformal_euclidean(
                2,
                parse_expr("exp(x1^2 + x2^2)", &["x1", "x2"]).unwrap(),
            ),
        ),
        (
            "randers",
            FinslerModel::randers_flat(
                2,
                vec![
                    parse_expr("0.3 + 0.2*sin(x2)", &["x1", "x2"]).unwrap(),
                    parse_expr("0", &["x1", "x2"]).unwrap(),
                ],
                1.0,
            )
            .unwrap(),
        ),
    ]
}

fn points(n: usize, count: usize, seed: u64) -> Vec<BundlePoint> {
    let mut rng = sampling::rng_from_seed(seed);
    sampling::sample_points(&mut rng, n, count, &[0.5, 2.0], 0.8)
}

fn e(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })
}

#[test]
fn derivative_rules_along_lifts() {
    // radial profile f(t) = 1/(1+t) composed with the energy
    let profile = ScalarProfile::parse("1/(1+t)").unwrap();
    let names = ["x1", "x2", "u1", "u2"];
    for (tag, model) in models2() {
        for p in points(2, 6, 21) {
            let geom = PointGeometry::new(&model, &p).unwrap();
            let n = 2;
            let f_jet = profile.eval_scalar(geom.f2_jet().clone()).unwrap();
            let xf = geom
                .field_jets(&[
                    parse_expr("1 + 0.3*x2", &["x1", "x2"]).unwrap(),
                    parse_expr("x1 - 0.2", &["x1", "x2"]).unwrap(),
                ])
                .unwrap();
            let x_val = geom.section_value(&xf);
            let fprime = profile.d1(geom.r2()).unwrap();

            // horizontal derivative of a radial function vanishes
            let xh = geom.lift_h(xf.clone());
            let dh = geom.apply_to_scalar(&xh, &f_jet).value();
            assert!(dh.abs() < 1e-7, "{tag}: X^h(f o r^2) = {dh}");

            // vertical derivative is 2 f'(r^2) g(X, U)
            let xv = geom.lift_v(xf.clone());
            let dv = geom.apply_to_scalar(&xv, &f_jet).value();
            let expect = 2.0 * fprime * geom.g_dot_u(&x_val);
            assert!((dv - expect).abs() < 1e-8, "{tag}: {dv} vs {expect}");

            // sections with direction dependence
            let s1 = geom
                .section_jets(&[
                    parse_expr("u2*0.2 + 0.5", &names).unwrap(),
                    parse_expr("1 + 0.1*x1", &names).unwrap(),
                ])
                .unwrap();
            let s2 = geom
                .section_jets(&[
                    parse_expr("x2 - 0.3", &names).unwrap(),
                    parse_expr("0.4*u1", &names).unwrap(),
                ])
                .unwrap();
            let u_sec = geom.canonical_section();

            // X^h(g(s1, U)) = g(nabla_{X^h} s1, U)
            let gs1u = geom.scalar_g(&s1, &u_sec);
            let lhs = geom.apply_to_scalar(&xh, &gs1u).value();
            let rhs = geom
                .g_dot_u(&geom.section_value(&geom.covariant_section(&xh, &s1)));
            assert!((lhs - rhs).abs() < 1e-7, "{tag}: {lhs} vs {rhs}");

            // X^v(g(Y, U)) = g(Y, X) for a base field Y
            let yf = geom
                .field_jets(&[
                    parse_expr("0.2*x1", &["x1", "x2"]).unwrap(),
                    parse_expr("1", &["x1", "x2"]).unwrap(),
                ])
                .unwrap();
            let gyu = geom.scalar_g(&yf, &u_sec);
            let lhs = geom.apply_to_scalar(&xv, &gyu).value();
            let rhs = geom.g_dot(&geom.section_value(&yf), &x_val);
            assert!((lhs - rhs).abs() < 1e-8, "{tag}: {lhs} vs {rhs}");

            // X^h(g(s1,s2)) = g(nabla s1, s2) + g(s1, nabla s2)
            let g12 = geom.scalar_g(&s1, &s2);
            let lhs = geom.apply_to_scalar(&xh, &g12).value();
            let d1 = geom.section_value(&geom.covariant_section(&xh, &s1));
            let d2 = geom.section_value(&geom.covariant_section(&xh, &s2));
            let rhs = geom.g_dot(&d1, &geom.section_value(&s2))
                + geom.g_dot(&geom.section_value(&s1), &d2);
            assert!((lhs - rhs).abs() < 1e-7, "{tag}: {lhs} vs {rhs}");

            // X^v(g(s1,s2)) = g(nabla s1,s2) + g(s1,nabla s2) + 2C(X,s1,s2)
            let lhs = geom.apply_to_scalar(&xv, &g12).value();
            let d1 = geom.section_value(&geom.covariant_section(&xv, &s1));
            let d2 = geom.section_value(&geom.covariant_section(&xv, &s2));
            let rhs = geom.g_dot(&d1, &geom.section_value(&s2))
                + geom.g_dot(&geom.section_value(&s1), &d2)
                + 2.0 * geom.cartan_full(&x_val, &geom.section_value(&s1), &geom.section_value(&s2));
            assert!((lhs - rhs).abs() < 1e-7, "{tag}: {lhs} vs {rhs}");

            // and the special case X^v(g(Y, Z)) = 2 C(X, Y, Z) for base fields
            let gyz = geom.scalar_g(&yf, &xf);
            let lhs = geom.apply_to_scalar(&xv, &gyz).value();
            let rhs = 2.0
                * geom.cartan_full(&x_val, &geom.section_value(&yf), &geom.section_value(&xf));
            assert!((lhs - rhs).abs() < 1e-8, "{tag}: {lhs} vs {rhs}");
            let _ = n;
        }
    }
}

#[test]
fn bracket_formulas_of_lifts() {
    for (tag, model) in models2() {
        for p in points(2, 5, 22) {
            let geom = PointGeometry::new(&model, &p).unwrap();
            let n = 2;
            let xf = geom
                .field_jets(&[
                    parse_expr("x2^2", &["x1", "x2"]).unwrap(),
                    parse_expr("1 + 0.5*x1", &["x1", "x2"]).unwrap(),
                ])
                .unwrap();
            let yf = geom
                .field_jets(&[
                    parse_expr("0.3 - x1", &["x1", "x2"]).unwrap(),
                    parse_expr("x1*x2", &["x1", "x2"]).unwrap(),
                ])
                .unwrap();
            let xh = geom.to_coordinate_frame(&geom.lift_h(xf.clone()));
            let yh = geom.to_coordinate_frame(&geom.lift_h(yf.clone()));
            let xv = geom.to_coordinate_frame(&geom.lift_v(xf.clone()));
            let yv = geom.to_coordinate_frame(&geom.lift_v(yf.clone()));

            // [X^h, Y^h] = [X,Y]^h - v{R(X,Y)U}
            let (bx, bu) = geom.bracket_coordinate((&xh.0, &xh.1), (&yh.0, &yh.1));
            let bracket_base: Vec<f64> = (0..n)
                .map(|k| {
                    (0..n)
                        .map(|j| {
                            xf[j].value() * yf[k].derivative(j).value()
                                - yf[j].value() * xf[k].derivative(j).value()
                        })
                        .sum()
                })
                .collect();
            let ru = geom.curv_apply(
                &geom.section_value(&xf),
                &geom.section_value(&yf),
                geom.u(),
            );
            for k in 0..n {
                assert!((bx[k].value() - bracket_base[k]).abs() < 1e-7, "{tag} x-part");
                // u-part of [X,Y]^h is -N [X,Y]; v{-R(X,Y)U} adds -R(X,Y)U
                let mut expect = -ru[k];
                for j in 0..n {
                    expect -= geom.nconn()[(k, j)] * bracket_base[j];
                }
                assert!(
                    (bu[k].value() - expect).abs() < 1e-5,
                    "{tag} u-part: {} vs {expect}",
                    bu[k].value()
                );
            }

            // [X^h, Y^v] = v{nabla_{X^h} Y + Lbar(X, Y)}
            let (bx, bu) = geom.bracket_coordinate((&xh.0, &xh.1), (&yv.0, &yv.1));
            let nabla = geom.section_value(&geom.covariant_section(&geom.lift_h(xf.clone()), &yf));
            let lbar = geom.landsberg_apply(&geom.section_value(&xf), &geom.section_value(&yf));
            for k in 0..n {
                assert!(bx[k].value().abs() < 1e-9, "{tag}: horizontal part should vanish");
                let expect = nabla[k] + lbar[k];
                assert!(
                    (bu[k].value() - expect).abs() < 1e-5,
                    "{tag}: {} vs {expect}",
                    bu[k].value()
                );
            }

            // [X^v, Y^v] = 0
            let (bx, bu) = geom.bracket_coordinate((&xv.0, &xv.1), (&yv.0, &yv.1));
            for k in 0..n {
                assert!(bx[k].value().abs() < 1e-12 && bu[k].value().abs() < 1e-12, "{tag}");
            }
        }
    }
}

#[test]
fn curvature_identity_suite() {
    // non-Berwald Randers so the Cartan-coupled identities are non-trivial
    let model = FinslerModel::randers_flat(
        2,
        vec![
            parse_expr("0.3 + 0.2*sin(x2)", &["x1", "x2"]).unwrap(),
            parse_expr("0", &["x1", "x2"]).unwrap(),
        ],
        1.0,
    )
    .unwrap();
    for p in points(2, 8, 23) {
        let geom = PointGeometry::new(&model, &p).unwrap();
        let n = 2;
        let u = geom.u().clone();
        for i in 0..n {
            for j in 0..n {
                let (s1, s2) = (e(n, i), e(n, j));
                // g(R(s1,s2)U, U) = 0
                assert!(geom.curv_low(&s1, &s2, &u, &u).abs() < 1e-9);
                // symmetry of g(R(U,s1)U, s2)
                let sym = geom.curv_low(&u, &s1, &u, &s2) - geom.curv_low(&u, &s2, &u, &s1);
                assert!(sym.abs() < 1e-9);
                for k in 0..n {
                    let s3 = e(n, k);
                    // first Bianchi
                    let b = geom.curv_apply(&s1, &s2, &s3)
                        + geom.curv_apply(&s2, &s3, &s1)
                        + geom.curv_apply(&s3, &s1, &s2);
                    assert!(b.abs().max() < 1e-8, "bianchi {}", b.abs().max());
                    for l in 0..n {
                        let s4 = e(n, l);
                        // skew identity with the Cartan correction
                        let skew = geom.curv_low(&s1, &s2, &s3, &s4)
                            + geom.curv_low(&s1, &s2, &s4, &s3)
                            + 2.0 * geom.cartan_full(&s3, &s4, &geom.curv_apply(&s1, &s2, &u));
                        assert!(skew.abs() < 1e-8, "skew {skew}");
                        // pair-symmetry defect
                        let lhs =
                            geom.curv_low(&s1, &s2, &s3, &s4) - geom.curv_low(&s3, &s4, &s1, &s2);
                        let rhs = geom.cartan_full(&s1, &s2, &geom.curv_apply(&s3, &s4, &u))
                            - geom.cartan_full(&s3, &s4, &geom.curv_apply(&s1, &s2, &u))
                            - geom.cartan_full(&s3, &s2, &geom.curv_apply(&s4, &s1, &u))
                            - geom.cartan_full(&s4, &s1, &geom.curv_apply(&s3, &s2, &u))
                            - geom.cartan_full(&s2, &s4, &geom.curv_apply(&s1, &s3, &u))
                            - geom.cartan_full(&s1, &s3, &geom.curv_apply(&s2, &s4, &u));
                        assert!((lhs - rhs).abs() < 1e-8, "pair defect {}", lhs - rhs);
                    }
                }
            }
        }
    }
}

#[test]
fn axiom_residuals_on_sampled_points() {
    let names = ["x1", "x2", "u1", "u2"];
    for (tag, model) in models2() {
        for p in points(2, 6, 24) {
            let geom = PointGeometry::new(&model, &p).unwrap();
            let s1 = geom
                .section_jets(&[
                    parse_expr("1 + 0.2*x2 + 0.1*u1", &names).unwrap(),
                    parse_expr("x1", &names).unwrap(),
                ])
                .unwrap();
            let s2 = geom
                .section_jets(&[
                    parse_expr("0.4 - 0.3*u2", &names).unwrap(),
                    parse_expr("1 - 0.3*x1", &names).unwrap(),
                ])
                .unwrap();
            for axis in [LiftAxis::Hor(0), LiftAxis::Hor(1), LiftAxis::Ver(0), LiftAxis::Ver(1)] {
                let (compat, torsion) = chern_axiom_residuals(&geom, &s1, &s2, axis);
                assert!(compat < 1e-6, "{tag} compat {compat}");
                assert!(torsion < 1e-6, "{tag} torsion {torsion}");
            }
        }
    }
}
