//! Oracle equivalence for the five closed-form Lie derivatives, plus verdict
//! soundness on fresh samples.

use finslerb_core::chern::PointGeometry;
use finslerb_core::expr::parse_expr;
use finslerb_core::finsler::FinslerModel;
use finslerb_core::gnat::{evaluate_g, FNaturalSpec};
use finslerb_core::sampling;
use finslerb_core::symmetry::*;

fn models() -> Vec<(&'static str, FinslerModel)> {
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

#[test]
fn closed_forms_match_numeric_oracle() {
    let mut rng = sampling::rng_from_seed(41);
    let points = sampling::sample_points(&mut rng, 2, 3, &[0.5, 2.0], 0.8);
    let xi = VectorFieldOnM::new(sampling::random_vector_field(&mut rng, 2));
    let endo = EndoSection::new(sampling::random_skew_endo(&mut rng, 2));
    let mut specs = vec![
        ("sasaki".to_string(), FNaturalSpec::sasaki()),
        ("cheeger_gromoll".to_string(), FNaturalSpec::cheeger_gromoll()),
        ("kk_random".to_string(), sampling::random_kk_spec(&mut rng)),
    ];
    specs.push(("kk_random_2".to_string(), sampling::random_kk_spec(&mut rng)));
    for (mname, model) in models() {
        for (sname, spec) in &specs {
            for p in &points {
                let geom = PointGeometry::new(&model, p).unwrap();
                let cases: Vec<(&str, LieValue, BundleField)> = vec![
                    (
                        "horizontal",
                        lie_horizontal(spec, &geom, &xi).unwrap(),
                        BundleField::Horizontal(xi.clone()),
                    ),
                    (
                        "vertical",
                        lie_vertical(spec, &geom, &xi).unwrap(),
                        BundleField::Vertical(xi.clone()),
                    ),
                    (
                        "complete",
                        lie_complete(spec, &geom, &xi).unwrap(),
                        BundleField::Complete(xi.clone()),
                    ),
                    ("iota", lie_iota(spec, &geom, &endo).unwrap(), BundleField::Iota(endo.clone())),
                    ("tau", lie_tau(spec, &geom, &endo).unwrap(), BundleField::Tau(endo.clone())),
                ];
                for (op, closed, field) in cases {
                    let oracle = lie_numeric_oracle(spec, &geom, &field).unwrap();
                    let dev = lie_deviation(&closed, &oracle);
                    assert!(dev < 1e-5, "{mname} {sname} {op}: deviation {dev:.3e}");
                    // hh and vv blocks are symmetric
                    assert!((closed.hh.clone() - closed.hh.transpose()).abs().max() < 1e-10);
                    assert!((closed.vv.clone() - closed.vv.transpose()).abs().max() < 1e-10);
                }
            }
        }
    }
}

#[test]
fn killing_verdicts_are_sound_on_fresh_samples() {
    // whenever a verdict says Killing, the Lie blocks vanish on new points
    let m = FinslerModel::euclidean(2);
    let spec = FNaturalSpec::sasaki();
    let mut rng = sampling::rng_from_seed(42);
    let decide = sampling::sample_points(&mut rng, 2, 8, &[0.5, 2.0], 0.8);
    let fresh = sampling::sample_points(&mut rng, 2, 20, &[0.7, 1.7], 0.9);
    let rotation = VectorFieldOnM::parse(&["-x2", "x1"], 2).unwrap();
    let v = verdict_horizontal(&spec, &m, &rotation, &decide, 1e-6).unwrap();
    assert_eq!(v.kind, VerdictKind::Killing);
    for p in &fresh {
        let geom = PointGeometry::new(&m, p).unwrap();
        let blocks = lie_horizontal(&spec, &geom, &rotation).unwrap();
        assert!(blocks.max_abs() < 1e-6);
    }
}

#[test]
fn conformal_verdict_factor_matches_blocks() {
    // conformal case: L_W G = 2 theta G on fresh samples with the closed-form
    // theta
    let m = FinslerModel::euclidean(2);
    let spec = FNaturalSpec::kk_type(
        finslerb_core::gnat::ScalarProfile::parse("exp(t)").unwrap(),
        finslerb_core::gnat::ScalarProfile::parse("exp(t)").unwrap(),
        finslerb_core::gnat::ScalarProfile::constant(0.0),
        finslerb_core::gnat::ScalarProfile::constant(0.0),
    );
    let xi = VectorFieldOnM::parse(&["0.4", "-0.9"], 2).unwrap();
    let mut rng = sampling::rng_from_seed(43);
    let decide = sampling::sample_points(&mut rng, 2, 8, &[0.5, 2.0], 0.8);
    let fresh = sampling::sample_points(&mut rng, 2, 12, &[0.6, 1.4], 0.8);
    let v = verdict_vertical(&spec, &m, &xi, &decide, 1e-6).unwrap();
    assert_eq!(v.kind, VerdictKind::Conformal);
    for p in &fresh {
        let geom = PointGeometry::new(&m, p).unwrap();
        let blocks = lie_vertical(&spec, &geom, &xi).unwrap();
        let th = theta_value(&v.theta, &spec, &geom).unwrap();
        let g = evaluate_g(&spec, &geom).unwrap();
        let res = (&blocks.hh - 2.0 * th * &g.ghh)
            .abs()
            .max()
            .max((&blocks.hv - 2.0 * th * &g.ghv).abs().max())
            .max((&blocks.vv - 2.0 * th * &g.gvv).abs().max());
        assert!(res < 1e-6, "factor residual {res:.3e}");
    }
}
