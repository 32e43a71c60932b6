//! The named verification suites. Each suite evaluates a family of checks on
//! deterministic samples drawn from the config's seed and returns a report;
//! a check that cannot be evaluated is recorded as an error instead of
//! aborting the run.

use std::fmt;

use nalgebra::DVector;

use finslerb_core::chern::{
    chern_axiom_residuals, covariant_derivative, second_covariant_derivative, LiftAxis,
    PointGeometry,
};
use finslerb_core::connection2::{
    closed_form_covariant, divergence_geodesic, divergence_geodesic_density,
    fiber_geodesic_check, koszul_connection, koszul_covariant, pq_tensors, FiberVerdict,
};
use finslerb_core::finsler::BundlePoint;
use finslerb_core::gnat::{
    classify_regularity, default_t_grid, determinant_consistency, evaluate_g,
    RegularityClass,
};
use finslerb_core::sampling;
use finslerb_core::symmetry::{
    classify_liouville, geodesic_conformal_check, lie_complete, lie_deviation, lie_horizontal,
    lie_iota, lie_numeric_oracle, lie_tau, lie_vertical, tau_conformal_check, theta_value,
    verdict_complete_cg, verdict_complete_sasaki, verdict_horizontal, verdict_iota,
    verdict_vertical, BundleField, EndoSection, VectorFieldOnM, VerdictKind,
};

use crate::config::RunConfig;
use crate::report::{CheckRecord, Environment, Report, Witness};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Tensors,
    Axioms,
    LeviCivita,
    Incompressibility,
    Fibers,
    Symmetry,
    Liouville,
    All,
}

impl Suite {
    pub fn parse(name: &str) -> Option<Suite> {
        match name {
            "tensors" => Some(Suite::Tensors),
            "axioms" => Some(Suite::Axioms),
            "levi_civita" => Some(Suite::LeviCivita),
            "incompressibility" => Some(Suite::Incompressibility),
            "fibers" => Some(Suite::Fibers),
            "symmetry" => Some(Suite::Symmetry),
            "liouville" => Some(Suite::Liouville),
            "all" => Some(Suite::All),
            _ => None,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Suite::Tensors => "tensors",
            Suite::Axioms => "axioms",
            Suite::LeviCivita => "levi_civita",
            Suite::Incompressibility => "incompressibility",
            Suite::Fibers => "fibers",
            Suite::Symmetry => "symmetry",
            Suite::Liouville => "liouville",
            Suite::All => "all",
        };
        f.write_str(name)
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    points: Vec<BundlePoint>,
    checks: Vec<CheckRecord>,
}

/// Accumulates the max residual and the worst sample of one check.
struct Gauge {
    residual: f64,
    witness: Option<BundlePoint>,
    samples: usize,
}

impl Gauge {
    fn new() -> Gauge {
        Gauge { residual: 0.0, witness: None, samples: 0 }
    }

    fn feed(&mut self, point: &BundlePoint, value: f64) {
        self.samples += 1;
        if value.abs() > self.residual || self.witness.is_none() {
            self.residual = value.abs();
            self.witness = Some(point.clone());
        }
    }
}

impl Runner<'_> {
    fn tol(&self, id: &str, default: f64) -> f64 {
        self.cfg.tolerances.get(id).copied().unwrap_or(default)
    }

    fn push(&mut self, id: &str, anchor: &str, gauge: Gauge, default_tol: f64) {
        let tol = self.tol(id, default_tol);
        let verdict = if gauge.residual < tol { "pass" } else { "fail" };
        self.checks.push(CheckRecord {
            id: id.to_string(),
            anchor: anchor.to_string(),
            samples: gauge.samples,
            residual: gauge.residual,
            tol,
            verdict: verdict.to_string(),
            witness: gauge.witness.map(|p| Witness { x: p.x, u: p.u }),
        });
    }

    fn push_info(&mut self, id: &str, anchor: &str, samples: usize, kind: &str) {
        self.checks.push(CheckRecord {
            id: id.to_string(),
            anchor: anchor.to_string(),
            samples,
            residual: 0.0,
            tol: 0.0,
            verdict: format!("info:{kind}"),
            witness: None,
        });
    }

    fn push_error(&mut self, id: &str, anchor: &str, message: &str) {
        self.checks.push(CheckRecord {
            id: id.to_string(),
            anchor: format!("{anchor} [error: {message}]"),
            samples: 0,
            residual: -1.0,
            tol: 0.0,
            verdict: "error".to_string(),
            witness: None,
        });
    }

    fn guarded<F>(&mut self, id: &str, anchor: &str, default_tol: f64, body: F)
    where
        F: FnOnce(&Runner<'_>, &mut Gauge) -> Result<(), finslerb_core::Error>,
    {
        let mut gauge = Gauge::new();
        match body(self, &mut gauge) {
            Ok(()) => self.push(id, anchor, gauge, default_tol),
            Err(e) => self.push_error(id, anchor, &e.to_string()),
        }
    }

    fn fields(&self) -> (VectorFieldOnM, EndoSection) {
        let n = self.cfg.model.dim();
        let mut rng = sampling::rng_from_seed(self.cfg.seed ^ 0x5eed);
        let xi = self
            .cfg
            .xi
            .clone()
            .unwrap_or_else(|| VectorFieldOnM::new(sampling::random_vector_field(&mut rng, n)));
        let endo = self
            .cfg
            .endo
            .clone()
            .unwrap_or_else(|| EndoSection::new(sampling::random_skew_endo(&mut rng, n)));
        (xi, endo)
    }
}

fn basis(n: usize, i: usize) -> DVector<f64> {
    DVector::from_fn(n, |r, _| if r == i { 1.0 } else { 0.0 })
}

/// Run one suite (or all of them) against a configuration.
pub fn run_suite(cfg: &RunConfig, suite: Suite) -> Result<Report, CliError> {
    let mut rng = sampling::rng_from_seed(cfg.seed);
    let points =
        sampling::sample_points(&mut rng, cfg.model.dim(), cfg.points, &cfg.shells, cfg.x_box);
    let mut runner = Runner { cfg, points, checks: Vec::new() };
    match suite {
        Suite::Tensors => tensors(&mut runner),
        Suite::Axioms => axioms(&mut runner),
        Suite::LeviCivita => levi_civita(&mut runner),
        Suite::Incompressibility => incompressibility(&mut runner),
        Suite::Fibers => fibers(&mut runner),
        Suite::Symmetry => symmetry(&mut runner),
        Suite::Liouville => liouville(&mut runner),
        Suite::All => {
            tensors(&mut runner);
            axioms(&mut runner);
            levi_civita(&mut runner);
            incompressibility(&mut runner);
            fibers(&mut runner);
            symmetry(&mut runner);
            liouville(&mut runner);
        }
    }
    Ok(Report {
        environment: Environment {
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            suite: suite.to_string(),
            dimension: cfg.model.dim(),
            rng: "chacha8".to_string(),
            tolerances: cfg.tolerances.clone(),
        },
        checks: runner.checks,
    })
}

fn tensors(r: &mut Runner<'_>) {
    let model = &r.cfg.model;
    let n = model.dim();
    let points = r.points.clone();

    r.guarded("energy.homogeneity", "F^2(x, s u) = s^2 F^2(x, u)", 1e-9, |r, g| {
        for p in &points {
            let e = finslerb_core::finsler::energy(&r.cfg.model, p)?;
            for s in [0.5, 2.0, 3.0] {
                let scaled = BundlePoint::new(
                    p.x.clone(),
                    p.u.iter().map(|v| s * v).collect(),
                )?;
                let es = finslerb_core::finsler::energy(&r.cfg.model, &scaled)?;
                g.feed(p, (es - s * s * e) / e.max(1.0));
            }
        }
        Ok(())
    });

    r.guarded("metric.zero_homogeneity", "g at (x, s u) equals g at (x, u)", 1e-8, |r, g| {
        for p in &points {
            let m0 = finslerb_core::finsler::fundamental_tensor(&r.cfg.model, p)?;
            for s in [0.5, 2.0] {
                let scaled =
                    BundlePoint::new(p.x.clone(), p.u.iter().map(|v| s * v).collect())?;
                let ms = finslerb_core::finsler::fundamental_tensor(&r.cfg.model, &scaled)?;
                g.feed(p, (ms.g - &m0.g).abs().max());
            }
        }
        Ok(())
    });

    r.guarded("metric.inverse", "g g^-1 = identity", 1e-10, |r, g| {
        for p in &points {
            let m = finslerb_core::finsler::fundamental_tensor(&r.cfg.model, p)?;
            let resid =
                (&m.g * &m.ginv - nalgebra::DMatrix::<f64>::identity(n, n)).abs().max();
            g.feed(p, resid);
        }
        Ok(())
    });

    r.guarded("metric.energy", "g(u, u) = F^2", 1e-10, |r, g| {
        for p in &points {
            let m = finslerb_code_energy(&r.cfg.model, p)?;
            g.feed(p, m);
        }
        Ok(())
    });

    r.guarded("cartan.direction", "C(u, ., .) = 0", 1e-8, |r, g| {
        for p in &points {
            let geom = PointGeometry::with_order(&r.cfg.model, p, 3)?;
            let u = geom.u().clone();
            for j in 0..n {
                for k in 0..n {
                    g.feed(p, geom.cartan_full(&u, &basis(n, j), &basis(n, k)));
                }
            }
        }
        Ok(())
    });

    r.guarded("cartan.homogeneity", "C at (x, s u) equals C/s at (x, u)", 1e-8, |r, g| {
        for p in &points {
            let c0 = finslerb_core::finsler::cartan_tensor(&r.cfg.model, p)?;
            let scaled = BundlePoint::new(p.x.clone(), p.u.iter().map(|v| 2.0 * v).collect())?;
            let c2 = finslerb_core::finsler::cartan_tensor(&r.cfg.model, &scaled)?;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        g.feed(p, c2[(i, j, k)] - c0[(i, j, k)] / 2.0);
                    }
                }
            }
        }
        Ok(())
    });

    r.guarded("cartan.contraction", "g_lk Cbar^k_ij = C_lij", 1e-10, |r, g| {
        for p in &points {
            let geom = PointGeometry::with_order(&r.cfg.model, p, 3)?;
            for l in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        let lowered: f64 = (0..n)
                            .map(|k| geom.g()[(l, k)] * geom.cartan_bar()[(k, i, j)])
                            .sum();
                        g.feed(p, lowered - geom.cartan()[(l, i, j)]);
                    }
                }
            }
        }
        Ok(())
    });

    r.guarded("connection.symmetry", "Gamma^k_ij = Gamma^k_ji", 1e-10, |r, g| {
        for p in &points {
            let geom = PointGeometry::with_order(&r.cfg.model, p, 3)?;
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        g.feed(p, geom.gamma()[(k, i, j)] - geom.gamma()[(k, j, i)]);
                    }
                }
            }
        }
        Ok(())
    });

    r.guarded("connection.nonlinear", "N^i_j = Gamma^i_jk u^k", 1e-8, |r, g| {
        for p in &points {
            let geom = PointGeometry::with_order(&r.cfg.model, p, 3)?;
            for i in 0..n {
                for j in 0..n {
                    let from_gamma: f64 =
                        (0..n).map(|k| geom.gamma()[(i, j, k)] * p.u[k]).sum();
                    g.feed(p, geom.nconn()[(i, j)] - from_gamma);
                }
            }
        }
        Ok(())
    });

    r.guarded("connection.spray_homogeneity", "G^i(x, 2u) = 4 G^i(x, u)", 1e-8, |r, g| {
        for p in &points {
            let geom = PointGeometry::with_order(&r.cfg.model, p, 3)?;
            let scaled = BundlePoint::new(p.x.clone(), p.u.iter().map(|v| 2.0 * v).collect())?;
            let geom2 = PointGeometry::with_order(&r.cfg.model, &scaled, 3)?;
            for i in 0..n {
                g.feed(p, (geom2.spray()[i] - 4.0 * geom.spray()[i]) / geom.r2().max(1.0));
            }
        }
        Ok(())
    });

    r.guarded("curvature.antisymmetry", "R^l_kij = -R^l_kji", 1e-10, |r, g| {
        for p in &points {
            let geom = PointGeometry::with_order(&r.cfg.model, p, 4)?;
            let rt = &geom.curvature().r;
            for l in 0..n {
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            g.feed(p, rt[(l, k, i, j)] + rt[(l, k, j, i)]);
                        }
                    }
                }
            }
        }
        Ok(())
    });

    r.guarded("landsberg.symmetry", "L_ijk totally symmetric", 1e-8, |r, g| {
        for p in &points {
            let geom = PointGeometry::with_order(&r.cfg.model, p, 4)?;
            let low = &geom.landsberg().l_low;
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        g.feed(p, low[(i, j, k)] - low[(j, i, k)]);
                        g.feed(p, low[(i, j, k)] - low[(i, k, j)]);
                    }
                }
            }
        }
        Ok(())
    });

    r.guarded("landsberg.direction", "L(u, ., .) = 0", 1e-8, |r, g| {
        for p in &points {
            let geom = PointGeometry::with_order(&r.cfg.model, p, 4)?;
            let u = geom.u().clone();
            for j in 0..n {
                for k in 0..n {
                    g.feed(p, geom.landsberg_full(&u, &basis(n, j), &basis(n, k)));
                }
            }
        }
        Ok(())
    });

    r.guarded(
        "berwald.contraction",
        "g(Bbar(s1,s2), s3) = B(s1, s2, s3, u)",
        1e-9,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::with_order(&r.cfg.model, p, 4)?;
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let (a, b, c) = (basis(n, i), basis(n, j), basis(n, k));
                            let via_bar = geom.g_dot(&geom.berwald_bar_apply(&a, &b), &c);
                            let direct = geom.berwald_full(&a, &b, &c, geom.u());
                            g.feed(p, via_bar - direct);
                        }
                    }
                }
            }
            Ok(())
        },
    );

    if model.is_riemannian() {
        r.guarded("riemannian.cartan_zero", "quadratic F^2 has C = 0", 1e-9, |r, g| {
            for p in &points {
                let c = finslerb_core::finsler::cartan_tensor(&r.cfg.model, p)?;
                g.feed(p, c.max_abs());
            }
            Ok(())
        });
        r.guarded("riemannian.landsberg_zero", "quadratic F^2 has L = 0", 1e-8, |r, g| {
            for p in &points {
                let geom = PointGeometry::with_order(&r.cfg.model, p, 4)?;
                g.feed(p, geom.landsberg().l_low.max_abs());
            }
            Ok(())
        });
        r.guarded(
            "riemannian.levi_civita",
            "Gamma equals the base Levi-Civita symbols",
            1e-8,
            |r, g| {
                for p in &points {
                    let geom = PointGeometry::with_order(&r.cfg.model, p, 3)?;
                    let lc = finslerb_core::chern::levi_civita_christoffels(&r.cfg.model, &p.x)?;
                    for k in 0..n {
                        for i in 0..n {
                            for j in 0..n {
                                g.feed(p, geom.gamma()[(k, i, j)] - lc[(k, i, j)]);
                            }
                        }
                    }
                }
                Ok(())
            },
        );
        r.guarded(
            "riemannian.curvature",
            "R^l_kij equals the base Riemann tensor",
            1e-6,
            |r, g| {
                for p in &points {
                    let geom = PointGeometry::with_order(&r.cfg.model, p, 4)?;
                    let riem = finslerb_core::chern::riemann_tensor_base(&r.cfg.model, &p.x)?;
                    for l in 0..n {
                        for k in 0..n {
                            for i in 0..n {
                                for j in 0..n {
                                    g.feed(
                                        p,
                                        geom.curvature().r[(l, k, i, j)] - riem[(l, k, i, j)],
                                    );
                                }
                            }
                        }
                    }
                }
                Ok(())
            },
        );
    }

    r.guarded(
        "bundle_metric.orthogonality",
        "Kaluza-Klein type iff the hv block vanishes",
        1e-10,
        |r, g| {
            if !r.cfg.spec.is_kk_type() {
                return Ok(());
            }
            for p in &points {
                let geom = PointGeometry::with_order(&r.cfg.model, p, 3)?;
                let v = evaluate_g(&r.cfg.spec, &geom)?;
                g.feed(p, v.ghv.abs().max());
            }
            Ok(())
        },
    );

    r.guarded(
        "bundle_metric.determinant",
        "det(M2n) nullity matches alpha, phi",
        0.5,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::with_order(&r.cfg.model, p, 3)?;
                let ok = determinant_consistency(&r.cfg.spec, &geom)?;
                g.feed(p, if ok { 0.0 } else { 1.0 });
            }
            Ok(())
        },
    );

    let class = classify_regularity(&r.cfg.spec, &default_t_grid());
    let kind = match class {
        RegularityClass::Riemannian => "riemannian".to_string(),
        RegularityClass::PseudoRiemannian => "pseudo_riemannian".to_string(),
        RegularityClass::Degenerate { witness_t } => format!("degenerate_at_{witness_t:.4}"),
    };
    r.push_info("bundle_metric.regularity", "signs of alpha1, alpha, phi1, phi", 64, &kind);
}

// small helper so the closure above stays readable
fn finslerb_code_energy(
    model: &finslerb_core::finsler::FinslerModel,
    p: &BundlePoint,
) -> Result<f64, finslerb_core::Error> {
    let m = finslerb_core::finsler::fundamental_tensor(model, p)?;
    let u = DVector::from_vec(p.u.clone());
    Ok(((u.transpose() * &m.g * &u)[(0, 0)] - m.r2).abs())
}

fn axioms(r: &mut Runner<'_>) {
    let n = r.cfg.model.dim();
    let points = r.points.clone();
    let (xi, _) = r.fields();
    let mut rng = sampling::rng_from_seed(r.cfg.seed ^ 0xa210);
    let yfield = VectorFieldOnM::new(sampling::random_vector_field(&mut rng, n));

    r.guarded(
        "chern.compatibility",
        "W(g(s1,s2)) = g(nabla_W s1, s2) + g(s1, nabla_W s2) + 2C(s1, s2, nabla_W u)",
        1e-6,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let s1 = geom.field_jets(&xi.coeffs)?;
                let s2 = geom.field_jets(&yfield.coeffs)?;
                for axis in (0..n).map(LiftAxis::Hor).chain((0..n).map(LiftAxis::Ver)) {
                    let (compat, _) = chern_axiom_residuals(&geom, &s1, &s2, axis);
                    g.feed(p, compat);
                }
            }
            Ok(())
        },
    );

    r.guarded(
        "chern.torsion",
        "nabla_W rho(Z) - nabla_Z rho(W) = rho([W, Z])",
        1e-6,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let s1 = geom.field_jets(&xi.coeffs)?;
                let s2 = geom.field_jets(&yfield.coeffs)?;
                for axis in (0..n).map(LiftAxis::Hor).chain((0..n).map(LiftAxis::Ver)) {
                    let (_, torsion) = chern_axiom_residuals(&geom, &s1, &s2, axis);
                    g.feed(p, torsion);
                }
            }
            Ok(())
        },
    );

    r.guarded("horizontal.energy", "delta F^2 / delta x^i = 0", 1e-7, |r, g| {
        for p in &points {
            let geom = PointGeometry::new(&r.cfg.model, p)?;
            for i in 0..n {
                g.feed(p, geom.delta_of_jet(geom.f2_jet(), i).value());
            }
        }
        Ok(())
    });

    r.guarded(
        "covariant.vertical_of_base",
        "nabla_{X^v} Y = 0 for base fields",
        1e-12,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let xj = geom.field_jets(&xi.coeffs)?;
                let yj = geom.field_jets(&yfield.coeffs)?;
                let d = covariant_derivative(&geom, &geom.lift_v(xj), &yj);
                g.feed(p, d.abs().max());
            }
            Ok(())
        },
    );

    r.guarded("covariant.canonical_h", "nabla_{X^h} u = 0", 1e-7, |r, g| {
        for p in &points {
            let geom = PointGeometry::new(&r.cfg.model, p)?;
            let xj = geom.field_jets(&xi.coeffs)?;
            let d = covariant_derivative(&geom, &geom.lift_h(xj), &geom.canonical_section());
            g.feed(p, d.abs().max());
        }
        Ok(())
    });

    r.guarded("covariant.canonical_v", "nabla_{X^v} u = X", 1e-12, |r, g| {
        for p in &points {
            let geom = PointGeometry::new(&r.cfg.model, p)?;
            let xj = geom.field_jets(&xi.coeffs)?;
            let d = covariant_derivative(&geom, &geom.lift_v(xj.clone()), &geom.canonical_section());
            let xv = geom.section_value(&xj);
            g.feed(p, (d - xv).abs().max());
        }
        Ok(())
    });

    r.guarded(
        "covariant.bracket",
        "[X, Y] = nabla_{X^h} Y - nabla_{Y^h} X",
        1e-6,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let xj = geom.field_jets(&xi.coeffs)?;
                let yj = geom.field_jets(&yfield.coeffs)?;
                let lhs = DVector::from_fn(n, |k, _| {
                    (0..n)
                        .map(|j| {
                            xj[j].value() * yj[k].derivative(j).value()
                                - yj[j].value() * xj[k].derivative(j).value()
                        })
                        .sum()
                });
                let rhs = covariant_derivative(&geom, &geom.lift_h(xj.clone()), &yj)
                    - covariant_derivative(&geom, &geom.lift_h(yj.clone()), &xj);
                g.feed(p, (lhs - rhs).abs().max());
            }
            Ok(())
        },
    );

    r.guarded(
        "covariant.second_commutator",
        "nabla^2 s(V, W) - nabla^2 s(W, V) = R(W, V) s",
        1e-6,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let xj = geom.field_jets(&xi.coeffs)?;
                let yj = geom.field_jets(&yfield.coeffs)?;
                let sj = geom.field_jets(&xi.coeffs)?;
                let v = geom.lift_h(xj.clone());
                let w = geom.lift_h(yj.clone());
                let lhs = second_covariant_derivative(&geom, &sj, &v, &w)
                    - second_covariant_derivative(&geom, &sj, &w, &v);
                let rhs = geom.curv_apply(
                    &geom.section_value(&yj),
                    &geom.section_value(&xj),
                    &geom.section_value(&sj),
                );
                g.feed(p, (lhs - rhs).abs().max());
            }
            Ok(())
        },
    );

    r.guarded(
        "brackets.horizontal",
        "[X^h, Y^h] = [X,Y]^h - v{R(X,Y)u}",
        1e-5,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let xj = geom.field_jets(&xi.coeffs)?;
                let yj = geom.field_jets(&yfield.coeffs)?;
                let xh = geom.to_coordinate_frame(&geom.lift_h(xj.clone()));
                let yh = geom.to_coordinate_frame(&geom.lift_h(yj.clone()));
                let (bx, bu) = geom.bracket_coordinate((&xh.0, &xh.1), (&yh.0, &yh.1));
                let bracket_base: Vec<f64> = (0..n)
                    .map(|k| {
                        (0..n)
                            .map(|j| {
                                xj[j].value() * yj[k].derivative(j).value()
                                    - yj[j].value() * xj[k].derivative(j).value()
                            })
                            .sum()
                    })
                    .collect();
                let ru = geom.curv_apply(
                    &geom.section_value(&xj),
                    &geom.section_value(&yj),
                    geom.u(),
                );
                for k in 0..n {
                    g.feed(p, bx[k].value() - bracket_base[k]);
                    let mut expect = -ru[k];
                    for j in 0..n {
                        expect -= geom.nconn()[(k, j)] * bracket_base[j];
                    }
                    g.feed(p, bu[k].value() - expect);
                }
            }
            Ok(())
        },
    );

    r.guarded(
        "brackets.mixed",
        "[X^h, Y^v] = v{nabla_{X^h} Y + Lbar(X, Y)}",
        1e-5,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let xj = geom.field_jets(&xi.coeffs)?;
                let yj = geom.field_jets(&yfield.coeffs)?;
                let xh = geom.to_coordinate_frame(&geom.lift_h(xj.clone()));
                let yv = geom.to_coordinate_frame(&geom.lift_v(yj.clone()));
                let (bx, bu) = geom.bracket_coordinate((&xh.0, &xh.1), (&yv.0, &yv.1));
                let nabla = geom.section_value(&geom.covariant_section(&geom.lift_h(xj.clone()), &yj));
                let lbar =
                    geom.landsberg_apply(&geom.section_value(&xj), &geom.section_value(&yj));
                for k in 0..n {
                    g.feed(p, bx[k].value());
                    g.feed(p, bu[k].value() - nabla[k] - lbar[k]);
                }
            }
            Ok(())
        },
    );

    // the curvature identity suite
    let identities: [(&str, &str); 5] = [
        ("curvature.flag_null", "g(R(s1,s2)u, u) = 0"),
        ("curvature.flag_symmetry", "g(R(u,s1)u, s2) = g(R(u,s2)u, s1)"),
        ("curvature.skew_defect", "R(s1,s2,s3,s4) + R(s1,s2,s4,s3) + 2C(s3,s4,R(s1,s2)u) = 0"),
        ("curvature.bianchi", "R(s1,s2)s3 + R(s2,s3)s1 + R(s3,s1)s2 = 0"),
        (
            "curvature.pair_defect",
            "R(1234) - R(3412) = C(12,R(34)u) - C(34,R(12)u) - C(32,R(41)u) - C(41,R(32)u) - C(24,R(13)u) - C(13,R(24)u)",
        ),
    ];
    for (which, (id, anchor)) in identities.iter().enumerate() {
        r.guarded(id, anchor, 1e-6, |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let u = geom.u().clone();
                for i in 0..n {
                    for j in 0..n {
                        let (s1, s2) = (basis(n, i), basis(n, j));
                        match which {
                            0 => g.feed(p, geom.curv_low(&s1, &s2, &u, &u)),
                            1 => g.feed(
                                p,
                                geom.curv_low(&u, &s1, &u, &s2) - geom.curv_low(&u, &s2, &u, &s1),
                            ),
                            _ => {
                                for k in 0..n {
                                    let s3 = basis(n, k);
                                    if which == 3 {
                                        let b = geom.curv_apply(&s1, &s2, &s3)
                                            + geom.curv_apply(&s2, &s3, &s1)
                                            + geom.curv_apply(&s3, &s1, &s2);
                                        g.feed(p, b.abs().max());
                                        continue;
                                    }
                                    for l in 0..n {
                                        let s4 = basis(n, l);
                                        if which == 2 {
                                            g.feed(
                                                p,
                                                geom.curv_low(&s1, &s2, &s3, &s4)
                                                    + geom.curv_low(&s1, &s2, &s4, &s3)
                                                    + 2.0
                                                        * geom.cartan_full(
                                                            &s3,
                                                            &s4,
                                                            &geom.curv_apply(&s1, &s2, &u),
                                                        ),
                                            );
                                        } else {
                                            let lhs = geom.curv_low(&s1, &s2, &s3, &s4)
                                                - geom.curv_low(&s3, &s4, &s1, &s2);
                                            let rhs = geom.cartan_full(
                                                &s1,
                                                &s2,
                                                &geom.curv_apply(&s3, &s4, &u),
                                            ) - geom.cartan_full(
                                                &s3,
                                                &s4,
                                                &geom.curv_apply(&s1, &s2, &u),
                                            ) - geom.cartan_full(
                                                &s3,
                                                &s2,
                                                &geom.curv_apply(&s4, &s1, &u),
                                            ) - geom.cartan_full(
                                                &s4,
                                                &s1,
                                                &geom.curv_apply(&s3, &s2, &u),
                                            ) - geom.cartan_full(
                                                &s2,
                                                &s4,
                                                &geom.curv_apply(&s1, &s3, &u),
                                            ) - geom.cartan_full(
                                                &s1,
                                                &s3,
                                                &geom.curv_apply(&s2, &s4, &u),
                                            );
                                            g.feed(p, lhs - rhs);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Ok(())
        });
    }
}

fn levi_civita(r: &mut Runner<'_>) {
    let n = r.cfg.model.dim();
    let points = r.points.clone();

    r.guarded(
        "levi_civita.koszul",
        "closed-form connector vs finite-difference Christoffel data",
        1e-5,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let conn = koszul_connection(&r.cfg.spec, &geom)?;
                for a in (0..n).map(LiftAxis::Hor).chain((0..n).map(LiftAxis::Ver)) {
                    for b in (0..n).map(LiftAxis::Hor).chain((0..n).map(LiftAxis::Ver)) {
                        let cf = closed_form_covariant(&r.cfg.spec, &geom, a, b)?;
                        let ko = koszul_covariant(&geom, &conn, a, b);
                        g.feed(p, (cf - ko.components).abs().max());
                    }
                }
            }
            Ok(())
        },
    );

    r.guarded(
        "levi_civita.bilinearity",
        "connector tensors are bilinear in (s1, s2)",
        1e-9,
        |r, g| {
            let mut rng = sampling::rng_from_seed(r.cfg.seed ^ 0xb111);
            use rand::Rng;
            for p in points.iter().take(5) {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let rv = |rng: &mut rand_chacha::ChaCha8Rng| {
                    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
                };
                let (s1, s2, s3) = (rv(&mut rng), rv(&mut rng), rv(&mut rng));
                let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let left = pq_tensors(&r.cfg.spec, &geom, &(&s1 * a + &s2 * b), &s3)?;
                let p1 = pq_tensors(&r.cfg.spec, &geom, &s1, &s3)?;
                let p2 = pq_tensors(&r.cfg.spec, &geom, &s2, &s3)?;
                for (l, (x, y)) in [
                    (&left.phh, (&p1.phh, &p2.phh)),
                    (&left.qhh, (&p1.qhh, &p2.qhh)),
                    (&left.phv, (&p1.phv, &p2.phv)),
                    (&left.qhv, (&p1.qhv, &p2.qhv)),
                    (&left.pvv, (&p1.pvv, &p2.pvv)),
                    (&left.qvv, (&p1.qvv, &p2.qvv)),
                ] {
                    g.feed(p, (l - (x * a + y * b)).abs().max());
                }
            }
            Ok(())
        },
    );
}

fn incompressibility(r: &mut Runner<'_>) {
    let points = r.points.clone();
    r.guarded(
        "incompressibility.trace",
        "trace of X -> P_hh(u, X) + Q_hv(u, X) vanishes",
        1e-7,
        |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                g.feed(p, divergence_geodesic(&r.cfg.spec, &geom)?);
            }
            Ok(())
        },
    );
    r.guarded(
        "incompressibility.density",
        "(1/w) d_A (w zeta^A) with w = sqrt|det M2n| agrees with the trace",
        1e-5,
        |r, g| {
            for p in points.iter().take(8) {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let tr = divergence_geodesic(&r.cfg.spec, &geom)?;
                let dens = divergence_geodesic_density(&r.cfg.spec, &geom)?;
                g.feed(p, tr - dens);
            }
            Ok(())
        },
    );
}

fn fibers(r: &mut Runner<'_>) {
    let n = r.cfg.model.dim();
    let points: Vec<BundlePoint> = r.points.iter().take(8).cloned().collect();
    let mut rng = sampling::rng_from_seed(r.cfg.seed ^ 0xf1be);
    use rand::Rng;
    let probes: Vec<DVector<f64>> = (0..4)
        .map(|_| DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    match fiber_geodesic_check(&r.cfg.spec, &r.cfg.model, &points, &probes, r.tol("fibers.tolerance", 1e-7)) {
        Ok(check) => {
            let kind = match &check.verdict {
                FiberVerdict::TotallyGeodesic => "totally_geodesic".to_string(),
                FiberVerdict::Violated { residual, .. } => format!("violated_{residual:.3e}"),
            };
            r.push_info("fibers.verdict", "P_vv(X, X) = 0 for all vertical X", points.len(), &kind);
            let tol = r.tol("fibers.tolerance", 1e-7);
            let direct = check.direct_max >= tol;
            let profile_route = check.condition1_max >= tol || check.condition2_max >= tol;
            let mut gauge = Gauge::new();
            gauge.feed(&points[0], if direct == profile_route { 0.0 } else { 1.0 });
            r.push(
                "fibers.route_agreement",
                "direct P_vv probe agrees with the profile/Landsberg conditions",
                gauge,
                0.5,
            );
        }
        Err(e) => r.push_error("fibers.verdict", "P_vv(X, X) = 0 for all vertical X", &e.to_string()),
    }
}

fn symmetry(r: &mut Runner<'_>) {
    let points: Vec<BundlePoint> = r.points.iter().take(10).cloned().collect();
    let (xi, endo) = r.fields();

    let ops: [(&str, &str); 5] = [
        ("lie.horizontal", "L_{xi^h} G vs numeric Lie derivative"),
        ("lie.vertical", "L_{xi^v} G vs numeric Lie derivative"),
        ("lie.complete", "L_{xi^c} G vs numeric Lie derivative"),
        ("lie.iota", "L_{v(P u)} G vs numeric Lie derivative"),
        ("lie.tau", "L_{h(P u)} G vs numeric Lie derivative"),
    ];
    for (which, (id, anchor)) in ops.iter().enumerate() {
        let xi = xi.clone();
        let endo = endo.clone();
        r.guarded(id, anchor, 1e-5, |r, g| {
            for p in &points {
                let geom = PointGeometry::new(&r.cfg.model, p)?;
                let (closed, field) = match which {
                    0 => (lie_horizontal(&r.cfg.spec, &geom, &xi)?, BundleField::Horizontal(xi.clone())),
                    1 => (lie_vertical(&r.cfg.spec, &geom, &xi)?, BundleField::Vertical(xi.clone())),
                    2 => (lie_complete(&r.cfg.spec, &geom, &xi)?, BundleField::Complete(xi.clone())),
                    3 => (lie_iota(&r.cfg.spec, &geom, &endo)?, BundleField::Iota(endo.clone())),
                    _ => (lie_tau(&r.cfg.spec, &geom, &endo)?, BundleField::Tau(endo.clone())),
                };
                let oracle = lie_numeric_oracle(&r.cfg.spec, &geom, &field)?;
                g.feed(p, lie_deviation(&closed, &oracle));
            }
            Ok(())
        });
    }

    // verdicts are classifications of the supplied data
    let tol = r.tol("symmetry.verdict_tolerance", 1e-6);
    if r.cfg.spec.is_kk_type() {
        match verdict_horizontal(&r.cfg.spec, &r.cfg.model, &xi, &points, tol) {
            Ok(v) => r.push_info(
                "verdict.horizontal",
                "xi^h Killing iff base-Killing, curvature and Landsberg conditions",
                points.len(),
                &kind_name(&v.kind),
            ),
            Err(e) => r.push_error("verdict.horizontal", "horizontal lift verdict", &e.to_string()),
        }
        match verdict_vertical(&r.cfg.spec, &r.cfg.model, &xi, &points, tol) {
            Ok(v) => {
                r.push_info(
                    "verdict.vertical",
                    "xi^v conformal iff profile and Cartan conditions hold",
                    points.len(),
                    &kind_name(&v.kind),
                );
                // soundness: conformal/killing kinds must reproduce the blocks
                if matches!(v.kind, VerdictKind::Killing | VerdictKind::Conformal) {
                    let mut gauge = Gauge::new();
                    for p in &points {
                        let geom = match PointGeometry::new(&r.cfg.model, p) {
                            Ok(geval) => geval,
                            Err(_) => continue,
                        };
                        if let (Ok(blocks), Ok(th), Ok(gval)) = (
                            lie_vertical(&r.cfg.spec, &geom, &xi),
                            theta_value(&v.theta, &r.cfg.spec, &geom),
                            evaluate_g(&r.cfg.spec, &geom),
                        ) {
                            let res = (&blocks.hh - 2.0 * th * &gval.ghh)
                                .abs()
                                .max()
                                .max((&blocks.hv - 2.0 * th * &gval.ghv).abs().max())
                                .max((&blocks.vv - 2.0 * th * &gval.gvv).abs().max());
                            gauge.feed(p, res);
                        }
                    }
                    r.push(
                        "verdict.vertical_soundness",
                        "L_{xi^v} G = 2 theta G for the reported factor",
                        gauge,
                        1e-6,
                    );
                }
            }
            Err(e) => r.push_error("verdict.vertical", "vertical lift verdict", &e.to_string()),
        }
    } else {
        r.push_info("verdict.horizontal", "requires a Kaluza-Klein-type metric", 0, "skipped");
        r.push_info("verdict.vertical", "requires a Kaluza-Klein-type metric", 0, "skipped");
    }
    match verdict_complete_sasaki(&r.cfg.model, &xi, &points, tol) {
        Ok(v) => r.push_info(
            "verdict.complete_sasaki",
            "xi^c Killing under the Sasaki metric iff xi is base-Killing plus curvature conditions",
            points.len(),
            &kind_name(&v.kind),
        ),
        Err(e) => r.push_error("verdict.complete_sasaki", "complete lift (Sasaki)", &e.to_string()),
    }
    match verdict_complete_cg(&r.cfg.model, &xi, &points, tol) {
        Ok(v) => r.push_info(
            "verdict.complete_cheeger_gromoll",
            "xi^c conformal under the Cheeger-Gromoll metric with theta = g(nabla_zeta xi, u)/r^2",
            points.len(),
            &kind_name(&v.kind),
        ),
        Err(e) => {
            r.push_error("verdict.complete_cheeger_gromoll", "complete lift (CG)", &e.to_string())
        }
    }
    match verdict_iota(&r.cfg.model, &endo, finslerb_core::symmetry::IotaMetric::Sasaki, &points, tol)
    {
        Ok(v) => r.push_info(
            "verdict.iota",
            "v{P(u)} Killing iff P is g-skew plus curvature/Cartan conditions",
            points.len(),
            &kind_name(&v.kind),
        ),
        Err(e) => r.push_error("verdict.iota", "iota verdict", &e.to_string()),
    }
}

fn liouville(r: &mut Runner<'_>) {
    let points: Vec<BundlePoint> = r.points.iter().take(10).cloned().collect();
    let t_grid = default_t_grid();
    let tol = r.tol("liouville.tolerance", 1e-7);
    if r.cfg.spec.is_kk_type() {
        match classify_liouville(&r.cfg.spec, &t_grid, tol) {
            Ok(c) => {
                let kind = kind_name(&c.kind);
                r.push_info(
                    "liouville.classification",
                    "alpha_1 = a1 L, alpha_1+alpha_3 = a3 t L, beta_1 = b1 L/t, beta_1+beta_3 = b3 L",
                    t_grid.len(),
                    &kind,
                );
            }
            Err(e) => {
                r.push_error("liouville.classification", "Liouville field family fit", &e.to_string())
            }
        }
    } else {
        r.push_info("liouville.classification", "requires a Kaluza-Klein-type metric", 0, "skipped");
    }

    match geodesic_conformal_check(&r.cfg.spec, &r.cfg.model, &points, tol) {
        Ok(check) => {
            let mut gauge = Gauge::new();
            gauge.feed(
                &points[0],
                if check.kind == VerdictKind::NotConformal { 0.0 } else { 1.0 },
            );
            r.push(
                "geodesic.not_conformal",
                "theta(phi1+phi3) = 0, 2 theta phi2 = phi1+phi3, theta phi1 = phi2 has no solution",
                gauge,
                0.5,
            );
        }
        Err(e) => r.push_error("geodesic.not_conformal", "geodesic field check", &e.to_string()),
    }

    if let Some(endo) = &r.cfg.endo {
        // tau P obstruction needs a Kaluza-Klein metric
        match tau_conformal_check(&r.cfg.spec, &r.cfg.model, endo, &points, 1e-6) {
            Ok(v) => r.push_info(
                "tau.verdict",
                "h{P(u)} cannot be conformal unless P(u) = 0",
                points.len(),
                &kind_name(&v.kind),
            ),
            Err(e) => r.push_info("tau.verdict", "h{P(u)} conformal obstruction", 0, &format!("skipped_{e}")),
        }
    }
}

fn kind_name(kind: &VerdictKind) -> String {
    match kind {
        VerdictKind::Killing => "killing".to_string(),
        VerdictKind::Homothetic(t) => format!("homothetic_{t:.6}"),
        VerdictKind::Conformal => "conformal".to_string(),
        VerdictKind::NotConformal => "none".to_string(),
    }
}
