//! Acceptance gate: one test per shipped claim, each printing a single
//! `criterion NN PASS/FAIL` line with the measured margins and runtime.
//!
//! The checks run against the real shipped inputs (scenario files, the
//! fitted radius model, the release binary) and assert the documented
//! tolerances, not looser ones. Randomized checks use fixed seeds so a
//! failure reproduces exactly.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sweptplan_core::certify::{
    formulation_stats, CertProblem, NormConstraint, PlanningMode, ShapeFamily,
};
use sweptplan_core::dynamics::{rk4_step, CarInput, CarState};
use sweptplan_core::geom::{ConvexShape, PlacedShape, Pose2, Rot2, SymMat2, Vec2};
use sweptplan_core::nlp::{check_gradients, SolveStatus, SolverOptions};
use sweptplan_core::sdcalc::signed_distance;
use sweptplan_core::sweptfit::{
    fit_radius_model, generate_samples, holdout_check, sample_radius, RadiusModel, SamplingConfig,
};
use sweptplan_core::transcribe::{audit_trajectory, build_ocp, solve_scenario, Scenario};

fn repo_path(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join(rel)
}

fn load_scenario(name: &str) -> Scenario {
    let path = repo_path(&format!("scenarios/{name}.json"));
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    Scenario::from_json(&text).unwrap()
}

fn load_radius_model() -> RadiusModel {
    let path = repo_path("models/radius_default.json");
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("reading {}: {e}", path.display()));
    let model: RadiusModel = serde_json::from_str(&text).unwrap();
    model.validate().unwrap();
    model
}

fn finish(id: usize, name: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("criterion {id:2} PASS  {name}: {detail}"),
        Err(detail) => {
            println!("criterion {id:2} FAIL  {name}: {detail}");
            panic!("criterion {id} ({name}) failed: {detail}");
        }
    }
}

fn random_dir(rng: &mut ChaCha8Rng) -> Vec2 {
    Vec2::from_angle(rng.gen_range(-PI..PI))
}

fn random_pose(rng: &mut ChaCha8Rng, spread: f64) -> Pose2 {
    Pose2::new(
        rng.gen_range(-spread..spread),
        rng.gen_range(-spread..spread),
        rng.gen_range(-PI..PI),
    )
}

fn random_vertices(rng: &mut ChaCha8Rng, count: usize, center: Vec2, extent: f64) -> Vec<Vec2> {
    (0..count)
        .map(|_| center + random_dir(rng) * rng.gen_range(0.2..extent))
        .collect()
}

fn random_polytope(rng: &mut ChaCha8Rng, extent: f64) -> ConvexShape {
    let count = rng.gen_range(3..=7);
    let center = Vec2::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
    ConvexShape::polytope(random_vertices(rng, count, center, extent)).unwrap()
}

fn random_spd(rng: &mut ChaCha8Rng) -> SymMat2 {
    let l1 = rng.gen_range(0.3..4.0);
    let l2 = rng.gen_range(0.3..4.0);
    let t = rng.gen_range(-PI..PI);
    let (c, s) = (t.cos(), t.sin());
    SymMat2::new(
        c * c * l1 + s * s * l2,
        c * s * (l1 - l2),
        s * s * l1 + c * c * l2,
    )
}

fn random_shape(rng: &mut ChaCha8Rng) -> ConvexShape {
    match rng.gen_range(0..6) {
        0 => ConvexShape::point(Vec2::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        ))
        .unwrap(),
        1 => random_polytope(rng, 2.5),
        2 => ConvexShape::ellipsoid(random_spd(rng)).unwrap(),
        3 => ConvexShape::ball(rng.gen_range(0.1..2.0)).unwrap(),
        4 => ConvexShape::inflated(random_polytope(rng, 2.0), rng.gen_range(0.0..1.5)).unwrap(),
        _ => ConvexShape::hull(vec![
            random_polytope(rng, 2.0),
            ConvexShape::ball(rng.gen_range(0.1..1.5)).unwrap(),
        ])
        .unwrap(),
    }
}

fn car_body() -> ConvexShape {
    ConvexShape::polytope(vec![
        Vec2::new(2.5, 1.0),
        Vec2::new(-2.5, 1.0),
        Vec2::new(-2.5, -1.0),
        Vec2::new(2.5, -1.0),
    ])
    .unwrap()
}

#[test]
fn criterion_01_support_cost_algebra() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_plain = 0.0f64;
    let mut worst_chained = 0.0f64;
    for _ in 0..1000 {
        let shape = random_shape(&mut rng);
        let c = random_dir(&mut rng) * rng.gen_range(0.2..3.0);

        let scalable = match rng.gen_range(0..3) {
            0 => random_polytope(&mut rng, 2.5),
            1 => ConvexShape::ellipsoid(random_spd(&mut rng)).unwrap(),
            _ => ConvexShape::ball(rng.gen_range(0.1..2.0)).unwrap(),
        };
        let k = rng.gen_range(0.0..3.0);
        let scaled = scalable.scale(k).unwrap();
        worst_plain =
            worst_plain.max((scaled.support(c).unwrap() - k * scalable.support(c).unwrap()).abs());

        let rot = Rot2::from_angle(rng.gen_range(-PI..PI));
        let rotated = PlacedShape::new(
            shape.clone(),
            Pose2 {
                rotation: rot,
                translation: Vec2::ZERO,
            },
        );
        worst_plain = worst_plain.max(
            (rotated.support(c).unwrap() - shape.support(rot.apply_transpose(c)).unwrap()).abs(),
        );
        worst_plain = worst_plain
            .max((rotated.cost(c).unwrap() - shape.cost(rot.apply_transpose(c)).unwrap()).abs());

        let v = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let moved = PlacedShape::new(
            shape.clone(),
            Pose2 {
                rotation: Rot2::IDENTITY,
                translation: v,
            },
        );
        worst_plain = worst_plain
            .max((moved.support(c).unwrap() - (shape.support(c).unwrap() + c.dot(v))).abs());

        let r = rng.gen_range(0.0..2.0);
        let inflated = ConvexShape::inflated(shape.clone(), r).unwrap();
        worst_plain = worst_plain
            .max((inflated.support(c).unwrap() - (shape.support(c).unwrap() + r * c.norm())).abs());

        let other = random_shape(&mut rng);
        if !matches!(shape, ConvexShape::Hull { .. }) && !matches!(other, ConvexShape::Hull { .. })
        {
            let hull = ConvexShape::hull(vec![shape.clone(), other.clone()]).unwrap();
            worst_plain = worst_plain.max(
                (hull.support(c).unwrap()
                    - shape.support(c).unwrap().max(other.support(c).unwrap()))
                .abs(),
            );
            worst_plain = worst_plain.max(
                (hull.cost(c).unwrap() - shape.cost(c).unwrap().min(other.cost(c).unwrap())).abs(),
            );
        }

        worst_plain = worst_plain.max((shape.cost(c).unwrap() + shape.support(-c).unwrap()).abs());

        let psi1 = rng.gen_range(-PI..PI);
        let psi2 = rng.gen_range(-PI..PI);
        let t1 = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let t2 = Vec2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let r2 = Rot2::from_angle(psi2);
        let composed = Pose2 {
            rotation: Rot2::from_angle(psi1 + psi2),
            translation: r2.apply(t1) + t2,
        };
        let direct = PlacedShape::new(shape.clone(), composed)
            .support(c)
            .unwrap();
        let c_inner = r2.apply_transpose(c);
        let stepwise = shape
            .support(Rot2::from_angle(psi1).apply_transpose(c_inner))
            .unwrap()
            + c_inner.dot(t1)
            + c.dot(t2);
        worst_chained = worst_chained.max((direct - stepwise).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_plain <= 1e-12 && worst_chained <= 1e-9 && secs < 5.0;
    let detail = format!(
        "1000 instances, worst single-step error {worst_plain:.2e} (tol 1e-12), \
         worst chained error {worst_chained:.2e} (tol 1e-9), {secs:.2} s (budget 5 s)"
    );
    finish(
        1,
        "support/cost algebra",
        if ok { Ok(detail) } else { Err(detail) },
    );
}

#[test]
fn criterion_02_signed_distance_lemmas() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let place_origin = |s: &ConvexShape| PlacedShape::new(s.clone(), Pose2::IDENTITY);

    let mut worst_half = 0.0f64;
    for _ in 0..500 {
        let c = random_dir(&mut rng);
        let p = c.perp();
        let alpha = rng.gen_range(-3.0..3.0);
        let beta = rng.gen_range(-3.0..3.0);
        let upper = ConvexShape::polytope(vec![
            c * alpha + p * 100.0,
            c * alpha - p * 100.0,
            c * (alpha + 50.0) - p * 100.0,
            c * (alpha + 50.0) + p * 100.0,
        ])
        .unwrap();
        let lower = ConvexShape::polytope(vec![
            c * beta + p * 100.0,
            c * beta - p * 100.0,
            c * (beta - 50.0) - p * 100.0,
            c * (beta - 50.0) + p * 100.0,
        ])
        .unwrap();
        let sd = signed_distance(&place_origin(&upper), &place_origin(&lower))
            .unwrap()
            .sd;
        worst_half = worst_half.max((sd - (alpha - beta)).abs());
    }

    let mut worst_mono = f64::NEG_INFINITY;
    for _ in 0..500 {
        let c_center = Vec2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let d_center = c_center + random_dir(&mut rng) * rng.gen_range(0.0..12.0);
        let c_count = rng.gen_range(5..=8);
        let c_sup = random_vertices(&mut rng, c_count, c_center, 3.0);
        let d_count = rng.gen_range(5..=8);
        let d_sup = random_vertices(&mut rng, d_count, d_center, 3.0);
        let subset = |rng: &mut ChaCha8Rng, verts: &[Vec2]| -> Vec<Vec2> {
            let mut out: Vec<Vec2> = verts
                .iter()
                .copied()
                .filter(|_| rng.gen_bool(0.6))
                .collect();
            if out.is_empty() {
                out.push(verts[0]);
            }
            out
        };
        let c_sub = subset(&mut rng, &c_sup);
        let d_sub = subset(&mut rng, &d_sup);
        let sd_small = signed_distance(
            &place_origin(&ConvexShape::polytope(c_sub).unwrap()),
            &place_origin(&ConvexShape::polytope(d_sub).unwrap()),
        )
        .unwrap()
        .sd;
        let sd_large = signed_distance(
            &place_origin(&ConvexShape::polytope(c_sup).unwrap()),
            &place_origin(&ConvexShape::polytope(d_sup).unwrap()),
        )
        .unwrap()
        .sd;
        worst_mono = worst_mono.max(sd_large - sd_small);
    }

    let mut worst_bound = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let a = PlacedShape::new(random_shape(&mut rng), random_pose(&mut rng, 6.0));
        let b = PlacedShape::new(random_shape(&mut rng), random_pose(&mut rng, 6.0));
        let sd = signed_distance(&a, &b).unwrap().sd;
        let c = random_dir(&mut rng);
        worst_bound = worst_bound.max(a.cost(c).unwrap() - b.support(c).unwrap() - sd);
    }

    let mut worst_ball = 0.0f64;
    for _ in 0..500 {
        let sa = random_shape(&mut rng);
        let sb = random_shape(&mut rng);
        let pa = random_pose(&mut rng, 6.0);
        let pb = random_pose(&mut rng, 6.0);
        let ra = rng.gen_range(0.0..2.0);
        let rb = rng.gen_range(0.0..2.0);
        let plain = signed_distance(
            &PlacedShape::new(sa.clone(), pa),
            &PlacedShape::new(sb.clone(), pb),
        )
        .unwrap()
        .sd;
        let inflated = signed_distance(
            &PlacedShape::new(ConvexShape::inflated(sa, ra).unwrap(), pa),
            &PlacedShape::new(ConvexShape::inflated(sb, rb).unwrap(), pb),
        )
        .unwrap()
        .sd;
        worst_ball = worst_ball.max((inflated - (plain - ra - rb)).abs());
    }

    let secs = t0.elapsed().as_secs_f64();
    let ok = worst_half <= 1e-6
        && worst_mono <= 1e-9
        && worst_bound <= 1e-6
        && worst_ball <= 1e-6
        && secs < 30.0;
    let detail = format!(
        "halfspace error {worst_half:.2e} (tol 1e-6, 500x), \
         subset slack {worst_mono:.2e} (tol 1e-9, 500x), \
         bound overshoot {worst_bound:.2e} (tol 1e-6, 1000x), \
         inflation error {worst_ball:.2e} (tol 1e-6, 500x), {secs:.2} s (budget 30 s)"
    );
    finish(
        2,
        "signed-distance lemmas",
        if ok { Ok(detail) } else { Err(detail) },
    );
}

#[test]
fn criterion_03_certificate_soundness_completeness() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut n_feasible = 0usize;
    let mut n_infeasible = 0usize;
    let mut failure: Option<String> = None;
    for i in 0..500 {
        let vehicle = if rng.gen_bool(0.5) {
            random_polytope(&mut rng, 2.0)
        } else {
            ConvexShape::ellipsoid(random_spd(&mut rng)).unwrap()
        };
        let obstacle = if rng.gen_bool(0.5) {
            random_polytope(&mut rng, 2.0)
        } else {
            ConvexShape::ellipsoid(random_spd(&mut rng)).unwrap()
        };
        let x = CarState::new(
            rng.gen_range(-6.0..6.0),
            rng.gen_range(-6.0..6.0),
            rng.gen_range(-PI..PI),
            rng.gen_range(0.0..12.0),
            rng.gen_range(-0.5..0.5),
        );
        let obstacle_pose = random_pose(&mut rng, 8.0);
        let oracle = signed_distance(
            &PlacedShape::new(vehicle.clone(), x.pose()),
            &PlacedShape::new(obstacle.clone(), obstacle_pose),
        )
        .unwrap();

        let off = rng.gen_range(1e-4..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let gamma = oracle.sd - off;
        let prob = CertProblem::new_discrete(&vehicle, &obstacle, gamma, NormConstraint::Equality)
            .unwrap();
        let feasible_at = |c: Vec2| -> bool {
            let vars = prob.seed_vars_along(&x, None, &obstacle_pose, None, c);
            let block = prob.discrete_residuals(&x, &obstacle_pose, &vars);
            block.max_ineq() <= 1e-6 && block.max_eq_abs() <= 1e-6
        };

        if off > 0.0 {
            n_feasible += 1;
            if !feasible_at(oracle.direction) {
                failure = Some(format!(
                    "instance {i}: sd {:.6} >= gamma {gamma:.6} but the witness certificate \
                     is rejected",
                    oracle.sd
                ));
                break;
            }
        } else {
            n_infeasible += 1;
            let mut accepted = feasible_at(oracle.direction);
            for _ in 0..4 {
                accepted = accepted || feasible_at(random_dir(&mut rng));
            }
            if accepted {
                failure = Some(format!(
                    "instance {i}: sd {:.6} < gamma {gamma:.6} but a certificate \
                     was accepted",
                    oracle.sd
                ));
                break;
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let outcome = match failure {
        Some(f) => Err(f),
        None if secs >= 60.0 => Err(format!("{secs:.1} s exceeds the 60 s budget")),
        None => Ok(format!(
            "500 instances ({n_feasible} above gamma accepted, {n_infeasible} below gamma \
             rejected), margin 1e-4, {secs:.2} s (budget 60 s)"
        )),
    };
    finish(3, "certificate feasibility matches the oracle", outcome);
}

#[test]
fn criterion_04_gradient_audit() {
    let t0 = Instant::now();
    let model = load_radius_model();
    let discrete = load_scenario("thin_wall");
    let mut continuous = discrete.clone();
    continuous.mode = PlanningMode::Continuous;
    let mut worst = 0.0f64;
    let mut worst_at = String::from("none");
    for (label, scenario, radius) in [
        ("discrete", &discrete, None),
        ("continuous", &continuous, Some(&model)),
    ] {
        let ocp = build_ocp(scenario, radius).unwrap();
        let z0 = ocp.initial_guess();
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        for point in 0..6 {
            let z: Vec<f64> = if point == 0 {
                z0.clone()
            } else {
                z0.iter().map(|v| v + rng.gen_range(-1e-3..1e-3)).collect()
            };
            for audit in check_gradients(&ocp.problem, &z, 1e-6).unwrap() {
                if audit.worst_rel > worst {
                    worst = audit.worst_rel;
                    worst_at = format!(
                        "{label} {} row {} col {} point {point}",
                        audit.block, audit.row, audit.col
                    );
                }
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    let ok = worst <= 1e-5 && secs < 30.0;
    let detail = format!(
        "worst relative Jacobian error {worst:.2e} at {worst_at} (tol 1e-5), \
         both modes at 6 points, {secs:.2} s (budget 30 s)"
    );
    finish(
        4,
        "gradient audit",
        if ok { Ok(detail) } else { Err(detail) },
    );
}

#[test]
fn criterion_05_shipped_problem_setup() {
    let outcome = (|| -> Result<String, String> {
        for name in ["open_field", "thin_wall"] {
            let s = load_scenario(name);
            if s.car.wheelbase != 2.7 {
                return Err(format!("{name}: wheelbase {} != 2.7", s.car.wheelbase));
            }
            let mut verts = s
                .vehicle_shape
                .vertex_list()
                .ok_or_else(|| format!("{name}: vehicle shape is not a polytope"))?;
            verts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
            let expected = [
                Vec2::new(-2.5, -1.0),
                Vec2::new(-2.5, 1.0),
                Vec2::new(2.5, -1.0),
                Vec2::new(2.5, 1.0),
            ];
            if verts.len() != 4 || verts.iter().zip(&expected).any(|(a, b)| a != b) {
                return Err(format!(
                    "{name}: vehicle vertices {verts:?} are not (+-2.5, +-1)"
                ));
            }
            if s.start[..3] != [0.0, 25.0, 0.0] || s.goal[..3] != [100.0, 25.0, 0.0] {
                return Err(format!(
                    "{name}: start/goal poses {:?} -> {:?} are not (0,25,0) -> (100,25,0)",
                    &s.start[..3],
                    &s.goal[..3]
                ));
            }
            if s.t_f != 10.0 || s.n != 13 || s.dt() != 10.0 / 13.0 {
                return Err(format!(
                    "{name}: horizon t_f {} n {} dt {} is not 10 s in 13 steps of 10/13 s",
                    s.t_f,
                    s.n,
                    s.dt()
                ));
            }

            let ocp = build_ocp(&s, None).map_err(|e| e.to_string())?;
            let mut z = ocp.initial_guess();
            let mut rng = ChaCha8Rng::seed_from_u64(505);
            let mut expected_cost = 0.0f64;
            for k in 0..s.n {
                let a = rng.gen_range(-0.5..0.5);
                let steer = rng.gen_range(-0.05..0.05);
                z[ocp.layout.input_col(k, 0)] = a;
                z[ocp.layout.input_col(k, 1)] = steer;
                expected_cost += a * a + steer * steer;
            }
            let (cost, _) = (ocp.problem.objective)(&z);
            if (cost - expected_cost).abs() > 1e-9 {
                return Err(format!(
                    "{name}: objective {cost} differs from the squared input norm {expected_cost}"
                ));
            }

            // The integration defect of each interval must be the fixed-step
            // RK4 residual, checked at a generic point in the variables.
            let mut x = CarState::from_array(s.start);
            x.v = 8.0;
            for k in 0..=s.n {
                for i in 0..5 {
                    z[ocp.layout.state_col(k, i)] = x.to_array()[i];
                }
                if k < s.n {
                    let u =
                        CarInput::new(z[ocp.layout.input_col(k, 0)], z[ocp.layout.input_col(k, 1)]);
                    x = rk4_step(&x, &u, s.dt(), &s.car).map_err(|e| e.to_string())?;
                    // Decorrelate the stored successor from the rollout so the
                    // defect is nonzero and its value can be cross-checked.
                    x.p_y += 0.01 * (k as f64 + 1.0);
                }
            }
            let mut defects_seen = 0usize;
            for block in &ocp.problem.eq_blocks {
                let Some(k) = block
                    .name
                    .strip_prefix("defect[")
                    .and_then(|r| r.strip_suffix(']'))
                    .and_then(|r| r.parse::<usize>().ok())
                else {
                    continue;
                };
                defects_seen += 1;
                let gathered: Vec<f64> = block.cols.iter().map(|&j| z[j]).collect();
                let (vals, _) = (block.eval)(&gathered);
                let xk = CarState::new(
                    z[ocp.layout.state_col(k, 0)],
                    z[ocp.layout.state_col(k, 1)],
                    z[ocp.layout.state_col(k, 2)],
                    z[ocp.layout.state_col(k, 3)],
                    z[ocp.layout.state_col(k, 4)],
                );
                let uk =
                    CarInput::new(z[ocp.layout.input_col(k, 0)], z[ocp.layout.input_col(k, 1)]);
                let xn = rk4_step(&xk, &uk, s.dt(), &s.car)
                    .map_err(|e| e.to_string())?
                    .to_array();
                for i in 0..5 {
                    let manual = (xn[i] - z[ocp.layout.state_col(k + 1, i)]) / s.dt();
                    if (vals[i] - manual).abs() > 1e-12 {
                        return Err(format!(
                            "{name}: defect[{k}] row {i} is {} but the RK4 residual is {manual}",
                            vals[i]
                        ));
                    }
                }
            }
            if defects_seen != s.n {
                return Err(format!(
                    "{name}: found {defects_seen} integration defect blocks, expected {}",
                    s.n
                ));
            }
        }
        Ok(
            "open_field and thin_wall both pin wheelbase 2.7 m, body (+-2.5, +-1) m, \
            poses (0,25,0) -> (100,25,0), horizon 10 s in 13 RK4 steps, squared-input objective"
                .to_string(),
        )
    })();
    finish(5, "shipped problem setup", outcome);
}

#[test]
fn criterion_06_thin_wall_tunneling() {
    let outcome = (|| -> Result<String, String> {
        let model = load_radius_model();
        let discrete = load_scenario("thin_wall");
        let mut continuous = discrete.clone();
        continuous.mode = PlanningMode::Continuous;
        let opts = SolverOptions::default();

        let t0 = Instant::now();
        let (_, res_d) = solve_scenario(&discrete, None, &opts).map_err(|e| e.to_string())?;
        let secs_d = t0.elapsed().as_secs_f64();
        if res_d.report.status != SolveStatus::Optimal {
            return Err(format!("discrete solve ended {:?}", res_d.report.status));
        }
        if secs_d >= 120.0 {
            return Err(format!("discrete solve took {secs_d:.1} s (budget 120 s)"));
        }
        let audit_d =
            audit_trajectory(&discrete, &res_d.trajectory, 100).map_err(|e| e.to_string())?;
        let min_d = audit_d.min_fine_sd.ok_or("discrete audit has no rows")?;
        if min_d >= -0.1 {
            return Err(format!(
                "discrete min intermediate sd {min_d:.4} m never tunnels below -0.1 m"
            ));
        }

        let t1 = Instant::now();
        let (_, res_c) =
            solve_scenario(&continuous, Some(&model), &opts).map_err(|e| e.to_string())?;
        let secs_c = t1.elapsed().as_secs_f64();
        if res_c.report.status != SolveStatus::Optimal {
            return Err(format!("continuous solve ended {:?}", res_c.report.status));
        }
        if secs_c >= 120.0 {
            return Err(format!(
                "continuous solve took {secs_c:.1} s (budget 120 s)"
            ));
        }
        let audit_c =
            audit_trajectory(&continuous, &res_c.trajectory, 100).map_err(|e| e.to_string())?;
        let min_c = audit_c.min_fine_sd.ok_or("continuous audit has no rows")?;
        if min_c < -5e-3 {
            return Err(format!(
                "continuous min intermediate sd {min_c:.5} m dips below -5e-3 m"
            ));
        }
        Ok(format!(
            "discrete tunnels (min sd {min_d:.3} m, {secs_d:.1} s), continuous stays clear \
             (min sd {min_c:.4} m, {secs_c:.1} s), m=100 audit"
        ))
    })();
    finish(6, "thin-wall tunneling", outcome);
}

#[test]
fn criterion_07_corner_cutting() {
    let outcome = (|| -> Result<String, String> {
        let model = load_radius_model();
        let discrete = load_scenario("corner_cut");
        let mut continuous = discrete.clone();
        continuous.mode = PlanningMode::Continuous;
        let opts = SolverOptions::default();

        let t0 = Instant::now();
        let (_, res_d) = solve_scenario(&discrete, None, &opts).map_err(|e| e.to_string())?;
        let secs_d = t0.elapsed().as_secs_f64();
        if res_d.report.status != SolveStatus::Optimal {
            return Err(format!("discrete solve ended {:?}", res_d.report.status));
        }
        let audit_d =
            audit_trajectory(&discrete, &res_d.trajectory, 100).map_err(|e| e.to_string())?;
        let min_corner = audit_d
            .rows
            .iter()
            .filter(|r| (35.0..=45.0).contains(&r.p_x) && (35.0..=45.0).contains(&r.p_y))
            .map(|r| r.sd)
            .fold(f64::INFINITY, f64::min);
        if min_corner >= -0.05 {
            return Err(format!(
                "discrete min sd near the corner is {min_corner:.4} m, expected below -0.05 m"
            ));
        }

        let t1 = Instant::now();
        let (_, res_c) =
            solve_scenario(&continuous, Some(&model), &opts).map_err(|e| e.to_string())?;
        let secs_c = t1.elapsed().as_secs_f64();
        if res_c.report.status != SolveStatus::Optimal {
            return Err(format!("continuous solve ended {:?}", res_c.report.status));
        }
        let audit_c =
            audit_trajectory(&continuous, &res_c.trajectory, 100).map_err(|e| e.to_string())?;
        let min_c = audit_c.min_fine_sd.ok_or("continuous audit has no rows")?;
        if min_c < -5e-3 {
            return Err(format!(
                "continuous min intermediate sd {min_c:.5} m dips below -5e-3 m"
            ));
        }
        Ok(format!(
            "discrete cuts the corner (min sd {min_corner:.3} m inside p in [35,45]^2, \
             {secs_d:.1} s), continuous stays clear (min sd {min_c:.4} m, {secs_c:.1} s)"
        ))
    })();
    finish(7, "corner cutting", outcome);
}

#[test]
fn criterion_08_swept_radius_contract() {
    let outcome = (|| -> Result<String, String> {
        let t0 = Instant::now();
        let cfg = SamplingConfig::standard(car_body());
        let samples = generate_samples(&cfg).map_err(|e| e.to_string())?;
        let (model, fit) = fit_radius_model(&samples, 8, cfg.domain().map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        if fit.max_one_sided_violation > 1e-9 {
            return Err(format!(
                "training violation {:.2e} exceeds 1e-9",
                fit.max_one_sided_violation
            ));
        }

        let mut worst_straight = 0.0f64;
        for v in [0.0, 3.75, 7.5, 11.25, 15.0] {
            for a in [-4.0, 0.0, 4.0] {
                let r = sample_radius(
                    &CarState::new(0.0, 0.0, 0.0, v, 0.0),
                    &CarInput::new(a, 0.0),
                    cfg.dt,
                    cfg.substeps,
                    &cfg.body,
                    &cfg.car,
                )
                .map_err(|e| e.to_string())?;
                worst_straight = worst_straight.max(r);
            }
        }
        if worst_straight > 1e-6 {
            return Err(format!(
                "straight-motion radius {worst_straight:.2e} exceeds 1e-6"
            ));
        }

        let holdout = holdout_check(&model, &cfg, 2000, 31415, 5e-3).map_err(|e| e.to_string())?;
        if holdout.n_violations * 50 > holdout.n {
            return Err(format!(
                "{} of {} held-out samples exceed the bound (limit 2%)",
                holdout.n_violations, holdout.n
            ));
        }
        if holdout.max_shortfall > 5e-3 {
            return Err(format!(
                "worst held-out shortfall {:.2e} m exceeds 5e-3 m",
                holdout.max_shortfall
            ));
        }
        if !holdout.containment_ok {
            return Err("a held-out fine flow escaped the inflated endpoint hull".to_string());
        }
        let secs = t0.elapsed().as_secs_f64();
        Ok(format!(
            "{} samples, training violation {:.1e}, straight radius {:.1e}, holdout \
             {}/{} over bound (shortfall {:.1e} m), containment holds, {secs:.1} s",
            fit.n_samples,
            fit.max_one_sided_violation,
            worst_straight,
            holdout.n_violations,
            holdout.n,
            holdout.max_shortfall
        ))
    })();
    finish(8, "swept-radius contract", outcome);
}

#[test]
fn criterion_09_formulation_bookkeeping() {
    let outcome = (|| -> Result<String, String> {
        let poly = formulation_stats(2, 4, 4, 4, 4, PlanningMode::Discrete, ShapeFamily::Polytope);
        if (poly.ours_vars, poly.ours_cons) != (4, 10)
            || (poly.dual_vars, poly.dual_cons) != (Some(8), Some(12))
        {
            return Err(format!(
                "polytope counts {poly:?} differ from (4,10) vs (8,12)"
            ));
        }
        let ell = formulation_stats(
            2,
            1,
            1,
            1,
            1,
            PlanningMode::Discrete,
            ShapeFamily::Ellipsoid,
        );
        if (ell.ours_vars, ell.ours_cons) != (2, 2)
            || (ell.dual_vars, ell.dual_cons) != (Some(6), Some(6))
        {
            return Err(format!(
                "ellipsoid counts {ell:?} differ from (2,2) vs (6,6)"
            ));
        }

        let x = CarState::new(1.0, 2.0, 0.3, 5.0, 0.1);
        let pose = Pose2::new(8.0, 1.0, 0.2);

        let obstacle = ConvexShape::polytope(vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(3.0, 0.0),
            Vec2::new(3.0, 2.0),
            Vec2::new(0.0, 2.0),
        ])
        .unwrap();
        let quad = CertProblem::new_discrete(&car_body(), &obstacle, 0.0, NormConstraint::Equality)
            .map_err(|e| e.to_string())?;
        let (qi, qe) = quad.row_counts();
        if quad.var_count() != poly.ours_vars || qi + qe != poly.ours_cons || (qi, qe) != (9, 1) {
            return Err(format!(
                "assembled polytope pair has {} vars and rows ({qi},{qe}), expected 4 vars \
                 and (9,1)",
                quad.var_count()
            ));
        }
        let vars = quad.initial_vars(&x, None, &pose, None);
        let block = quad.discrete_residuals(&x, &pose, &vars);
        if block.ineq.len() != qi || block.eq.len() != qe {
            return Err(format!(
                "evaluated polytope block has ({}, {}) rows, declared ({qi}, {qe})",
                block.ineq.len(),
                block.eq.len()
            ));
        }

        let ea = ConvexShape::ellipsoid(SymMat2::new(2.0, 0.2, 1.0)).unwrap();
        let eb = ConvexShape::ellipsoid(SymMat2::new(1.0, -0.1, 3.0)).unwrap();
        let pair = CertProblem::new_discrete(&ea, &eb, 0.0, NormConstraint::Equality)
            .map_err(|e| e.to_string())?;
        let (pi, pe) = pair.row_counts();
        if pair.var_count() != ell.ours_vars || pi + pe != ell.ours_cons || (pi, pe) != (1, 1) {
            return Err(format!(
                "assembled ellipsoid pair has {} vars and rows ({pi},{pe}), expected 2 vars \
                 and (1,1)",
                pair.var_count()
            ));
        }
        let vars = pair.initial_vars(&x, None, &pose, None);
        let block = pair.discrete_residuals(&x, &pose, &vars);
        if block.ineq.len() != pi || block.eq.len() != pe {
            return Err(format!(
                "evaluated ellipsoid block has ({}, {}) rows, declared ({pi}, {pe})",
                block.ineq.len(),
                block.eq.len()
            ));
        }
        Ok(
            "polytope pair (4 vars, 10 rows) vs dual (8, 12); ellipsoid pair (2, 2) vs \
            dual (6, 6); assembled blocks match"
                .to_string(),
        )
    })();
    finish(9, "formulation bookkeeping", outcome);
}

#[test]
fn criterion_10_deterministic_artifacts() {
    let outcome = (|| -> Result<String, String> {
        let bin = env!("CARGO_BIN_EXE_sweptplan");
        let model = repo_path("models/radius_default.json");
        let model = model.to_str().unwrap();
        let runs: [(&str, Vec<&str>); 4] = [
            ("open_field", vec![]),
            ("thin_wall", vec![]),
            ("corner_cut", vec![]),
            (
                "thin_wall",
                vec!["--mode", "continuous", "--radius-model", model],
            ),
        ];
        let mut files_compared = 0usize;
        for (name, extra) in runs {
            let scenario = repo_path(&format!("scenarios/{name}.json"));
            let run = |out: &Path| -> Result<(), String> {
                let status = Command::new(bin)
                    .arg("plan")
                    .arg("--scenario")
                    .arg(&scenario)
                    .arg("--out")
                    .arg(out)
                    .args(&extra)
                    .output()
                    .map_err(|e| e.to_string())?;
                if !status.status.success() {
                    return Err(format!(
                        "plan {name} {extra:?} exited {:?}: {}",
                        status.status.code(),
                        String::from_utf8_lossy(&status.stderr)
                    ));
                }
                Ok(())
            };
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let (a, b) = (dir.path().join("a"), dir.path().join("b"));
            run(&a)?;
            run(&b)?;
            let listing = |d: &Path| -> Result<Vec<String>, String> {
                let mut names: Vec<String> = std::fs::read_dir(d)
                    .map_err(|e| e.to_string())?
                    .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                    .collect();
                names.sort();
                Ok(names)
            };
            let names_a = listing(&a)?;
            if names_a != listing(&b)? {
                return Err(format!("{name}: the two runs wrote different file sets"));
            }
            for expected in [
                "audit.csv",
                "plot.svg",
                "run.json",
                "trajectory.csv",
                "trajectory.json",
            ] {
                if !names_a.iter().any(|n| n == expected) {
                    return Err(format!("{name}: missing artifact {expected}"));
                }
            }
            for file in &names_a {
                let bytes_a = std::fs::read(a.join(file)).map_err(|e| e.to_string())?;
                let bytes_b = std::fs::read(b.join(file)).map_err(|e| e.to_string())?;
                if bytes_a != bytes_b {
                    return Err(format!("{name}: {file} differs between identical runs"));
                }
                files_compared += 1;
            }
        }
        Ok(format!(
            "4 scenario runs repeated, {files_compared} artifact files byte-identical"
        ))
    })();
    finish(10, "deterministic artifacts", outcome);
}
