//! Numerical validation suite: finite-difference checks of the element
//! models, cavity load checks, controller and integrator oracles and a
//! determinism check on a coarse scene.

use std::fmt;

use nalgebra::{Matrix3, Vector3, Vector4};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::simulate;
use crate::actuation::pressure_forces;
use crate::controller::{controller_step, ControllerConfig, ControllerState, DEMAND_MATRIX};
use crate::dynamics::{Body, ConstraintSet, Integrator, IntegratorConfig, MechanicalState};
use crate::error::Result;
use crate::materials::{element_energy, element_forces, element_stiffness, ElementBasis, FemModel, Material, Matrix12};
use crate::mesh::{generate_arm, ArmParams, Point, TriGroup, CAVITY_GROUPS};
use crate::scene::{build_scene, ActuationMode, SceneConfig};

pub const FD_CONFIGURATIONS: usize = 20;
const SEED: u64 = 0x5eed;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    AtMost(f64),
    AtLeast(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub measured: f64,
    pub limit: Limit,
}

impl Check {
    pub fn passed(&self) -> bool {
        match self.limit {
            Limit::AtMost(tol) => self.measured <= tol,
            Limit::AtLeast(min) => self.measured >= min,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "ok  " } else { "FAIL" };
        let (op, bound) = match self.limit {
            Limit::AtMost(t) => ("<=", t),
            Limit::AtLeast(t) => (">=", t),
        };
        write!(f, "{status} {}::{}: {:e} (need {op} {:e})", self.module, self.name, self.measured, bound)
    }
}

/// Deliberate defects used to confirm that the suite catches them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Faults {
    /// Reverse the winding of every cavity surface.
    pub flip_cavity_normals: bool,
    /// Relative error added to every stable neo-Hookean element stiffness.
    pub tangent_perturbation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed())
    }

    pub fn get(&self, module: &str, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.module == module && c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

pub fn validate() -> Result<ValidationReport> {
    validate_with(&Faults::default())
}

pub fn validate_with(faults: &Faults) -> Result<ValidationReport> {
    let cfg = SceneConfig::default();
    let mut checks = Vec::new();
    let snh = cfg.materials.spa_material()?;
    let linear = cfg.materials.spine_material()?;
    let (f, k) = fd_errors(&snh, 1.0 + faults.tangent_perturbation, SEED);
    checks.push(check("materials", "snh_force_gradient", f, Limit::AtMost(1e-4)));
    checks.push(check("materials", "snh_stiffness_fd", k, Limit::AtMost(1e-3)));
    let (f, k) = fd_errors(&linear, 1.0, SEED + 1);
    checks.push(check("materials", "linear_force_gradient", f, Limit::AtMost(1e-4)));
    checks.push(check("materials", "linear_stiffness_fd", k, Limit::AtMost(1e-3)));

    let (closure, volume) = cavity_checks(&cfg.geometry.arm, faults.flip_cavity_normals)?;
    checks.push(check("actuation", "cavity_closure", closure, Limit::AtMost(1e-12)));
    checks.push(check("actuation", "cavity_orientation", volume, Limit::AtLeast(1e-12)));

    checks.push(check("controller", "hand_oracle", controller_oracle_error(500), Limit::AtMost(1e-12)));

    checks.push(check("dynamics", "free_fall", free_fall_error(1000)?, Limit::AtMost(1e-12)));
    let (drift, gap, identical) = scene_checks(&cfg)?;
    checks.push(check("dynamics", "fixed_drift", drift, Limit::AtMost(1e-10)));
    checks.push(check("dynamics", "bilateral_gap", gap, Limit::AtMost(1e-6)));
    checks.push(check("experiments", "determinism", if identical { 0.0 } else { 1.0 }, Limit::AtMost(0.0)));
    Ok(ValidationReport { checks })
}

fn check(module: &'static str, name: &'static str, measured: f64, limit: Limit) -> Check {
    // NaN must fail either bound
    let measured = match limit {
        _ if !measured.is_nan() => measured,
        Limit::AtMost(_) => f64::INFINITY,
        Limit::AtLeast(_) => f64::NEG_INFINITY,
    };
    Check {
        module,
        name,
        measured,
        limit,
    }
}

/// A well-shaped random tet and a random deformation of it.
fn random_element(rng: &mut StdRng) -> ([Point; 4], [Point; 4]) {
    let mut jitter = |s: f64| Point::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s));
    let h = 0.01;
    let rest = [
        jitter(0.1 * h),
        Point::new(h, 0.0, 0.0) + jitter(0.1 * h),
        Point::new(0.0, h, 0.0) + jitter(0.1 * h),
        Point::new(0.0, 0.0, h) + jitter(0.1 * h),
    ];
    let f = Matrix3::identity() + Matrix3::from_columns(&[jitter(0.3), jitter(0.3), jitter(0.3)]);
    let shift = jitter(h);
    let deformed = rest.map(|x| f * x + shift + jitter(0.05 * h));
    (rest, deformed)
}

/// Largest relative errors of (forces vs −∇E, stiffness vs −∂f/∂x) over the
/// random configurations, both by central differences. `stiffness_factor`
/// scales the analytic stiffness (1 for the real model).
fn fd_errors(material: &Material, stiffness_factor: f64, seed: u64) -> (f64, f64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let (mut worst_f, mut worst_k) = (0.0f64, 0.0f64);
    let mut done = 0;
    while done < FD_CONFIGURATIONS {
        let (rest, q) = random_element(&mut rng);
        let Ok(basis) = ElementBasis::new(&rest) else { continue };
        done += 1;
        let h = 1e-6 * 0.01;
        let perturbed = |k: usize, s: f64| {
            let mut x = q;
            x[k / 3][k % 3] += s;
            x
        };
        let f = element_forces(&basis, &q, material);
        let mut f_err = 0.0;
        let mut f_norm = 0.0;
        for k in 0..12 {
            let e_plus = element_energy(&basis, &perturbed(k, h), material);
            let e_minus = element_energy(&basis, &perturbed(k, -h), material);
            let fd = -(e_plus - e_minus) / (2.0 * h);
            f_err += (f[k / 3][k % 3] - fd).powi(2);
            f_norm += fd * fd;
        }
        worst_f = worst_f.max((f_err / f_norm).sqrt());

        let stiffness = stiffness_factor * element_stiffness(&basis, &q, material);
        let mut fd = Matrix12::zeros();
        for k in 0..12 {
            let fp = element_forces(&basis, &perturbed(k, h), material);
            let fm = element_forces(&basis, &perturbed(k, -h), material);
            for r in 0..12 {
                fd[(r, k)] = -(fp[r / 3][r % 3] - fm[r / 3][r % 3]) / (2.0 * h);
            }
        }
        worst_k = worst_k.max((stiffness - fd).norm() / fd.norm());
    }
    (worst_f, worst_k)
}

/// Worst closure ratio (|net force| or |net torque| over P·area) at rest and
/// bent, and the smallest signed enclosed cavity volume at rest.
fn cavity_checks(params: &ArmParams, flip: bool) -> Result<(f64, f64)> {
    let arm = generate_arm(params)?;
    let rest = arm.spa.vertices.clone();
    let bent: Vec<Point> = rest
        .iter()
        .map(|p| {
            let th = 2.0 * p.x;
            Point::new(p.x * th.cos() - p.y * th.sin(), p.x * th.sin() + p.y * th.cos(), p.z + 0.2 * p.x * p.x)
        })
        .collect();
    let pressure = 1.3;
    let mut worst = 0.0f64;
    let mut min_volume = f64::INFINITY;
    for name in CAVITY_GROUPS {
        let mut group = arm.spa.tri_group(name)?.clone();
        if flip {
            for t in &mut group.triangles {
                t.swap(1, 2);
            }
        }
        for q in [&rest, &bent] {
            let (f, _) = pressure_forces(&group.triangles, q, pressure);
            let nodes = group.nodes();
            let c = nodes.iter().map(|&i| q[i]).sum::<Point>() / nodes.len() as f64;
            let net: Point = nodes.iter().map(|&i| f[i]).sum();
            let torque: Point = nodes.iter().map(|&i| (q[i] - c).cross(&f[i])).sum();
            let scale = pressure * group.area(q);
            worst = worst.max(net.norm() / scale).max(torque.norm() / scale);
        }
        min_volume = min_volume.min(enclosed_volume(&group, &rest));
    }
    Ok((worst, min_volume))
}

/// Signed volume enclosed by a closed surface; positive when the normals
/// point away from the enclosed region.
pub fn enclosed_volume(group: &TriGroup, q: &[Point]) -> f64 {
    group
        .triangles
        .iter()
        .map(|&[a, b, c]| q[a].dot(&q[b].cross(&q[c])) / 6.0)
        .sum()
}

/// Largest absolute difference in any pressure or integral value between
/// `controller_step` and a direct transcription of the update, over a
/// synthetic tip path, with anti-windup off.
pub fn controller_oracle_error(steps: usize) -> f64 {
    let cfg = ControllerConfig {
        anti_windup: false,
        ..ControllerConfig::default()
    };
    let target = Vector3::new(0.0, -0.015, -0.010);
    let mut state = ControllerState::default();
    let mut p = [0.0f64; 4];
    let mut integral = 0.0f64;
    let mut worst = 0.0f64;
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let tip = Vector3::new(
            0.001 * (0.7 * t).sin(),
            -0.02 * (1.0 - (-t / 1.5).exp()) + 0.002 * (3.0 * t).cos(),
            -0.012 * (t / 2.0).sin(),
        );
        controller_step(&target, &tip, &mut state, &cfg);

        let e = [
            (target.x - tip.x) / cfg.working_unit,
            (target.y - tip.y) / cfg.working_unit,
            (target.z - tip.z) / cfg.working_unit,
        ];
        let mut d = [0.0; 4];
        for i in 0..4 {
            let r = DEMAND_MATRIX[i];
            let di = r[0] * e[0] + r[1] * e[1] + r[2] * e[2];
            d[i] = if di.abs() < cfg.deadband / cfg.working_unit { 0.0 } else { di };
        }
        let e_k = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3]).sqrt();
        integral += e_k * cfg.dt;
        let u_k = cfg.kp * e_k + cfg.ki * integral;
        let alpha = d[0].abs() + d[1].abs() + d[2].abs() + d[3].abs();
        for i in 0..4 {
            let dp = if alpha > 0.0 { u_k * d[i] / alpha } else { 0.0 };
            p[i] = (p[i] + dp).max(cfg.p_min).min(cfg.p_max);
        }
        let diff = (state.pressures - Vector4::from(p)).abs().max();
        worst = worst.max(diff).max((state.integral - integral).abs());
    }
    worst
}

/// Largest position or velocity deviation of an undamped point mass under
/// gravity from the implicit-Euler recursion v_k = v_{k-1} + dt·g,
/// q_k = q_{k-1} + dt·v_k.
pub fn free_fall_error(steps: usize) -> Result<f64> {
    let config = IntegratorConfig {
        rayleigh_mass: 0.0,
        rayleigh_stiffness: 0.0,
        ..IntegratorConfig::default()
    };
    let dt = config.dt;
    let g = config.gravity();
    let body = Body {
        name: "point".into(),
        model: FemModel {
            tets: vec![],
            bases: vec![],
            material: SceneConfig::default().materials.spine_material()?,
        },
        masses: vec![0.7],
        offset: 0,
    };
    let mut it = Integrator::new(vec![body], ConstraintSet::default(), config)?;
    let start = Point::new(0.01, -0.02, 0.03);
    let mut state = MechanicalState::at_rest(vec![start]);
    let (mut q, mut v) = (start, Point::zeros());
    let mut worst = 0.0f64;
    for _ in 0..steps {
        it.step(&mut state, &[Point::zeros()])?;
        v += dt * g;
        q += dt * v;
        worst = worst.max((state.q[0] - q).norm()).max((state.v[0] - v).norm());
    }
    Ok(worst)
}

/// Runs a coarse closed-loop scene twice; returns the worst fixed-node drift,
/// the worst pair gap and whether the two CSV logs are byte-identical.
fn scene_checks(base: &SceneConfig) -> Result<(f64, f64, bool)> {
    let mut cfg = base.clone();
    cfg.geometry.arm.element_size = 0.02;
    cfg.mode = ActuationMode::Controller;
    cfg.target = [0.0, -0.015, -0.010];
    let run = || -> Result<(String, f64, f64)> {
        let mut scene = build_scene(&cfg)?;
        let log = simulate(&mut scene, 100, 1, |_| false)?;
        Ok((log.to_csv_string(), scene.stats.max_fixed_drift, scene.stats.max_pair_gap))
    };
    let (a, drift, gap) = run()?;
    let (b, ..) = run()?;
    Ok((drift, gap, a == b))
}
