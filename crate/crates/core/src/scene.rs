//! Single-arm scene: two coupled bodies, four cavities, a tip marker and the
//! per-step animation loop.

use std::path::PathBuf;

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::actuation::{merge_cavities, periodic_pressures, PeriodicSignalConfig, PressureCavity};
use crate::controller::{controller_step, ControllerConfig, ControllerState};
use crate::dynamics::{lump_mass, Body, ConstraintSet, Integrator, IntegratorConfig, MechanicalState};
use crate::error::{Error, Result};
use crate::materials::{FemModel, LinearElasticParams, Material, StableNeoHookeanParams};
use crate::mesh::{
    apply_map, build_barycentric_map, generate_arm, load_mesh, ArmModel, ArmParams, BarycentricMap, Point,
    CAVITY_GROUPS, FIXED_GROUP,
};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Parameters of the generated arm, used unless both mesh paths are set.
    pub arm: ArmParams,
    pub spa_mesh: Option<PathBuf>,
    pub spine_mesh: Option<PathBuf>,
}

/// How the SNH `lambda` entry is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaConvention {
    /// First Lamé coefficient; mapped to the energy parameter `lambda + mu`.
    Lame,
    /// Used directly as the energy's volume coefficient.
    Energy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaMaterial {
    /// Shear modulus [Pa].
    pub mu: f64,
    pub lambda: f64,
    pub lambda_convention: LambdaConvention,
    /// [kg/m³]
    pub density: f64,
}

impl Default for SpaMaterial {
    fn default() -> Self {
        SpaMaterial {
            mu: 0.24203e6,
            lambda: 0.0,
            lambda_convention: LambdaConvention::Lame,
            density: 1080.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpineMaterial {
    /// Young's modulus [Pa].
    pub youngs: f64,
    pub poisson: f64,
    /// [kg/m³]
    pub density: f64,
}

impl Default for SpineMaterial {
    fn default() -> Self {
        SpineMaterial {
            youngs: 75e6,
            poisson: 0.45,
            density: 1210.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialsConfig {
    pub spa: SpaMaterial,
    pub spine: SpineMaterial,
    /// Multiplies every elastic modulus.
    pub stiffness_scale: f64,
    /// Multiplies every density.
    pub density_scale: f64,
}

impl Default for MaterialsConfig {
    fn default() -> Self {
        MaterialsConfig {
            spa: SpaMaterial::default(),
            spine: SpineMaterial::default(),
            stiffness_scale: DEFAULT_SCALE,
            density_scale: DEFAULT_SCALE,
        }
    }
}

/// Brings the unit-pressure tip response to the centimeter range.
pub const DEFAULT_SCALE: f64 = 1.5e-5;

impl MaterialsConfig {
    pub fn spa_material(&self) -> Result<Material> {
        let mu = self.spa.mu * self.stiffness_scale;
        let lambda = self.spa.lambda * self.stiffness_scale;
        let p = match self.spa.lambda_convention {
            LambdaConvention::Lame => StableNeoHookeanParams::from_lame(mu, lambda)?,
            LambdaConvention::Energy => StableNeoHookeanParams::new(mu, lambda)?,
        };
        Ok(Material::StableNeoHookean(p))
    }

    pub fn spine_material(&self) -> Result<Material> {
        let p = LinearElasticParams::new(self.spine.youngs * self.stiffness_scale, self.spine.poisson)?;
        Ok(Material::LinearElastic(p))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("stiffness_scale", self.stiffness_scale), ("density_scale", self.density_scale)] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {s}")));
            }
        }
        if !(self.spa.density > 0.0 && self.spine.density > 0.0) {
            return Err(Error::InvalidParameter("densities must be positive".into()));
        }
        self.spa_material()?;
        self.spine_material()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuationMode {
    #[default]
    None,
    Periodic,
    Controller,
}

/// Settings of the closed-loop reaching runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadrantConfig {
    /// Target tip displacement magnitudes [m].
    pub target_y: f64,
    pub target_z: f64,
    pub target_x: f64,
    /// Stop once e_k falls below this (working units). Defaults to the deadband.
    pub stop_error: Option<f64>,
    /// Stop once the controller has left every pressure unchanged for this
    /// long [s]; every remaining demand is then blocked by a pressure bound.
    /// Zero disables the check.
    pub stall_time: f64,
}

impl Default for QuadrantConfig {
    fn default() -> Self {
        QuadrantConfig {
            target_y: 0.015,
            target_z: 0.010,
            target_x: 0.0,
            stop_error: None,
            stall_time: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub geometry: GeometryConfig,
    pub materials: MaterialsConfig,
    pub integrator: IntegratorConfig,
    pub mode: ActuationMode,
    pub periodic: PeriodicSignalConfig,
    pub controller: ControllerConfig,
    pub quadrant: QuadrantConfig,
    /// Controller target as a tip displacement from rest [m].
    pub target: [f64; 3],
    /// Simulated time [s]; an upper bound in controller mode.
    pub duration: f64,
    /// Log every n-th step.
    pub log_stride: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            geometry: GeometryConfig::default(),
            materials: MaterialsConfig::default(),
            integrator: IntegratorConfig::default(),
            mode: ActuationMode::None,
            periodic: PeriodicSignalConfig::default(),
            controller: ControllerConfig::default(),
            quadrant: QuadrantConfig::default(),
            target: [0.0; 3],
            duration: 40.0,
            log_stride: 1,
        }
    }
}

impl SceneConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| e.in_component(path.display().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scene config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.arm.validate().map_err(|e| e.in_component("geometry"))?;
        if self.geometry.spa_mesh.is_some() != self.geometry.spine_mesh.is_some() {
            return Err(Error::Config("spa_mesh and spine_mesh must be given together".into()));
        }
        self.materials.validate().map_err(|e| e.in_component("materials"))?;
        self.integrator.validate().map_err(|e| e.in_component("integrator"))?;
        self.periodic.validate().map_err(|e| e.in_component("periodic"))?;
        self.controller.validate().map_err(|e| e.in_component("controller"))?;
        // the controller runs once per animation step
        if self.mode == ActuationMode::Controller && self.controller.dt != self.integrator.dt {
            return Err(Error::Config(format!(
                "controller.dt ({}) must equal integrator.dt ({})",
                self.controller.dt, self.integrator.dt
            )));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be positive, got {}", self.duration)));
        }
        if self.log_stride == 0 {
            return Err(Error::Config("log_stride must be at least 1".into()));
        }
        if self.target.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("target must be finite".into()));
        }
        Ok(())
    }

    /// Number of integration steps covering `duration`.
    pub fn steps(&self) -> usize {
        (self.duration / self.integrator.dt).round() as usize
    }
}

/// What one animation step read and applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub pressures: [f64; 4],
    /// Tip displacement from rest at the start of the step [m].
    pub tip: [f64; 3],
    pub e_k: Option<f64>,
    pub u_k: Option<f64>,
}

/// Worst constraint violations seen so far.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SceneStats {
    pub max_fixed_drift: f64,
    pub max_pair_gap: f64,
    pub skipped_triangles: usize,
}

pub struct Scene {
    pub config: SceneConfig,
    pub arm: ArmModel,
    pub integrator: Integrator,
    pub state: MechanicalState,
    pub cavities: Vec<PressureCavity>,
    pub tip_map: BarycentricMap,
    pub rest_tip: Point,
    pub controller: Option<ControllerState>,
    pub stats: SceneStats,
    step: usize,
}

fn load_arm(geometry: &GeometryConfig) -> Result<ArmModel> {
    match (&geometry.spa_mesh, &geometry.spine_mesh) {
        (Some(a), Some(b)) => {
            let spa = load_mesh(a).map_err(|e| e.in_component(a.display().to_string()))?;
            let spine = load_mesh(b).map_err(|e| e.in_component(b.display().to_string()))?;
            ArmModel::from_meshes(spa, spine)
        }
        _ => generate_arm(&geometry.arm),
    }
}

/// Maps `p` into whichever body contains it, returning global node indices.
fn tip_map(arm: &ArmModel, p: Point) -> Result<BarycentricMap> {
    match build_barycentric_map(&arm.spa, &arm.spa.vertices, &[p]) {
        Ok(m) => Ok(m),
        Err(Error::PointOutsideMesh { .. }) => {
            let offset = arm.spa.vertices.len();
            let mut m = build_barycentric_map(&arm.spine, &arm.spine.vertices, &[p])?;
            for mp in &mut m.points {
                mp.nodes = mp.nodes.map(|i| i + offset);
            }
            Ok(m)
        }
        Err(e) => Err(e),
    }
}

pub fn build_scene(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let arm = load_arm(&config.geometry).map_err(|e| e.in_component("geometry"))?;
    Scene::from_arm(config, arm)
}

impl Scene {
    /// Builds the scene around an already constructed arm.
    pub fn from_arm(config: &SceneConfig, arm: ArmModel) -> Result<Scene> {
        config.validate()?;
        let m = &config.materials;
        let n_spa = arm.spa.vertices.len();
        let spa_model = FemModel::new(&arm.spa, m.spa_material()?).map_err(|e| e.in_component("spa"))?;
        let spine_model = FemModel::new(&arm.spine, m.spine_material()?).map_err(|e| e.in_component("spine"))?;
        let spa_mass = lump_mass(&arm.spa, m.spa.density * m.density_scale).map_err(|e| e.in_component("spa"))?;
        let spine_mass =
            lump_mass(&arm.spine, m.spine.density * m.density_scale).map_err(|e| e.in_component("spine"))?;
        let bodies = vec![
            Body {
                name: "spa".into(),
                model: spa_model,
                masses: spa_mass.masses,
                offset: 0,
            },
            Body {
                name: "spine".into(),
                model: spine_model,
                masses: spine_mass.masses,
                offset: n_spa,
            },
        ];

        let mut fixed = Vec::new();
        for &i in arm.spa.node_group(FIXED_GROUP)? {
            fixed.push((i, arm.spa.vertices[i]));
        }
        for &i in arm.spine.node_group(FIXED_GROUP)? {
            fixed.push((i + n_spa, arm.spine.vertices[i]));
        }
        let bilateral: Vec<(usize, usize)> = arm.coupling_pairs().into_iter().map(|(a, b)| (a, b + n_spa)).collect();
        let constraints = ConstraintSet { fixed, bilateral };
        let integrator =
            Integrator::new(bodies, constraints, config.integrator.clone()).map_err(|e| e.in_component("dynamics"))?;

        let cavities = CAVITY_GROUPS
            .iter()
            .map(|name| PressureCavity::new(name, arm.spa.tri_group(name)?, 0))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_component("actuation"))?;

        let q: Vec<Point> = arm.spa.vertices.iter().chain(&arm.spine.vertices).copied().collect();
        let tip_map = tip_map(&arm, arm.tip).map_err(|e| e.in_component("tip"))?;
        let rest_tip = apply_map(&tip_map, &q)[0];
        let controller = (config.mode == ActuationMode::Controller).then(ControllerState::default);
        let mut scene = Scene {
            config: config.clone(),
            arm,
            integrator,
            state: MechanicalState::at_rest(q),
            cavities,
            tip_map,
            rest_tip,
            controller,
            stats: SceneStats::default(),
            step: 0,
        };
        if config.mode == ActuationMode::Periodic {
            let (l, r) = periodic_pressures(0.0, &config.periodic);
            scene.set_pressures(merge_cavities(l, r));
        }
        Ok(scene)
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.integrator.dt
    }

    pub fn tip_position(&self) -> Point {
        apply_map(&self.tip_map, &self.state.q)[0]
    }

    pub fn tip_displacement(&self) -> Point {
        self.tip_position() - self.rest_tip
    }

    pub fn pressures(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.cavities[i].pressure)
    }

    pub fn set_pressures(&mut self, p: [f64; 4]) {
        for (c, p) in self.cavities.iter_mut().zip(p) {
            c.pressure = p;
        }
    }

    pub fn target(&self) -> Vector3<f64> {
        Vector3::from(self.config.target)
    }

    /// Reads the tip and evaluates the actuation for the current step.
    pub fn actuate(&mut self) -> StepRecord {
        let t = self.time();
        let tip = self.tip_displacement();
        let (mut e_k, mut u_k) = (None, None);
        match self.config.mode {
            ActuationMode::None => {}
            ActuationMode::Periodic => {
                let (l, r) = periodic_pressures(t, &self.config.periodic);
                self.set_pressures(merge_cavities(l, r));
            }
            ActuationMode::Controller => {
                let target = self.target();
                let cfg = self.config.controller;
                let state = self.controller.get_or_insert_with(ControllerState::default);
                let out = controller_step(&target, &tip, state, &cfg);
                let p: Vector4<f64> = state.pressures;
                e_k = Some(out.e_k);
                u_k = Some(out.u_k);
                self.set_pressures(p.into());
            }
        }
        StepRecord {
            step: self.step,
            t,
            pressures: self.pressures(),
            tip: tip.into(),
            e_k,
            u_k,
        }
    }

    /// Integrates one step under the current cavity pressures.
    pub fn advance(&mut self) -> Result<()> {
        let mut f_ext = vec![Point::zeros(); self.state.q.len()];
        for c in &self.cavities {
            self.stats.skipped_triangles += c.add_forces(&self.state.q, &mut f_ext);
        }
        let report = self
            .integrator
            .step(&mut self.state, &f_ext)
            .map_err(|e| Error::Step {
                step: self.step,
                source: Box::new(e),
            })?;
        self.stats.max_fixed_drift = self.stats.max_fixed_drift.max(report.max_fixed_drift);
        self.stats.max_pair_gap = self.stats.max_pair_gap.max(report.max_pair_gap);
        self.step += 1;
        Ok(())
    }

    pub fn animation_step(&mut self) -> Result<StepRecord> {
        let record = self.actuate();
        self.advance()?;
        Ok(record)
    }

    pub fn max_speed(&self) -> f64 {
        self.state.v.iter().map(|v| v.amax()).fold(0.0, f64::max)
    }
}
