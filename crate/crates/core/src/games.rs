//! Closed-form game models, the two built-in example problems, and the
//! time-augmentation transform used as a comparison baseline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::MAX_DIM;
use crate::numerics::Hamiltonian;
use crate::scene::{Node, Scene, SceneError};

/// Gradients shorter than this have no well-defined optimal direction.
pub const DEGENERATE_GRADIENT: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum GameError {
    #[error("unknown problem '{0}' (expected example1 or example2)")]
    UnknownProblem(String),
    #[error("invalid overrides for {problem}: {message}")]
    Overrides { problem: String, message: String },
    #[error("augmented dimension {0} exceeds the supported maximum")]
    DimensionOverflow(usize),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Which player commits first inside the Hamiltonian.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinimaxOrder {
    /// `min_a max_b`: the defender reacts to the attacker.
    #[default]
    Upper,
    /// `max_b min_a`: the attacker reacts to the defender.
    Lower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Dynamics {
    /// `x' = v a`, `|a| <= 1`; attacker only.
    SingleIntegrator { dim: usize, speed: f64 },
    /// State `(x_A, y_A, y_D)`: `p_A' = v_A a` with `|a| <= 1`,
    /// `y_D' = v_D b` with `b` in `[-1, 1]`.
    AttackerDefenderPlanar {
        attacker_speed: f64,
        defender_speed: f64,
    },
    /// Inner dynamics plus a clock coordinate `s' = 1`.
    TimeAugmented { inner: Box<GameModel> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameModel {
    pub dynamics: Dynamics,
    #[serde(default)]
    pub order: MinimaxOrder,
}

/// Optimal (or prescribed) controls of both players.
#[derive(Clone, Debug, PartialEq)]
pub struct Actions {
    pub attacker: Vec<f64>,
    pub defender: Vec<f64>,
}

impl GameModel {
    pub fn new(dynamics: Dynamics) -> Self {
        GameModel {
            dynamics,
            order: MinimaxOrder::Upper,
        }
    }

    pub fn single_integrator(dim: usize, speed: f64) -> Self {
        GameModel::new(Dynamics::SingleIntegrator { dim, speed })
    }

    pub fn attacker_defender(attacker_speed: f64, defender_speed: f64) -> Self {
        GameModel::new(Dynamics::AttackerDefenderPlanar {
            attacker_speed,
            defender_speed,
        })
    }

    pub fn with_order(mut self, order: MinimaxOrder) -> Self {
        self.order = order;
        self
    }

    pub fn state_dim(&self) -> usize {
        match &self.dynamics {
            Dynamics::SingleIntegrator { dim, .. } => *dim,
            Dynamics::AttackerDefenderPlanar { .. } => 3,
            Dynamics::TimeAugmented { inner } => inner.state_dim() + 1,
        }
    }

    pub fn attacker_dim(&self) -> usize {
        match &self.dynamics {
            Dynamics::SingleIntegrator { dim, .. } => *dim,
            Dynamics::AttackerDefenderPlanar { .. } => 2,
            Dynamics::TimeAugmented { inner } => inner.attacker_dim(),
        }
    }

    pub fn defender_dim(&self) -> usize {
        match &self.dynamics {
            Dynamics::SingleIntegrator { .. } => 0,
            Dynamics::AttackerDefenderPlanar { .. } => 1,
            Dynamics::TimeAugmented { inner } => inner.defender_dim(),
        }
    }

    /// Short identifier used in manifests.
    pub fn id(&self) -> String {
        match &self.dynamics {
            Dynamics::SingleIntegrator { dim, speed } => format!("single_integrator(n={dim},v={speed})"),
            Dynamics::AttackerDefenderPlanar {
                attacker_speed,
                defender_speed,
            } => format!("attacker_defender_planar(vA={attacker_speed},vD={defender_speed})"),
            Dynamics::TimeAugmented { inner } => format!("time_augmented({})", inner.id()),
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        match &self.dynamics {
            Dynamics::SingleIntegrator { dim, speed } => {
                if *dim == 0 || *dim > MAX_DIM {
                    return Err(GameError::Invalid(format!("single integrator dimension {dim}")));
                }
                check_speed(*speed)
            }
            Dynamics::AttackerDefenderPlanar {
                attacker_speed,
                defender_speed,
            } => {
                check_speed(*attacker_speed)?;
                check_speed(*defender_speed)
            }
            Dynamics::TimeAugmented { inner } => {
                if inner.state_dim() + 1 > MAX_DIM {
                    return Err(GameError::DimensionOverflow(inner.state_dim() + 1));
                }
                inner.validate()
            }
        }
    }

    /// Bound on `|f(x, a, b, t)|` over all admissible controls.
    pub fn speed_bound(&self) -> f64 {
        match &self.dynamics {
            Dynamics::SingleIntegrator { speed, .. } => *speed,
            Dynamics::AttackerDefenderPlanar {
                attacker_speed,
                defender_speed,
            } => attacker_speed.hypot(*defender_speed),
            Dynamics::TimeAugmented { inner } => inner.speed_bound().hypot(1.0),
        }
    }

    /// Minimax-attaining controls for costate `p`. A vanishing attacker
    /// gradient gives the zero action; the defender breaks ties with +1.
    pub fn optimal_actions(&self, p: &[f64], _x: &[f64], _t: f64) -> Actions {
        match &self.dynamics {
            Dynamics::SingleIntegrator { dim, .. } => Actions {
                attacker: steepest_descent(&p[..*dim]),
                defender: Vec::new(),
            },
            Dynamics::AttackerDefenderPlanar { .. } => Actions {
                attacker: steepest_descent(&p[..2]),
                defender: vec![if p[2] >= 0.0 { 1.0 } else { -1.0 }],
            },
            Dynamics::TimeAugmented { inner } => inner.optimal_actions(p, _x, _t),
        }
    }

    /// State derivative `f(x, a, b, t)`.
    pub fn dynamics(&self, _x: &[f64], actions: &Actions, _t: f64, out: &mut [f64]) {
        match &self.dynamics {
            Dynamics::SingleIntegrator { dim, speed } => {
                for i in 0..*dim {
                    out[i] = speed * actions.attacker[i];
                }
            }
            Dynamics::AttackerDefenderPlanar {
                attacker_speed,
                defender_speed,
            } => {
                out[0] = attacker_speed * actions.attacker[0];
                out[1] = attacker_speed * actions.attacker[1];
                out[2] = defender_speed * actions.defender[0];
            }
            Dynamics::TimeAugmented { inner } => {
                let n = inner.state_dim();
                inner.dynamics(_x, actions, _t, &mut out[..n]);
                out[n] = 1.0;
            }
        }
    }
}

impl Hamiltonian for GameModel {
    fn ndim(&self) -> usize {
        self.state_dim()
    }

    /// Closed-form minimax of `f . p`. The dynamics separate in the two
    /// players' controls, so both minimax orders give the same value.
    fn hamiltonian(&self, x: &[f64], p: &[f64], t: f64) -> f64 {
        match &self.dynamics {
            Dynamics::SingleIntegrator { dim, speed } => -speed * norm(&p[..*dim]),
            Dynamics::AttackerDefenderPlanar {
                attacker_speed,
                defender_speed,
            } => -attacker_speed * p[0].hypot(p[1]) + defender_speed * p[2].abs(),
            Dynamics::TimeAugmented { inner } => {
                let n = inner.state_dim();
                inner.hamiltonian(&x[..n], &p[..n], t) + p[n]
            }
        }
    }

    fn gradient_bounds(&self) -> Vec<f64> {
        match &self.dynamics {
            Dynamics::SingleIntegrator { dim, speed } => vec![speed.abs(); *dim],
            Dynamics::AttackerDefenderPlanar {
                attacker_speed,
                defender_speed,
            } => vec![*attacker_speed, *attacker_speed, *defender_speed],
            Dynamics::TimeAugmented { inner } => {
                let mut a = inner.gradient_bounds();
                a.push(1.0);
                a
            }
        }
    }
}

fn check_speed(v: f64) -> Result<(), GameError> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(GameError::Invalid(format!("speed {v} must be finite and non-negative")))
    }
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|q| q * q).sum::<f64>().sqrt()
}

fn steepest_descent(p: &[f64]) -> Vec<f64> {
    let n = norm(p);
    if n < DEGENERATE_GRADIENT {
        vec![0.0; p.len()]
    } else {
        p.iter().map(|q| -q / n).collect()
    }
}

/// State-space box of a problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

/// A complete reach-avoid problem: dynamics, target (`l`), constraint
/// (`g`), horizon and computational domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    pub model: GameModel,
    pub l_scene: Scene,
    #[serde(default)]
    pub g_scene: Option<Scene>,
    pub horizon: f64,
    pub domain: Domain,
}

impl ProblemSpec {
    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn validate(&self) -> Result<(), GameError> {
        self.model.validate()?;
        let n = self.state_dim();
        self.l_scene.validate_for(n)?;
        if let Some(g) = &self.g_scene {
            g.validate_for(n)?;
        }
        if self.domain.mins.len() != n || self.domain.maxs.len() != n {
            return Err(GameError::Invalid(format!(
                "domain has {}/{} bounds for a {n}-D state",
                self.domain.mins.len(),
                self.domain.maxs.len()
            )));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(GameError::Invalid(format!("horizon {} must be positive", self.horizon)));
        }
        Ok(())
    }
}

/// Parameters of the moving-target / moving-obstacle control problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example1Params {
    pub vehicle_speed: f64,
    pub target_speed: f64,
    pub obstacle_speed: f64,
    pub horizon: f64,
    /// Target center at t = 0; it moves in -y.
    pub target_center: [f64; 2],
    pub target_half_width: f64,
    /// Obstacle center at t = 0; it moves in -y.
    pub obstacle_center: [f64; 2],
    pub obstacle_half_width: f64,
    /// The domain is `[-d, d]^2`.
    pub domain_half_width: f64,
}

impl Default for Example1Params {
    fn default() -> Self {
        Example1Params {
            vehicle_speed: 0.5,
            target_speed: 1.5,
            obstacle_speed: 1.0,
            horizon: 0.5,
            target_center: [0.0, 0.75],
            target_half_width: 0.2,
            obstacle_center: [0.0, 0.0],
            obstacle_half_width: 0.1,
            domain_half_width: 1.0,
        }
    }
}

/// Parameters of the attacker/defender game. The defender slides on the
/// vertical line `x = defender_x`; the obstacle keeps its top edge fixed
/// while its bottom edge descends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Example2Params {
    pub attacker_speed: f64,
    pub defender_speed: f64,
    pub horizon: f64,
    pub defender_x: f64,
    pub capture_radius: f64,
    /// Target center at t = 0.
    pub target_center: [f64; 2],
    pub target_half_widths: [f64; 2],
    pub target_velocity: [f64; 2],
    /// Horizontal extent `[left, right]` of the obstacle.
    pub obstacle_x: [f64; 2],
    pub obstacle_top: f64,
    /// Bottom edge at t = 0.
    pub obstacle_bottom: f64,
    /// Downward speed of the bottom edge.
    pub obstacle_bottom_speed: f64,
    /// The domain is `[-d, d]^3`.
    pub domain_half_width: f64,
}

impl Default for Example2Params {
    fn default() -> Self {
        Example2Params {
            attacker_speed: 2.0,
            defender_speed: 3.0,
            horizon: 1.0,
            defender_x: 0.05,
            capture_radius: 0.1,
            target_center: [0.7, -0.7],
            target_half_widths: [0.2, 0.15],
            target_velocity: [0.0, 1.5],
            obstacle_x: [-0.15, 0.25],
            obstacle_top: 0.5,
            obstacle_bottom: -0.3,
            obstacle_bottom_speed: 0.5,
            domain_half_width: 1.0,
        }
    }
}

impl Example1Params {
    pub fn problem(&self) -> Result<ProblemSpec, GameError> {
        let h = self.target_half_width;
        let target = Node::moving_box(&self.target_center, &[0.0, -self.target_speed], &[h, h], &[]);
        let o = self.obstacle_half_width;
        let obstacle = Node::moving_box(&self.obstacle_center, &[0.0, -self.obstacle_speed], &[o, o], &[]);
        let d = self.domain_half_width;
        let spec = ProblemSpec {
            name: "example1".into(),
            model: GameModel::single_integrator(2, self.vehicle_speed),
            l_scene: Scene::new(target)?,
            g_scene: Some(Scene::new(obstacle)?.complement()),
            horizon: self.horizon,
            domain: Domain {
                mins: vec![-d, -d],
                maxs: vec![d, d],
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl Example2Params {
    pub fn problem(&self) -> Result<ProblemSpec, GameError> {
        // attacker-only shapes ignore the defender coordinate
        let planar = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let target = Node::moving_box(
            &self.target_center,
            &self.target_velocity,
            &self.target_half_widths,
            &[],
        )
        .projected(planar.clone());

        let [left, right] = self.obstacle_x;
        let rate = self.obstacle_bottom_speed;
        let obstacle = Node::moving_box(
            &[0.5 * (left + right), 0.5 * (self.obstacle_top + self.obstacle_bottom)],
            &[0.0, -0.5 * rate],
            &[0.5 * (right - left), 0.5 * (self.obstacle_top - self.obstacle_bottom)],
            &[0.0, 0.5 * rate],
        )
        .projected(planar);

        // |(x_A - defender_x, y_A - y_D)| <= capture radius
        let capture = Node::ball(&[self.defender_x, 0.0], self.capture_radius)
            .projected(vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, -1.0]]);

        let forbidden = Node::Union {
            children: vec![obstacle, capture],
        };
        let d = self.domain_half_width;
        let spec = ProblemSpec {
            name: "example2".into(),
            model: GameModel::attacker_defender(self.attacker_speed, self.defender_speed),
            l_scene: Scene::new(target)?,
            g_scene: Some(Scene::new(forbidden.complement())?),
            horizon: self.horizon,
            domain: Domain {
                mins: vec![-d; 3],
                maxs: vec![d; 3],
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// One of the built-in problems with optional parameter overrides (a JSON
/// object whose keys are parameter names; unknown keys are rejected).
pub fn builtin_problem(name: &str, overrides: &serde_json::Value) -> Result<ProblemSpec, GameError> {
    let overrides = if overrides.is_null() {
        serde_json::Value::Object(Default::default())
    } else {
        overrides.clone()
    };
    let bad = |e: serde_json::Error| GameError::Overrides {
        problem: name.to_string(),
        message: e.to_string(),
    };
    match name {
        "example1" => serde_json::from_value::<Example1Params>(overrides)
            .map_err(bad)?
            .problem(),
        "example2" => serde_json::from_value::<Example2Params>(overrides)
            .map_err(bad)?
            .problem(),
        other => Err(GameError::UnknownProblem(other.to_string())),
    }
}

/// Static problem over `(x, s)` with `s' = 1` standing in for time. The
/// scenes become functions of the augmented state and the domain gains
/// `s` in `[0, T]`.
pub fn augment_time(spec: &ProblemSpec) -> Result<ProblemSpec, GameError> {
    let n = spec.state_dim();
    if n + 1 > MAX_DIM {
        return Err(GameError::DimensionOverflow(n + 1));
    }
    let mut domain = spec.domain.clone();
    domain.mins.push(0.0);
    domain.maxs.push(spec.horizon);
    Ok(ProblemSpec {
        name: format!("{}+time", spec.name),
        model: GameModel {
            order: spec.model.order,
            dynamics: Dynamics::TimeAugmented {
                inner: Box::new(spec.model.clone()),
            },
        },
        l_scene: spec.l_scene.time_lifted(n),
        g_scene: spec.g_scene.as_ref().map(|g| g.time_lifted(n)),
        horizon: spec.horizon,
        domain,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::dissipation_bounds;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn hamiltonian_examples() {
        let si = GameModel::single_integrator(2, 0.5);
        assert_eq!(si.hamiltonian(&[0.0; 2], &[3.0, 4.0], 0.0), -2.5);
        let ad = GameModel::attacker_defender(2.0, 3.0);
        assert_eq!(ad.hamiltonian(&[0.0; 3], &[3.0, 4.0, 1.0], 0.0), -7.0);
        for m in [&si, &ad] {
            let zero = vec![0.0; m.state_dim()];
            assert_eq!(m.hamiltonian(&zero, &zero, 0.3), 0.0);
        }
    }

    #[test]
    fn dissipation_examples() {
        assert_eq!(
            dissipation_bounds(&GameModel::single_integrator(3, 0.7)).0,
            vec![0.7; 3]
        );
        assert_eq!(
            dissipation_bounds(&GameModel::attacker_defender(2.0, 3.0)).0,
            vec![2.0, 2.0, 3.0]
        );
        assert_eq!(dissipation_bounds(&GameModel::single_integrator(2, 0.0)).0, vec![0.0; 2]);
    }

    #[test]
    fn optimal_action_examples() {
        let si = GameModel::single_integrator(2, 0.5);
        let a = si.optimal_actions(&[3.0, 4.0], &[0.0; 2], 0.0);
        assert!((a.attacker[0] + 0.6).abs() < 1e-15 && (a.attacker[1] + 0.8).abs() < 1e-15);
        assert_eq!(si.optimal_actions(&[0.0, 0.0], &[0.0; 2], 0.0).attacker, vec![0.0, 0.0]);
        let ad = GameModel::attacker_defender(2.0, 3.0);
        assert_eq!(ad.optimal_actions(&[0.0, 0.0, -2.0], &[0.0; 3], 0.0).defender, vec![-1.0]);
        assert_eq!(ad.optimal_actions(&[1.0, 0.0, 0.0], &[0.0; 3], 0.0).defender, vec![1.0]);
    }

    #[test]
    fn builtin_example1() {
        let spec = builtin_problem("example1", &serde_json::Value::Null).unwrap();
        assert_eq!(spec.horizon, 0.5);
        assert_eq!(spec.state_dim(), 2);
        // target center path (0, 0.75 - 1.5 t); obstacle center path (0, -t)
        for t in [0.0, 0.2, 0.5] {
            assert!((spec.l_scene.eval(&[0.0, 0.75 - 1.5 * t], t) + 0.2).abs() < 1e-15);
            let g = spec.g_scene.as_ref().unwrap();
            assert!((g.eval(&[0.0, -t], t) - 0.1).abs() < 1e-15);
        }
    }

    #[test]
    fn builtin_overrides_and_errors() {
        let spec = builtin_problem("example1", &serde_json::json!({"vehicle_speed": 0.25})).unwrap();
        assert_eq!(spec.model, GameModel::single_integrator(2, 0.25));
        assert!(matches!(
            builtin_problem("example1", &serde_json::json!({"vehicle_sped": 0.25})),
            Err(GameError::Overrides { .. })
        ));
        assert_eq!(
            builtin_problem("atari", &serde_json::Value::Null),
            Err(GameError::UnknownProblem("atari".into()))
        );
    }

    #[test]
    fn builtin_example2_sets() {
        let spec = builtin_problem("example2", &serde_json::Value::Null).unwrap();
        assert_eq!(spec.state_dim(), 3);
        let g = spec.g_scene.as_ref().unwrap();
        // captured: attacker next to the defender
        assert!(g.eval(&[0.05, 0.3, 0.35], 0.0) > 0.0);
        assert!(g.eval(&[-0.7, 0.3, 0.35], 0.0) < 0.0);
        // obstacle bottom edge descends at 0.5 from -0.3
        assert!(g.eval(&[0.2, -0.5, 0.9], 0.0) < 0.0);
        assert!(g.eval(&[0.2, -0.5, 0.9], 0.6) > 0.0);
        assert!((g.eval(&[0.2, 0.5, 0.9], 0.9)).abs() < 1e-12);
        // target rises at 1.5
        assert!(spec.l_scene.eval(&[0.7, 0.05, -0.9], 0.5) < 0.0);
        assert!(spec.l_scene.eval(&[0.7, 0.05, -0.9], 0.0) > 0.0);
    }

    #[test]
    fn augmentation_of_example1() {
        let spec = builtin_problem("example1", &serde_json::Value::Null).unwrap();
        let aug = augment_time(&spec).unwrap();
        assert_eq!(aug.state_dim(), 3);
        aug.validate().unwrap();
        assert!(aug.l_scene.is_static() && aug.g_scene.as_ref().unwrap().is_static());
        assert_eq!(aug.domain.maxs[2], 0.5);
        let h = aug.model.hamiltonian(&[0.0; 3], &[3.0, 4.0, 0.7], 0.0);
        assert!((h - (-2.5 + 0.7)).abs() < 1e-15);
        assert_eq!(dissipation_bounds(&aug.model).0, vec![0.5, 0.5, 1.0]);
        let x = [0.1, -0.3];
        assert_eq!(
            aug.l_scene.eval(&[x[0], x[1], 0.2], 0.0),
            spec.l_scene.eval(&x, 0.2)
        );
        let twice = augment_time(&augment_time(&aug).unwrap());
        assert_eq!(twice, Err(GameError::DimensionOverflow(5)));
    }

    /// Brute-force minimax over sampled control sets, in the given order.
    fn sampled_minimax(model: &GameModel, p: &[f64], order: MinimaxOrder) -> f64 {
        let discs: Vec<[f64; 2]> = (0..720)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 720.0;
                [th.cos(), th.sin()]
            })
            .collect();
        let bs = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let x = vec![0.0; model.state_dim()];
        let value = |a: &[f64; 2], b: f64| {
            let actions = Actions {
                attacker: a.to_vec(),
                defender: vec![b],
            };
            let mut f = [0.0; 3];
            model.dynamics(&x, &actions, 0.0, &mut f);
            f.iter().zip(p).map(|(f, p)| f * p).sum::<f64>()
        };
        match order {
            MinimaxOrder::Upper => discs
                .iter()
                .map(|a| bs.iter().map(|&b| value(a, b)).fold(f64::NEG_INFINITY, f64::max))
                .fold(f64::INFINITY, f64::min),
            MinimaxOrder::Lower => bs
                .iter()
                .map(|&b| discs.iter().map(|a| value(a, b)).fold(f64::INFINITY, f64::min))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    proptest! {
        #[test]
        fn positively_homogeneous(p in proptest::collection::vec(-5.0f64..5.0, 3), k in 0.0f64..10.0) {
            let m = GameModel::attacker_defender(2.0, 3.0);
            let x = [0.0; 3];
            let scaled: Vec<f64> = p.iter().map(|q| k * q).collect();
            let lhs = m.hamiltonian(&x, &scaled, 0.0);
            prop_assert!((lhs - k * m.hamiltonian(&x, &p, 0.0)).abs() < 1e-10);
            let si = GameModel::single_integrator(3, 0.5);
            prop_assert!((si.hamiltonian(&x, &scaled, 0.0) - k * si.hamiltonian(&x, &p, 0.0)).abs() < 1e-10);
        }

        #[test]
        fn dissipation_bounds_are_lipschitz_constants(
            p in proptest::collection::vec(-5.0f64..5.0, 3),
            q in proptest::collection::vec(-5.0f64..5.0, 3),
        ) {
            for m in [GameModel::attacker_defender(2.0, 3.0), GameModel::single_integrator(3, 0.5)] {
                let alpha = dissipation_bounds(&m).0;
                let x = [0.0; 3];
                let bound: f64 = alpha.iter().zip(p.iter().zip(&q)).map(|(a, (p, q))| a * (p - q).abs()).sum();
                prop_assert!((m.hamiltonian(&x, &p, 0.0) - m.hamiltonian(&x, &q, 0.0)).abs() <= bound + 1e-12);
            }
        }

        #[test]
        fn closed_form_actions_attain_hamiltonian(p in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let m = GameModel::attacker_defender(2.0, 3.0);
            let x = [0.0; 3];
            let a = m.optimal_actions(&p, &x, 0.0);
            let mut f = [0.0; 3];
            m.dynamics(&x, &a, 0.0, &mut f);
            let fp: f64 = f.iter().zip(&p).map(|(f, p)| f * p).sum();
            prop_assert!((fp - m.hamiltonian(&x, &p, 0.0)).abs() < 1e-10);
        }

        #[test]
        fn upper_and_lower_minimax_coincide(p in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let m = GameModel::attacker_defender(2.0, 3.0);
            let upper = sampled_minimax(&m, &p, MinimaxOrder::Upper);
            let lower = sampled_minimax(&m, &p, MinimaxOrder::Lower);
            let closed = m.hamiltonian(&[0.0; 3], &p, 0.0);
            // angular sampling of the unit disk: error below v_A |p_A| (1 - cos(pi/720))
            let tol = 2.0 * p[0].hypot(p[1]) * (1.0 - (PI / 720.0).cos()) + 1e-12;
            prop_assert!((upper - lower).abs() <= tol);
            prop_assert!((upper - closed).abs() <= tol);
        }

        #[test]
        fn augmentation_preserves_hamiltonian(p in proptest::collection::vec(-5.0f64..5.0, 2)) {
            let spec = builtin_problem("example1", &serde_json::Value::Null).unwrap();
            let aug = augment_time(&spec).unwrap();
            let h = spec.model.hamiltonian(&[0.0; 2], &p, 0.0);
            prop_assert_eq!(aug.model.hamiltonian(&[0.0; 3], &[p[0], p[1], 0.0], 0.0), h);
        }
    }
}
