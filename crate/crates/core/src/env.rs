//! MountainCar dynamics and the observation wrappers that define each scenario.
//!
//! The physical state is `(position, velocity)`. Learners never see it directly: they
//! receive a three-component observation whose third channel is either noise
//! ([`ScenarioKind::Original`]) or the previous action ([`ScenarioKind::Confounded`]),
//! shuffled by a hidden permutation and optionally mixed by a random rotation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::graph::CausalGraph;
use crate::rng::{derive_seed, rng_from_seed};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const HORIZON: u32 = 200;
/// Observation dimension of every scenario.
pub const OBS_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("action index {0} is not one of 0, 1, 2")]
    InvalidAction(usize),
    #[error("episode already finished after {0} steps")]
    Finished(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Left = 0,
    Noop = 1,
    Right = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Left, Action::Noop, Action::Right];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Centered encoding `a - 1` used in observations.
    pub fn encoded(self) -> f64 {
        self as i32 as f64 - 1.0
    }
}

impl TryFrom<usize> for Action {
    type Error = EnvError;

    fn try_from(value: usize) -> Result<Self, Self::Error> {
        Action::ALL.get(value).copied().ok_or(EnvError::InvalidAction(value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoreState {
    pub position: f64,
    pub velocity: f64,
    pub step_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: CoreState,
    pub reward: f64,
    pub done: bool,
}

/// Initial state: position uniform in `[-0.6, -0.4]`, zero velocity.
pub fn reset(seed: u64) -> CoreState {
    let mut rng = rng_from_seed(seed);
    CoreState {
        position: rng.random_range(-0.6..=-0.4),
        velocity: 0.0,
        step_count: 0,
    }
}

pub fn step(state: &CoreState, action: Action) -> Result<Step, EnvError> {
    if state.step_count >= HORIZON || state.position >= GOAL_POSITION {
        return Err(EnvError::Finished(state.step_count));
    }
    let force = FORCE * (action.index() as f64 - 1.0);
    let mut velocity = (state.velocity + force - GRAVITY * libm::cos(3.0 * state.position)).clamp(-MAX_SPEED, MAX_SPEED);
    let mut position = (state.position + velocity).clamp(MIN_POSITION, MAX_POSITION);
    if position <= MIN_POSITION && velocity < 0.0 {
        position = MIN_POSITION;
        velocity = 0.0;
    }
    let step_count = state.step_count + 1;
    let done = position >= GOAL_POSITION || step_count >= HORIZON;
    Ok(Step {
        state: CoreState {
            position,
            velocity,
            step_count,
        },
        reward: -1.0,
        done,
    })
}

/// Index-typed variant of [`step`].
pub fn step_index(state: &CoreState, action: usize) -> Result<Step, EnvError> {
    step(state, Action::try_from(action)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Position, velocity and a white-noise channel.
    Original,
    /// Position, velocity and the previous action.
    Confounded,
    /// The confounded vector under a fixed random rotation.
    ConfoundedEntangled,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Original => "original",
            ScenarioKind::Confounded => "confounded",
            ScenarioKind::ConfoundedEntangled => "confounded_entangled",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "original" => Some(ScenarioKind::Original),
            "confounded" => Some(ScenarioKind::Confounded),
            "confounded_entangled" | "entangled" => Some(ScenarioKind::ConfoundedEntangled),
            _ => None,
        }
    }
}

/// A 3×3 orthogonal matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(pub [[f64; 3]; 3]);

impl Rotation {
    pub fn identity() -> Self {
        Rotation([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    }

    pub fn apply(&self, v: &[f64; 3]) -> [f64; 3] {
        let m = &self.0;
        core::array::from_fn(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Rotation(core::array::from_fn(|i| core::array::from_fn(|j| m[j][i])))
    }

    pub fn mul(&self, other: &Rotation) -> Self {
        let (a, b) = (&self.0, &other.0);
        Rotation(core::array::from_fn(|i| {
            core::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum())
        }))
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Largest entry of `|RᵀR - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let p = self.transpose().mul(self);
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p.0[i][j] - target).abs());
            }
        }
        worst
    }
}

/// Q factor of the QR decomposition of a seeded Gaussian matrix, with the signs fixed so
/// that R has a positive diagonal.
#[allow(clippy::needless_range_loop)]
pub fn make_rotation(seed: u64) -> Rotation {
    let mut rng = rng_from_seed(seed);
    let a: [[f64; 3]; 3] = core::array::from_fn(|_| core::array::from_fn(|_| StandardNormal.sample(&mut rng)));
    // Modified Gram-Schmidt on the columns of `a`; a column's norm is the matching
    // diagonal entry of R, which is positive by construction.
    let mut q = [[0.0f64; 3]; 3];
    for j in 0..3 {
        let mut v = [a[0][j], a[1][j], a[2][j]];
        for k in 0..j {
            let dot: f64 = (0..3).map(|i| q[i][k] * v[i]).sum();
            for i in 0..3 {
                v[i] -= dot * q[i][k];
            }
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
        for i in 0..3 {
            q[i][j] = v[i] / norm;
        }
    }
    // One reorthogonalization pass keeps RᵀR = I at machine precision.
    for j in 0..3 {
        let mut v = [q[0][j], q[1][j], q[2][j]];
        for k in 0..j {
            let dot: f64 = (0..3).map(|i| q[i][k] * v[i]).sum();
            for i in 0..3 {
                v[i] -= dot * q[i][k];
            }
        }
        let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
        for i in 0..3 {
            q[i][j] = v[i] / norm;
        }
    }
    Rotation(q)
}

/// Seeded Fisher-Yates permutation of `0..3`.
pub fn make_permutation(seed: u64) -> [usize; 3] {
    let mut rng = rng_from_seed(seed);
    let mut perm = [0, 1, 2];
    for i in (1..3).rev() {
        let j = rng.random_range(0..=i);
        perm.swap(i, j);
    }
    perm
}

/// Observation layout of an experiment.
///
/// The raw vector is `[position, velocity, extra]`; observed channel `j` carries raw
/// component `permutation[j]`. The permutation is hidden from learners.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub permutation: [usize; 3],
    pub rotation: Option<Rotation>,
    pub noise_seed: u64,
}

impl Scenario {
    /// Derives the permutation, rotation and noise seed from one seed.
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        let rotation = match kind {
            ScenarioKind::ConfoundedEntangled => Some(make_rotation(derive_seed(seed, 2))),
            _ => None,
        };
        Self {
            kind,
            permutation: make_permutation(derive_seed(seed, 1)),
            rotation,
            noise_seed: derive_seed(seed, 3),
        }
    }

    /// A scenario with the raw channel order `[position, velocity, extra]`.
    pub fn unshuffled(kind: ScenarioKind, seed: u64) -> Self {
        Self {
            permutation: [0, 1, 2],
            ..Self::new(kind, seed)
        }
    }

    pub fn is_valid(&self) -> bool {
        let mut seen = [false; 3];
        for &p in &self.permutation {
            if p >= 3 || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        match (self.kind, &self.rotation) {
            (ScenarioKind::ConfoundedEntangled, Some(r)) => r.orthogonality_error() < 1e-10,
            (ScenarioKind::ConfoundedEntangled, None) => false,
            (_, Some(_)) => false,
            (_, None) => true,
        }
    }

    /// Observed index of raw component `raw`. Meaningless under rotation.
    pub fn observed_index(&self, raw: usize) -> usize {
        self.permutation
            .iter()
            .position(|&p| p == raw)
            .expect("permutation covers every raw index")
    }

    /// Observed channel that carries the previous action (or the noise, under original).
    pub fn extra_channel(&self) -> usize {
        self.observed_index(2)
    }

    /// Converts a mask over raw components into a mask over observed channels.
    pub fn raw_to_observed(&self, raw_mask: CausalGraph) -> CausalGraph {
        let mut out = CausalGraph::empty(OBS_DIM);
        for j in 0..OBS_DIM {
            out = out.with(j, raw_mask.get(self.permutation[j]));
        }
        out
    }

    /// Observed-channel mask of the true causes, `None` when channels are entangled.
    pub fn true_cause_mask(&self) -> Option<CausalGraph> {
        match self.kind {
            ScenarioKind::ConfoundedEntangled => None,
            _ => Some(self.raw_to_observed(CausalGraph::from_bits(OBS_DIM, 0b011).expect("3 bits"))),
        }
    }

    /// Generator for the observation noise of episode `episode`.
    pub fn noise_rng(&self, episode: u64) -> crate::rng::SimRng {
        crate::rng::sub_rng(self.noise_seed, episode)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub x: [f64; 3],
    /// Ground truth for tests; `None` under entanglement where no per-channel mask exists.
    pub true_cause_mask: Option<CausalGraph>,
}

/// Builds the observation of `state` given the previous action.
pub fn observe<R: Rng + ?Sized>(state: &CoreState, prev_action: Action, scenario: &Scenario, rng: &mut R) -> Observation {
    let extra = match scenario.kind {
        ScenarioKind::Original => StandardNormal.sample(rng),
        ScenarioKind::Confounded | ScenarioKind::ConfoundedEntangled => prev_action.encoded(),
    };
    let raw = [state.position, state.velocity, extra];
    let shuffled: [f64; 3] = core::array::from_fn(|j| raw[scenario.permutation[j]]);
    let x = match &scenario.rotation {
        Some(r) if scenario.kind == ScenarioKind::ConfoundedEntangled => r.apply(&shuffled),
        _ => shuffled,
    };
    Observation {
        x,
        true_cause_mask: scenario.true_cause_mask(),
    }
}

/// Anything that picks actions in closed loop. Imitators read only `x`; the scripted
/// expert reads the hidden state.
pub trait Controller {
    fn act(&mut self, x: &[f64; 3], state: &CoreState) -> Action;
}

impl<F: FnMut(&[f64; 3], &CoreState) -> Action> Controller for F {
    fn act(&mut self, x: &[f64; 3], state: &CoreState) -> Action {
        self(x, state)
    }
}

/// One recorded time step: what the controller saw, the hidden state, and what it did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStep {
    pub observation: Observation,
    pub state: CoreState,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub steps: alloc::vec::Vec<EpisodeStep>,
    pub total_return: f64,
}

/// Reset seed and noise stream of episode `episode` under run seed `seed`.
pub fn episode_seeds(seed: u64, episode: u64) -> (u64, u64) {
    (derive_seed(seed, 2 * episode), derive_seed(seed, 2 * episode + 1))
}

/// Rolls one episode. The observation's action channel always reflects the controller's
/// own previous action, starting from the no-op.
pub fn run_episode<C: Controller + ?Sized>(controller: &mut C, scenario: &Scenario, seed: u64, episode: u64) -> Episode {
    let (reset_seed, noise_stream) = episode_seeds(seed, episode);
    let mut noise = scenario.noise_rng(noise_stream);
    let mut state = reset(reset_seed);
    let mut prev = Action::Noop;
    let mut steps = alloc::vec::Vec::with_capacity(HORIZON as usize);
    let mut total_return = 0.0;
    loop {
        let observation = observe(&state, prev, scenario, &mut noise);
        let action = controller.act(&observation.x, &state);
        steps.push(EpisodeStep {
            observation,
            state,
            action,
        });
        let out = step(&state, action).expect("episode loop stops at termination");
        total_return += out.reward;
        state = out.state;
        prev = action;
        if out.done {
            break;
        }
    }
    Episode { steps, total_return }
}
