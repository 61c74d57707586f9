//! Scripted expert, demonstration collection and the counted query oracle.

use alloc::string::String;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use crate::env::{run_episode, Action, CoreState, Observation, Scenario};

/// Energy-pumping controller: push right when the velocity exceeds a position-dependent
/// threshold `slope * (position - pivot)`, left otherwise.
///
/// With `slope = 0` this is plain bang-bang on the sign of the velocity. The default tilts
/// the switching line so that the expert reverses slightly before each turning point,
/// which makes the position a genuine cause of the action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptedExpert {
    pub slope: f64,
    pub pivot: f64,
}

pub const EXPERT_NAME: &str = "scripted-switching-line";

impl Default for ScriptedExpert {
    fn default() -> Self {
        Self {
            slope: DEFAULT_SLOPE,
            pivot: DEFAULT_PIVOT,
        }
    }
}

pub const DEFAULT_SLOPE: f64 = 0.035;
pub const DEFAULT_PIVOT: f64 = -0.45;

impl ScriptedExpert {
    pub fn bang_bang() -> Self {
        Self { slope: 0.0, pivot: 0.0 }
    }

    pub fn act(&self, state: &CoreState) -> Action {
        if state.velocity >= self.slope * (state.position - self.pivot) {
            Action::Right
        } else {
            Action::Left
        }
    }
}

/// The default expert's action.
pub fn expert_act(state: &CoreState) -> Action {
    ScriptedExpert::default().act(state)
}

/// Expert access with exact query accounting.
#[derive(Debug, Default)]
pub struct ExpertOracle {
    expert: ScriptedExpert,
    queries: AtomicU64,
}

impl ExpertOracle {
    pub fn new(expert: ScriptedExpert) -> Self {
        Self {
            expert,
            queries: AtomicU64::new(0),
        }
    }

    pub fn query(&self, state: &CoreState) -> Action {
        self.queries.fetch_add(1, Ordering::SeqCst);
        self.expert.act(state)
    }

    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::SeqCst)
    }

    pub fn expert(&self) -> &ScriptedExpert {
        &self.expert
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    /// Hidden physical state, kept so the expert can be queried again later.
    pub state: CoreState,
    pub action: Action,
    pub episode_id: u64,
    pub t: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub transitions: Vec<Transition>,
    pub scenario: Scenario,
    pub expert_name: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DemoError {
    #[error("a demonstration set needs at least one episode")]
    NoEpisodes,
    #[error("demonstration set is empty")]
    Empty,
    #[error("transition {index} breaks time ordering within episode {episode}")]
    Ordering { index: usize, episode: u64 },
}

impl DemoSet {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn episode_count(&self) -> usize {
        let mut ids: Vec<u64> = self.transitions.iter().map(|t| t.episode_id).collect();
        ids.dedup();
        ids.len()
    }

    /// Nonempty, and `t` strictly increasing inside each episode.
    pub fn validate(&self) -> Result<(), DemoError> {
        if self.transitions.is_empty() {
            return Err(DemoError::Empty);
        }
        for (index, w) in self.transitions.windows(2).enumerate() {
            if w[0].episode_id == w[1].episode_id && w[1].t <= w[0].t {
                return Err(DemoError::Ordering {
                    index: index + 1,
                    episode: w[1].episode_id,
                });
            }
        }
        Ok(())
    }

    /// Splits whole episodes: roughly the last `fraction` of episodes are returned second.
    pub fn split_episodes(&self, fraction: f64) -> (DemoSet, DemoSet) {
        let episodes = self.episode_count();
        let held = libm::round(episodes as f64 * fraction) as usize;
        let held = held.min(episodes.saturating_sub(1));
        let first_held = episodes - held;
        let mut seen = 0;
        let mut cut = self.transitions.len();
        for (i, w) in self.transitions.windows(2).enumerate() {
            if w[0].episode_id != w[1].episode_id {
                seen += 1;
                if seen == first_held {
                    cut = i + 1;
                    break;
                }
            }
        }
        let (train, val) = self.transitions.split_at(cut);
        let (train, val) = (train.to_vec(), val.to_vec());
        let with = |transitions| DemoSet {
            transitions,
            scenario: self.scenario,
            expert_name: self.expert_name.clone(),
            seed: self.seed,
        };
        (with(train), with(val))
    }
}

/// Rolls `episodes` expert episodes under `scenario`.
pub fn collect_demos(scenario: &Scenario, episodes: usize, seed: u64) -> Result<DemoSet, DemoError> {
    collect_with(&ScriptedExpert::default(), scenario, episodes, seed)
}

pub fn collect_with(expert: &ScriptedExpert, scenario: &Scenario, episodes: usize, seed: u64) -> Result<DemoSet, DemoError> {
    if episodes == 0 {
        return Err(DemoError::NoEpisodes);
    }
    let mut transitions = Vec::new();
    for e in 0..episodes as u64 {
        push_episode(expert, scenario, seed, e, &mut transitions);
    }
    Ok(DemoSet {
        transitions,
        scenario: *scenario,
        expert_name: String::from(EXPERT_NAME),
        seed,
    })
}

/// Collects whole episodes until `count` transitions exist, then truncates to exactly `count`.
pub fn collect_transitions(scenario: &Scenario, count: usize, seed: u64) -> Result<DemoSet, DemoError> {
    collect_transitions_with(&ScriptedExpert::default(), scenario, count, seed)
}

pub fn collect_transitions_with(
    expert: &ScriptedExpert,
    scenario: &Scenario,
    count: usize,
    seed: u64,
) -> Result<DemoSet, DemoError> {
    if count == 0 {
        return Err(DemoError::Empty);
    }
    let mut transitions = Vec::with_capacity(count + 200);
    let mut e = 0;
    while transitions.len() < count {
        push_episode(expert, scenario, seed, e, &mut transitions);
        e += 1;
    }
    transitions.truncate(count);
    Ok(DemoSet {
        transitions,
        scenario: *scenario,
        expert_name: String::from(EXPERT_NAME),
        seed,
    })
}

fn push_episode(expert: &ScriptedExpert, scenario: &Scenario, seed: u64, episode: u64, out: &mut Vec<Transition>) {
    let mut controller = |_: &[f64; 3], s: &CoreState| expert.act(s);
    let ep = run_episode(&mut controller, scenario, seed, episode);
    out.extend(ep.steps.iter().enumerate().map(|(t, s)| Transition {
        observation: s.observation,
        state: s.state,
        action: s.action,
        episode_id: episode,
        t: t as u32,
    }));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ScenarioKind, HORIZON};

    fn state(position: f64, velocity: f64) -> CoreState {
        CoreState {
            position,
            velocity,
            step_count: 0,
        }
    }

    #[test]
    fn pushes_along_the_velocity() {
        assert_eq!(expert_act(&state(-0.5, 0.01)), Action::Right);
        assert_eq!(expert_act(&state(-0.5, -0.03)), Action::Left);
        assert_eq!(ScriptedExpert::bang_bang().act(&state(0.3, 0.0)), Action::Right);
    }

    #[test]
    fn expert_is_competent() {
        let scenario = Scenario::new(ScenarioKind::Original, 0);
        let expert = ScriptedExpert::default();
        let mut total = 0.0;
        for e in 0..100 {
            let mut c = |_: &[f64; 3], s: &CoreState| expert.act(s);
            total += run_episode(&mut c, &scenario, 77, e).total_return;
        }
        assert!(total / 100.0 >= -130.0, "mean return {}", total / 100.0);
    }

    #[test]
    fn one_episode_matches_its_length() {
        let scenario = Scenario::new(ScenarioKind::Confounded, 1);
        let demos = collect_demos(&scenario, 1, 3).unwrap();
        assert!(demos.len() <= HORIZON as usize);
        assert_eq!(demos.episode_count(), 1);
        demos.validate().unwrap();
        assert_eq!(demos, collect_demos(&scenario, 1, 3).unwrap());
        assert_eq!(collect_demos(&scenario, 0, 3), Err(DemoError::NoEpisodes));
    }

    #[test]
    fn oracle_counts_queries() {
        let oracle = ExpertOracle::default();
        for k in 0..7 {
            let s = state(-0.5 + 0.01 * k as f64, 0.002 * (k as f64 - 3.0));
            assert_eq!(oracle.query(&s), expert_act(&s));
        }
        assert_eq!(oracle.query_count(), 7);
    }

    #[test]
    fn exact_transition_count() {
        let scenario = Scenario::new(ScenarioKind::Original, 1);
        let demos = collect_transitions(&scenario, 500, 9).unwrap();
        assert_eq!(demos.len(), 500);
        demos.validate().unwrap();
    }

    #[test]
    fn confounded_channel_correlates_with_action() {
        let scenario = Scenario::new(ScenarioKind::Confounded, 2);
        let demos = collect_transitions(&scenario, 5000, 4).unwrap();
        let c = scenario.extra_channel();
        let xs: Vec<f64> = demos.transitions.iter().map(|t| t.observation.x[c]).collect();
        let ys: Vec<f64> = demos.transitions.iter().map(|t| t.action.encoded()).collect();
        assert!(correlation(&xs, &ys) > 0.5);
    }

    #[test]
    fn split_keeps_whole_episodes() {
        let scenario = Scenario::new(ScenarioKind::Original, 1);
        let demos = collect_demos(&scenario, 10, 2).unwrap();
        let (train, val) = demos.split_episodes(0.2);
        assert_eq!(train.episode_count(), 8);
        assert_eq!(val.episode_count(), 2);
        assert_eq!(train.len() + val.len(), demos.len());
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
        cov / libm::sqrt(va * vb)
    }
}
