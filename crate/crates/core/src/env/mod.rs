//! Deterministic multi-turn tool environments with enumerated state tables.
//!
//! Every environment is an immutable definition. Episode state is an
//! [`EnvState`] value passed into [`Env::step`] and returned in the
//! [`StepOutcome`], so any number of episodes can run side by side.
//!
//! Two environments ship:
//!
//! * `calc_chain`: drive an accumulator to a seed-dependent target with
//!   arithmetic tool calls, then submit.
//! * `key_door`: walk a 5x5 grid, pick up a key, open a door.
//!
//! Each well-formed action has a malformed twin that is a no-op with
//! `well_formed = false`, which is how format errors are modelled.

mod calc_chain;
mod key_door;
mod table;

use serde::{Deserialize, Serialize};

pub use calc_chain::{CalcChain, CalcState};
pub use key_door::{KeyDoor, KeyDoorState};
pub use table::StateTable;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionId(pub usize);

impl ActionId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvState {
    pub state_index: usize,
    pub turn: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub done: bool,
    /// Only meaningful when `done`.
    pub success: bool,
    pub tool_call_valid: bool,
    pub well_formed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub env_name: String,
    pub task_seed: u64,
    pub max_turns: u32,
}

/// Result of applying one action to a decoded state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition<S> {
    pub next: S,
    /// The episode ended because of the action itself (submit, door opened).
    pub terminal: bool,
    pub success: bool,
    pub tool_call_valid: bool,
    pub well_formed: bool,
}

/// Transition rules over a decoded state type.
pub trait Dynamics: Send + Sync {
    type State: Copy + Eq + std::hash::Hash + std::fmt::Debug + Send + Sync;

    fn name(&self) -> &'static str;
    fn action_names(&self) -> &'static [&'static str];
    fn initial(&self, task_seed: u64) -> Self::State;
    /// Every state any task seed can start from, in canonical order.
    fn initial_states(&self) -> Vec<Self::State>;
    fn transition(&self, state: Self::State, action: usize) -> Transition<Self::State>;

    fn action_count(&self) -> usize {
        self.action_names().len()
    }
}

/// A [`Dynamics`] paired with its reachable-state index.
#[derive(Debug, Clone)]
pub struct TabularEnv<D: Dynamics> {
    dynamics: D,
    max_turns: u32,
    table: StateTable<D::State>,
}

impl<D: Dynamics> TabularEnv<D> {
    pub fn new(dynamics: D, max_turns: u32) -> Result<Self> {
        if max_turns == 0 {
            return Err(Error::config("env.max_turns", "must be >= 1"));
        }
        let table = StateTable::build(&dynamics, max_turns);
        Ok(Self {
            dynamics,
            max_turns,
            table,
        })
    }

    pub fn dynamics(&self) -> &D {
        &self.dynamics
    }

    pub fn table(&self) -> &StateTable<D::State> {
        &self.table
    }

    fn reset(&self, task_seed: u64) -> EnvState {
        let s = self.dynamics.initial(task_seed);
        EnvState {
            state_index: self.table.index_of(&s).expect("initial state is enumerated"),
            turn: 0,
        }
    }

    fn step(&self, state: EnvState, action: ActionId) -> Result<StepOutcome> {
        if action.0 >= self.dynamics.action_count() {
            return Err(Error::contract(format!(
                "action {} out of range for {} ({} actions)",
                action.0,
                self.dynamics.name(),
                self.dynamics.action_count()
            )));
        }
        if state.turn >= self.max_turns {
            return Err(Error::contract(format!(
                "step called at turn {} with max_turns {}",
                state.turn, self.max_turns
            )));
        }
        let decoded = self.table.state(state.state_index).ok_or_else(|| {
            Error::contract(format!("state index {} not enumerated", state.state_index))
        })?;
        let t = self.dynamics.transition(decoded, action.0);
        let turn = state.turn + 1;
        let next_index = self.table.index_of(&t.next).ok_or_else(|| {
            Error::contract(format!(
                "state {} is not reachable at turn {}",
                state.state_index, state.turn
            ))
        })?;
        Ok(StepOutcome {
            next_state: EnvState {
                state_index: next_index,
                turn,
            },
            done: t.terminal || turn >= self.max_turns,
            success: t.success,
            tool_call_valid: t.tool_call_valid,
            well_formed: t.well_formed,
        })
    }
}

/// Registered environments.
#[derive(Debug, Clone)]
pub enum Env {
    CalcChain(TabularEnv<CalcChain>),
    KeyDoor(TabularEnv<KeyDoor>),
}

macro_rules! dispatch {
    ($self:expr, $env:ident => $body:expr) => {
        match $self {
            Env::CalcChain($env) => $body,
            Env::KeyDoor($env) => $body,
        }
    };
}

impl Env {
    pub const NAMES: [&'static str; 2] = [CalcChain::NAME, KeyDoor::NAME];

    /// Default turn budget for a registered environment.
    pub fn default_max_turns(name: &str) -> Result<u32> {
        match name {
            CalcChain::NAME => Ok(CalcChain::DEFAULT_MAX_TURNS),
            KeyDoor::NAME => Ok(KeyDoor::DEFAULT_MAX_TURNS),
            other => Err(unknown_env(other)),
        }
    }

    pub fn build(name: &str, max_turns: u32) -> Result<Self> {
        match name {
            CalcChain::NAME => Ok(Env::CalcChain(TabularEnv::new(CalcChain, max_turns)?)),
            KeyDoor::NAME => Ok(Env::KeyDoor(TabularEnv::new(KeyDoor::default(), max_turns)?)),
            other => Err(unknown_env(other)),
        }
    }

    pub fn from_spec(spec: &EpisodeSpec) -> Result<(Self, EnvState)> {
        let env = Self::build(&spec.env_name, spec.max_turns)?;
        let s0 = env.reset(spec.task_seed);
        Ok((env, s0))
    }

    pub fn name(&self) -> &'static str {
        dispatch!(self, e => e.dynamics.name())
    }

    pub fn max_turns(&self) -> u32 {
        dispatch!(self, e => e.max_turns)
    }

    pub fn state_count(&self) -> usize {
        dispatch!(self, e => e.table.len())
    }

    pub fn action_count(&self) -> usize {
        dispatch!(self, e => e.dynamics.action_count())
    }

    pub fn action_names(&self) -> &'static [&'static str] {
        dispatch!(self, e => e.dynamics.action_names())
    }

    pub fn reset(&self, task_seed: u64) -> EnvState {
        dispatch!(self, e => e.reset(task_seed))
    }

    pub fn step(&self, state: EnvState, action: ActionId) -> Result<StepOutcome> {
        dispatch!(self, e => e.step(state, action))
    }
}

/// Initial state for `(env_name, task_seed)`.
pub fn reset(spec: &EpisodeSpec) -> Result<EnvState> {
    Env::from_spec(spec).map(|(_, s)| s)
}

fn unknown_env(name: &str) -> Error {
    Error::config(
        "env.name",
        format!("unknown environment {name:?} (expected one of {:?})", Env::NAMES),
    )
}

/// SplitMix64 finalizer, used to derive task parameters from seeds.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_env_is_config_error() {
        let spec = EpisodeSpec {
            env_name: "nope".into(),
            task_seed: 0,
            max_turns: 10,
        };
        let err = reset(&spec).unwrap_err();
        assert!(matches!(err, Error::Config { ref key, .. } if key == "env.name"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn out_of_range_action_is_contract_violation() {
        let env = Env::build("calc_chain", 10).unwrap();
        let s = env.reset(0);
        let err = env.step(s, ActionId(env.action_count())).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn zero_max_turns_rejected() {
        assert!(Env::build("key_door", 0).is_err());
    }

    #[test]
    fn tool_call_valid_implies_well_formed_on_reachable_transitions() {
        use std::collections::HashSet;
        for name in Env::NAMES {
            let env = Env::build(name, Env::default_max_turns(name).unwrap()).unwrap();
            let mut seen = HashSet::new();
            let mut frontier: Vec<EnvState> = (0..64).map(|seed| env.reset(seed)).collect();
            while let Some(s) = frontier.pop() {
                if !seen.insert(s) {
                    continue;
                }
                for a in 0..env.action_count() {
                    let out = env.step(s, ActionId(a)).unwrap();
                    assert!(!out.tool_call_valid || out.well_formed);
                    assert!(!out.success || out.done);
                    assert!(out.next_state.state_index < env.state_count());
                    if !out.done {
                        frontier.push(out.next_state);
                    }
                }
            }
        }
    }
}
