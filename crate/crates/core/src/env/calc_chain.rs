use super::{mix64, Dynamics, Transition};

/// Accumulator arithmetic task.
///
/// The accumulator starts at 0 and saturates at [`CalcChain::ACC_MAX`]. The
/// target is drawn from `TARGET_MIN..=TARGET_MAX` by the task seed. Success
/// means `SUBMIT` while the accumulator equals the target; a wrong submit
/// ends the episode as a failure.
#[derive(Debug, Clone, Copy, Default)]
pub struct CalcChain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CalcState {
    pub acc: u8,
    pub target: u8,
    pub turn: u8,
}

impl CalcChain {
    pub const NAME: &'static str = "calc_chain";
    pub const DEFAULT_MAX_TURNS: u32 = 10;
    pub const ACC_MAX: u8 = 20;
    pub const TARGET_MIN: u8 = 5;
    pub const TARGET_MAX: u8 = 15;

    pub const ADD1: usize = 0;
    pub const ADD2: usize = 1;
    pub const MUL2: usize = 2;
    pub const RESET: usize = 3;
    pub const SUBMIT: usize = 4;
    /// Offset from a well-formed action to its malformed twin.
    pub const MALFORMED_OFFSET: usize = 5;

    const ACTIONS: [&'static str; 10] = [
        "ADD1",
        "ADD2",
        "MUL2",
        "RESET",
        "SUBMIT",
        "ADD1_MALFORMED",
        "ADD2_MALFORMED",
        "MUL2_MALFORMED",
        "RESET_MALFORMED",
        "SUBMIT_MALFORMED",
    ];

    pub fn target_for_seed(task_seed: u64) -> u8 {
        let span = u64::from(Self::TARGET_MAX - Self::TARGET_MIN) + 1;
        Self::TARGET_MIN + (mix64(task_seed) % span) as u8
    }
}

impl Dynamics for CalcChain {
    type State = CalcState;

    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn action_names(&self) -> &'static [&'static str] {
        &Self::ACTIONS
    }

    fn initial(&self, task_seed: u64) -> CalcState {
        CalcState {
            acc: 0,
            target: Self::target_for_seed(task_seed),
            turn: 0,
        }
    }

    fn initial_states(&self) -> Vec<CalcState> {
        (Self::TARGET_MIN..=Self::TARGET_MAX)
            .map(|target| CalcState {
                acc: 0,
                target,
                turn: 0,
            })
            .collect()
    }

    fn transition(&self, s: CalcState, action: usize) -> Transition<CalcState> {
        let mut next = CalcState {
            turn: s.turn.saturating_add(1),
            ..s
        };
        let well_formed = action < Self::MALFORMED_OFFSET;
        let mut terminal = false;
        let mut success = false;
        if well_formed {
            match action {
                Self::ADD1 => next.acc = (s.acc + 1).min(Self::ACC_MAX),
                Self::ADD2 => next.acc = (s.acc + 2).min(Self::ACC_MAX),
                Self::MUL2 => next.acc = s.acc.saturating_mul(2).min(Self::ACC_MAX),
                Self::RESET => next.acc = 0,
                Self::SUBMIT => {
                    terminal = true;
                    success = s.acc == s.target;
                }
                _ => unreachable!("action index checked by caller"),
            }
        }
        Transition {
            next,
            terminal,
            success,
            tool_call_valid: well_formed,
            well_formed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ActionId, Env, EnvState};

    fn env() -> Env {
        Env::build(CalcChain::NAME, CalcChain::DEFAULT_MAX_TURNS).unwrap()
    }

    fn state_of(env: &Env, s: CalcState) -> EnvState {
        let Env::CalcChain(e) = env else { unreachable!() };
        EnvState {
            state_index: e.table().index_of(&s).unwrap(),
            turn: u32::from(s.turn),
        }
    }

    fn decode(env: &Env, s: EnvState) -> CalcState {
        let Env::CalcChain(e) = env else { unreachable!() };
        e.table().state(s.state_index).unwrap()
    }

    #[test]
    fn reset_starts_at_zero() {
        let env = env();
        let s = env.reset(0);
        let d = decode(&env, s);
        assert_eq!(s.turn, 0);
        assert_eq!(d.acc, 0);
        assert_eq!(d.target, CalcChain::target_for_seed(0));
        assert!((CalcChain::TARGET_MIN..=CalcChain::TARGET_MAX).contains(&d.target));
    }

    #[test]
    fn add2_from_three() {
        let env = env();
        let target = CalcChain::target_for_seed(0);
        // 0 -> 1 -> 3 takes two turns
        let s = state_of(&env, CalcState { acc: 3, target, turn: 2 });
        let out = env.step(s, ActionId(CalcChain::ADD2)).unwrap();
        assert_eq!(decode(&env, out.next_state).acc, 5);
        assert!(out.tool_call_valid && out.well_formed && !out.done);
    }

    #[test]
    fn submit_at_target_succeeds() {
        let env = env();
        let mut s = env.reset(7);
        let target = decode(&env, s).target;
        // binary ladder: ADD1 then MUL2/ADD1 steps
        let mut plan = Vec::new();
        let mut bits: Vec<bool> = (0..8).rev().map(|b| target >> b & 1 == 1).collect();
        while bits.first() == Some(&false) {
            bits.remove(0);
        }
        for (i, bit) in bits.iter().enumerate() {
            if i > 0 {
                plan.push(CalcChain::MUL2);
            }
            if *bit {
                plan.push(CalcChain::ADD1);
            }
        }
        plan.push(CalcChain::SUBMIT);
        assert!(plan.len() <= 10);
        let mut last = None;
        for a in plan {
            let out = env.step(s, ActionId(a)).unwrap();
            s = out.next_state;
            last = Some(out);
        }
        let out = last.unwrap();
        assert!(out.done && out.success);
    }

    #[test]
    fn malformed_is_noop() {
        let env = env();
        let s0 = env.reset(3);
        let out = env
            .step(s0, ActionId(CalcChain::ADD2 + CalcChain::MALFORMED_OFFSET))
            .unwrap();
        assert_eq!(decode(&env, out.next_state).acc, 0);
        assert!(!out.tool_call_valid && !out.well_formed && !out.done);
    }

    #[test]
    fn wrong_submit_fails_and_timeout_fails() {
        let env = env();
        let s0 = env.reset(3);
        let out = env.step(s0, ActionId(CalcChain::SUBMIT)).unwrap();
        assert!(out.done && !out.success);

        let mut s = s0;
        for i in 0..10 {
            let out = env.step(s, ActionId(CalcChain::RESET)).unwrap();
            assert_eq!(out.done, i == 9);
            assert!(!out.success);
            s = out.next_state;
        }
    }

    #[test]
    fn accumulator_saturates() {
        let t = CalcChain.transition(CalcState { acc: 19, target: 5, turn: 0 }, CalcChain::MUL2);
        assert_eq!(t.next.acc, CalcChain::ACC_MAX);
    }
}
