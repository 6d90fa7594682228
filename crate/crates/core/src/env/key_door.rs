use super::{Dynamics, Transition};

/// Grid navigation with a key and a locked door.
///
/// The layout is fixed; the task seed does not change it. `INTERACT` on the
/// key cell picks the key up, `INTERACT` on the door cell while holding the
/// key opens the door and ends the episode successfully. Moves into a wall
/// leave the agent in place but still count as valid tool calls.
#[derive(Debug, Clone, Copy)]
pub struct KeyDoor {
    pub size: u8,
    pub start: (u8, u8),
    pub key: (u8, u8),
    pub door: (u8, u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KeyDoorState {
    pub row: u8,
    pub col: u8,
    pub has_key: bool,
    pub door_open: bool,
}

impl Default for KeyDoor {
    fn default() -> Self {
        Self {
            size: 5,
            start: (0, 0),
            key: (2, 2),
            door: (4, 4),
        }
    }
}

impl KeyDoor {
    pub const NAME: &'static str = "key_door";
    pub const DEFAULT_MAX_TURNS: u32 = 30;

    pub const UP: usize = 0;
    pub const DOWN: usize = 1;
    pub const LEFT: usize = 2;
    pub const RIGHT: usize = 3;
    pub const INTERACT: usize = 4;
    pub const MALFORMED_OFFSET: usize = 5;

    const ACTIONS: [&'static str; 10] = [
        "UP",
        "DOWN",
        "LEFT",
        "RIGHT",
        "INTERACT",
        "UP_MALFORMED",
        "DOWN_MALFORMED",
        "LEFT_MALFORMED",
        "RIGHT_MALFORMED",
        "INTERACT_MALFORMED",
    ];
}

impl Dynamics for KeyDoor {
    type State = KeyDoorState;

    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn action_names(&self) -> &'static [&'static str] {
        &Self::ACTIONS
    }

    fn initial(&self, _task_seed: u64) -> KeyDoorState {
        KeyDoorState {
            row: self.start.0,
            col: self.start.1,
            has_key: false,
            door_open: false,
        }
    }

    fn initial_states(&self) -> Vec<KeyDoorState> {
        vec![self.initial(0)]
    }

    fn transition(&self, s: KeyDoorState, action: usize) -> Transition<KeyDoorState> {
        let mut next = s;
        let well_formed = action < Self::MALFORMED_OFFSET;
        let mut success = false;
        if well_formed {
            let last = self.size - 1;
            match action {
                Self::UP => next.row = s.row.saturating_sub(1),
                Self::DOWN => next.row = (s.row + 1).min(last),
                Self::LEFT => next.col = s.col.saturating_sub(1),
                Self::RIGHT => next.col = (s.col + 1).min(last),
                Self::INTERACT => {
                    let here = (s.row, s.col);
                    if here == self.key && !s.has_key {
                        next.has_key = true;
                    } else if here == self.door && s.has_key {
                        next.door_open = true;
                        success = true;
                    }
                }
                _ => unreachable!("action index checked by caller"),
            }
        }
        Transition {
            next,
            terminal: success,
            success,
            tool_call_valid: well_formed,
            well_formed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ActionId, Env};

    #[test]
    fn reset_places_agent_at_start_without_key() {
        let env = Env::build(KeyDoor::NAME, 30).unwrap();
        let s = env.reset(0);
        let Env::KeyDoor(e) = &env else { unreachable!() };
        let d = e.table().state(s.state_index).unwrap();
        assert_eq!((d.row, d.col), (0, 0));
        assert!(!d.has_key && !d.door_open);
        assert_eq!(s.turn, 0);
    }

    #[test]
    fn scripted_solution_succeeds() {
        let env = Env::build(KeyDoor::NAME, 30).unwrap();
        let plan = [
            KeyDoor::DOWN,
            KeyDoor::DOWN,
            KeyDoor::RIGHT,
            KeyDoor::RIGHT,
            KeyDoor::INTERACT,
            KeyDoor::DOWN,
            KeyDoor::DOWN,
            KeyDoor::RIGHT,
            KeyDoor::RIGHT,
            KeyDoor::INTERACT,
        ];
        let mut s = env.reset(11);
        for (i, a) in plan.iter().enumerate() {
            let out = env.step(s, ActionId(*a)).unwrap();
            assert!(out.tool_call_valid);
            assert_eq!(out.done, i == plan.len() - 1);
            s = out.next_state;
            if out.done {
                assert!(out.success);
            }
        }
    }

    #[test]
    fn door_needs_key() {
        let kd = KeyDoor::default();
        let at_door = KeyDoorState {
            row: 4,
            col: 4,
            has_key: false,
            door_open: false,
        };
        let t = kd.transition(at_door, KeyDoor::INTERACT);
        assert!(!t.success && !t.terminal);
    }
}
