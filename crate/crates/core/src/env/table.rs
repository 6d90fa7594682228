use std::collections::{HashMap, HashSet, VecDeque};
use std::hash::Hash;

use super::Dynamics;

/// Bijection between reachable states and `0..len()`.
///
/// Built by a breadth-first sweep from the canonical initial states with
/// actions expanded in table order, so the indexing is identical on every
/// run. A state is expanded only while its shortest non-terminal distance
/// from a start is below the turn budget.
#[derive(Debug, Clone)]
pub struct StateTable<S> {
    states: Vec<S>,
    index: HashMap<S, usize>,
}

impl<S: Copy + Eq + Hash> StateTable<S> {
    pub fn build<D: Dynamics<State = S>>(dynamics: &D, max_turns: u32) -> Self {
        let mut states = Vec::new();
        let mut index = HashMap::new();
        let mut queued = HashSet::new();
        let mut queue = VecDeque::new();
        let insert = |s: S, states: &mut Vec<S>, index: &mut HashMap<S, usize>| {
            index.entry(s).or_insert_with(|| {
                states.push(s);
                states.len() - 1
            });
        };
        for s in dynamics.initial_states() {
            insert(s, &mut states, &mut index);
            if queued.insert(s) {
                queue.push_back((s, 0u32));
            }
        }
        while let Some((s, depth)) = queue.pop_front() {
            if depth >= max_turns {
                continue;
            }
            for a in 0..dynamics.action_count() {
                let t = dynamics.transition(s, a);
                insert(t.next, &mut states, &mut index);
                // States entered through a terminal action are indexed but only
                // expanded if some non-terminal path also reaches them.
                if !t.terminal && queued.insert(t.next) {
                    queue.push_back((t.next, depth + 1));
                }
            }
        }
        Self { states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &S) -> Option<usize> {
        self.index.get(state).copied()
    }

    pub fn state(&self, index: usize) -> Option<S> {
        self.states.get(index).copied()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }
}
