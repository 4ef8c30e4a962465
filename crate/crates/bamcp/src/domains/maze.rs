//! Flag-collection mazes loaded from ASCII grids.
//!
//! Charset: `#` wall, `.` free, `S` reset, `G` reward cell, `F` flag (at
//! most 3). The augmented state is (cell, flag subset), so a maze with `n`
//! free cells and `f` flags has `n * 2^f` states. Walking onto `G` pays the
//! number of flags held since the last visit and clears them; stepping into
//! a wall is a no-op. Dynamics are deterministic.

use rand::RngCore;

use crate::mdp::{ActionId, RewardTable, StateId};

use super::{DomainError, Environment};

pub const NUM_ACTIONS: usize = 4;

/// Parsed maze: an environment over (cell, flag-subset) states.
#[derive(Debug, Clone)]
pub struct MazeEnv {
    width: usize,
    height: usize,
    /// Free-cell index per grid position, walls marked absent.
    cell_index: Vec<Option<u16>>,
    /// Grid position of each free cell.
    positions: Vec<(usize, usize)>,
    flags: Vec<(usize, usize)>,
    start_cell: u16,
    goal_cell: u16,
}

impl MazeEnv {
    pub fn num_free_cells(&self) -> usize {
        self.positions.len()
    }

    pub fn num_flags(&self) -> usize {
        self.flags.len()
    }

    fn flag_sets(&self) -> usize {
        1 << self.flags.len()
    }

    fn state_of(&self, cell: u16, flags: u8) -> StateId {
        StateId(cell as u32 * self.flag_sets() as u32 + flags as u32)
    }

    fn decode(&self, s: StateId) -> (u16, u8) {
        let sets = self.flag_sets() as u32;
        ((s.0 / sets) as u16, (s.0 % sets) as u8)
    }

    /// Deterministic transition for (state, action).
    pub fn transition(&self, s: StateId, a: ActionId) -> (StateId, f64) {
        let (cell, flags) = self.decode(s);
        let (r, c) = self.positions[cell as usize];
        let (nr, nc) = match a.index() {
            0 => (r.wrapping_sub(1), c),
            1 => (r + 1, c),
            2 => (r, c.wrapping_sub(1)),
            3 => (r, c + 1),
            _ => panic!("mazes have 4 actions"),
        };
        let target = if nr < self.height && nc < self.width {
            self.cell_index[nr * self.width + nc]
        } else {
            None
        };
        let Some(next_cell) = target else {
            // Wall or border: stay, flags unchanged, nothing paid.
            return (s, 0.0);
        };
        let mut new_flags = flags;
        if let Some(bit) = self.flags.iter().position(|&pos| pos == (nr, nc)) {
            new_flags |= 1 << bit;
        }
        if next_cell == self.goal_cell {
            let reward = new_flags.count_ones() as f64;
            (self.state_of(next_cell, 0), reward)
        } else {
            (self.state_of(next_cell, new_flags), 0.0)
        }
    }

    /// Known reward function over the augmented transitions.
    pub fn reward_table(&self) -> RewardTable {
        let n = self.num_free_cells() * self.flag_sets();
        let mut rewards = RewardTable::zeros(n, NUM_ACTIONS);
        for s in 0..n {
            for a in 0..NUM_ACTIONS {
                let (succ, r) = self.transition(StateId(s as u32), ActionId(a as u16));
                if r != 0.0 {
                    rewards.set(StateId(s as u32), ActionId(a as u16), succ, r);
                }
            }
        }
        rewards
    }
}

impl Environment for MazeEnv {
    fn num_states(&self) -> Option<usize> {
        Some(self.num_free_cells() * self.flag_sets())
    }

    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> StateId {
        self.state_of(self.start_cell, 0)
    }

    fn step(&mut self, s: StateId, a: ActionId, _rng: &mut dyn RngCore) -> (StateId, f64) {
        self.transition(s, a)
    }

    fn rmax(&self) -> f64 {
        self.num_flags().max(1) as f64
    }
}

/// Parse an ASCII maze. Rows are newline-separated and must share one
/// width; exactly one `S` and one `G` are required.
pub fn load_maze(text: &str) -> Result<MazeEnv, DomainError> {
    let rows: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if rows.is_empty() {
        return Err(DomainError::EmptyGrid);
    }
    let width = rows[0].chars().count();
    if width == 0 {
        return Err(DomainError::EmptyGrid);
    }
    let height = rows.len();

    let mut cell_index = vec![None; width * height];
    let mut positions = Vec::new();
    let mut flags = Vec::new();
    let mut start = None;
    let mut goal = None;

    for (r, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(DomainError::RaggedGrid);
        }
        for (c, ch) in row.chars().enumerate() {
            match ch {
                '#' => continue,
                '.' | 'S' | 'G' | 'F' => {
                    let idx = positions.len() as u16;
                    cell_index[r * width + c] = Some(idx);
                    positions.push((r, c));
                    match ch {
                        'S' => {
                            if start.replace(idx).is_some() {
                                return Err(DomainError::DuplicateCell('S'));
                            }
                        }
                        'G' => {
                            if goal.replace(idx).is_some() {
                                return Err(DomainError::DuplicateCell('G'));
                            }
                        }
                        'F' => flags.push((r, c)),
                        _ => {}
                    }
                }
                other => {
                    return Err(DomainError::UnknownChar { ch: other, line: r + 1, col: c + 1 })
                }
            }
        }
    }

    if flags.len() > 3 {
        return Err(DomainError::TooManyFlags(flags.len()));
    }
    Ok(MazeEnv {
        width,
        height,
        cell_index,
        positions,
        flags,
        start_cell: start.ok_or(DomainError::MissingStart)?,
        goal_cell: goal.ok_or(DomainError::MissingGoal)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TINY: &str = "\
######
#S..G#
#.##F#
#F...#
######";

    #[test]
    fn state_count_is_free_cells_times_flag_sets() {
        let maze = load_maze(TINY).unwrap();
        assert_eq!(maze.num_free_cells(), 10);
        assert_eq!(maze.num_flags(), 2);
        assert_eq!(maze.num_states(), Some(10 * 4));
    }

    #[test]
    fn reaching_goal_without_flags_pays_nothing() {
        let mut maze = load_maze(TINY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = maze.reset(&mut rng);
        // Straight along the top row: S -> . -> . -> G, no flags en route.
        for a in [3u16, 3, 3] {
            let (succ, r) = maze.step(s, ActionId(a), &mut rng);
            assert_eq!(r, 0.0);
            s = succ;
        }
        let (_, flags) = maze.decode(s);
        assert_eq!(flags, 0);
    }

    #[test]
    fn all_flags_pay_in_full_and_clear() {
        let mut maze = load_maze(TINY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = maze.reset(&mut rng);
        // Sweep both flags, then climb to G: reward 2 on arrival.
        let path = [1u16, 1, 3, 3, 3, 0, 0];
        let mut total = 0.0;
        for a in path {
            let (succ, r) = maze.step(s, ActionId(a), &mut rng);
            s = succ;
            total += r;
        }
        assert_eq!(total, 2.0);
        // Flags cleared on arrival at G.
        let (_, flags) = maze.decode(s);
        assert_eq!(flags, 0, "flag set cleared at goal");
    }

    #[test]
    fn three_flags_pay_three_and_clear() {
        let mut maze = load_maze("SFFFG").unwrap();
        assert_eq!(maze.num_states(), Some(5 * 8));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = maze.reset(&mut rng);
        let mut total = 0.0;
        for _ in 0..4 {
            let (succ, r) = maze.step(s, ActionId(3), &mut rng);
            s = succ;
            total += r;
        }
        assert_eq!(total, 3.0);
        let (_, flags) = maze.decode(s);
        assert_eq!(flags, 0);
    }

    #[test]
    fn walls_are_no_ops() {
        let mut maze = load_maze(TINY).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s0 = maze.reset(&mut rng);
        let (s1, r) = maze.step(s0, ActionId(0), &mut rng); // north into the border wall
        assert_eq!(s1, s0);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn malformed_mazes_are_rejected() {
        assert!(matches!(load_maze(""), Err(DomainError::EmptyGrid)));
        assert!(matches!(load_maze("##\n#S#"), Err(DomainError::RaggedGrid)));
        assert!(matches!(load_maze("S.\n.."), Err(DomainError::MissingGoal)));
        assert!(matches!(load_maze("G.\n.."), Err(DomainError::MissingStart)));
        assert!(matches!(load_maze("SG\nSX"), Err(DomainError::DuplicateCell('S') | DomainError::UnknownChar { .. })));
        assert!(matches!(load_maze("SGFF\nFF.."), Err(DomainError::TooManyFlags(4))));
    }

    #[test]
    fn state_count_formula_holds_for_arbitrary_grids() {
        // A second layout exercising the formula with 3 flags.
        let text = "\
########
#S..#..#
#.#.#F.#
#.#....#
#F...#G#
#..#F..#
########";
        let maze = load_maze(text).unwrap();
        let free = text.chars().filter(|c| matches!(c, '.' | 'S' | 'G' | 'F')).count();
        assert_eq!(maze.num_free_cells(), free);
        assert_eq!(maze.num_flags(), 3);
        assert_eq!(maze.num_states(), Some(free * 8));
    }
}
