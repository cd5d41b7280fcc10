//! Spin-vector states and the neighbourhood structure induced by the partial
//! order on the count of `+1` components.

use rand::Rng;

/// Direction of travel in the partial order: `Up` proposes states with one
/// more `+1` component, `Down` one fewer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub fn flip(self) -> Direction {
        match self {
            Direction::Down => Direction::Up,
            Direction::Up => Direction::Down,
        }
    }

    /// The spin value a flipped coordinate takes when moving in this
    /// direction.
    pub fn target_spin(self) -> i8 {
        match self {
            Direction::Down => -1,
            Direction::Up => 1,
        }
    }

    pub fn sign(self) -> i32 {
        match self {
            Direction::Down => -1,
            Direction::Up => 1,
        }
    }

    pub fn random<R: Rng>(rng: &mut R) -> Direction {
        if rng.gen_bool(0.5) {
            Direction::Up
        } else {
            Direction::Down
        }
    }

    pub const BOTH: [Direction; 2] = [Direction::Down, Direction::Up];
}

/// A length-`n` vector of spins in `{-1,+1}` with cached `+1`/`-1` counts.
///
/// Variable-selection states use the convention covariate-in = `+1`, so the
/// lifted direction `Up` means "add covariates".
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryState {
    bits: Vec<i8>,
    n_plus: usize,
}

impl BinaryState {
    /// Builds a state from raw spins. Panics if any entry is not `-1`/`+1`
    /// or the vector is empty.
    pub fn new(bits: Vec<i8>) -> Self {
        assert!(!bits.is_empty(), "state dimension must be >= 1");
        assert!(
            bits.iter().all(|&b| b == -1 || b == 1),
            "spins must be -1 or +1"
        );
        let n_plus = bits.iter().filter(|&&b| b == 1).count();
        BinaryState { bits, n_plus }
    }

    pub fn all_minus(n: usize) -> Self {
        Self::new(vec![-1; n])
    }

    pub fn all_plus(n: usize) -> Self {
        Self::new(vec![1; n])
    }

    /// Decodes the `n` low bits of `code` (bit set = `+1`), LSB first.
    pub fn from_code(code: u64, n: usize) -> Self {
        Self::new((0..n).map(|i| if code >> i & 1 == 1 { 1 } else { -1 }).collect())
    }

    /// Inverse of [`from_code`](Self::from_code).
    pub fn code(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| if b == 1 { acc | 1 << i } else { acc })
    }

    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        Self::new((0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect())
    }

    pub fn dim(&self) -> usize {
        self.bits.len()
    }

    pub fn spin(&self, i: usize) -> i8 {
        self.bits[i]
    }

    pub fn spins(&self) -> &[i8] {
        &self.bits
    }

    /// `(n_minus, n_plus)` counts.
    pub fn counts(&self) -> (usize, usize) {
        (self.bits.len() - self.n_plus, self.n_plus)
    }

    /// Number of components equal to `-sign(nu)`, i.e. `|N_nu(x)|`.
    pub fn count_opposite(&self, nu: Direction) -> usize {
        match nu {
            Direction::Up => self.bits.len() - self.n_plus,
            Direction::Down => self.n_plus,
        }
    }

    /// Negates coordinate `i` in place, keeping the counts current.
    pub fn flip_in_place(&mut self, i: usize) {
        let b = self.bits[i];
        self.bits[i] = -b;
        if b == 1 {
            self.n_plus -= 1;
        } else {
            self.n_plus += 1;
        }
    }

    /// Returns the neighbour with coordinate `i` negated.
    pub fn flip(&self, i: usize) -> BinaryState {
        let mut y = self.clone();
        y.flip_in_place(i);
        y
    }

    /// Coordinates whose flip moves the state in direction `nu`: for `Up`
    /// the indices holding `-1`, for `Down` those holding `+1`. Empty on a
    /// boundary state.
    pub fn directed_neighborhood(&self, nu: Direction) -> Vec<usize> {
        let want = -nu.target_spin();
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == want)
            .map(|(i, _)| i)
            .collect()
    }

    /// Sum of spins (the magnetisation statistic).
    pub fn spin_sum(&self) -> f64 {
        (2 * self.n_plus) as f64 - self.bits.len() as f64
    }
}

/// The lifted chain's state: a spin vector paired with a direction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LiftedChainState {
    pub state: BinaryState,
    pub direction: Direction,
}

impl LiftedChainState {
    pub fn new(state: BinaryState, direction: Direction) -> Self {
        LiftedChainState { state, direction }
    }
}
