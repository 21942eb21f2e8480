//! Two-dimensional Sobol sequence (Gray-code construction).

pub struct Sobol2 {
    index: u32,
    state: [u32; 2],
    directions: [[u32; 32]; 2],
}

impl Default for Sobol2 {
    fn default() -> Self {
        Self::new()
    }
}

impl Sobol2 {
    pub fn new() -> Self {
        let mut directions = [[0u32; 32]; 2];
        for i in 0..32 {
            directions[0][i] = 1u32 << (31 - i);
        }
        directions[1][0] = 1u32 << 31;
        for i in 1..32 {
            let prev = directions[1][i - 1];
            directions[1][i] = prev ^ (prev >> 1);
        }
        Self { index: 0, state: [0, 0], directions }
    }

    /// Next point in `[0, 1)^2`; the first point returned is the origin.
    pub fn next_point(&mut self) -> [f64; 2] {
        let out = [self.state[0] as f64 / 4294967296.0, self.state[1] as f64 / 4294967296.0];
        let c = self.index.trailing_ones() as usize;
        for d in 0..2 {
            self.state[d] ^= self.directions[d][c.min(31)];
        }
        self.index = self.index.wrapping_add(1);
        out
    }
}
