//! Binary causal-graph masks.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

/// Largest observation dimension a mask can describe.
pub const MAX_DIM: usize = 32;

/// Which observation dimensions are treated as causes of the action.
///
/// Bit `i` set means an arrow `X_i -> A`. The textual form lists bit 0 first, so the
/// graph over three dimensions that keeps the first two is written `110`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CausalGraph {
    n: u8,
    bits: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("graph dimension {0} exceeds the supported maximum of {MAX_DIM}")]
    TooLarge(usize),
    #[error("invalid character {0:?} in graph string")]
    BadChar(char),
    #[error("bit pattern {bits:#b} does not fit in {n} dimensions")]
    Overflow { n: usize, bits: u32 },
}

impl CausalGraph {
    pub fn from_bits(n: usize, bits: u32) -> Result<Self, GraphError> {
        if n > MAX_DIM {
            return Err(GraphError::TooLarge(n));
        }
        if n < MAX_DIM && bits >> n != 0 {
            return Err(GraphError::Overflow { n, bits });
        }
        Ok(Self { n: n as u8, bits })
    }

    pub fn from_slice(mask: &[bool]) -> Result<Self, GraphError> {
        if mask.len() > MAX_DIM {
            return Err(GraphError::TooLarge(mask.len()));
        }
        let bits = mask
            .iter()
            .enumerate()
            .fold(0u32, |acc, (i, &b)| if b { acc | (1 << i) } else { acc });
        Ok(Self { n: mask.len() as u8, bits })
    }

    pub fn empty(n: usize) -> Self {
        Self::from_bits(n, 0).expect("dimension within MAX_DIM")
    }

    /// The dropout-baseline graph: every dimension is a cause.
    pub fn full(n: usize) -> Self {
        let bits = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        Self::from_bits(n, bits).expect("dimension within MAX_DIM")
    }

    pub fn dim(&self) -> usize {
        self.n as usize
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn get(&self, i: usize) -> bool {
        i < self.dim() && (self.bits >> i) & 1 == 1
    }

    pub fn with(mut self, i: usize, value: bool) -> Self {
        assert!(i < self.dim(), "bit {i} out of range for {} dims", self.dim());
        if value {
            self.bits |= 1 << i;
        } else {
            self.bits &= !(1 << i);
        }
        self
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones() as usize
    }

    /// Mask entries as reals (`0.0` / `1.0`).
    pub fn to_reals(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| if self.get(i) { 1.0 } else { 0.0 }).collect()
    }

    /// The graph obtained by sending bit `i` to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.dim());
        let mut out = Self::empty(self.dim());
        for (i, &j) in perm.iter().enumerate() {
            if self.get(i) {
                out = out.with(j, true);
            }
        }
        out
    }

    /// All `2^n` graphs in ascending bit order.
    pub fn enumerate(n: usize) -> impl Iterator<Item = CausalGraph> {
        assert!(n < MAX_DIM, "enumeration over {n} dimensions is not supported");
        (0u32..(1u32 << n)).map(move |bits| CausalGraph { n: n as u8, bits })
    }

    /// Position of this graph in [`CausalGraph::enumerate`].
    pub fn index(&self) -> usize {
        self.bits as usize
    }
}

impl fmt::Display for CausalGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for CausalGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CausalGraph({self})")
    }
}

impl FromStr for CausalGraph {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mask = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(GraphError::BadChar(other)),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_slice(&mask)
    }
}

impl From<CausalGraph> for String {
    fn from(g: CausalGraph) -> Self {
        alloc::format!("{g}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn text_form_lists_bit_zero_first() {
        let g: CausalGraph = "110".parse().unwrap();
        assert!(g.get(0) && g.get(1) && !g.get(2));
        assert_eq!(g.bits(), 0b011);
        assert_eq!(g.to_string(), "110");
        assert_eq!(g.to_reals(), [1.0, 1.0, 0.0]);
    }

    #[test]
    fn enumerate_covers_every_graph_once() {
        let all: Vec<_> = CausalGraph::enumerate(3).collect();
        assert_eq!(all.len(), 8);
        for (i, g) in all.iter().enumerate() {
            assert_eq!(g.index(), i);
        }
        assert_eq!(CausalGraph::full(3).to_string(), "111");
    }

    #[test]
    fn permutation_moves_bits() {
        let g: CausalGraph = "110".parse().unwrap();
        assert_eq!(g.permuted(&[2, 0, 1]).to_string(), "101");
    }

    #[test]
    fn rejects_bad_input() {
        assert!("102".parse::<CausalGraph>().is_err());
        assert!(CausalGraph::from_bits(2, 0b100).is_err());
        assert!(CausalGraph::from_bits(40, 0).is_err());
    }
}
